#include <cmath>
#include <random>

#include "../oracles/oracles.hpp"
#include "doctest.h"
#include "pathnet/encoders.hpp"

using namespace pathnet;
using oracle::Mat;
using oracle::Vec;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vec row_of(const Matrix& m, Eigen::Index i = 0) {
  return Vec(m.row(i).data(), m.row(i).data() + m.cols());
}

void check_close(const Matrix& a, const Matrix& b, double tol = 1e-12) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  CHECK((a - b).cwiseAbs().maxCoeff() < tol);
}

}  // namespace

TEST_CASE("lstm_step matches a hand-unrolled cell") {
  std::mt19937_64 rng(1);
  ParamStore store;
  const auto p = make_lstm(store, "l", 3, 2, rng);
  store.at("l.b").node()->value = random_matrix(rng, 1, 8);
  const Mat w_ih = oracle::to_mat(p.w_ih.value()), w_hh = oracle::to_mat(p.w_hh.value());
  const Vec b = row_of(p.b.value());

  // Three steps of a 2-unit cell.
  Vec h(2, 0.0), c(2, 0.0);
  std::vector<Tensor> inputs;
  for (int t = 0; t < 3; ++t) {
    const Matrix x = random_matrix(rng, 1, 3);
    inputs.push_back(Tensor::constant(x));
    std::tie(h, c) = oracle::lstm_step(w_ih, w_hh, b, row_of(x), h, c);
  }
  const Matrix got = lstm_final_state(p, inputs).value();
  for (int j = 0; j < 2; ++j) CHECK(std::abs(got(0, j) - h[j]) < 1e-12);
}

TEST_CASE("gru over one input is one gated step from zero") {
  std::mt19937_64 rng(2);
  ParamStore store;
  const auto p = make_gru(store, "g", 4, 3, rng);
  store.at("g.b_ih").node()->value = random_matrix(rng, 1, 9);
  store.at("g.b_hh").node()->value = random_matrix(rng, 1, 9);
  const Matrix x = random_matrix(rng, 1, 4);
  const Vec want = oracle::gru_step(oracle::to_mat(p.w_ih.value()), oracle::to_mat(p.w_hh.value()),
                                    row_of(p.b_ih.value()), row_of(p.b_hh.value()), row_of(x),
                                    Vec(3, 0.0));
  const Matrix got = gru_final_state(p, {Tensor::constant(x)}).value();
  for (int j = 0; j < 3; ++j) CHECK(std::abs(got(0, j) - want[j]) < 1e-12);
}

TEST_CASE("encode_sequence shapes and fixed points") {
  std::mt19937_64 rng(3);
  ParamStore store;
  const auto fwd = make_lstm(store, "f", 5, 3, rng);
  const auto bwd = make_lstm(store, "b", 5, 3, rng);
  CHECK(encode_sequence(Tensor::constant(random_matrix(rng, 1, 5)), fwd, bwd).shape() ==
        std::array<Eigen::Index, 2>{1, 6});

  ParamStore zero_store;
  const auto zf = make_lstm(zero_store, "f", 5, 3, rng);
  const auto zb = make_lstm(zero_store, "b", 5, 3, rng);
  for (auto& t : zero_store.tensors()) t.mutable_value().setZero();
  CHECK(encode_sequence(Tensor::constant(random_matrix(rng, 4, 5)), zf, zb).value().isZero());
}

TEST_CASE("encode_sequence property: reversing the input swaps and reverses the halves") {
  std::mt19937_64 rng(4);
  ParamStore store;
  const auto fwd = make_lstm(store, "f", 4, 3, rng);
  const auto bwd = make_lstm(store, "b", 4, 3, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng() % 6);
    const Matrix x = random_matrix(rng, T, 4);
    const Matrix rx = x.colwise().reverse();
    const Matrix a = encode_sequence(Tensor::constant(x), fwd, bwd).value();
    // Swapping the parameter roles makes the reversed run mirror the original.
    const Matrix b = encode_sequence(Tensor::constant(rx), bwd, fwd).value();
    for (Eigen::Index t = 0; t < T; ++t) {
      CHECK((a.row(t).head(3) - b.row(T - 1 - t).tail(3)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((a.row(t).tail(3) - b.row(T - 1 - t).head(3)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("encode_sequence property: forward states ignore what comes later") {
  std::mt19937_64 rng(5);
  ParamStore store;
  const auto fwd = make_lstm(store, "f", 4, 3, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_matrix(rng, 5, 4);
    Matrix y = x;
    y.bottomRows(2) = random_matrix(rng, 2, 4);
    const Matrix a = lstm_sequence(fwd, Tensor::constant(x), false).value();
    const Matrix b = lstm_sequence(fwd, Tensor::constant(y), false).value();
    check_close(a.topRows(3), b.topRows(3), 0.0 + 1e-300);
  }
}

TEST_CASE("boundary_vector") {
  const Tensor enc = Tensor::constant(mat({{1, 2}, {3, 4}, {5, 6}}));
  check_close(boundary_vector(enc, {{1, 1}}).value(), mat({{3, 4, 3, 4}}));
  check_close(boundary_vector(enc, {{0, 2}, {0, 2}}).value(), boundary_vector(enc, {{0, 2}}).value(),
              0.0 + 1e-300);
  // mean of (1,2,5,6) and (3,4,3,4)
  check_close(boundary_vector(enc, {{0, 2}, {1, 1}}).value(), mat({{2, 3, 4, 5}}));
}

TEST_CASE("attention matrix") {
  const Matrix S = mat({{1, 0, 2}, {0, 1, -1}});
  const Matrix Q = mat({{1, 1, 0}, {0, 2, 1}, {-1, 0, 0}});
  const Matrix A = attention_matrix(Tensor::constant(S), Tensor::constant(Q)).value();
  const double k = 1.0 / std::sqrt(3.0);
  for (int t = 0; t < 2; ++t) {
    Vec raw;
    for (int u = 0; u < 3; ++u) raw.push_back(S.row(t).dot(Q.row(u)) * k);
    const Vec want = oracle::softmax(raw);
    for (int u = 0; u < 3; ++u) CHECK(std::abs(A(t, u) - want[u]) < 1e-12);
    CHECK(std::abs(A.row(t).sum() - 1.0) < 1e-12);
  }
  const Matrix same = mat({{1, 2}, {1, 2}});
  const Matrix U = attention_matrix(Tensor::constant(same), Tensor::constant(same)).value();
  CHECK(std::abs(U(0, 0) - 0.5) < 1e-12);
}

TEST_CASE("question_weighted_passage on a 2x2 case") {
  const Matrix S = mat({{1, 0}, {0.5, -1}});
  const Matrix Q = mat({{0, 1}, {2, 1}});
  const Tensor scores = attention_scores(Tensor::constant(S), Tensor::constant(Q));
  const auto out = question_weighted_passage(scores, Tensor::constant(Q), Tensor::constant(S));

  // Hand products from the raw scores.
  Matrix raw(2, 2);
  for (int t = 0; t < 2; ++t)
    for (int u = 0; u < 2; ++u) raw(t, u) = S.row(t).dot(Q.row(u)) / std::sqrt(2.0);
  Matrix row_sm(2, 2), col_sm(2, 2);
  for (int t = 0; t < 2; ++t) {
    const Vec s = oracle::softmax({raw(t, 0), raw(t, 1)});
    row_sm(t, 0) = s[0];
    row_sm(t, 1) = s[1];
  }
  for (int u = 0; u < 2; ++u) {
    const Vec s = oracle::softmax({raw(0, u), raw(1, u)});
    col_sm(0, u) = s[0];
    col_sm(1, u) = s[1];
  }
  const Matrix sq1 = row_sm * Q;
  const Matrix qp = col_sm.transpose() * S;
  const Matrix sq2 = row_sm * qp;
  check_close(out.sq1.value(), sq1);
  check_close(out.qp.value(), qp);
  check_close(out.sq2.value(), sq2);

  // One question token: every row of A Q is that token.
  const Matrix q1 = mat({{0.3, -0.7}});
  const auto single = question_weighted_passage(
      attention_scores(Tensor::constant(S), Tensor::constant(q1)), Tensor::constant(q1),
      Tensor::constant(S));
  for (int t = 0; t < 2; ++t) check_close(single.sq1.value().row(t), q1);
}

TEST_CASE("attentive_pool") {
  const Tensor w = Tensor::constant(mat({{1, -1}}));
  check_close(attentive_pool(Tensor::constant(mat({{0.2, 0.4}})), w).value(), mat({{0.2, 0.4}}));
  check_close(attentive_pool(Tensor::constant(mat({{1, 2}, {1, 2}})), w).value(), mat({{1, 2}}));
  const Matrix X = mat({{1, 0}, {0, 1}, {2, 2}});
  const Vec a = oracle::softmax({1.0, -1.0, 0.0});
  Matrix want = Matrix::Zero(1, 2);
  for (int i = 0; i < 3; ++i) want += a[i] * X.row(i);
  check_close(attentive_pool(Tensor::constant(X), w).value(), want);
}

TEST_CASE("aggregate_question") {
  const Matrix Q = mat({{1, 2}, {3, 4}});
  Matrix Wq = Matrix::Zero(4, 2);
  Wq(0, 0) = 1;  // first state, unit 0
  Wq(3, 1) = 1;  // last state, unit 1
  check_close(aggregate_question(Tensor::constant(Q), Tensor::constant(Wq)).value(), mat({{1, 4}}));
  check_close(aggregate_question(Tensor::constant(mat({{5, 6}})), Tensor::constant(Wq)).value(),
              mat({{5, 6}}));
  CHECK(aggregate_question(Tensor::constant(Q), Tensor::zeros(4, 2)).value().isZero());
}

TEST_CASE("ffl") {
  FflParams p{Tensor::constant(mat({{1, 0}, {0, 2}})), Tensor::constant(mat({{0, 1}, {1, 0}})),
              Tensor::constant(mat({{0.1, -0.2}}))};
  const Matrix got = ffl(p, Tensor::constant(mat({{0.5, -1}})), Tensor::constant(mat({{2, 3}}))).value();
  check_close(got, mat({{std::tanh(0.5 + 3 + 0.1), std::tanh(-2 + 2 - 0.2)}}));
  FflParams zero{Tensor::zeros(2, 2), Tensor::zeros(2, 2), Tensor::zeros(1, 2)};
  CHECK(ffl(zero, Tensor::zeros(1, 2), Tensor::zeros(1, 2)).value().isZero());
}

TEST_CASE("encoder pipeline gradient check") {
  std::mt19937_64 rng(8);
  ParamStore store;
  const auto fwd = make_lstm(store, "f", 3, 2, rng);
  const auto bwd = make_lstm(store, "b", 3, 2, rng);
  const Tensor w = store.uniform("pool", 1, 8, 0.5, rng);
  const Tensor wq = store.uniform("wq", 8, 4, 0.5, rng);
  const Tensor xp = Tensor::constant(random_matrix(rng, 4, 3));
  const Tensor xq = Tensor::constant(random_matrix(rng, 3, 3));
  auto loss = [&] {
    const Tensor S = encode_sequence(xp, fwd, bwd);
    const Tensor Q = encode_sequence(xq, fwd, bwd);
    const auto qw = question_weighted_passage(attention_scores(S, Q), Q, S);
    const Tensor pooled = attentive_pool(concat_cols({qw.sq1, qw.sq2}), w);
    return add(sum(mul(pooled, pooled)), sum(aggregate_question(Q, wq)));
  };
  CHECK(finite_diff_check(loss, store, 1e-5).max_rel_error < 1e-4);
}
