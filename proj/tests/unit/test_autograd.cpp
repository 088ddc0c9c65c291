#include <cmath>
#include <filesystem>
#include <random>

#include "../oracles/oracles.hpp"
#include "doctest.h"
#include "pathnet/autograd.hpp"
#include "pathnet/error.hpp"
#include "pathnet/optim.hpp"

using namespace pathnet;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Runs a scalar-valued function of registered parameters through the
// finite-difference checker.
double check_op(ParamStore& store, const std::function<Tensor()>& f) {
  return finite_diff_check(f, store, 1e-5).max_rel_error;
}

}  // namespace

TEST_CASE("forward shapes and simple values") {
  std::mt19937_64 rng(1);
  const Tensor a = Tensor::constant(random_matrix(rng, 2, 3));
  const Tensor b = Tensor::constant(random_matrix(rng, 3, 4));
  CHECK(matmul(a, b).shape() == std::array<Eigen::Index, 2>{2, 4});
  CHECK(transpose(a).shape() == std::array<Eigen::Index, 2>{3, 2});
  CHECK_THROWS_AS(matmul(a, a), ShapeError);

  const Tensor equal = Tensor::constant(Matrix::Constant(1, 5, 3.0));
  const Matrix s = row_softmax(equal).value();
  for (Eigen::Index j = 0; j < 5; ++j) CHECK(s(0, j) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(tanh(Tensor::zeros(1, 1)).item() == 0.0);
  CHECK(concat_cols({a, a}).cols() == 6);
  CHECK(concat_rows({a, a}).rows() == 4);
  CHECK(mean_rows(a).rows() == 1);
}

TEST_CASE("softmax property: rows sum to one, entries positive, shift invariant") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix m = random_matrix(rng, 1 + rng() % 5, 1 + rng() % 7, 30.0);
    const Matrix r = row_softmax(Tensor::constant(m)).value();
    const Matrix shifted = row_softmax(Tensor::constant((m.array() + 17.5).matrix())).value();
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      CHECK(std::abs(r.row(i).sum() - 1.0) < 1e-12);
      for (Eigen::Index j = 0; j < r.cols(); ++j) {
        CHECK(r(i, j) > 0.0);
        CHECK(std::abs(r(i, j) - shifted(i, j)) < 1e-12);
      }
    }
    const Matrix c = col_softmax(Tensor::constant(m)).value();
    for (Eigen::Index j = 0; j < c.cols(); ++j) CHECK(std::abs(c.col(j).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("backward on simple functions") {
  Matrix xv(1, 2);
  xv << 1.0, 2.0;
  const Tensor x = Tensor::parameter(xv);
  const Tensor unused = Tensor::parameter(Matrix::Ones(2, 2));
  backward(sum(mul(x, x)));
  CHECK(x.grad()(0, 0) == 2.0);
  CHECK(x.grad()(0, 1) == 4.0);
  CHECK(unused.grad().isZero());
  CHECK_THROWS_AS(backward(x), ShapeError);
}

TEST_CASE("NoGradGuard records no graph") {
  const Tensor x = Tensor::parameter(Matrix::Ones(1, 1));
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    const Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
}

TEST_CASE("finite differences: quadratic loss is exact") {
  std::mt19937_64 rng(3);
  ParamStore store;
  const Tensor w = store.add("w", random_matrix(rng, 3, 2));
  const auto r = finite_diff_check([&] { return sum(mul(w, w)); }, store, 1e-5);
  CHECK(r.max_rel_error < 1e-9);
  CHECK(r.coordinates == 6);
}

TEST_CASE("finite differences: every op's gradient") {
  std::mt19937_64 rng(4);
  ParamStore store;
  const Tensor a = store.add("a", random_matrix(rng, 3, 4));
  const Tensor b = store.add("b", random_matrix(rng, 4, 3));
  const Tensor r = store.add("r", random_matrix(rng, 1, 4));
  const Tensor c = Tensor::constant(random_matrix(rng, 3, 4));
  // Weighted sum keeps every output coordinate's gradient distinct.
  const Tensor weights = Tensor::constant(random_matrix(rng, 3, 4));
  const Tensor w33 = Tensor::constant(random_matrix(rng, 3, 3));
  auto wsum = [](const Tensor& x, const Tensor& wt) { return sum(mul(x, wt)); };

  CHECK(check_op(store, [&] { return wsum(matmul(a, b), w33); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(transpose(b), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(tanh(a), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(sigmoid(a), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(row_softmax(a), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(col_softmax(a), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(add(a, c), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(sub(c, mul(a, a)), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(add_row(a, r), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return wsum(scale(a, -2.5), weights); }) < 1e-6);
  CHECK(check_op(store, [&] { return sum(mul(mean_rows(a), r)); }) < 1e-6);
  CHECK(check_op(store, [&] { return dot(r, row(a, 1)); }) < 1e-6);
  CHECK(check_op(store, [&] { return sum(mul(slice_rows(a, 1, 2), slice_rows(c, 0, 2))); }) < 1e-6);
  CHECK(check_op(store, [&] { return sum(mul(slice_cols(a, 1, 2), slice_cols(c, 2, 2))); }) < 1e-6);
  CHECK(check_op(store, [&] {
          return wsum(concat_rows({row(a, 0), r, row(a, 2)}), weights);
        }) < 1e-6);
  CHECK(check_op(store, [&] { return sum(mul(concat_cols({a, transpose(b)}), concat_cols({c, c}))); }) <
        1e-6);
  CHECK(check_op(store, [&] { return logsumexp(gather(r, {0, 2, 3})); }) < 1e-6);
  CHECK(check_op(store, [&] { return logsumexp(gather(r, {1, 1, 0})); }) < 1e-6);
}

TEST_CASE("logsumexp and gather values") {
  Matrix v(1, 3);
  v << 1.0, 2.0, 3.0;
  const Tensor t = Tensor::constant(v);
  CHECK(logsumexp(t).item() == doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
  CHECK(gather(t, {2, 0}).value()(0, 0) == 3.0);
  Matrix big(1, 2);
  big << 1000.0, 1000.0;
  CHECK(logsumexp(Tensor::constant(big)).item() == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<Tensor> params{Tensor::parameter(Matrix::Ones(2, 2))};
    params[0].mutable_grad().setZero();
    AdamState state;
    adam_step(params, state);
    CHECK(params[0].value() == Matrix::Ones(2, 2));
    CHECK(state.step == 1);
    adam_step(params, state);
    CHECK(state.step == 2);
  }
  SUBCASE("constant gradient moves by lr * sign(g) per step") {
    Matrix g(1, 3);
    g << 0.5, -2.0, 1e-3;
    std::vector<Tensor> params{Tensor::parameter(Matrix::Zero(1, 3))};
    AdamState state;
    const double lr = 0.01;
    Matrix before = params[0].value();
    for (int i = 0; i < 200; ++i) {
      before = params[0].value();
      params[0].mutable_grad() = g;
      adam_step(params, state, lr);
    }
    const Matrix step = params[0].value() - before;
    for (Eigen::Index j = 0; j < 3; ++j)
      CHECK(step(0, j) == doctest::Approx(-lr * (g(0, j) > 0 ? 1.0 : -1.0)).epsilon(1e-4));
  }
  SUBCASE("non-finite gradient is rejected") {
    std::vector<Tensor> params{Tensor::parameter(Matrix::Ones(1, 1))};
    params[0].mutable_grad()(0, 0) = std::nan("");
    AdamState state;
    CHECK_THROWS_AS(adam_step(params, state), Error);
  }
}

TEST_CASE("clip_global_norm") {
  auto make = [](double a, double b) {
    Matrix g(1, 2);
    g << a, b;
    std::vector<Tensor> ps{Tensor::parameter(Matrix::Zero(1, 2))};
    ps[0].mutable_grad() = g;
    return ps;
  };
  auto big = make(6.0, 8.0);  // norm 10
  CHECK(clip_global_norm(big, 5.0) == doctest::Approx(10.0));
  CHECK(big[0].grad()(0, 0) == doctest::Approx(3.0));
  CHECK(big[0].grad()(0, 1) == doctest::Approx(4.0));
  auto small = make(0.0, 3.0);
  clip_global_norm(small, 5.0);
  CHECK(small[0].grad()(0, 1) == 3.0);
  auto zero = make(0.0, 0.0);
  clip_global_norm(zero, 5.0);
  CHECK(zero[0].grad().isZero());
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(6);
  const Tensor x = Tensor::constant(Matrix::Ones(400, 250));
  CHECK(dropout(x, 0.0, true, rng).value() == x.value());
  CHECK(dropout(x, 0.5, false, rng).value() == x.value());
  const Matrix d = dropout(x, 0.25, true, rng).value();
  const double dropped = static_cast<double>((d.array() == 0.0).count()) / static_cast<double>(d.size());
  CHECK(std::abs(dropped - 0.25) < 0.02);
  // Inverted scaling keeps the expectation.
  CHECK(d.maxCoeff() == doctest::Approx(1.0 / 0.75));
}

TEST_CASE("ParamStore and checkpoints") {
  std::mt19937_64 rng(7);
  ParamStore store;
  store.uniform("layer.w", 3, 4, 0.5, rng);
  store.zeros("layer.b", 1, 4);
  CHECK(store.scalar_count() == 16);
  CHECK_THROWS_AS(store.zeros("layer.b", 1, 4), Error);
  for (double v : std::vector<double>(store.at("layer.w").value().data(),
                                      store.at("layer.w").value().data() + 12))
    CHECK(std::abs(v) <= 0.5);

  const auto path = std::filesystem::temp_directory_path() / "pathnet_test_ckpt.json";
  save_checkpoint(path, store, {{"note", "x"}});
  ParamStore other;
  other.zeros("layer.w", 3, 4);
  other.zeros("layer.b", 1, 4);
  const auto doc = read_checkpoint(path);
  CHECK(doc.at("meta").at("note") == "x");
  load_params(doc, other);
  CHECK(other.at("layer.w").value() == store.at("layer.w").value());

  ParamStore wrong;
  wrong.zeros("layer.w", 4, 3);
  wrong.zeros("layer.b", 1, 4);
  CHECK_THROWS_AS(load_params(doc, wrong), Error);
  CHECK_THROWS_AS(read_checkpoint("/nonexistent/ckpt.json"), Error);
}
