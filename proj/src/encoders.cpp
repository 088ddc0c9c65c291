#include "pathnet/encoders.hpp"

#include <cmath>

#include "pathnet/error.hpp"

namespace pathnet {

Tensor ForwardContext::drop(const Tensor& x) const {
  if (!training || dropout <= 0.0) return x;
  if (rng == nullptr) throw Error("dropout", "training forward pass without a random stream");
  return pathnet::dropout(x, dropout, true, *rng);
}

namespace {

double fan_in_bound(Eigen::Index fan_in) { return std::sqrt(1.0 / static_cast<double>(fan_in)); }

}  // namespace

LstmParams make_lstm(ParamStore& store, const std::string& prefix, Eigen::Index input,
                     Eigen::Index hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.w_ih = store.uniform(prefix + ".w_ih", input, 4 * hidden, fan_in_bound(input), rng);
  p.w_hh = store.uniform(prefix + ".w_hh", hidden, 4 * hidden, fan_in_bound(hidden), rng);
  p.b = store.zeros(prefix + ".b", 1, 4 * hidden);
  return p;
}

GruParams make_gru(ParamStore& store, const std::string& prefix, Eigen::Index input,
                   Eigen::Index hidden, std::mt19937_64& rng) {
  GruParams p;
  p.w_ih = store.uniform(prefix + ".w_ih", input, 3 * hidden, fan_in_bound(input), rng);
  p.w_hh = store.uniform(prefix + ".w_hh", hidden, 3 * hidden, fan_in_bound(hidden), rng);
  p.b_ih = store.zeros(prefix + ".b_ih", 1, 3 * hidden);
  p.b_hh = store.zeros(prefix + ".b_hh", 1, 3 * hidden);
  return p;
}

FflParams make_ffl(ParamStore& store, const std::string& prefix, Eigen::Index input_a,
                   Eigen::Index input_b, Eigen::Index output, std::mt19937_64& rng) {
  FflParams p;
  p.w_a = store.uniform(prefix + ".w_a", input_a, output, fan_in_bound(input_a), rng);
  p.w_b = store.uniform(prefix + ".w_b", input_b, output, fan_in_bound(input_b), rng);
  p.bias = store.zeros(prefix + ".b", 1, output);
  return p;
}

std::pair<Tensor, Tensor> lstm_step_projected(const LstmParams& p, const Tensor& x_proj,
                                              const Tensor& h, const Tensor& c) {
  const Eigen::Index n = p.hidden();
  const Tensor gates = add(add(x_proj, matmul(h, p.w_hh)), p.b);
  const Tensor i = sigmoid(slice_cols(gates, 0, n));
  const Tensor f = sigmoid(slice_cols(gates, n, n));
  const Tensor g = tanh(slice_cols(gates, 2 * n, n));
  const Tensor o = sigmoid(slice_cols(gates, 3 * n, n));
  Tensor c_next = add(mul(f, c), mul(i, g));
  Tensor h_next = mul(o, tanh(c_next));
  return {std::move(h_next), std::move(c_next)};
}

std::pair<Tensor, Tensor> lstm_step(const LstmParams& p, const Tensor& x, const Tensor& h,
                                    const Tensor& c) {
  return lstm_step_projected(p, matmul(x, p.w_ih), h, c);
}

Tensor gru_step(const GruParams& p, const Tensor& x, const Tensor& h) {
  const Eigen::Index n = p.hidden();
  const Tensor xi = add(matmul(x, p.w_ih), p.b_ih);
  const Tensor hh = add(matmul(h, p.w_hh), p.b_hh);
  const Tensor r = sigmoid(add(slice_cols(xi, 0, n), slice_cols(hh, 0, n)));
  const Tensor z = sigmoid(add(slice_cols(xi, n, n), slice_cols(hh, n, n)));
  const Tensor cand = tanh(add(slice_cols(xi, 2 * n, n), mul(r, slice_cols(hh, 2 * n, n))));
  // (1 - z) * n + z * h  ==  n + z * (h - n)
  return add(cand, mul(z, sub(h, cand)));
}

Tensor lstm_sequence(const LstmParams& p, const Tensor& x, bool reverse) {
  if (x.rows() == 0) throw Error("encoder", "cannot encode an empty sequence");
  const Eigen::Index len = x.rows();
  const Tensor projected = matmul(x, p.w_ih);
  Tensor h = Tensor::zeros(1, p.hidden());
  Tensor c = Tensor::zeros(1, p.hidden());
  std::vector<Tensor> states(static_cast<std::size_t>(len));
  for (Eigen::Index step = 0; step < len; ++step) {
    const Eigen::Index t = reverse ? len - 1 - step : step;
    std::tie(h, c) = lstm_step_projected(p, row(projected, t), h, c);
    states[static_cast<std::size_t>(t)] = h;
  }
  return concat_rows(states);
}

Tensor encode_sequence(const Tensor& embedded, const LstmParams& forward,
                       const LstmParams& backward) {
  return concat_cols({lstm_sequence(forward, embedded, false),
                      lstm_sequence(backward, embedded, true)});
}

Tensor lstm_final_state(const LstmParams& p, const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw Error("composition", "recurrent composition needs at least one input");
  Tensor h = Tensor::zeros(1, p.hidden());
  Tensor c = Tensor::zeros(1, p.hidden());
  for (const auto& x : inputs) std::tie(h, c) = lstm_step(p, x, h, c);
  return h;
}

Tensor gru_final_state(const GruParams& p, const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw Error("composition", "recurrent composition needs at least one input");
  Tensor h = Tensor::zeros(1, p.hidden());
  for (const auto& x : inputs) h = gru_step(p, x, h);
  return h;
}

Tensor boundary_vector(const Tensor& encoded, const std::vector<TokenSpan>& spans) {
  if (spans.empty()) throw Error("encoder", "boundary vector of an entity with no mentions");
  std::vector<Tensor> rows;
  rows.reserve(spans.size());
  for (const auto& [first, last] : spans) {
    if (first > last || static_cast<Eigen::Index>(last) >= encoded.rows())
      throw Error("encoder", "mention span [" + std::to_string(first) + ", " +
                                 std::to_string(last) + "] outside a sequence of length " +
                                 std::to_string(encoded.rows()));
    rows.push_back(concat_cols({row(encoded, static_cast<Eigen::Index>(first)),
                                row(encoded, static_cast<Eigen::Index>(last))}));
  }
  if (rows.size() == 1) return rows.front();
  return mean_rows(concat_rows(rows));
}

Tensor attention_scores(const Tensor& passage, const Tensor& question) {
  if (passage.cols() != question.cols())
    throw ShapeError("attention: passage width " + std::to_string(passage.cols()) +
                     " differs from question width " + std::to_string(question.cols()));
  return scale(matmul(passage, transpose(question)),
               1.0 / std::sqrt(static_cast<double>(passage.cols())));
}

Tensor attention_matrix(const Tensor& passage, const Tensor& question) {
  return row_softmax(attention_scores(passage, question));
}

QuestionWeighted question_weighted_passage(const Tensor& scores, const Tensor& question,
                                           const Tensor& passage) {
  QuestionWeighted out;
  const Tensor a = row_softmax(scores);
  out.sq1 = matmul(a, question);
  out.qp = matmul(transpose(col_softmax(scores)), passage);
  out.sq2 = matmul(a, out.qp);
  return out;
}

Tensor attentive_pool(const Tensor& x, const Tensor& w) {
  if (x.rows() == 0) throw Error("encoder", "attentive pooling over zero rows");
  const Tensor weights = col_softmax(matmul(x, transpose(w)));
  return matmul(transpose(weights), x);
}

Tensor aggregate_question(const Tensor& question, const Tensor& w_q) {
  if (question.rows() == 0) throw Error("encoder", "empty question encoding");
  return matmul(concat_cols({row(question, 0), row(question, question.rows() - 1)}), w_q);
}

Tensor ffl(const FflParams& p, const Tensor& a, const Tensor& b) {
  return tanh(add(add(matmul(a, p.w_a), matmul(b, p.w_b)), p.bias));
}

}  // namespace pathnet
