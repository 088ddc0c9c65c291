#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pathnet/autograd.hpp"
#include "pathnet/optim.hpp"

namespace pathnet {

/// Training-time switches threaded through a forward pass. With
/// `training == false` (or p == 0) dropout is the identity and `rng` is
/// never touched.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Tensor drop(const Tensor& x) const;
};

/// Weights of one LSTM direction. Gate blocks are laid out [i | f | g | o]
/// along the columns; inputs are rows: gates = x W_ih + h W_hh + b.
struct LstmParams {
  Tensor w_ih;  // D x 4h
  Tensor w_hh;  // h x 4h
  Tensor b;     // 1 x 4h
  Eigen::Index hidden() const { return w_hh.rows(); }
};

/// GRU cell with gate blocks [r | z | n]:
///   r = sigmoid(x W_ir + b_ir + h W_hr + b_hr), z likewise,
///   n = tanh(x W_in + b_in + r * (h W_hn + b_hn)),
///   h' = (1 - z) * n + z * h.
struct GruParams {
  Tensor w_ih;  // D x 3h
  Tensor w_hh;  // h x 3h
  Tensor b_ih;  // 1 x 3h
  Tensor b_hh;  // 1 x 3h
  Eigen::Index hidden() const { return w_hh.rows(); }
};

/// tanh(a W_a + b W_b + bias).
struct FflParams {
  Tensor w_a;
  Tensor w_b;
  Tensor bias;
};

LstmParams make_lstm(ParamStore& store, const std::string& prefix, Eigen::Index input,
                     Eigen::Index hidden, std::mt19937_64& rng);
GruParams make_gru(ParamStore& store, const std::string& prefix, Eigen::Index input,
                   Eigen::Index hidden, std::mt19937_64& rng);
FflParams make_ffl(ParamStore& store, const std::string& prefix, Eigen::Index input_a,
                   Eigen::Index input_b, Eigen::Index output, std::mt19937_64& rng);

/// One LSTM step on a 1 x D input row; returns (h, c).
std::pair<Tensor, Tensor> lstm_step(const LstmParams& p, const Tensor& x, const Tensor& h,
                                    const Tensor& c);
/// Same step with x W_ih already computed (1 x 4h).
std::pair<Tensor, Tensor> lstm_step_projected(const LstmParams& p, const Tensor& x_proj,
                                              const Tensor& h, const Tensor& c);
Tensor gru_step(const GruParams& p, const Tensor& x, const Tensor& h);

/// Runs one LSTM direction over the rows of `x`; returns the T x h states in
/// input order (for `reverse`, row t still holds the state at token t).
Tensor lstm_sequence(const LstmParams& p, const Tensor& x, bool reverse);

/// Bidirectional encoding of T x D inputs into T x 2h states, row t being
/// forward state t followed by backward state t.
Tensor encode_sequence(const Tensor& embedded, const LstmParams& forward,
                       const LstmParams& backward);

/// Final hidden state of an LSTM / GRU started from zeros and fed the rows
/// of `inputs` in order.
Tensor lstm_final_state(const LstmParams& p, const std::vector<Tensor>& inputs);
Tensor gru_final_state(const GruParams& p, const std::vector<Tensor>& inputs);

/// Inclusive token span [first, last].
using TokenSpan = std::pair<std::size_t, std::size_t>;

/// Mean over spans of concat(row[first], row[last]): 1 x 2H.
Tensor boundary_vector(const Tensor& encoded, const std::vector<TokenSpan>& spans);

/// S Q^T / sqrt(H): T x U similarity before normalization.
Tensor attention_scores(const Tensor& passage, const Tensor& question);
/// Row-softmax of attention_scores: each passage token's distribution over
/// question tokens.
Tensor attention_matrix(const Tensor& passage, const Tensor& question);

struct QuestionWeighted {
  Tensor sq1;  // T x H: A Q
  Tensor qp;   // U x H: column-normalized A, transposed, times S
  Tensor sq2;  // T x H: A Qp
};

/// The three question/passage products, from raw attention scores.
QuestionWeighted question_weighted_passage(const Tensor& scores, const Tensor& question,
                                           const Tensor& passage);

/// softmax(X w^T) over rows, then the weighted sum of rows: 1 x D.
Tensor attentive_pool(const Tensor& x, const Tensor& w);

/// (q_0 || q_{U-1}) W_q.
Tensor aggregate_question(const Tensor& question, const Tensor& w_q);

Tensor ffl(const FflParams& p, const Tensor& a, const Tensor& b);

}  // namespace pathnet
