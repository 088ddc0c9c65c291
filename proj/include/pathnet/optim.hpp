#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathnet/autograd.hpp"

namespace pathnet {

/// Ordered collection of named trainable tensors. The same tensor may be
/// registered under one name only; tied weights are one entry referenced
/// from several places.
class ParamStore {
 public:
  /// Registers a parameter initialized uniformly in [-bound, bound].
  Tensor uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound,
                 std::mt19937_64& rng);
  Tensor zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Tensor add(const std::string& name, Matrix value);

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  /// Deep copy of all values, for snapshots.
  std::vector<Matrix> values() const;
  void set_values(const std::vector<Matrix>& values);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One Adam update with bias correction, reading each parameter's gradient.
/// Throws if any gradient holds a NaN or infinity.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr = 0.001);

/// Rescales all gradients by max_norm / norm when their global L2 norm
/// exceeds max_norm. Returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& params, double max_norm = 5.0);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_param;
  Eigen::Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients with central differences
/// D(eps) = (f(t+eps) - f(t-eps)) / 2 eps. The relative error per coordinate
/// is |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|). When `max_coords_per_param`
/// is nonzero, that many coordinates per tensor are sampled with `seed`.
///
/// With `richardson`, g_fd = (4 D(eps/2) - D(eps)) / 3, which cancels the
/// eps^2 truncation term. That allows a larger eps, whose roundoff floor
/// (about 1e-16 |f| / eps) stays well below the 1e-12 absolute error the
/// 1e-8 denominator floor tolerates for near-zero gradients.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, ParamStore& params,
                                  double eps = 1e-5, std::size_t max_coords_per_param = 0,
                                  std::uint64_t seed = 0, bool richardson = false);

/// Checkpoint file: JSON {"format": "pathnet-checkpoint", "version": 1,
/// "meta": {...}, "params": {name: {"shape": [r, c], "values": [...]}}}.
/// Writes go to a temporary file that is renamed into place.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& meta);
nlohmann::json read_checkpoint(const std::filesystem::path& path);
/// Copies values from a checkpoint document into `params`; every parameter
/// must be present with a matching shape.
void load_params(const nlohmann::json& checkpoint, ParamStore& params);

/// Atomic text write (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace pathnet
