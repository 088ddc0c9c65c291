#include "pathnet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pathnet/error.hpp"

namespace pathnet {

using nlohmann::json;

Tensor ParamStore::add(const std::string& name, Matrix value) {
  if (contains(name)) throw Error("params", "duplicate parameter name '" + name + "'");
  index_[name] = tensors_.size();
  names_.push_back(name);
  tensors_.push_back(Tensor::parameter(std::move(value)));
  return tensors_.back();
}

Tensor ParamStore::uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                           double bound, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m.data()[i] = -bound + 2.0 * bound * u;
  }
  return add(name, std::move(m));
}

Tensor ParamStore::zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return add(name, Matrix::Zero(rows, cols));
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("params", "unknown parameter '" + name + "'");
  return tensors_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

std::vector<Matrix> ParamStore::values() const {
  std::vector<Matrix> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.push_back(t.value());
  return out;
}

void ParamStore::set_values(const std::vector<Matrix>& values) {
  if (values.size() != tensors_.size()) throw Error("params", "snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) tensors_[i].mutable_value() = values[i];
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.first_moment.size() != params.size())
    throw Error("optimizer", "Adam state does not match the parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) continue;
    if (!params[i].grad().allFinite())
      throw Error("optimizer", "non-finite gradient in parameter #" + std::to_string(i));
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (state.first_moment[i].rows() != p.rows() || state.first_moment[i].cols() != p.cols())
      throw ShapeError("adam_step: moment shape does not match parameter #" + std::to_string(i));
    const Matrix g = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    p.mutable_value().array() -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
  }
}

double clip_global_norm(std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.has_grad()) sq += p.grad().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (p.has_grad()) p.mutable_grad() *= factor;
    }
  }
  return norm;
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, ParamStore& params,
                                  double eps, std::size_t max_coords_per_param,
                                  std::uint64_t seed, bool richardson) {
  params.zero_grad();
  backward(loss_fn());
  std::vector<Matrix> analytic;
  for (const auto& t : params.tensors()) analytic.push_back(t.grad());
  params.zero_grad();

  auto eval = [&]() {
    NoGradGuard guard;
    return loss_fn().item();
  };

  GradCheckReport report;
  std::mt19937_64 rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& t = params.tensors()[pi];
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(t.size()));
    std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    if (max_coords_per_param > 0 && coords.size() > max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (Eigen::Index c : coords) {
      double& x = t.mutable_value().data()[c];
      const double saved = x;
      auto central = [&](double h) {
        x = saved + h;
        const double f_plus = eval();
        x = saved - h;
        const double f_minus = eval();
        x = saved;
        return (f_plus - f_minus) / (2.0 * h);
      };
      const double numeric =
          richardson ? (4.0 * central(eps / 2.0) - central(eps)) / 3.0 : central(eps);
      const double exact = analytic[pi].data()[c];
      const double err =
          std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
      ++report.coordinates;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = params.names()[pi];
        report.worst_index = c;
        report.worst_analytic = exact;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("io", "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const json& meta) {
  json p = json::object();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params.tensors()[i];
    std::vector<double> values(t.value().data(), t.value().data() + t.size());
    p[params.names()[i]] = {{"shape", {t.rows(), t.cols()}}, {"values", values}};
  }
  json doc = {{"format", "pathnet-checkpoint"}, {"version", 1}, {"meta", meta}, {"params", p}};
  write_file_atomic(path, doc.dump());
}

json read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open checkpoint '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error("checkpoint", "'" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "pathnet-checkpoint" || doc.value("version", 0) != 1)
    throw Error("checkpoint", "'" + path.string() + "' is not a version 1 pathnet checkpoint");
  return doc;
}

void load_params(const json& checkpoint, ParamStore& params) {
  const auto& p = checkpoint.at("params");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.names()[i];
    if (!p.contains(name)) throw Error("checkpoint", "missing parameter '" + name + "'");
    const auto& entry = p.at(name);
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    auto& t = params.tensors()[i];
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
      throw Error("checkpoint", "shape mismatch for parameter '" + name + "'");
    const auto values = entry.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != t.size())
      throw Error("checkpoint", "value count mismatch for parameter '" + name + "'");
    std::copy(values.begin(), values.end(), t.mutable_value().data());
  }
}

}  // namespace pathnet
