// Copyright 2026 The GaitForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Gaussian-process regression with an ARD squared-exponential kernel.
//
// Inputs are mapped to the unit cube through fixed bounds and outputs are
// standardized to zero mean and unit variance before anything else touches
// them. Hyperparameters live in log space:
//
//   k(u, v) = sf2 * exp(-1/2 sum_d ((u_d - v_d) / l_d)^2),   K = k(X, X) + sn2 I
//
// and are fitted by maximizing the log marginal likelihood
//
//   log p(y | X) = -1/2 y^T K^-1 y - sum_i log L_ii - n/2 log(2π)
//
// with multistart coordinate ascent.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitforge/common.hpp"
#include "json.hpp"

namespace gaitforge::gp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class GpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gram matrix stayed indefinite after the maximum jitter.
class FitFailure : public GpError {
 public:
  using GpError::GpError;
};

inline constexpr double kNoiseFloor = 1e-8;
inline constexpr double kMaxJitter = 1e-4;
inline constexpr double kDuplicateTolerance = 1e-12;

struct InputTransform {
  VectorXd lower;
  VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }

  VectorXd to_unit(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim()) throw GpError("input dimension mismatch");
    VectorXd u(dim());
    for (int d = 0; d < dim(); ++d) u[d] = (x[d] - lower[d]) / (upper[d] - lower[d]);
    return u;
  }
  std::vector<double> from_unit(const VectorXd& u) const {
    std::vector<double> x(dim());
    for (int d = 0; d < dim(); ++d) x[d] = lower[d] + u[d] * (upper[d] - lower[d]);
    return x;
  }
};

struct OutputTransform {
  double mean = 0.0;
  double scale = 1.0;

  double standardize(double y) const { return (y - mean) / scale; }
  double destandardize(double z) const { return mean + scale * z; }

  static OutputTransform fit(const VectorXd& y) {
    OutputTransform t;
    if (y.size() == 0) return t;
    t.mean = y.mean();
    const double var = (y.array() - t.mean).square().mean();
    t.scale = var > 1e-300 ? std::sqrt(var) : 1.0;
    return t;
  }
};

/// Training data in normalized coordinates together with the transforms that
/// produced it.
struct Dataset {
  MatrixXd inputs;   // n x d, unit cube
  VectorXd outputs;  // standardized
  InputTransform input_transform;
  OutputTransform output_transform;

  int size() const { return static_cast<int>(outputs.size()); }
  int dim() const { return static_cast<int>(inputs.cols()); }

  /// Builds a dataset from unit-cube inputs and raw outputs. Inputs closer than
  /// 1e-12 are merged into one point carrying the mean output.
  static Dataset from_unit(const MatrixXd& unit_inputs, const VectorXd& raw_outputs,
                           InputTransform transform) {
    if (unit_inputs.rows() != raw_outputs.size()) throw GpError("inputs and outputs differ in length");
    if (unit_inputs.cols() != transform.dim()) throw GpError("input dimension mismatch");
    const int n = static_cast<int>(unit_inputs.rows());
    std::vector<int> owner(n, -1);
    std::vector<int> keep;
    for (int i = 0; i < n; ++i) {
      for (int k : keep) {
        if ((unit_inputs.row(i) - unit_inputs.row(k)).norm() < kDuplicateTolerance) {
          owner[i] = k;
          break;
        }
      }
      if (owner[i] < 0) {
        owner[i] = i;
        keep.push_back(i);
      }
    }
    Dataset ds;
    ds.input_transform = std::move(transform);
    ds.inputs.resize(static_cast<Eigen::Index>(keep.size()), unit_inputs.cols());
    VectorXd merged(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t m = 0; m < keep.size(); ++m) {
      double sum = 0.0;
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (owner[i] == keep[m]) {
          sum += raw_outputs[i];
          ++count;
        }
      }
      ds.inputs.row(static_cast<Eigen::Index>(m)) = unit_inputs.row(keep[m]);
      merged[static_cast<Eigen::Index>(m)] = sum / count;
    }
    ds.output_transform = OutputTransform::fit(merged);
    ds.outputs = merged.unaryExpr([&](double y) { return ds.output_transform.standardize(y); });
    return ds;
  }

  static Dataset from_raw(const std::vector<std::vector<double>>& x, std::span<const double> y,
                          InputTransform transform) {
    if (x.size() != y.size()) throw GpError("inputs and outputs differ in length");
    MatrixXd u(static_cast<Eigen::Index>(x.size()), transform.dim());
    for (std::size_t i = 0; i < x.size(); ++i) {
      u.row(static_cast<Eigen::Index>(i)) = transform.to_unit(x[i]).transpose();
    }
    VectorXd yy = Eigen::Map<const VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    return from_unit(u, yy, std::move(transform));
  }

  VectorXd raw_outputs() const {
    return outputs.unaryExpr([&](double z) { return output_transform.destandardize(z); });
  }
};

struct KernelHyperparams {
  VectorXd lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-2;

  static KernelHyperparams defaults(int dim) {
    return {VectorXd::Constant(dim, 0.3), 1.0, 1e-2};
  }
};

struct HyperparamBounds {
  double lengthscale_min = 1e-2;
  double lengthscale_max = 10.0;
  double signal_min = 1e-3;
  double signal_max = 10.0;
  double noise_min = kNoiseFloor;
  double noise_max = 1.0;
};

namespace detail {

/// Factorizes K + jitter I, escalating the jitter by decades from 1e-10 up to
/// kMaxJitter when the plain factorization fails.
inline std::optional<Eigen::LLT<MatrixXd>> factorize(MatrixXd& gram, double* jitter_used) {
  Eigen::LLT<MatrixXd> llt(gram);
  double jitter = 0.0;
  if (llt.info() == Eigen::Success) {
    if (jitter_used) *jitter_used = 0.0;
    return llt;
  }
  for (double j = 1e-10; j <= kMaxJitter * 1.0001; j *= 10.0) {
    gram.diagonal().array() += (j - jitter);
    jitter = j;
    llt.compute(gram);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt;
    }
  }
  return std::nullopt;
}

inline double lml_from_factor(const Eigen::LLT<MatrixXd>& llt, const VectorXd& y) {
  const VectorXd alpha = llt.solve(y);
  const auto& l = llt.matrixLLT();
  double logdet_half = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet_half += std::log(l(i, i));
  return -0.5 * y.dot(alpha) - logdet_half -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * kPi);
}

/// Per-dimension squared differences, cached for repeated Gram builds.
class PairwiseCache {
 public:
  explicit PairwiseCache(const MatrixXd& x) : n_(x.rows()), d_(x.cols()) {
    diffs_.assign(static_cast<std::size_t>(d_), MatrixXd::Zero(n_, n_));
    for (Eigen::Index k = 0; k < d_; ++k) {
      for (Eigen::Index j = 0; j < n_; ++j) {
        for (Eigen::Index i = j + 1; i < n_; ++i) {
          const double t = x(i, k) - x(j, k);
          diffs_[static_cast<std::size_t>(k)](i, j) = t * t;
        }
      }
    }
  }

  /// Lower triangle of K (the part LLT reads).
  MatrixXd gram(const KernelHyperparams& hp) const {
    MatrixXd k(n_, n_);
    std::vector<double> inv(static_cast<std::size_t>(d_));
    for (Eigen::Index d = 0; d < d_; ++d) {
      inv[static_cast<std::size_t>(d)] = 1.0 / (hp.lengthscales[d] * hp.lengthscales[d]);
    }
    for (Eigen::Index j = 0; j < n_; ++j) {
      k(j, j) = hp.signal_variance + hp.noise_variance;
      for (Eigen::Index i = j + 1; i < n_; ++i) {
        double s = 0.0;
        for (Eigen::Index d = 0; d < d_; ++d) {
          s += diffs_[static_cast<std::size_t>(d)](i, j) * inv[static_cast<std::size_t>(d)];
        }
        k(i, j) = hp.signal_variance * std::exp(-0.5 * s);
      }
    }
    return k;
  }

 private:
  Eigen::Index n_;
  Eigen::Index d_;
  std::vector<MatrixXd> diffs_;
};

}  // namespace detail

/// Exact log marginal likelihood of the standardized outputs.
inline double log_marginal_likelihood(const Dataset& data, const KernelHyperparams& hp) {
  if (hp.lengthscales.size() != data.dim()) throw GpError("lengthscale count != input dimension");
  if (!(hp.signal_variance > 0.0) || !(hp.noise_variance > 0.0) ||
      !(hp.lengthscales.array() > 0.0).all()) {
    throw GpError("hyperparameters must be positive");
  }
  detail::PairwiseCache cache(data.inputs);
  MatrixXd k = cache.gram(hp);
  auto llt = detail::factorize(k, nullptr);
  if (!llt) throw FitFailure("Gram matrix is not positive definite");
  return detail::lml_from_factor(*llt, data.outputs);
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// A fitted (immutable) GP posterior.
class GpModel {
 public:
  GpModel(Dataset data, KernelHyperparams hp) : data_(std::move(data)), hp_(std::move(hp)) {
    if (data_.size() < 1) throw GpError("empty dataset");
    if (hp_.lengthscales.size() != data_.dim()) throw GpError("lengthscale count != input dimension");
    detail::PairwiseCache cache(data_.inputs);
    MatrixXd k = cache.gram(hp_);
    auto llt = detail::factorize(k, &jitter_);
    if (!llt) throw FitFailure("Gram matrix is not positive definite after jitter escalation");
    llt_ = std::move(*llt);
    alpha_ = llt_.solve(data_.outputs);
    log_likelihood_ = detail::lml_from_factor(llt_, data_.outputs);
    inv_lengthscales_ = hp_.lengthscales.cwiseInverse();
    scaled_inputs_ = data_.inputs * inv_lengthscales_.asDiagonal();
  }

  const Dataset& dataset() const { return data_; }
  const KernelHyperparams& hyperparams() const { return hp_; }
  double log_likelihood() const { return log_likelihood_; }
  double jitter() const { return jitter_; }
  int dim() const { return data_.dim(); }

  /// Posterior at a raw input, in original output units.
  Prediction predict(std::span<const double> x) const {
    return predict_unit(data_.input_transform.to_unit(x));
  }

  Prediction predict_unit(const VectorXd& u) const {
    if (u.size() != dim()) throw GpError("query dimension mismatch");
    const VectorXd ks = cross_kernel(u);
    const double mean_std = ks.dot(alpha_);
    const VectorXd v = llt_.matrixL().solve(ks);
    const double var_std = std::max(hp_.signal_variance - v.squaredNorm(), 0.0);
    const double s = data_.output_transform.scale;
    return {data_.output_transform.destandardize(mean_std), s * s * var_std};
  }

  /// Posterior mean only (no triangular solve).
  double mean_unit(const VectorXd& u) const {
    if (u.size() != dim()) throw GpError("query dimension mismatch");
    return data_.output_transform.destandardize(cross_kernel(u).dot(alpha_));
  }

  /// Batched posterior over the rows of `queries` (unit coordinates).
  void predict_batch_unit(const MatrixXd& queries, VectorXd* mean, VectorXd* variance) const {
    if (queries.cols() != dim()) throw GpError("query dimension mismatch");
    const MatrixXd ks = cross_kernel_batch(queries);  // n x m
    const auto& ot = data_.output_transform;
    if (mean) {
      *mean = (ks.transpose() * alpha_).unaryExpr([&](double z) { return ot.destandardize(z); });
    }
    if (variance) {
      const MatrixXd v = llt_.matrixL().solve(ks);
      const double s2 = ot.scale * ot.scale;
      *variance = v.colwise().squaredNorm().transpose().unaryExpr(
          [&](double q) { return s2 * std::max(hp_.signal_variance - q, 0.0); });
    }
  }

 private:
  VectorXd cross_kernel(const VectorXd& u) const {
    const VectorXd su = u.cwiseProduct(inv_lengthscales_);
    VectorXd k(data_.size());
    for (Eigen::Index i = 0; i < scaled_inputs_.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < su.size(); ++d) {
        const double t = su[d] - scaled_inputs_(i, d);
        s += t * t;
      }
      k[i] = hp_.signal_variance * std::exp(-0.5 * s);
    }
    return k;
  }

  MatrixXd cross_kernel_batch(const MatrixXd& queries) const {
    const MatrixXd sq = queries * inv_lengthscales_.asDiagonal();
    MatrixXd k(data_.size(), queries.rows());
    for (Eigen::Index m = 0; m < sq.rows(); ++m) {
      for (Eigen::Index i = 0; i < scaled_inputs_.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index d = 0; d < sq.cols(); ++d) {
          const double t = sq(m, d) - scaled_inputs_(i, d);
          s += t * t;
        }
        k(i, m) = hp_.signal_variance * std::exp(-0.5 * s);
      }
    }
    return k;
  }

  Dataset data_;
  KernelHyperparams hp_;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd alpha_;
  VectorXd inv_lengthscales_;
  MatrixXd scaled_inputs_;
  double jitter_ = 0.0;
  double log_likelihood_ = 0.0;
};

struct FitOptions {
  int restarts = 5;
  std::uint64_t seed = 0;
  HyperparamBounds bounds;
  std::optional<KernelHyperparams> warm_start;
  double step_tolerance = 5e-4;  // smallest log-space step tried
  int max_passes = 400;          // coordinate sweeps per restart
};

namespace detail {

// Log-space vector layout: [log l_1 .. log l_d, log sf2, log sn2].
inline VectorXd pack(const KernelHyperparams& hp) {
  const Eigen::Index d = hp.lengthscales.size();
  VectorXd x(d + 2);
  x.head(d) = hp.lengthscales.array().log().matrix();
  x[d] = std::log(hp.signal_variance);
  x[d + 1] = std::log(hp.noise_variance);
  return x;
}

inline KernelHyperparams unpack(const VectorXd& x) {
  const Eigen::Index d = x.size() - 2;
  return {x.head(d).array().exp().matrix(), std::exp(x[d]), std::exp(x[d + 1])};
}

}  // namespace detail

/// Multistart log-space coordinate ascent on the log marginal likelihood.
/// Restart 0 starts from the warm start (or defaults); the others draw each
/// coordinate from its own seeded stream, so adding an input dimension leaves
/// the draws of the existing coordinates unchanged.
inline GpModel fit(const Dataset& data, const FitOptions& options = {}) {
  if (data.size() < 2) throw GpError("GP fit needs at least 2 distinct points");
  const int d = data.dim();
  const auto& b = options.bounds;
  VectorXd lo(d + 2), hi(d + 2);
  lo.head(d).setConstant(std::log(b.lengthscale_min));
  hi.head(d).setConstant(std::log(b.lengthscale_max));
  lo[d] = std::log(b.signal_min);
  hi[d] = std::log(b.signal_max);
  lo[d + 1] = std::log(std::max(b.noise_min, kNoiseFloor));
  hi[d + 1] = std::log(b.noise_max);

  detail::PairwiseCache cache(data.inputs);
  auto objective = [&](const VectorXd& x) {
    MatrixXd k = cache.gram(detail::unpack(x));
    auto llt = detail::factorize(k, nullptr);
    if (!llt) return -std::numeric_limits<double>::infinity();
    const double v = detail::lml_from_factor(*llt, data.outputs);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };

  auto clamp_vec = [&](VectorXd x) {
    for (Eigen::Index c = 0; c < x.size(); ++c) x[c] = std::clamp(x[c], lo[c], hi[c]);
    return x;
  };

  VectorXd best_x;
  double best_f = -std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, options.restarts);
  for (int r = 0; r < restarts; ++r) {
    VectorXd x;
    if (r == 0) {
      KernelHyperparams init = options.warm_start && options.warm_start->lengthscales.size() == d
                                   ? *options.warm_start
                                   : KernelHyperparams::defaults(d);
      x = clamp_vec(detail::pack(init));
    } else {
      x.resize(d + 2);
      auto draw = [&](std::uint64_t tag, double a, double z) {
        Rng rng = make_rng(options.seed, static_cast<std::uint64_t>(r), tag);
        return uniform(rng, std::log(a), std::log(z));
      };
      for (int k = 0; k < d; ++k) x[k] = draw(static_cast<std::uint64_t>(k), 0.05, 2.0);
      x[d] = draw(1000000, 0.1, 5.0);
      x[d + 1] = draw(1000001, 1e-6, 0.3);
      x = clamp_vec(x);
    }
    double f = objective(x);
    double step = 1.0;
    for (int pass = 0; pass < options.max_passes && step >= options.step_tolerance; ++pass) {
      bool improved = false;
      for (Eigen::Index c = 0; c < x.size(); ++c) {
        for (double dir : {1.0, -1.0}) {
          const double t = std::clamp(x[c] + dir * step, lo[c], hi[c]);
          if (t == x[c]) continue;
          VectorXd xt = x;
          xt[c] = t;
          const double ft = objective(xt);
          if (ft > f) {
            x = std::move(xt);
            f = ft;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (f > best_f) {
      best_f = f;
      best_x = x;
    }
  }
  if (!std::isfinite(best_f)) throw FitFailure("no restart produced a positive definite Gram matrix");
  return GpModel(data, detail::unpack(best_x));
}

// ---------------------------------------------------------------------------
// Model dump

inline nlohmann::json to_json(const GpModel& model) {
  const auto& ds = model.dataset();
  const auto& hp = model.hyperparams();
  nlohmann::json j;
  j["format"] = "gaitforge-gp-1";
  j["kernel"] = "ard_squared_exponential";
  j["hyperparams"] = {
      {"lengthscales", std::vector<double>(hp.lengthscales.data(),
                                           hp.lengthscales.data() + hp.lengthscales.size())},
      {"signal_variance", hp.signal_variance},
      {"noise_variance", hp.noise_variance}};
  j["input_transform"] = {
      {"lower", std::vector<double>(ds.input_transform.lower.data(),
                                    ds.input_transform.lower.data() + ds.input_transform.lower.size())},
      {"upper", std::vector<double>(ds.input_transform.upper.data(),
                                    ds.input_transform.upper.data() + ds.input_transform.upper.size())}};
  j["output_transform"] = {{"mean", ds.output_transform.mean}, {"scale", ds.output_transform.scale}};
  nlohmann::json xs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < ds.inputs.rows(); ++i) {
    xs.push_back(ds.input_transform.from_unit(ds.inputs.row(i).transpose()));
  }
  const VectorXd y = ds.raw_outputs();
  j["inputs"] = xs;
  j["outputs"] = std::vector<double>(y.data(), y.data() + y.size());
  j["log_marginal_likelihood"] = model.log_likelihood();
  return j;
}

inline GpModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "gaitforge-gp-1") throw GpError("unrecognized GP dump format");
  auto vec = [](const nlohmann::json& a) {
    auto v = a.get<std::vector<double>>();
    return VectorXd(Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  InputTransform t{vec(j["input_transform"]["lower"]), vec(j["input_transform"]["upper"])};
  auto xs = j["inputs"].get<std::vector<std::vector<double>>>();
  auto ys = j["outputs"].get<std::vector<double>>();
  Dataset ds = Dataset::from_raw(xs, ys, t);
  KernelHyperparams hp{vec(j["hyperparams"]["lengthscales"]),
                       j["hyperparams"]["signal_variance"].get<double>(),
                       j["hyperparams"]["noise_variance"].get<double>()};
  return GpModel(std::move(ds), std::move(hp));
}

}  // namespace gaitforge::gp
