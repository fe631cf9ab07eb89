#pragma once

#include "maxem/models.hpp"
#include "maxem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace maxem::testing {

inline constexpr ModelKind kAllModels[] = {ModelKind::Mean, ModelKind::Linear, ModelKind::Logistic,
                                           ModelKind::Poisson, ModelKind::WeibullAft};

inline Index covariates_for(ModelKind kind, Index p) { return kind == ModelKind::Mean ? 0 : p; }

/// Random dataset for `kind` with `p` uniform covariates and a level shift of
/// `shift` in the linear predictor at each breakpoint.
inline Dataset random_dataset(ModelKind kind, Index n, Index p, Rng& rng, const std::vector<Index>& bps = {},
                              double shift = 0.0) {
  p = covariates_for(kind, p);
  Eigen::VectorXd y(n);
  Eigen::VectorXd events;
  if (kind == ModelKind::WeibullAft) events.resize(n);
  RowMatrix x(n, p);
  std::size_t seg = 0;
  for (Index i = 0; i < n; ++i) {
    while (seg < bps.size() && i >= bps[seg]) ++seg;
    double eta = 0.3 + shift * static_cast<double>(seg);
    for (Index j = 0; j < p; ++j) {
      x(i, j) = rng.uniform();
      eta += (0.5 - 0.3 * static_cast<double>(j)) * x(i, j);
    }
    switch (kind) {
      case ModelKind::Mean:
      case ModelKind::Linear: y[i] = eta + 0.8 * rng.normal(); break;
      case ModelKind::Logistic: y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0; break;
      case ModelKind::Poisson: y[i] = static_cast<double>(rng.poisson(std::exp(eta))); break;
      case ModelKind::WeibullAft: {
        const double t = std::exp(eta + 0.7 * std::log(rng.exponential(1.0)));
        const double c = rng.exponential(0.2);
        y[i] = std::min(t, c);
        events[i] = t <= c ? 1.0 : 0.0;
        break;
      }
    }
  }
  return Dataset(response_kind_for(kind), std::move(y), std::move(x), std::move(events));
}

inline Dataset mean_data(const std::vector<double>& y) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Index>(y.size()));
  return Dataset(ResponseKind::Continuous, v, RowMatrix(static_cast<Index>(y.size()), 0));
}

/// |a - b| <= tol * max(1, |a|, |b|).
inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline double log_add(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Every breakpoint tuple 1 <= b_1 < ... < b_{K-1} <= n-1.
inline std::vector<std::vector<Index>> all_breakpoints(Index n, Index K) {
  std::vector<std::vector<Index>> out;
  std::vector<Index> cur;
  auto rec = [&](auto&& self, Index start) -> void {
    if (static_cast<Index>(cur.size()) == K - 1) {
      out.push_back(cur);
      return;
    }
    for (Index b = start; b <= n - 1; ++b) {
      cur.push_back(b);
      self(self, b + 1);
      cur.pop_back();
    }
  };
  rec(rec, 1);
  return out;
}

}  // namespace maxem::testing

namespace maxem::testing {

struct DerivativeErrors {
  double score = 0.0;    // max relative error of the analytic score
  double hessian = 0.0;  // max relative error of the analytic Hessian
};

/// Analytic score/Hessian sums against central differences (step h) at a
/// random parameter for a random 30-row dataset.
inline DerivativeErrors derivative_errors(ModelKind kind, std::uint64_t seed, double h = 1e-5) {
  Rng rng(seed, 17);
  const Dataset data = random_dataset(kind, 30, 2, rng);
  const auto model = make_model(kind, data.num_covariates());
  const RowSet rows = RowSet::range(0, data.size());
  Eigen::VectorXd theta(model->dim());
  for (Index j = 0; j < theta.size(); ++j) theta[j] = 0.5 * rng.normal();
  const Eigen::VectorXd g = model->score_sum(data, rows, theta);
  const Eigen::MatrixXd H = model->hessian_sum(data, rows, theta);
  DerivativeErrors err;
  const double gscale = std::max(1.0, g.cwiseAbs().maxCoeff());
  const double hscale = std::max(1.0, H.cwiseAbs().maxCoeff());
  for (Index j = 0; j < theta.size(); ++j) {
    Eigen::VectorXd up = theta, dn = theta;
    up[j] += h;
    dn[j] -= h;
    const double fd = (model->log_likelihood(data, rows, up) - model->log_likelihood(data, rows, dn)) / (2 * h);
    err.score = std::max(err.score, std::abs(fd - g[j]) / gscale);
    const Eigen::VectorXd gfd = (model->score_sum(data, rows, up) - model->score_sum(data, rows, dn)) / (2 * h);
    err.hessian = std::max(err.hessian, (gfd - H.col(j)).cwiseAbs().maxCoeff() / hscale);
  }
  return err;
}

}  // namespace maxem::testing

#include "maxem/hmm.hpp"

namespace maxem::testing {

struct EnumeratedChain {
  double log_evidence = -INFINITY;
  Eigen::MatrixXd weights;    // posterior label probabilities
  Eigen::MatrixXd max_paths;  // best path log-probability through (i, k)
  std::vector<Index> best;    // breakpoints of the best path
};

/// Every label path of the left-to-right chain, scored with a constant log(1/2)
/// per step.
inline EnumeratedChain enumerate_chain(const Eigen::MatrixXd& e) {
  const Index n = e.rows(), K = e.cols();
  EnumeratedChain out;
  out.weights = Eigen::MatrixXd::Zero(n, K);
  out.max_paths = Eigen::MatrixXd::Constant(n, K, -INFINITY);
  const auto paths = all_breakpoints(n, K);
  std::vector<double> lp;
  double best = -INFINITY;
  for (const auto& bps : paths) {
    const auto labels = Segmentation(n, bps).labels();
    double v = static_cast<double>(n - 1) * std::log(0.5);
    for (Index i = 0; i < n; ++i) v += e(i, labels[static_cast<std::size_t>(i)]);
    lp.push_back(v);
    out.log_evidence = log_add(out.log_evidence, v);
    for (Index i = 0; i < n; ++i) {
      double& m = out.max_paths(i, labels[static_cast<std::size_t>(i)]);
      m = std::max(m, v);
    }
    if (v > best) {
      best = v;
      out.best = bps;
    }
  }
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto labels = Segmentation(n, paths[p]).labels();
    for (Index i = 0; i < n; ++i) out.weights(i, labels[static_cast<std::size_t>(i)]) += std::exp(lp[p] - out.log_evidence);
  }
  return out;
}

struct HmmOracleReport {
  double weight_error = 0.0;   // max |omega - omega_enum|
  double lattice_error = 0.0;  // max relative error of logF + logB vs the enumerated best path
  double evidence_error = 0.0;
  bool map_matches = true;
};

inline HmmOracleReport hmm_oracle_check(const Eigen::MatrixXd& e) {
  const EnumeratedChain ref = enumerate_chain(e);
  const PosteriorWeights fb = forward_backward(e);
  const LatticeScores mx = max_forward_backward(e);
  HmmOracleReport rep;
  rep.evidence_error = std::abs(fb.log_evidence - ref.log_evidence) / std::max(1.0, std::abs(ref.log_evidence));
  for (Index i = 0; i < e.rows(); ++i) {
    for (Index k = 0; k < e.cols(); ++k) {
      rep.weight_error = std::max(rep.weight_error, std::abs(fb.weights(i, k) - ref.weights(i, k)));
      const double got = mx.log_forward(i, k) + mx.log_backward(i, k);
      const double want = ref.max_paths(i, k);
      if (want == -INFINITY) {
        if (got != -INFINITY) rep.lattice_error = INFINITY;
      } else {
        rep.lattice_error = std::max(rep.lattice_error, std::abs(got - want) / std::max(1.0, std::abs(want)));
      }
    }
  }
  rep.map_matches = map_decode(mx).breakpoints() == ref.best;
  return rep;
}

inline Eigen::MatrixXd random_emissions(Rng& rng, Index n, Index K) {
  Eigen::MatrixXd e(n, K);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < K; ++k) e(i, k) = -1.0 + 2.0 * rng.normal();
  return e;
}

}  // namespace maxem::testing
