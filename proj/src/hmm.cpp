#include "maxem/hmm.hpp"

#include <cmath>
#include <limits>

namespace maxem {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

ChainSpec chain_for(const Eigen::MatrixXd& log_emissions) {
  ChainSpec spec{log_emissions.rows(), log_emissions.cols()};
  if (spec.segments < 1) throw DataError("need at least one segment");
  if (spec.n < spec.segments)
    throw DataError("cannot place " + std::to_string(spec.segments) + " segments in " +
                    std::to_string(spec.n) + " observations");
  return spec;
}

Eigen::VectorXd row_max(const Eigen::MatrixXd& m) { return m.rowwise().maxCoeff(); }

// Shared recursion; Combine is log_add for the sum lattice and max for the max lattice.
template <typename Combine>
LatticeScores run_lattice(const Eigen::MatrixXd& e, Combine combine) {
  const ChainSpec spec = chain_for(e);
  const Index n = spec.n;
  const Index K = spec.segments;
  const double a = spec.log_transition;
  LatticeScores out;
  out.log_forward = Eigen::MatrixXd::Constant(n, K, kNegInf);
  out.log_backward = Eigen::MatrixXd::Constant(n, K, kNegInf);
  auto& F = out.log_forward;
  auto& B = out.log_backward;

  F(0, 0) = e(0, 0);
  for (Index i = 1; i < n; ++i) {
    const Index lo = std::max<Index>(0, K - (n - i));
    const Index hi = std::min(i, K - 1);
    for (Index k = lo; k <= hi; ++k) {
      double v = F(i - 1, k);
      if (k > 0) v = combine(v, F(i - 1, k - 1));
      F(i, k) = v == kNegInf ? kNegInf : v + a + e(i, k);
    }
  }

  B(n - 1, K - 1) = 0.0;
  for (Index i = n - 1; i > 0; --i) {
    const Index lo = std::max<Index>(0, K - (n - i) - 1);
    const Index hi = std::min(i - 1, K - 1);
    for (Index k = lo; k <= hi; ++k) {
      double v = B(i, k) == kNegInf ? kNegInf : a + e(i, k) + B(i, k);
      if (k + 1 < K && B(i, k + 1) != kNegInf) v = combine(v, a + e(i, k + 1) + B(i, k + 1));
      B(i - 1, k) = v;
    }
  }
  out.forward_scale = row_max(F);
  out.backward_scale = row_max(B);
  return out;
}

}  // namespace

Eigen::MatrixXd emission_matrix(const Dataset& data, const EmissionModel& model,
                                const std::vector<Eigen::VectorXd>& thetas) {
  const Index n = data.size();
  const Index K = static_cast<Index>(thetas.size());
  if (K < 1) throw DataError("need at least one segment parameter");
  if (n < K) throw DataError("more segments than observations");
  Eigen::MatrixXd e = Eigen::MatrixXd::Constant(n, K, kNegInf);
  for (Index k = 0; k < K; ++k) {
    const Index first = k;
    const Index last = n - K + k;
    for (Index i = first; i <= last; ++i) e(i, k) = model.log_density(data, i, thetas[k]);
  }
  return e;
}

PosteriorWeights forward_backward(const Eigen::MatrixXd& log_emissions) {
  PosteriorWeights out;
  out.lattice = run_lattice(log_emissions, log_add);
  const auto& F = out.lattice.log_forward;
  const auto& B = out.lattice.log_backward;
  const Index n = F.rows();
  const Index K = F.cols();
  out.log_evidence = F(n - 1, K - 1);
  out.weights = Eigen::MatrixXd::Zero(n, K);
  for (Index i = 0; i < n; ++i) {
    // normalize each row on its own: identical to dividing by the evidence up to rounding
    double norm = kNegInf;
    for (Index k = 0; k < K; ++k) norm = log_add(norm, F(i, k) + B(i, k));
    for (Index k = 0; k < K; ++k) {
      const double v = F(i, k) + B(i, k);
      out.weights(i, k) = v == kNegInf ? 0.0 : std::exp(v - norm);
    }
  }
  return out;
}

PosteriorWeights forward_backward(const Dataset& data, const EmissionModel& model,
                                  const std::vector<Eigen::VectorXd>& thetas) {
  return forward_backward(emission_matrix(data, model, thetas));
}

LatticeScores max_forward_backward(const Eigen::MatrixXd& log_emissions) {
  return run_lattice(log_emissions, [](double x, double y) { return std::max(x, y); });
}

LatticeScores max_forward_backward(const Dataset& data, const EmissionModel& model,
                                   const std::vector<Eigen::VectorXd>& thetas) {
  return max_forward_backward(emission_matrix(data, model, thetas));
}

Segmentation viterbi_backtrack(const LatticeScores& lattice) {
  const auto& F = lattice.log_forward;
  const Index n = F.rows();
  const Index K = F.cols();
  std::vector<Index> bps;
  Index k = K - 1;
  for (Index i = n - 1; i > 0 && k > 0; --i) {
    // stay unless moving down is strictly better (or staying is infeasible)
    if (F(i - 1, k - 1) > F(i - 1, k)) {
      bps.push_back(i);
      --k;
    }
  }
  return Segmentation(n, std::vector<Index>(bps.rbegin(), bps.rend()));
}

DecodeResult map_decode_detailed(const LatticeScores& lattice) {
  const auto& F = lattice.log_forward;
  const auto& B = lattice.log_backward;
  const Index n = F.rows();
  const Index K = F.cols();
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double best_v = kNegInf;
    for (Index k = 0; k < K; ++k) {
      const double v = F(i, k) + B(i, k);
      if (v != kNegInf && v >= best_v) {
        best_v = v;
        best = static_cast<int>(k);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  bool valid = labels.front() == 0 && labels.back() == K - 1;
  for (Index i = 1; valid && i < n; ++i) {
    const int step = labels[i] - labels[i - 1];
    valid = step == 0 || step == 1;
  }
  if (valid) return {Segmentation::from_labels(labels), false};
  return {viterbi_backtrack(lattice), true};
}

Segmentation map_decode(const LatticeScores& lattice) { return map_decode_detailed(lattice).segmentation; }

}  // namespace maxem
