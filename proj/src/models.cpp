#include "maxem/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace maxem {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Mean: return "mean";
    case ModelKind::Linear: return "linear";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::Poisson: return "poisson";
    case ModelKind::WeibullAft: return "aft";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "mean") return ModelKind::Mean;
  if (name == "linear") return ModelKind::Linear;
  if (name == "logistic") return ModelKind::Logistic;
  if (name == "poisson") return ModelKind::Poisson;
  if (name == "aft") return ModelKind::WeibullAft;
  throw DataError("unknown model '" + name + "' (expected mean|linear|logistic|poisson|aft)");
}

ResponseKind response_kind_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::Mean:
    case ModelKind::Linear: return ResponseKind::Continuous;
    case ModelKind::Logistic: return ResponseKind::Binary;
    case ModelKind::Poisson: return ResponseKind::Count;
    case ModelKind::WeibullAft: return ResponseKind::CensoredTime;
  }
  return ResponseKind::Continuous;
}

void EmissionModel::check(const Dataset& data) const {
  const ResponseKind want = response_kind_for(kind());
  const bool ok = data.kind() == want ||
                  // a 0/1 or count column is still a valid continuous response
                  (want == ResponseKind::Continuous && data.kind() != ResponseKind::CensoredTime) ||
                  (want == ResponseKind::Count && data.kind() == ResponseKind::Binary);
  if (!ok)
    throw DataError(name() + " model needs " + to_string(want) + " responses, got " +
                    to_string(data.kind()));
  if (kind() != ModelKind::Mean && data.num_covariates() != p_)
    throw DataError(name() + " model was built for " + std::to_string(p_) + " covariate(s), data has " +
                    std::to_string(data.num_covariates()));
}

double EmissionModel::log_likelihood(const Dataset& data, RowSet rows, const Eigen::VectorXd& theta) const {
  double sum = 0.0;
  for (Index k = 0; k < rows.size(); ++k) sum += log_density(data, rows[k], theta);
  return sum;
}

Eigen::VectorXd EmissionModel::score_sum(const Dataset& data, RowSet rows, const Eigen::VectorXd& theta) const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(dim());
  Eigen::VectorXd s(dim());
  for (Index k = 0; k < rows.size(); ++k) {
    score(data, rows[k], theta, s);
    total += s;
  }
  return total;
}

Eigen::MatrixXd EmissionModel::hessian_sum(const Dataset& data, RowSet rows, const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
  for (Index k = 0; k < rows.size(); ++k) add_hessian(data, rows[k], theta, h);
  return h.selfadjointView<Eigen::Lower>();
}

FitResult EmissionModel::fit(const Dataset& data, RowSet rows, const FitOptions& opts,
                             const Eigen::VectorXd* warm_start) const {
  if (rows.size() < 1) throw DataError("cannot fit an empty row set");
  Eigen::VectorXd start = warm_start && warm_start->size() == dim() && warm_start->allFinite()
                              ? *warm_start
                              : initial_theta(data, rows);
  FitResult res = newton(data, rows, start, opts);
  const bool diverged = res.theta.lpNorm<Eigen::Infinity>() > opts.divergence_bound;
  if (diverged && opts.ridge < opts.separation_ridge) {
    FitOptions ridged = opts;
    ridged.ridge = opts.separation_ridge;
    res = newton(data, rows, initial_theta(data, rows), ridged);
    res.degenerate = true;
  } else if (diverged || !res.converged) {
    res.degenerate = true;
  }
  return res;
}

FitResult EmissionModel::newton(const Dataset& data, RowSet rows, Eigen::VectorXd theta,
                                const FitOptions& opts) const {
  const double m = static_cast<double>(rows.size());
  auto objective = [&](const Eigen::VectorXd& t) {
    return log_likelihood(data, rows, t) - opts.ridge * t.squaredNorm();
  };
  FitResult res;
  double f = objective(theta);
  if (!std::isfinite(f)) {
    theta = initial_theta(data, rows);
    f = objective(theta);
  }
  res.converged = false;
  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    Eigen::VectorXd g = score_sum(data, rows, theta) - 2.0 * opts.ridge * theta;
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.grad_tol * std::max(1.0, m)) {
      res.converged = true;
      break;
    }
    Eigen::MatrixXd neg = -hessian_sum(data, rows, theta);
    neg.diagonal().array() += 2.0 * opts.ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(neg);
    double damping = 1e-8 * std::max(1.0, neg.diagonal().cwiseAbs().maxCoeff());
    for (int tries = 0; llt.info() != Eigen::Success && tries < 40; ++tries) {
      Eigen::MatrixXd damped = neg;
      damped.diagonal().array() += damping;
      llt.compute(damped);
      damping *= 10.0;
    }
    Eigen::VectorXd step = llt.info() == Eigen::Success ? Eigen::VectorXd(llt.solve(g)) : g;
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      Eigen::VectorXd cand = theta + t * step;
      const double fc = objective(cand);
      if (std::isfinite(fc) && fc >= f) {
        accepted = (cand != theta);
        theta = std::move(cand);
        f = fc;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No ascent left in floating point: accept as stationary if the gradient is small.
      res.converged = gnorm <= 1e-4 * std::max(1.0, m);
      break;
    }
    if (theta.lpNorm<Eigen::Infinity>() > opts.divergence_bound) break;
  }
  res.theta = std::move(theta);
  res.loglik = log_likelihood(data, rows, res.theta);
  return res;
}

// ---------------------------------------------------------------------------
// Gaussian models

namespace {

class GaussianModel : public EmissionModel {
 public:
  GaussianModel(Index p, bool with_covariates) : EmissionModel(p), with_covariates_(with_covariates) {}

  ModelKind kind() const override { return with_covariates_ ? ModelKind::Linear : ModelKind::Mean; }
  Index dim() const override { return q() + 1; }
  Index location_dim() const override { return q(); }
  bool exact_small_sample() const override { return true; }

  double log_density(const Dataset& data, Index i, const Eigen::VectorXd& theta) const override {
    const double log_sigma = theta[q()];
    const double r = (data.response(i) - mean(data, i, theta)) * std::exp(-log_sigma);
    return -log_sigma - kHalfLog2Pi - 0.5 * r * r;
  }

  void score(const Dataset& data, Index i, const Eigen::VectorXd& theta,
             Eigen::Ref<Eigen::VectorXd> out) const override {
    const double inv_var = std::exp(-2.0 * theta[q()]);
    const double r = data.response(i) - mean(data, i, theta);
    out[0] = r * inv_var;
    if (with_covariates_) out.segment(1, p_) = (r * inv_var) * data.covariate_row(i).transpose();
    out[q()] = -1.0 + r * r * inv_var;
  }

  void add_hessian(const Dataset& data, Index i, const Eigen::VectorXd& theta,
                   Eigen::Ref<Eigen::MatrixXd> acc) const override {
    const double inv_var = std::exp(-2.0 * theta[q()]);
    const double r = data.response(i) - mean(data, i, theta);
    const Index s = q();
    // lower triangle only
    for (Index a = 0; a < s; ++a) {
      const double xa = a == 0 ? 1.0 : data.covariates()(i, a - 1);
      for (Index b = 0; b <= a; ++b) {
        const double xb = b == 0 ? 1.0 : data.covariates()(i, b - 1);
        acc(a, b) -= xa * xb * inv_var;
      }
      acc(s, a) -= 2.0 * r * xa * inv_var;
    }
    acc(s, s) -= 2.0 * r * r * inv_var;
  }

  FitResult fit(const Dataset& data, RowSet rows, const FitOptions& opts,
                const Eigen::VectorXd* warm_start) const override {
    if (rows.size() < 1) throw DataError("cannot fit an empty row set");
    if (opts.ridge > 0.0) return EmissionModel::fit(data, rows, opts, warm_start);
    GaussianAccumulator acc(p_, with_covariates_);
    for (Index k = 0; k < rows.size(); ++k) acc.add(data, rows[k]);
    FitResult res = acc.fit(opts.sigma_floor);
    res.loglik = log_likelihood(data, rows, res.theta);
    return res;
  }

 protected:
  Eigen::VectorXd initial_theta(const Dataset& data, RowSet rows) const override {
    GaussianAccumulator acc(p_, with_covariates_);
    for (Index k = 0; k < rows.size(); ++k) acc.add(data, rows[k]);
    Eigen::VectorXd t = acc.fit().theta;
    t[q()] = std::max(t[q()], std::log(1e-3));
    return t;
  }

 private:
  Index q() const { return with_covariates_ ? p_ + 1 : 1; }
  double mean(const Dataset& data, Index i, const Eigen::VectorXd& theta) const {
    return with_covariates_ ? linear_predictor(data, i, theta) : theta[0];
  }
  bool with_covariates_;
};

// ---------------------------------------------------------------------------

class LogisticModel : public EmissionModel {
 public:
  using EmissionModel::EmissionModel;
  ModelKind kind() const override { return ModelKind::Logistic; }
  Index dim() const override { return p_ + 1; }
  Index location_dim() const override { return p_ + 1; }

  double log_density(const Dataset& data, Index i, const Eigen::VectorXd& theta) const override {
    const double eta = linear_predictor(data, i, theta);
    return data.response(i) * eta - softplus(eta);
  }
  void score(const Dataset& data, Index i, const Eigen::VectorXd& theta,
             Eigen::Ref<Eigen::VectorXd> out) const override {
    const double resid = data.response(i) - logistic(linear_predictor(data, i, theta));
    out[0] = resid;
    out.tail(p_) = resid * data.covariate_row(i).transpose();
  }
  void add_hessian(const Dataset& data, Index i, const Eigen::VectorXd& theta,
                   Eigen::Ref<Eigen::MatrixXd> acc) const override {
    const double pr = logistic(linear_predictor(data, i, theta));
    add_outer(data, i, -pr * (1.0 - pr), acc);
  }

 protected:
  Eigen::VectorXd initial_theta(const Dataset& data, RowSet rows) const override {
    double ybar = 0.0;
    for (Index k = 0; k < rows.size(); ++k) ybar += data.response(rows[k]);
    ybar = std::clamp(ybar / static_cast<double>(rows.size()), 1e-3, 1.0 - 1e-3);
    Eigen::VectorXd t = Eigen::VectorXd::Zero(dim());
    t[0] = std::log(ybar / (1.0 - ybar));
    return t;
  }

  void add_outer(const Dataset& data, Index i, double w, Eigen::Ref<Eigen::MatrixXd> acc) const {
    for (Index a = 0; a <= p_; ++a) {
      const double xa = a == 0 ? 1.0 : data.covariates()(i, a - 1);
      for (Index b = 0; b <= a; ++b) {
        const double xb = b == 0 ? 1.0 : data.covariates()(i, b - 1);
        acc(a, b) += w * xa * xb;
      }
    }
  }
};

class PoissonModel : public LogisticModel {
 public:
  using LogisticModel::LogisticModel;
  ModelKind kind() const override { return ModelKind::Poisson; }

  double log_density(const Dataset& data, Index i, const Eigen::VectorXd& theta) const override {
    const double eta = linear_predictor(data, i, theta);
    const double y = data.response(i);
    return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
  }
  void score(const Dataset& data, Index i, const Eigen::VectorXd& theta,
             Eigen::Ref<Eigen::VectorXd> out) const override {
    const double resid = data.response(i) - std::exp(linear_predictor(data, i, theta));
    out[0] = resid;
    out.tail(p_) = resid * data.covariate_row(i).transpose();
  }
  void add_hessian(const Dataset& data, Index i, const Eigen::VectorXd& theta,
                   Eigen::Ref<Eigen::MatrixXd> acc) const override {
    add_outer(data, i, -std::exp(linear_predictor(data, i, theta)), acc);
  }

 protected:
  Eigen::VectorXd initial_theta(const Dataset& data, RowSet rows) const override {
    double ybar = 0.0;
    for (Index k = 0; k < rows.size(); ++k) ybar += data.response(rows[k]);
    ybar /= static_cast<double>(rows.size());
    Eigen::VectorXd t = Eigen::VectorXd::Zero(dim());
    t[0] = std::log(std::max(ybar, 1e-3));
    return t;
  }
};

// ---------------------------------------------------------------------------
// Weibull accelerated failure time: log T = x'beta + sigma * eps with
// eps ~ exp(w - exp(w)). Censored rows contribute the log survival -exp(w).

class WeibullAftModel : public EmissionModel {
 public:
  using EmissionModel::EmissionModel;
  ModelKind kind() const override { return ModelKind::WeibullAft; }
  Index dim() const override { return p_ + 2; }
  Index location_dim() const override { return p_ + 1; }

  double log_density(const Dataset& data, Index i, const Eigen::VectorXd& theta) const override {
    const double log_sigma = theta[p_ + 1];
    const double z = std::log(data.response(i));
    const double w = (z - linear_predictor(data, i, theta)) * std::exp(-log_sigma);
    if (data.event(i) != 0.0) return -log_sigma - z + w - std::exp(w);
    return -std::exp(w);
  }

  void score(const Dataset& data, Index i, const Eigen::VectorXd& theta,
             Eigen::Ref<Eigen::VectorXd> out) const override {
    const double inv_sigma = std::exp(-theta[p_ + 1]);
    const double w = (std::log(data.response(i)) - linear_predictor(data, i, theta)) * inv_sigma;
    const double delta = data.event(i);
    const double g = delta - std::exp(w);  // d log e / dw
    out[0] = -g * inv_sigma;
    out.segment(1, p_) = (-g * inv_sigma) * data.covariate_row(i).transpose();
    out[p_ + 1] = -delta - w * g;
  }

  void add_hessian(const Dataset& data, Index i, const Eigen::VectorXd& theta,
                   Eigen::Ref<Eigen::MatrixXd> acc) const override {
    const double inv_sigma = std::exp(-theta[p_ + 1]);
    const double w = (std::log(data.response(i)) - linear_predictor(data, i, theta)) * inv_sigma;
    const double delta = data.event(i);
    const double ew = std::exp(w);
    const double g = delta - ew;
    const double bb = -ew * inv_sigma * inv_sigma;
    const double bs = -inv_sigma * (w * ew - g);
    const Index s = p_ + 1;
    for (Index a = 0; a <= p_; ++a) {
      const double xa = a == 0 ? 1.0 : data.covariates()(i, a - 1);
      for (Index b = 0; b <= a; ++b) {
        const double xb = b == 0 ? 1.0 : data.covariates()(i, b - 1);
        acc(a, b) += bb * xa * xb;
      }
      acc(s, a) += bs * xa;
    }
    acc(s, s) += w * g - w * w * ew;
  }

 protected:
  Eigen::VectorXd initial_theta(const Dataset& data, RowSet rows) const override {
    // Least squares on log times, ignoring censoring.
    const Index q = p_ + 1;
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd x(q);
    for (Index k = 0; k < rows.size(); ++k) {
      const Index i = rows[k];
      x[0] = 1.0;
      x.tail(p_) = data.covariate_row(i).transpose();
      xtx.selfadjointView<Eigen::Lower>().rankUpdate(x);
      xty += std::log(data.response(i)) * x;
    }
    Eigen::VectorXd beta =
        Eigen::MatrixXd(xtx.selfadjointView<Eigen::Lower>()).completeOrthogonalDecomposition().solve(xty);
    double rss = 0.0;
    for (Index k = 0; k < rows.size(); ++k) {
      const Index i = rows[k];
      x[0] = 1.0;
      x.tail(p_) = data.covariate_row(i).transpose();
      const double r = std::log(data.response(i)) - x.dot(beta);
      rss += r * r;
    }
    Eigen::VectorXd t(dim());
    t.head(q) = beta;
    const double sd = std::sqrt(rss / static_cast<double>(rows.size()));
    t[q] = std::log(std::clamp(sd, 0.1, 10.0));
    return t;
  }
};

}  // namespace

std::unique_ptr<EmissionModel> make_model(ModelKind kind, Index num_covariates) {
  switch (kind) {
    case ModelKind::Mean: return std::make_unique<GaussianModel>(num_covariates, false);
    case ModelKind::Linear: return std::make_unique<GaussianModel>(num_covariates, true);
    case ModelKind::Logistic: return std::make_unique<LogisticModel>(num_covariates);
    case ModelKind::Poisson: return std::make_unique<PoissonModel>(num_covariates);
    case ModelKind::WeibullAft: return std::make_unique<WeibullAftModel>(num_covariates);
  }
  throw DataError("unknown model kind");
}

// ---------------------------------------------------------------------------

GaussianAccumulator::GaussianAccumulator(Index num_covariates, bool with_covariates)
    : q_(with_covariates ? num_covariates + 1 : 1),
      with_covariates_(with_covariates),
      xtx_(Eigen::MatrixXd::Zero(q_, q_)),
      xty_(Eigen::VectorXd::Zero(q_)),
      x_(q_) {}

void GaussianAccumulator::add(const Dataset& data, Index i) {
  x_[0] = 1.0;
  if (with_covariates_) x_.tail(q_ - 1) = data.covariate_row(i).transpose();
  const double y = data.response(i);
  xtx_.selfadjointView<Eigen::Lower>().rankUpdate(x_);
  xty_ += y * x_;
  yty_ += y * y;
  ++count_;
}

FitResult GaussianAccumulator::fit(double sigma_floor) const {
  FitResult res;
  res.theta.resize(q_ + 1);
  const double m = static_cast<double>(count_);
  const Eigen::MatrixXd full = xtx_.selfadjointView<Eigen::Lower>();
  Eigen::VectorXd beta;
  if (q_ == 1) {
    beta = xty_ / m;
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(full);
    const auto dvec = ldlt.vectorD();
    const double scale = std::max(1.0, dvec.cwiseAbs().maxCoeff());
    if (ldlt.info() == Eigen::Success && dvec.minCoeff() > 1e-10 * scale) {
      beta = ldlt.solve(xty_);
    } else {
      beta = full.completeOrthogonalDecomposition().solve(xty_);
      res.degenerate = true;
    }
  }
  // RSS = y'y - 2 b'X'y + b'X'X b, evaluated in the stable order.
  double rss = yty_ - 2.0 * beta.dot(xty_) + beta.dot(full * beta);
  rss = std::max(rss, 0.0);
  double var = rss / m;
  const double floor_var = sigma_floor * sigma_floor;
  if (var < floor_var) {
    var = floor_var;
    res.degenerate = true;
  }
  res.theta.head(q_) = beta;
  res.theta[q_] = 0.5 * std::log(var);
  res.loglik = -0.5 * m * std::log(2.0 * std::numbers::pi * var) - 0.5 * rss / var;
  res.iterations = 0;
  res.converged = true;
  return res;
}

}  // namespace maxem
