#pragma once

#include "maxem/data.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace maxem {

enum class ModelKind { Mean, Linear, Logistic, Poisson, WeibullAft };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
ResponseKind response_kind_for(ModelKind kind);

/// Rows an operation runs over: either a contiguous 0-based range or an
/// explicit list. Does not own the list.
class RowSet {
 public:
  static RowSet range(Index begin, Index end) { return RowSet(begin, end); }
  explicit RowSet(std::span<const Index> rows) : rows_(rows), begin_(0), size_(static_cast<Index>(rows.size())) {}

  Index size() const { return size_; }
  Index operator[](Index k) const { return rows_.empty() ? begin_ + k : rows_[static_cast<std::size_t>(k)]; }

 private:
  RowSet(Index begin, Index end) : begin_(begin), size_(end - begin) {}
  std::span<const Index> rows_;
  Index begin_;
  Index size_;
};

struct FitOptions {
  int max_iter = 100;
  double grad_tol = 1e-8;  // on the infinity norm, scaled by |S|
  int max_halvings = 30;
  double ridge = 0.0;
  double sigma_floor = 1e-8;
  double divergence_bound = 30.0;  // |theta|_inf beyond this is treated as separation
  double separation_ridge = 1e-4;
};

struct FitResult {
  Eigen::VectorXd theta;
  double loglik = 0.0;  // unpenalized
  int iterations = 0;
  bool converged = true;
  bool degenerate = false;
};

/// Per-observation emission density e_i(theta) with MLE machinery.
///
/// Parameter layouts (scales on log scale):
///   Mean        (mu, log sigma)
///   Linear      (intercept, beta_1..beta_p, log sigma)
///   Logistic    (intercept, beta_1..beta_p)
///   Poisson     (intercept, beta_1..beta_p)
///   WeibullAft  (intercept, beta_1..beta_p, log sigma)
/// The leading location_dim() entries are regression coefficients; any trailing
/// entry is the log scale.
class EmissionModel {
 public:
  explicit EmissionModel(Index num_covariates) : p_(num_covariates) {}
  virtual ~EmissionModel() = default;

  virtual ModelKind kind() const = 0;
  virtual Index dim() const = 0;
  virtual Index location_dim() const = 0;
  /// Mean and linear models have exact small-sample refits (closed form).
  virtual bool exact_small_sample() const { return false; }

  virtual double log_density(const Dataset& data, Index i, const Eigen::VectorXd& theta) const = 0;
  virtual void score(const Dataset& data, Index i, const Eigen::VectorXd& theta,
                     Eigen::Ref<Eigen::VectorXd> out) const = 0;
  /// Adds the Hessian of log e_i at theta to the lower triangle of acc.
  virtual void add_hessian(const Dataset& data, Index i, const Eigen::VectorXd& theta,
                           Eigen::Ref<Eigen::MatrixXd> acc) const = 0;

  /// Maximizes sum_{i in rows} log e_i(theta) - ridge * |theta|^2.
  virtual FitResult fit(const Dataset& data, RowSet rows, const FitOptions& opts = {},
                        const Eigen::VectorXd* warm_start = nullptr) const;

  Index num_covariates() const { return p_; }
  std::string name() const { return to_string(kind()); }

  /// Throws DataError if the dataset's response kind or covariate count does not fit.
  void check(const Dataset& data) const;

  double log_likelihood(const Dataset& data, RowSet rows, const Eigen::VectorXd& theta) const;
  Eigen::VectorXd score_sum(const Dataset& data, RowSet rows, const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd hessian_sum(const Dataset& data, RowSet rows, const Eigen::VectorXd& theta) const;

 protected:
  /// Linear predictor intercept + x_i' beta from the leading p+1 entries of theta.
  double linear_predictor(const Dataset& data, Index i, const Eigen::VectorXd& theta) const {
    return theta[0] + data.covariate_row(i).dot(theta.segment(1, p_));
  }
  virtual Eigen::VectorXd initial_theta(const Dataset& data, RowSet rows) const = 0;
  FitResult newton(const Dataset& data, RowSet rows, Eigen::VectorXd theta, const FitOptions& opts) const;

  Index p_;
};

std::unique_ptr<EmissionModel> make_model(ModelKind kind, Index num_covariates);

/// Running sufficient statistics for Gaussian (mean or linear) fits, so that
/// prefix and suffix refits cost O(d^3) each instead of a pass over the rows.
class GaussianAccumulator {
 public:
  /// with_covariates = false gives the mean model (intercept only).
  GaussianAccumulator(Index num_covariates, bool with_covariates);

  void add(const Dataset& data, Index i);
  Index count() const { return count_; }
  /// Closed-form MLE of the accumulated rows; degenerate when rank deficient or
  /// the residual scale hits the floor.
  FitResult fit(double sigma_floor = 1e-8) const;

 private:
  Index q_;  // regression coefficients incl. intercept
  bool with_covariates_;
  Index count_ = 0;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  double yty_ = 0.0;
  Eigen::VectorXd x_;
};

}  // namespace maxem
