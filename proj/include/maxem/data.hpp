#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace maxem {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for malformed input: bad CSV cells, invalid responses, invalid segmentations.
class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ResponseKind { Continuous, Binary, Count, CensoredTime };

std::string to_string(ResponseKind kind);
ResponseKind parse_response_kind(const std::string& name);

/// Ordered observations. Rows are kept in the order given; nothing here sorts.
///
/// For CensoredTime data `response` holds the observed time and `events` the
/// indicator (1 = event, 0 = censored). For the other kinds `events` is empty.
/// The covariate matrix never contains an intercept column.
class Dataset {
 public:
  Dataset(ResponseKind kind, Eigen::VectorXd response, RowMatrix covariates,
          Eigen::VectorXd events = {});

  ResponseKind kind() const { return kind_; }
  Index size() const { return response_.size(); }
  Index num_covariates() const { return covariates_.cols(); }

  double response(Index i) const { return response_[i]; }
  double event(Index i) const { return events_.size() ? events_[i] : 1.0; }
  auto covariate_row(Index i) const { return covariates_.row(i); }

  const Eigen::VectorXd& responses() const { return response_; }
  const Eigen::VectorXd& events() const { return events_; }
  const RowMatrix& covariates() const { return covariates_; }

  /// Rows [begin, end) as a new dataset.
  Dataset slice(Index begin, Index end) const;
  /// Rows in the given order (order[j] is the source row of row j).
  Dataset permuted(std::span<const Index> order) const;

 private:
  ResponseKind kind_;
  Eigen::VectorXd response_;
  RowMatrix covariates_;
  Eigen::VectorXd events_;
};

/// 1-based inclusive index range {first, ..., last}.
struct IndexRange {
  Index first = 0;
  Index last = 0;
  Index size() const { return last - first + 1; }
  bool operator==(const IndexRange&) const = default;
};

/// K segments of 1..n given by strictly increasing breakpoints n_1 < ... < n_{K-1}.
///
/// Breakpoint n_k is the 1-based index of the last observation of segment k,
/// which is also the 0-based exclusive end of that segment.
class Segmentation {
 public:
  Segmentation() = default;
  Segmentation(Index n, std::vector<Index> breakpoints);

  static Segmentation single(Index n) { return Segmentation(n, {}); }
  /// From 0-based labels that start at 0, end at K-1 and step by 0 or 1.
  static Segmentation from_labels(std::span<const int> labels);

  Index length() const { return n_; }
  Index num_segments() const { return static_cast<Index>(breakpoints_.size()) + 1; }
  const std::vector<Index>& breakpoints() const { return breakpoints_; }

  // 0-based half-open bounds of segment k (0-based).
  Index begin(Index k) const { return k == 0 ? 0 : breakpoints_[k - 1]; }
  Index end(Index k) const { return k + 1 == num_segments() ? n_ : breakpoints_[k]; }
  Index segment_size(Index k) const { return end(k) - begin(k); }

  std::vector<int> labels() const;

  bool operator==(const Segmentation&) const = default;

 private:
  Index n_ = 0;
  std::vector<Index> breakpoints_;
};

/// Members of segment k (1-based) as a 1-based inclusive range.
IndexRange segment_members(const Segmentation& seg, Index k);

std::string to_string(const Segmentation& seg);

/// Column layout of a CSV file.
struct CsvSchema {
  ResponseKind kind = ResponseKind::Continuous;
  std::string response = "y";       // time column for CensoredTime
  std::string status;               // event indicator column, CensoredTime only
  std::vector<std::string> covariates;

  /// First column is the response (first two, time and status, for
  /// CensoredTime) and every remaining column is a covariate.
  static CsvSchema from_header(ResponseKind kind, const std::vector<std::string>& header);
};

std::vector<std::string> read_csv_header(std::istream& in);

Dataset read_csv(std::istream& in, const CsvSchema& schema);
Dataset load_csv(const std::string& path, const CsvSchema& schema);
/// Loads with the schema implied by the file's header row.
Dataset load_csv(const std::string& path, ResponseKind kind);

/// Writes the dataset with a header; doubles use shortest round-trip formatting.
void write_csv(std::ostream& out, const Dataset& data, const CsvSchema& schema);
void save_csv(const std::string& path, const Dataset& data, const CsvSchema& schema);

std::string format_double(double value);

}  // namespace maxem
