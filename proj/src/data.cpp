#include "maxem/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace maxem {

std::string to_string(ResponseKind kind) {
  switch (kind) {
    case ResponseKind::Continuous: return "continuous";
    case ResponseKind::Binary: return "binary";
    case ResponseKind::Count: return "count";
    case ResponseKind::CensoredTime: return "censored_time";
  }
  return "unknown";
}

ResponseKind parse_response_kind(const std::string& name) {
  if (name == "continuous") return ResponseKind::Continuous;
  if (name == "binary") return ResponseKind::Binary;
  if (name == "count") return ResponseKind::Count;
  if (name == "censored_time") return ResponseKind::CensoredTime;
  throw DataError("unknown response kind '" + name + "'");
}

namespace {

void check_response_value(ResponseKind kind, double y, double event, Index row) {
  auto fail = [&](const std::string& what) {
    throw DataError("row " + std::to_string(row + 1) + ": " + what);
  };
  if (!std::isfinite(y)) fail("non-finite response");
  switch (kind) {
    case ResponseKind::Continuous:
      break;
    case ResponseKind::Binary:
      if (y != 0.0 && y != 1.0) fail("binary response must be 0 or 1, got " + format_double(y));
      break;
    case ResponseKind::Count:
      if (y < 0.0 || y != std::floor(y))
        fail("count response must be a non-negative integer, got " + format_double(y));
      break;
    case ResponseKind::CensoredTime:
      if (y <= 0.0) fail("time must be strictly positive, got " + format_double(y));
      if (event != 0.0 && event != 1.0)
        fail("event indicator must be 0 or 1, got " + format_double(event));
      break;
  }
}

}  // namespace

Dataset::Dataset(ResponseKind kind, Eigen::VectorXd response, RowMatrix covariates,
                 Eigen::VectorXd events)
    : kind_(kind),
      response_(std::move(response)),
      covariates_(std::move(covariates)),
      events_(std::move(events)) {
  const Index n = response_.size();
  if (n < 2) throw DataError("a dataset needs at least 2 observations");
  if (covariates_.rows() != n) {
    if (covariates_.size() == 0) {
      covariates_.resize(n, 0);
    } else {
      throw DataError("covariate rows (" + std::to_string(covariates_.rows()) +
                      ") do not match response length (" + std::to_string(n) + ")");
    }
  }
  if (!covariates_.allFinite()) throw DataError("covariates contain non-finite values");
  if (kind_ == ResponseKind::CensoredTime) {
    if (events_.size() != n) throw DataError("censored-time data needs one event indicator per row");
  } else if (events_.size() != 0) {
    throw DataError("event indicators are only valid for censored-time data");
  }
  for (Index i = 0; i < n; ++i) check_response_value(kind_, response_[i], event(i), i);
}

Dataset Dataset::slice(Index begin, Index end) const {
  if (begin < 0 || end > size() || end - begin < 2)
    throw DataError("invalid slice [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
  const Index m = end - begin;
  Eigen::VectorXd ev = events_.size() ? Eigen::VectorXd(events_.segment(begin, m)) : Eigen::VectorXd();
  return Dataset(kind_, response_.segment(begin, m), covariates_.middleRows(begin, m), std::move(ev));
}

Dataset Dataset::permuted(std::span<const Index> order) const {
  const Index n = size();
  if (static_cast<Index>(order.size()) != n) throw DataError("permutation length mismatch");
  Eigen::VectorXd y(n);
  RowMatrix x(n, num_covariates());
  Eigen::VectorXd ev(events_.size());
  for (Index j = 0; j < n; ++j) {
    const Index src = order[j];
    y[j] = response_[src];
    x.row(j) = covariates_.row(src);
    if (events_.size()) ev[j] = events_[src];
  }
  return Dataset(kind_, std::move(y), std::move(x), std::move(ev));
}

Segmentation::Segmentation(Index n, std::vector<Index> breakpoints)
    : n_(n), breakpoints_(std::move(breakpoints)) {
  if (n < 1) throw DataError("segmentation length must be positive");
  Index prev = 0;
  for (Index bp : breakpoints_) {
    if (bp <= prev || bp >= n)
      throw DataError("breakpoints must be strictly increasing within 1.." + std::to_string(n - 1) +
                      ", got " + to_string(*this));
    prev = bp;
  }
}

Segmentation Segmentation::from_labels(std::span<const int> labels) {
  const Index n = static_cast<Index>(labels.size());
  if (n == 0 || labels[0] != 0) throw DataError("labels must start at segment 0");
  std::vector<Index> bps;
  for (Index i = 1; i < n; ++i) {
    const int step = labels[i] - labels[i - 1];
    if (step == 1) {
      bps.push_back(i);
    } else if (step != 0) {
      throw DataError("labels must be non-decreasing with unit steps");
    }
  }
  return Segmentation(n, std::move(bps));
}

std::vector<int> Segmentation::labels() const {
  std::vector<int> out(static_cast<std::size_t>(n_));
  for (Index k = 0; k < num_segments(); ++k)
    std::fill(out.begin() + begin(k), out.begin() + end(k), static_cast<int>(k));
  return out;
}

IndexRange segment_members(const Segmentation& seg, Index k) {
  if (k < 1 || k > seg.num_segments())
    throw std::out_of_range("segment index " + std::to_string(k) + " outside 1.." +
                            std::to_string(seg.num_segments()));
  return {seg.begin(k - 1) + 1, seg.end(k - 1)};
}

std::string to_string(const Segmentation& seg) {
  std::string out = "[";
  for (std::size_t j = 0; j < seg.breakpoints().size(); ++j) {
    if (j) out += ",";
    out += std::to_string(seg.breakpoints()[j]);
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, Index row, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, value);
  if (cell.empty() || res.ec != std::errc() || res.ptr != last)
    throw DataError("row " + std::to_string(row + 1) + ", column '" + column +
                    "': non-numeric value '" + cell + "'");
  if (!std::isfinite(value))
    throw DataError("row " + std::to_string(row + 1) + ", column '" + column + "': non-finite value");
  return value;
}

}  // namespace

CsvSchema CsvSchema::from_header(ResponseKind kind, const std::vector<std::string>& header) {
  CsvSchema schema;
  schema.kind = kind;
  const std::size_t lead = kind == ResponseKind::CensoredTime ? 2 : 1;
  if (header.size() < lead)
    throw DataError("header needs at least " + std::to_string(lead) + " column(s)");
  schema.response = header[0];
  if (kind == ResponseKind::CensoredTime) schema.status = header[1];
  schema.covariates.assign(header.begin() + static_cast<std::ptrdiff_t>(lead), header.end());
  return schema;
}

std::vector<std::string> read_csv_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV input");
  return split_line(line);
}

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
  const auto header = read_csv_header(in);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t j = 0; j < header.size(); ++j) column.emplace(header[j], j);
  auto locate = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw DataError("missing column '" + name + "'");
    return it->second;
  };
  const bool censored = schema.kind == ResponseKind::CensoredTime;
  if (censored && schema.status.empty())
    throw DataError("censored-time schema needs a status column");
  const std::size_t y_col = locate(schema.response);
  const std::size_t s_col = censored ? locate(schema.status) : 0;
  std::vector<std::size_t> x_cols;
  for (const auto& name : schema.covariates) x_cols.push_back(locate(name));

  std::vector<double> y, ev, x;
  std::string line;
  Index row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row + 1) + ": expected " +
                      std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    const double yv = parse_cell(cells[y_col], row, header[y_col]);
    const double sv = censored ? parse_cell(cells[s_col], row, header[s_col]) : 1.0;
    check_response_value(schema.kind, yv, sv, row);
    y.push_back(yv);
    if (censored) ev.push_back(sv);
    for (std::size_t c : x_cols) x.push_back(parse_cell(cells[c], row, header[c]));
    ++row;
  }
  const Index n = row;
  const Index p = static_cast<Index>(x_cols.size());
  Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  RowMatrix xm = Eigen::Map<RowMatrix>(x.data(), n, p);
  Eigen::VectorXd evv = censored ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(ev.data(), n))
                                 : Eigen::VectorXd();
  return Dataset(schema.kind, std::move(yv), std::move(xm), std::move(evv));
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

Dataset load_csv(const std::string& path, ResponseKind kind) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  const auto schema = CsvSchema::from_header(kind, read_csv_header(in));
  in.clear();
  in.seekg(0);
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& data, const CsvSchema& schema) {
  const bool censored = data.kind() == ResponseKind::CensoredTime;
  if (static_cast<Index>(schema.covariates.size()) != data.num_covariates())
    throw DataError("schema covariate count does not match dataset");
  out << schema.response;
  if (censored) out << ',' << schema.status;
  for (const auto& name : schema.covariates) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    out << format_double(data.response(i));
    if (censored) out << ',' << format_double(data.event(i));
    for (Index j = 0; j < data.num_covariates(); ++j)
      out << ',' << format_double(data.covariates()(i, j));
    out << '\n';
  }
}

void save_csv(const std::string& path, const Dataset& data, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, data, schema);
}

}  // namespace maxem
