#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace survim {

struct ObservedRecord {
  std::vector<double> x;
  double y = 0.0;
  int delta = 0;
};

/// Immutable right-censored sample. Features are stored as an n x p matrix.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Eigen::MatrixXd x, std::vector<double> y, std::vector<int> delta, std::vector<std::string> names)
      : x_(std::move(x)), y_(std::move(y)), delta_(std::move(delta)), names_(std::move(names)) {
    validate();
  }

  static Dataset from_records(const std::vector<ObservedRecord>& records, std::vector<std::string> names) {
    if (records.empty()) throw DegenerateDataError("dataset has no records");
    const auto p = static_cast<Eigen::Index>(records.front().x.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), p);
    std::vector<double> y;
    std::vector<int> d;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (static_cast<Eigen::Index>(records[i].x.size()) != p)
        throw DataValidationError(i + 1, "feature dimension differs from first record");
      for (Eigen::Index j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), j) = records[i].x[static_cast<std::size_t>(j)];
      y.push_back(records[i].y);
      d.push_back(records[i].delta);
    }
    return Dataset(std::move(x), std::move(y), std::move(d), std::move(names));
  }

  std::size_t n() const { return y_.size(); }
  std::size_t p() const { return static_cast<std::size_t>(x_.cols()); }
  const Eigen::MatrixXd& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<int>& delta() const { return delta_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  double y(std::size_t i) const { return y_[i]; }
  int delta(std::size_t i) const { return delta_[i]; }

  ObservedRecord record(std::size_t i) const {
    ObservedRecord r;
    r.x.resize(p());
    for (std::size_t j = 0; j < p(); ++j) r.x[j] = x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    r.y = y_[i];
    r.delta = delta_[i];
    return r;
  }

  std::size_t event_count() const { return static_cast<std::size_t>(std::count(delta_.begin(), delta_.end(), 1)); }

  /// Rows in the given order. Unlike the constructor, an all-censored subset is allowed.
  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.x_.resize(static_cast<Eigen::Index>(rows.size()), x_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.x_.row(static_cast<Eigen::Index>(r)) = x_.row(static_cast<Eigen::Index>(rows[r]));
      out.y_.push_back(y_[rows[r]]);
      out.delta_.push_back(delta_[rows[r]]);
    }
    out.names_ = names_;
    return out;
  }

  /// 0-based column index of a feature given by name or by 1-based position.
  std::size_t feature_index(const std::string& key) const {
    for (std::size_t j = 0; j < names_.size(); ++j)
      if (names_[j] == key) return j;
    char* end = nullptr;
    const long v = std::strtol(key.c_str(), &end, 10);
    if (end != key.c_str() && *end == '\0' && v >= 1 && static_cast<std::size_t>(v) <= p())
      return static_cast<std::size_t>(v - 1);
    throw ConfigurationError("unknown feature '" + key + "'");
  }

 private:
  void validate() const {
    if (y_.empty()) throw DegenerateDataError("dataset has no records");
    if (static_cast<std::size_t>(x_.rows()) != y_.size() || delta_.size() != y_.size())
      throw SchemaError("feature, time and status lengths differ");
    if (names_.size() != static_cast<std::size_t>(x_.cols())) throw SchemaError("feature name count differs from p");
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (!std::isfinite(y_[i])) throw DataValidationError(i + 1, "time is not finite");
      if (!(y_[i] > 0.0)) throw DataValidationError(i + 1, "time must be positive");
      if (delta_[i] != 0 && delta_[i] != 1) throw DataValidationError(i + 1, "status must be 0 or 1");
      for (Eigen::Index j = 0; j < x_.cols(); ++j)
        if (!std::isfinite(x_(static_cast<Eigen::Index>(i), j)))
          throw DataValidationError(i + 1, "feature '" + names_[static_cast<std::size_t>(j)] + "' is not finite");
    }
    if (event_count() == 0) throw DegenerateDataError("no observed events (all status = 0)");
  }

  Eigen::MatrixXd x_;
  std::vector<double> y_;
  std::vector<int> delta_;
  std::vector<std::string> names_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace detail

/// Reads a CSV with a header containing `time`, `status` and at least one feature column.
/// Rows are numbered from 1 (first data row) in error messages.
inline Dataset load_dataset(std::istream& in, const std::string& time_col = "time",
                            const std::string& status_col = "status") {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty input: missing header row");
  const auto header = detail::split_csv_line(line);
  int t_idx = -1, s_idx = -1;
  std::vector<std::size_t> feat_idx;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == time_col) t_idx = static_cast<int>(c);
    else if (header[c] == status_col) s_idx = static_cast<int>(c);
    else {
      feat_idx.push_back(c);
      names.push_back(header[c]);
    }
  }
  if (t_idx < 0) throw SchemaError("missing column '" + time_col + "'");
  if (s_idx < 0) throw SchemaError("missing column '" + status_col + "'");
  if (feat_idx.empty()) throw SchemaError("no feature columns");

  std::vector<std::vector<double>> rows_x;
  std::vector<double> ys;
  std::vector<int> ds;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataValidationError(row, "expected " + std::to_string(header.size()) + " cells, found " +
                                         std::to_string(cells.size()));
    double t = 0.0, st = 0.0;
    if (!detail::parse_double(cells[static_cast<std::size_t>(t_idx)], t))
      throw DataValidationError(row, "time is not numeric");
    if (!detail::parse_double(cells[static_cast<std::size_t>(s_idx)], st))
      throw DataValidationError(row, "status is not numeric");
    if (!std::isfinite(t)) throw DataValidationError(row, "time is not finite");
    if (!(t > 0.0)) throw DataValidationError(row, "time must be positive");
    if (st != 0.0 && st != 1.0) throw DataValidationError(row, "status must be 0 or 1");
    std::vector<double> xr;
    for (std::size_t k = 0; k < feat_idx.size(); ++k) {
      double v = 0.0;
      if (!detail::parse_double(cells[feat_idx[k]], v))
        throw DataValidationError(row, "feature '" + names[k] + "' is missing or not numeric");
      if (!std::isfinite(v)) throw DataValidationError(row, "feature '" + names[k] + "' is not finite");
      xr.push_back(v);
    }
    rows_x.push_back(std::move(xr));
    ys.push_back(t);
    ds.push_back(static_cast<int>(st));
  }
  if (ys.empty()) throw DegenerateDataError("no data rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows_x[i][j];
  return Dataset(std::move(x), std::move(ys), std::move(ds), std::move(names));
}

inline Dataset load_dataset_file(const std::string& path, const std::string& time_col = "time",
                                 const std::string& status_col = "status") {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open dataset '" + path + "'");
  return load_dataset(in, time_col, status_col);
}

/// Writes with 17 significant digits so a reload reproduces every double exactly.
inline void save_dataset(const Dataset& d, std::ostream& out) {
  out << "time,status";
  for (const auto& nm : d.feature_names()) out << ',' << nm;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < d.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", d.y(i));
    out << buf << ',' << d.delta(i);
    for (std::size_t j = 0; j < d.p(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", d.x()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      out << ',' << buf;
    }
    out << '\n';
  }
}

struct FoldAssignment {
  std::vector<int> labels;  // 1-based fold labels
  int K = 1;
  std::uint64_t seed = 0;
  int retries = 0;

  std::vector<std::size_t> members(int k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == k) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> complement(int k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] != k) out.push_back(i);
    return out;
  }
};

/// Labels drawn i.i.d. uniform on {1..K}; redrawn with seed+1, seed+2, ... while any fold is empty.
inline FoldAssignment make_folds(std::size_t n, int K, std::uint64_t seed) {
  if (K < 1) throw ConfigurationError("fold count must be at least 1");
  if (n < 2 * static_cast<std::size_t>(K))
    throw ConfigurationError("n = " + std::to_string(n) + " is below 2K = " + std::to_string(2 * K));
  FoldAssignment fa;
  fa.K = K;
  fa.seed = seed;
  for (int attempt = 0;; ++attempt) {
    Rng rng = make_rng(seed + static_cast<std::uint64_t>(attempt), 0xF01D);
    std::uniform_int_distribution<int> unif(1, K);
    fa.labels.assign(n, 0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(K) + 1, 0);
    for (auto& l : fa.labels) {
      l = unif(rng);
      ++counts[static_cast<std::size_t>(l)];
    }
    if (std::all_of(counts.begin() + 1, counts.end(), [](std::size_t c) { return c > 0; })) {
      fa.retries = attempt;
      return fa;
    }
  }
}

struct TimeGrid {
  std::vector<double> points;
  double tau = 0.0;

  std::size_t size() const { return points.size(); }
  /// Number of grid points <= t. The right-continuous step value at t sits at index count-1.
  std::size_t count_le(double t) const {
    return static_cast<std::size_t>(std::upper_bound(points.begin(), points.end(), t) - points.begin());
  }
  std::size_t tau_index() const { return count_le(tau) - 1; }
};

struct GridPolicy {
  enum class Kind { EventTimes, EqualSpacing };
  Kind kind = Kind::EventTimes;
  std::size_t J = 0;

  static GridPolicy event_times() { return {}; }
  static GridPolicy equal_spacing(std::size_t J) { return {Kind::EqualSpacing, J}; }
};

inline TimeGrid build_time_grid(const Dataset& data, double tau, GridPolicy policy = {}) {
  if (!(tau > 0.0)) throw ConfigurationError("tau must be positive");
  std::vector<double> ev;
  for (std::size_t i = 0; i < data.n(); ++i)
    if (data.delta(i) == 1 && data.y(i) <= tau) ev.push_back(data.y(i));
  if (ev.empty())
    throw IdentificationError("no observed event time at or before tau = " + std::to_string(tau));
  TimeGrid g;
  g.tau = tau;
  if (policy.kind == GridPolicy::Kind::EqualSpacing) {
    if (policy.J < 1) throw ConfigurationError("equal-spacing grid needs J >= 1");
    for (std::size_t j = 1; j <= policy.J; ++j)
      g.points.push_back(j == policy.J ? tau : tau * static_cast<double>(j) / static_cast<double>(policy.J));
    return g;
  }
  std::sort(ev.begin(), ev.end());
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
  if (ev.back() < tau) ev.push_back(tau);
  g.points = std::move(ev);
  return g;
}

/// Largest observed event time. Used to check that tau is supported by the data.
inline double last_event_time(const Dataset& data) {
  double m = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i)
    if (data.delta(i) == 1) m = std::max(m, data.y(i));
  return m;
}

}  // namespace survim
