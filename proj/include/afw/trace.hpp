#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "afw/core.hpp"

namespace afw {

/// Rank statistics of a matrix iterate at a log point.
struct RankSample {
  std::int64_t k = 0;
  Index rank = 0;
  std::size_t atoms = 0;

  friend bool operator==(const RankSample&, const RankSample&) = default;
};

struct TraceMeta {
  std::string algorithm;
  std::string schedule;
  std::uint64_t seed = 0;
  std::string problem;
  std::string constraint;

  friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

/// One iteration. `extra` lines up with SolverTrace::extra_columns.
struct TraceRow {
  std::int64_t k = 0;
  double f_value = 0.0;
  double fw_gap = 0.0;
  double step_delta = 0.0;
  std::int64_t wall_time_ns = 0;
  std::vector<double> extra;
};

namespace columns {
inline constexpr const char* kPhiStar = "phi_star";
inline constexpr const char* kXi = "xi";
inline constexpr const char* kLambda = "lambda";
inline constexpr const char* kGradSqY = "grad_sq_y";
inline constexpr const char* kModelY = "model_y";
inline constexpr const char* kVDistSq = "v_dist_sq";
inline constexpr const char* kMu = "mu";
inline constexpr const char* kMomentumResidual = "momentum_residual";
}  // namespace columns

/// Equality that treats NaN as equal to NaN (bit patterns aside).
inline bool same_value(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b;
}

inline bool operator==(const TraceRow& a, const TraceRow& b) {
  if (a.k != b.k || a.wall_time_ns != b.wall_time_ns || a.extra.size() != b.extra.size()) {
    return false;
  }
  if (!same_value(a.f_value, b.f_value) || !same_value(a.fw_gap, b.fw_gap) ||
      !same_value(a.step_delta, b.step_delta)) {
    return false;
  }
  for (std::size_t i = 0; i < a.extra.size(); ++i) {
    if (!same_value(a.extra[i], b.extra[i])) return false;
  }
  return true;
}

/// Per-iteration record of a solver run, rows in increasing k.
struct SolverTrace {
  TraceMeta meta;
  std::vector<std::string> extra_columns;
  std::vector<TraceRow> rows;
  bool stationary = false;
  std::vector<RankSample> rank_samples;

  bool has_diagnostics() const {
    return extra_columns.size() >= 3 && extra_columns[0] == columns::kPhiStar &&
           extra_columns[1] == columns::kXi && extra_columns[2] == columns::kLambda;
  }

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < extra_columns.size(); ++i) {
      if (extra_columns[i] == name) return i;
    }
    return std::nullopt;
  }

  /// Values of an extra column, one per row. Throws SchemaMismatch if absent.
  std::vector<double> column_values(const std::string& name) const {
    const auto idx = column(name);
    if (!idx) throw SchemaMismatch("trace has no column '" + name + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.extra[*idx]);
    return out;
  }

  std::vector<double> f_values() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.f_value);
    return out;
  }

  std::int64_t last_k() const { return rows.empty() ? -1 : rows.back().k; }

  friend bool operator==(const SolverTrace&, const SolverTrace&) = default;
};

}  // namespace afw
