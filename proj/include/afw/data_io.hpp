#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "afw/core.hpp"
#include "afw/objectives.hpp"
#include "afw/trace.hpp"

namespace afw {

inline constexpr int kTraceSchemaVersion = 1;

/// 17 significant digits; nan/inf spelled so std::from_chars reads them back.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Shortest text that reads back to the same double.
inline std::string format_shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double out = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return out;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  std::int64_t out = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return out;
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LIBSVM
// ---------------------------------------------------------------------------

struct LabeledDataset {
  SparseMatrix features;
  std::vector<double> labels;  // in {-1, +1}
  std::string source_path;
  std::map<double, double> label_mapping;  // raw label -> +-1

  LogisticProblem problem() const { return LogisticProblem(features, labels); }
};

/// One record per line: "label idx:value idx:value ...", 1-based strictly
/// increasing indices. d is the largest index unless `dim` is given.
inline LabeledDataset parse_libsvm(std::istream& in, std::optional<Index> dim = std::nullopt,
                                   std::string source = "<stream>") {
  std::vector<SparseMatrix::Entry> entries;
  std::vector<double> raw_labels;
  std::set<double> distinct;
  Index max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) continue;
    const auto tokens = detail::split_whitespace(line);
    const auto label = detail::parse_double(tokens[0]);
    if (!label || !std::isfinite(*label)) throw MalformedLine(line_no, line, "bad label");
    const Index row = static_cast<Index>(raw_labels.size());
    Index prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) {
        throw MalformedLine(line_no, line, "expected index:value, got '" + std::string(tokens[t]) + "'");
      }
      const auto idx = detail::parse_int(tokens[t].substr(0, colon));
      const auto val = detail::parse_double(tokens[t].substr(colon + 1));
      if (!idx || *idx < 1) throw MalformedLine(line_no, line, "feature index must be >= 1");
      if (*idx <= prev) throw MalformedLine(line_no, line, "feature indices must increase");
      if (!val || !std::isfinite(*val)) throw MalformedLine(line_no, line, "bad feature value");
      if (dim && *idx > *dim) {
        throw MalformedLine(line_no, line,
                            "feature index exceeds dimension " + std::to_string(*dim));
      }
      prev = *idx;
      max_index = std::max<Index>(max_index, *idx);
      if (*val != 0.0) entries.push_back({row, *idx - 1, *val});
    }
    raw_labels.push_back(*label);
    distinct.insert(*label);
    if (distinct.size() > 2) {
      throw NonBinaryLabels("line " + std::to_string(line_no) + ": third label value '" +
                            std::string(tokens[0]) + "'");
    }
  }
  if (raw_labels.empty()) throw InvalidArgument("libsvm input '" + source + "' has no records");
  const Index d = dim ? *dim : max_index;
  if (d < 1) throw InvalidArgument("libsvm input '" + source + "' has no features");

  std::map<double, double> mapping;
  if (distinct.size() == 1) {
    const double only = *distinct.begin();
    mapping[only] = (only == 0.0 || only == -1.0) ? -1.0 : 1.0;
  } else {
    mapping[*distinct.begin()] = -1.0;
    mapping[*distinct.rbegin()] = 1.0;
  }
  std::vector<double> labels;
  labels.reserve(raw_labels.size());
  for (double l : raw_labels) labels.push_back(mapping.at(l));

  return LabeledDataset{SparseMatrix(static_cast<Index>(raw_labels.size()), d, std::move(entries)),
                        std::move(labels), std::move(source), std::move(mapping)};
}

inline LabeledDataset parse_libsvm(const std::filesystem::path& path,
                                   std::optional<Index> dim = std::nullopt) {
  auto in = detail::open_input(path);
  return parse_libsvm(in, dim, path.string());
}

/// Normalized form: labels +1 / -1, shortest round-trip values.
inline void write_libsvm(const LabeledDataset& data, std::ostream& out) {
  const auto& entries = data.features.entries();
  std::size_t e = 0;
  for (Index i = 0; i < data.features.rows(); ++i) {
    out << (data.labels[static_cast<std::size_t>(i)] > 0 ? "+1" : "-1");
    for (; e < entries.size() && entries[e].row == i; ++e) {
      out << ' ' << (entries[e].col + 1) << ':' << format_shortest(entries[e].value);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// MovieLens u.data
// ---------------------------------------------------------------------------

struct RatingScale {
  double min = 1.0;
  double max = 5.0;
};

struct RatingsDataset {
  SparseMatrix ratings;  // users x items
  Index n_users = 0;
  Index n_items = 0;
  std::size_t duplicates = 0;
  std::string source_path;

  MatCompProblem problem() const { return MatCompProblem(ratings); }
};

/// "user \t item \t rating \t timestamp" with 1-based ids. A repeated
/// (user, item) keeps the last rating and bumps `duplicates`.
inline RatingsDataset parse_movielens(std::istream& in, RatingScale scale = {},
                                      std::string source = "<stream>") {
  std::map<std::pair<Index, Index>, double> cells;
  std::size_t duplicates = 0;
  Index users = 0;
  Index items = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 4) {
      throw MalformedLine(line_no, line, "expected 4 tab-separated fields");
    }
    const auto user = detail::parse_int(fields[0]);
    const auto item = detail::parse_int(fields[1]);
    const auto rating = detail::parse_double(fields[2]);
    const auto stamp = detail::parse_int(fields[3]);
    if (!user || *user < 1) throw MalformedLine(line_no, line, "bad user id");
    if (!item || *item < 1) throw MalformedLine(line_no, line, "bad item id");
    if (!rating || !(*rating >= scale.min && *rating <= scale.max)) {
      throw MalformedLine(line_no, line, "rating outside the declared scale");
    }
    if (!stamp) throw MalformedLine(line_no, line, "bad timestamp");
    auto [it, inserted] = cells.insert_or_assign({*user - 1, *item - 1}, *rating);
    if (!inserted) ++duplicates;
    users = std::max<Index>(users, *user);
    items = std::max<Index>(items, *item);
  }
  if (cells.empty()) throw InvalidArgument("movielens input '" + source + "' has no ratings");
  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(cells.size());
  for (const auto& [rc, value] : cells) entries.push_back({rc.first, rc.second, value});
  return RatingsDataset{SparseMatrix(users, items, std::move(entries)), users, items, duplicates,
                        std::move(source)};
}

inline RatingsDataset parse_movielens(const std::filesystem::path& path, RatingScale scale = {}) {
  auto in = detail::open_input(path);
  return parse_movielens(in, scale, path.string());
}

/// Normalized form: one line per rating in row-major order, timestamp 0.
inline void write_movielens(const RatingsDataset& data, std::ostream& out) {
  for (const auto& e : data.ratings.entries()) {
    out << (e.row + 1) << '\t' << (e.col + 1) << '\t' << format_shortest(e.value) << "\t0\n";
  }
}

// ---------------------------------------------------------------------------
// Traces: CSV + JSON sidecar
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& trace_base_columns() {
  static const std::vector<std::string> cols = {"k", "f_value", "fw_gap", "step_delta",
                                                "wall_time_ns"};
  return cols;
}

/// "run.csv" -> "run.meta.json"
inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".meta.json");
  return p;
}

inline void write_trace_csv(const SolverTrace& trace, std::ostream& out) {
  const auto& base = trace_base_columns();
  for (std::size_t i = 0; i < base.size(); ++i) out << (i ? "," : "") << base[i];
  for (const auto& c : trace.extra_columns) out << ',' << c;
  out << '\n';
  for (const auto& r : trace.rows) {
    if (r.extra.size() != trace.extra_columns.size()) {
      throw SchemaMismatch("row " + std::to_string(r.k) + " has " +
                           std::to_string(r.extra.size()) + " extra values, header has " +
                           std::to_string(trace.extra_columns.size()));
    }
    out << r.k << ',' << format_double(r.f_value) << ',' << format_double(r.fw_gap) << ','
        << format_double(r.step_delta) << ',' << r.wall_time_ns;
    for (double v : r.extra) out << ',' << format_double(v);
    out << '\n';
  }
}

inline nlohmann::json trace_metadata(const SolverTrace& trace) {
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& s : trace.rank_samples) {
    ranks.push_back({{"k", s.k}, {"rank", s.rank}, {"atoms", s.atoms}});
  }
  return {{"schema_version", kTraceSchemaVersion},
          {"algorithm", trace.meta.algorithm},
          {"schedule", trace.meta.schedule},
          {"seed", trace.meta.seed},
          {"problem", trace.meta.problem},
          {"constraint", trace.meta.constraint},
          {"extra_columns", trace.extra_columns},
          {"rows", trace.rows.size()},
          {"stationary", trace.stationary},
          {"rank_samples", ranks}};
}

inline void write_trace(const SolverTrace& trace, const std::filesystem::path& path) {
  {
    auto out = detail::open_output(path);
    write_trace_csv(trace, out);
    if (!out) throw IoError("failed writing '" + path.string() + "'");
  }
  auto side = detail::open_output(sidecar_path(path));
  side << trace_metadata(trace).dump(2) << '\n';
  if (!side) throw IoError("failed writing '" + sidecar_path(path).string() + "'");
}

namespace detail {

inline SolverTrace read_trace_csv(std::istream& in, const std::string& name,
                                  const std::vector<std::string>& expected_extra) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaMismatch(name + ": empty trace file");
  const auto header = split(line, ',');
  const auto& base = trace_base_columns();
  if (header.size() < base.size()) throw SchemaMismatch(name + ": header too short");
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (header[i] != base[i]) {
      throw SchemaMismatch(name + ": column " + std::to_string(i + 1) + " is '" +
                           std::string(header[i]) + "', expected '" + base[i] + "'");
    }
  }
  SolverTrace trace;
  for (std::size_t i = base.size(); i < header.size(); ++i) {
    trace.extra_columns.emplace_back(header[i]);
  }
  if (trace.extra_columns != expected_extra) {
    throw SchemaMismatch(name + ": CSV columns disagree with the metadata sidecar");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw SchemaMismatch(name + ": line " + std::to_string(line_no) + " has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(header.size()));
    }
    auto bad = [&](std::size_t col) {
      return SchemaMismatch(name + ": line " + std::to_string(line_no) + ", column '" +
                            std::string(header[col]) + "' is not a number");
    };
    TraceRow row;
    const auto k = parse_int(fields[0]);
    const auto f = parse_double(fields[1]);
    const auto g = parse_double(fields[2]);
    const auto d = parse_double(fields[3]);
    const auto w = parse_int(fields[4]);
    if (!k) throw bad(0);
    if (!f) throw bad(1);
    if (!g) throw bad(2);
    if (!d) throw bad(3);
    if (!w) throw bad(4);
    row.k = *k;
    row.f_value = *f;
    row.fw_gap = *g;
    row.step_delta = *d;
    row.wall_time_ns = *w;
    for (std::size_t i = base.size(); i < fields.size(); ++i) {
      const auto v = parse_double(fields[i]);
      if (!v) throw bad(i);
      row.extra.push_back(*v);
    }
    if (!trace.rows.empty() && row.k <= trace.rows.back().k) {
      throw SchemaMismatch(name + ": line " + std::to_string(line_no) + ": k is not increasing");
    }
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

}  // namespace detail

inline SolverTrace read_trace(const std::filesystem::path& path) {
  nlohmann::json meta;
  {
    auto side = detail::open_input(sidecar_path(path));
    try {
      side >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaMismatch(sidecar_path(path).string() + ": " + e.what());
    }
  }
  SolverTrace trace;
  try {
    if (meta.at("schema_version").get<int>() != kTraceSchemaVersion) {
      throw SchemaMismatch(path.string() + ": unsupported schema_version");
    }
    auto in = detail::open_input(path);
    trace = detail::read_trace_csv(in, path.string(),
                                   meta.at("extra_columns").get<std::vector<std::string>>());
    trace.meta.algorithm = meta.at("algorithm").get<std::string>();
    trace.meta.schedule = meta.at("schedule").get<std::string>();
    trace.meta.seed = meta.at("seed").get<std::uint64_t>();
    trace.meta.problem = meta.at("problem").get<std::string>();
    trace.meta.constraint = meta.at("constraint").get<std::string>();
    trace.stationary = meta.at("stationary").get<bool>();
    for (const auto& s : meta.at("rank_samples")) {
      trace.rank_samples.push_back(
          {s.at("k").get<std::int64_t>(), s.at("rank").get<Index>(), s.at("atoms").get<std::size_t>()});
    }
    if (meta.at("rows").get<std::size_t>() != trace.rows.size()) {
      throw SchemaMismatch(path.string() + ": row count disagrees with the metadata sidecar");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(sidecar_path(path).string() + ": " + e.what());
  }
  return trace;
}

}  // namespace afw
