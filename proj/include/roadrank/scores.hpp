#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "roadrank/error.hpp"
#include "roadrank/text.hpp"

namespace roadrank {

enum class Provenance { kSimulated, kImported };

/// Ground-truth importance per node.
struct ImportanceScores {
  std::vector<double> aff;
  double gamma = 0.9;
  std::size_t periods = 10;
  Provenance provenance = Provenance::kImported;

  std::size_t size() const { return aff.size(); }
  double operator[](std::size_t i) const { return aff[i]; }
};

/// Writes "node_id,<column>" rows with round-trippable values.
inline void write_score_csv(std::ostream& out, const std::vector<double>& values,
                            const std::string& column = "aff") {
  out << "node_id," << column << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << i << ',' << text::format_double(values[i]) << '\n';
  }
}

/// Reads a two-column "node_id,<score>" CSV. With expected_nodes > 0 every
/// id in [0, expected_nodes) must be present; otherwise ids must be dense.
inline std::vector<double> read_score_csv(std::istream& in, const std::string& origin,
                                          std::size_t expected_nodes = 0,
                                          bool require_non_negative = true) {
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<double> values;
  std::vector<bool> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cols = text::split(line, ',');
    if (!header) {
      header = true;
      if (cols.size() != 2 || cols[0] != "node_id") {
        throw invalid_input(origin + ":" + std::to_string(lineno) +
                            ": header must be node_id,<score>");
      }
      continue;
    }
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    if (cols.size() != 2) throw invalid_input(where + "expected node_id,score");
    const auto id = text::parse_int(cols[0]);
    const auto v = text::parse_double(cols[1]);
    if (!id || *id < 0) throw invalid_input(where + "bad node id");
    if (!v || !std::isfinite(*v)) throw invalid_input(where + "bad score");
    if (require_non_negative && *v < 0.0) {
      throw invalid_input(where + "negative score for node " + std::to_string(*id));
    }
    const auto i = static_cast<std::size_t>(*id);
    if (i >= values.size()) {
      values.resize(i + 1, 0.0);
      seen.resize(i + 1, false);
    }
    if (seen[i]) throw invalid_input(where + "duplicate node id " + std::to_string(i));
    seen[i] = true;
    values[i] = *v;
  }
  const auto n = expected_nodes ? expected_nodes : values.size();
  if (values.size() > n) {
    throw invalid_input(origin + ": node id " + std::to_string(values.size() - 1) +
                        " out of range");
  }
  seen.resize(n, false);
  values.resize(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) throw invalid_input(origin + ": missing score for node " + std::to_string(i));
  }
  return values;
}

inline ImportanceScores import_scores(const std::string& path, std::size_t expected_nodes = 0) {
  auto in = text::open_input(path);
  ImportanceScores s;
  s.aff = read_score_csv(in, path, expected_nodes);
  s.provenance = Provenance::kImported;
  return s;
}

inline void export_scores(const ImportanceScores& s, const std::string& path) {
  auto out = text::open_output(path);
  write_score_csv(out, s.aff, "aff");
}

}  // namespace roadrank
