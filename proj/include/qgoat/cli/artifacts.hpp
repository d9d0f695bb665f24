#pragma once

// Run directory contents: CSV series with `name[unit]` headers, a JSON summary
// and the resolved config snapshot, plus a validator for all of them.

#include "qgoat/alternating.hpp"
#include "qgoat/cli/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace qgoat::cli {

namespace fs = std::filesystem;

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header, bool flush_rows = false)
      : out_(path), flush_(flush_rows), columns_(header.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    write_cells(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::logic_error("CsvWriter: column count mismatch");
    write_cells(cells);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(detail::format_double(v));
    row(cells);
  }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
    if (flush_) out_.flush();
  }

  std::ofstream out_;
  bool flush_;
  std::size_t columns_;
};

namespace columns {
inline const std::vector<std::string> convergence{
    "iteration[count]", "objective[1]",   "grad_inf[1]",         "goat_solves[count]",
    "unitary_solves[count]", "wall_time[s]", "theta_round[count]"};
inline const std::vector<std::string> theta_refresh{"iteration[count]", "round[count]",
                                                    "objective_before[1]", "objective_after[1]",
                                                    "best_start[index]"};
inline const std::vector<std::string> pulse{"time[ns]", "gamma1[rad/ns]", "basis_sum[rad/ns]",
                                            "window[rad/ns]"};
inline const std::vector<std::string> spectrum{"frequency[GHz]", "magnitude[rad]"};
inline const std::vector<std::string> transitions{"label[text]", "frequency[GHz]"};
inline const std::vector<std::string> gradcheck{"index[count]", "role[text]", "analytic[1]",
                                                "finite_difference[1]", "rel_error[1]"};
inline const std::vector<std::string> compare{"kind[text]", "duration[ns]", "objective[1]",
                                              "iterations[count]", "goat_solves[count]",
                                              "unitary_solves[count]", "reason[text]"};

inline std::vector<std::string> populations(int levels) {
  std::vector<std::string> h{"time[ns]"};
  for (int a = 0; a < levels; ++a)
    for (int b = 0; b < levels; ++b) h.push_back("p" + std::to_string(a) + std::to_string(b) + "[1]");
  return h;
}
}  // namespace columns

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline nlohmann::json summary_json(const RunConfig& cfg, const OptResult& r) {
  nlohmann::json j;
  j["objective_kind"] = kind_name(cfg.objective.kind);
  j["target"] = cfg.objective.target;
  j["seed"] = cfg.seed;
  j["n_basis"] = r.alpha.n_basis();
  j["duration_ns"] = cfg.duration();
  j["final_objective"] = r.objective;
  j["termination_reason"] = std::string(to_string(r.reason));
  j["iterations"] = r.iterations;
  j["goat_solves"] = r.goat_solves;
  j["unitary_solves"] = r.unitary_solves;
  j["theta"] = r.theta;
  j["alpha"] = r.alpha.values();
  double best = r.objective;
  for (const auto& row : r.trace.rows) best = std::min(best, row.objective);
  j["best_objective"] = best;
  j["message"] = r.message;
  return j;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

// ---------------------------------------------------------------- schema

namespace detail {

inline bool valid_utf8(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    const std::size_t n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (n == 0 || i + n > s.size()) return false;
    for (std::size_t k = 1; k < n; ++k)
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    i += n;
  }
  return true;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline void check_csv(const fs::path& path, const std::vector<std::string>* expected,
                      std::vector<std::string>& problems) {
  const std::string name = path.filename().string();
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string body = ss.str();
  if (!valid_utf8(body)) {
    problems.push_back(name + ": not valid UTF-8");
    return;
  }
  std::istringstream lines(body);
  std::string line;
  if (!std::getline(lines, line) || line.empty()) {
    problems.push_back(name + ": missing header row");
    return;
  }
  const auto header = split_csv(line);
  static const std::regex col(R"([A-Za-z_][A-Za-z0-9_]*\[[^\]]+\])");
  std::vector<bool> is_text;
  for (const auto& h : header) {
    if (!std::regex_match(h, col)) problems.push_back(name + ": header cell '" + h + "' lacks a [unit]");
    is_text.push_back(h.ends_with("[text]"));
  }
  if (expected && header != *expected) problems.push_back(name + ": unexpected header '" + line + "'");
  std::size_t row = 1;
  while (std::getline(lines, line)) {
    ++row;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      problems.push_back(name + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                         " cells, header has " + std::to_string(header.size()));
      continue;
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (is_text[c]) continue;
      double v = 0;
      const auto [p, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      if (ec != std::errc{} || p != cells[c].data() + cells[c].size() || !std::isfinite(v)) {
        problems.push_back(name + ": row " + std::to_string(row) + " column " + header[c] + " is not a finite number");
        break;
      }
    }
  }
}

}  // namespace detail

/// Empty result means the directory is a valid artifact directory.
inline std::vector<std::string> schema_problems(const fs::path& dir) {
  std::vector<std::string> problems;
  if (!fs::is_directory(dir)) return {dir.string() + ": not a directory"};
  const std::map<std::string, const std::vector<std::string>*> known{
      {"convergence.csv", &columns::convergence}, {"theta_refresh.csv", &columns::theta_refresh},
      {"pulse.csv", &columns::pulse},             {"spectrum.csv", &columns::spectrum},
      {"spectrum_transitions.csv", &columns::transitions}, {"gradcheck.csv", &columns::gradcheck},
      {"compare.csv", &columns::compare}};
  std::size_t recognized = 0;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    if (fs::is_directory(p)) continue;
    const std::string name = p.filename().string();
    if (p.extension() == ".csv") {
      ++recognized;
      const auto it = known.find(name);
      if (name == "populations.csv") {
        std::ifstream in(p);
        std::string header;
        std::getline(in, header);
        const auto cells = detail::split_csv(header);
        const int levels = static_cast<int>(std::lround(std::sqrt(double(cells.size() - 1))));
        const auto expected = columns::populations(levels);
        detail::check_csv(p, &expected, problems);
      } else {
        detail::check_csv(p, it == known.end() ? nullptr : it->second, problems);
      }
    } else if (name == "summary.json") {
      ++recognized;
      try {
        const auto j = read_json(p);
        for (const char* key : {"objective_kind", "final_objective", "termination_reason", "theta", "alpha",
                                "iterations", "goat_solves", "seed"})
          if (!j.contains(key)) problems.push_back("summary.json: missing key '" + std::string(key) + "'");
      } catch (const std::exception& e) {
        problems.push_back(std::string("summary.json: ") + e.what());
      }
    } else if (name == "config.resolved.txt") {
      ++recognized;
      try {
        load_config(p);
      } catch (const ConfigError& e) {
        problems.push_back(std::string("config.resolved.txt: ") + e.what());
      }
    }
  }
  if (recognized == 0) problems.push_back(dir.string() + ": no artifact files found");
  if (fs::exists(dir / "summary.json") && !fs::exists(dir / "config.resolved.txt"))
    problems.push_back("summary.json present without config.resolved.txt");
  return problems;
}

}  // namespace qgoat::cli
