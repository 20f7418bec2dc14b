#pragma once

// Error metric and the seeded sweep harness behind the benchmark reports.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sosra/baselines.hpp"
#include "sosra/precondition.hpp"
#include "sosra/problem.hpp"
#include "sosra/quat.hpp"
#include "sosra/sbsos.hpp"

namespace sosra {

/// (1/N) sum_i min(|q_i - p_i|, |q_i + p_i|).
inline double mean_quaternion_norm_error(const std::vector<UnitQuaternion>& estimate,
                                         const std::vector<UnitQuaternion>& truth) {
  if (estimate.size() != truth.size()) {
    throw std::invalid_argument("mean_quaternion_norm_error: " + std::to_string(estimate.size()) + " vs " +
                                std::to_string(truth.size()) + " quaternions");
  }
  if (truth.empty()) throw std::invalid_argument("mean_quaternion_norm_error: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += quaternion_distance(estimate[i], truth[i]);
  return s / static_cast<double>(truth.size());
}

enum class Method { kSbsos, kFredriksson, kLocal };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::kSbsos:
      return "sbsos";
    case Method::kFredriksson:
      return "fredriksson";
    case Method::kLocal:
      return "local";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  if (s == "sbsos") return Method::kSbsos;
  if (s == "fredriksson") return Method::kFredriksson;
  if (s == "local") return Method::kLocal;
  throw std::invalid_argument("unknown method '" + s + "' (expected sbsos, fredriksson or local)");
}

struct RunRecord {
  std::string method;
  int n = 0;
  int n_l = 0;
  double theta_max = 0.0;
  std::uint64_t seed = 0;
  double cost = std::numeric_limits<double>::quiet_NaN();
  double t_star = std::numeric_limits<double>::quiet_NaN();
  double gap_rel = std::numeric_limits<double>::quiet_NaN();
  double mean_quat_err = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  std::string verdict;
  int largest_psd_block = 0;
};

struct SweepGrid {
  std::vector<int> n;
  std::vector<int> n_l;
  std::vector<double> theta_max;  // radians
  std::vector<std::uint64_t> seeds;
  std::vector<Method> methods;
  PipelineOptions options;
};

/// Keys: "N", "n_l", "seeds" (list) or "num_seeds" (+ optional "seed_base"),
/// "methods", and either "theta_max" (radians) or "theta_max_over_pi".
inline SweepGrid parse_grid(const nlohmann::json& j) {
  SweepGrid g;
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw std::invalid_argument(std::string("grid: missing key '") + key + "'");
    return j.at(key);
  };
  try {
    g.n = need("N").get<std::vector<int>>();
    g.n_l = need("n_l").get<std::vector<int>>();
    if (j.contains("theta_max")) {
      g.theta_max = j.at("theta_max").get<std::vector<double>>();
    } else {
      for (const double t : need("theta_max_over_pi").get<std::vector<double>>()) {
        g.theta_max.push_back(t * std::numbers::pi);
      }
    }
    if (j.contains("seeds")) {
      g.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
      const int count = need("num_seeds").get<int>();
      const std::uint64_t base = j.value("seed_base", std::uint64_t{0});
      for (int s = 0; s < count; ++s) g.seeds.push_back(base + static_cast<std::uint64_t>(s));
    }
    const std::vector<std::string> methods =
        j.contains("methods") ? j.at("methods").get<std::vector<std::string>>() : std::vector<std::string>{"sbsos", "local"};
    for (const auto& m : methods) g.methods.push_back(parse_method(m));
    if (j.contains("cert_tol")) g.options.cert_tol = j.at("cert_tol").get<double>();
    if (j.contains("partition")) {
      const std::string p = j.at("partition").get<std::string>();
      if (p != "jt" && p != "single") throw std::invalid_argument("grid: partition must be 'jt' or 'single'");
      g.options.junction_tree = p == "jt";
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("grid: ") + e.what());
  }
  for (const int n : g.n) {
    if (n < 2) throw std::invalid_argument("grid: N must be >= 2");
  }
  for (const int l : g.n_l) {
    if (l < 0) throw std::invalid_argument("grid: n_l must be >= 0");
  }
  for (const double t : g.theta_max) {
    if (!(t >= 0.0 && t <= std::numbers::pi + 1e-12)) throw std::invalid_argument("grid: theta_max outside [0, pi]");
  }
  if (g.n.empty() || g.n_l.empty() || g.theta_max.empty() || g.seeds.empty() || g.methods.empty()) {
    throw std::invalid_argument("grid: every axis needs at least one value");
  }
  return g;
}

inline SweepGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open grid file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("grid file " + path + ": " + e.what());
  }
  return parse_grid(j);
}

/// All requested methods on one instance, in the grid's method order.
inline std::vector<RunRecord> run_instance(const SweepGrid& grid, int n, int n_l, double theta, std::uint64_t seed) {
  std::vector<RunRecord> out;
  auto base = [&](Method m) {
    RunRecord r;
    r.method = to_string(m);
    r.n = n;
    r.n_l = n_l;
    r.theta_max = std::min(theta, std::numbers::pi);
    r.seed = seed;
    return r;
  };
  std::optional<MeasurementGraph> g;
  try {
    g = generate_synthetic({n, n_l, std::min(theta, std::numbers::pi), seed});
  } catch (const std::exception&) {
    g.reset();
  }
  for (const Method m : grid.methods) {
    RunRecord r = base(m);
    if (!g) {
      r.verdict = "error";
      out.push_back(r);
      continue;
    }
    try {
      const auto start = std::chrono::steady_clock::now();
      if (m == Method::kLocal) {
        const SignSelection sel = quaternion_signs(*g);
        const LocalResult lr = local_solve(*g, sel.signs, sel.chained, grid.options.local);
        r.wall_ms = elapsed_ms(start);
        r.cost = lr.cost;
        r.mean_quat_err = mean_quaternion_norm_error(lr.solution, *g->truth());
        r.verdict = lr.converged ? "converged" : "not-converged";
      } else {
        const PipelineResult pr = m == Method::kSbsos ? solve_sbsos(*g, grid.options) : solve_fredriksson(*g, grid.options);
        r.wall_ms = elapsed_ms(start);
        r.cost = pr.certificate.cost;
        r.t_star = pr.certificate.t_star;
        r.gap_rel = pr.certificate.gap_rel;
        r.mean_quat_err = mean_quaternion_norm_error(pr.certificate.quaternions, *g->truth());
        r.verdict = to_string(pr.certificate.verdict);
        for (const int d : pr.psd_dims) r.largest_psd_block = std::max(r.largest_psd_block, d);
      }
    } catch (const std::exception&) {
      r.verdict = "error";
    }
    out.push_back(r);
  }
  return out;
}

struct SweepResult {
  std::vector<RunRecord> records;  // grid order: N, n_l, theta_max, seed, method
  bool all_sbsos_certified = true;
};

inline int default_worker_count() {
  if (const char* env = std::getenv("SOSRA_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

inline SweepResult run_sweep(const SweepGrid& grid, int workers = 1) {
  using Cell = std::tuple<int, int, double, std::uint64_t>;
  std::vector<Cell> cells;
  for (const int n : grid.n) {
    for (const int l : grid.n_l) {
      for (const double t : grid.theta_max) {
        for (const std::uint64_t s : grid.seeds) cells.emplace_back(n, l, t, s);
      }
    }
  }
  std::vector<std::vector<RunRecord>> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& [n, l, t, s] = cells[i];
      results[i] = run_instance(grid, n, l, t, s);
    }
  };
  const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
  if (nthreads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nthreads; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  SweepResult out;
  for (auto& rs : results) {
    for (auto& r : rs) {
      if (r.method == "sbsos" && r.verdict != "certified-optimal") out.all_sbsos_certified = false;
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports.

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kRecordCsvHeader =
    "method,N,n_l,theta_max,seed,cost,t_star,gap_rel,mean_quat_err,wall_ms,verdict";

/// With include_timing = false the wall_ms column is left empty, which makes
/// the output byte-stable across runs.
inline void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records, bool include_timing = true) {
  out << kRecordCsvHeader << "\n";
  for (const auto& r : records) {
    out << r.method << ',' << r.n << ',' << r.n_l << ',' << format_number(r.theta_max) << ',' << r.seed << ','
        << format_number(r.cost) << ',' << format_number(r.t_star) << ',' << format_number(r.gap_rel) << ','
        << format_number(r.mean_quat_err) << ',' << (include_timing ? format_number(r.wall_ms) : "") << ','
        << r.verdict << "\n";
  }
}

inline nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

inline nlohmann::json records_to_json(const std::vector<RunRecord>& records, bool include_timing = true) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    arr.push_back({{"method", r.method},
                   {"N", r.n},
                   {"n_l", r.n_l},
                   {"theta_max", r.theta_max},
                   {"seed", r.seed},
                   {"cost", number_or_null(r.cost)},
                   {"t_star", number_or_null(r.t_star)},
                   {"gap_rel", number_or_null(r.gap_rel)},
                   {"mean_quat_err", number_or_null(r.mean_quat_err)},
                   {"wall_ms", include_timing ? nlohmann::json(r.wall_ms) : nlohmann::json(nullptr)},
                   {"verdict", r.verdict}});
  }
  return arr;
}

/// Inclusive quantile: linear interpolation at position p (n - 1).
inline double quantile_inclusive(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Stats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
};

inline Stats describe(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (const double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.q1 = quantile_inclusive(v, 0.25);
  s.q3 = quantile_inclusive(v, 0.75);
  return s;
}

struct SummaryRow {
  std::string method;
  int n = 0;
  int n_l = 0;
  double theta_max = 0.0;
  int runs = 0;
  int certified = 0;
  int largest_psd_block = 0;
  Stats cost, error, wall_ms;
};

/// One row per (method, N, n_l, theta_max) in first-appearance order.
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> rows;
  std::vector<std::vector<const RunRecord*>> members;
  std::map<std::tuple<std::string, int, int, double>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.method, r.n, r.n_l, r.theta_max);
    auto [it, inserted] = index.emplace(key, rows.size());
    if (inserted) {
      SummaryRow s;
      s.method = r.method;
      s.n = r.n;
      s.n_l = r.n_l;
      s.theta_max = r.theta_max;
      rows.push_back(s);
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> cost, err, wall;
    for (const RunRecord* r : members[i]) {
      ++rows[i].runs;
      rows[i].certified += r->verdict == "certified-optimal";
      rows[i].largest_psd_block = std::max(rows[i].largest_psd_block, r->largest_psd_block);
      if (!std::isnan(r->cost)) cost.push_back(r->cost);
      if (!std::isnan(r->mean_quat_err)) err.push_back(r->mean_quat_err);
      wall.push_back(r->wall_ms);
    }
    rows[i].cost = describe(cost);
    rows[i].error = describe(err);
    rows[i].wall_ms = describe(wall);
  }
  return rows;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "# quartiles: inclusive method, linear interpolation at p*(n-1)\n";
  out << "method,N,n_l,theta_max,runs,certified,largest_psd_block,cost_mean,cost_q1,cost_q3,"
         "err_mean,err_q1,err_q3,wall_ms_mean,wall_ms_q1,wall_ms_q3\n";
  for (const auto& s : rows) {
    out << s.method << ',' << s.n << ',' << s.n_l << ',' << format_number(s.theta_max) << ',' << s.runs << ','
        << s.certified << ',' << s.largest_psd_block << ',' << format_number(s.cost.mean) << ','
        << format_number(s.cost.q1) << ',' << format_number(s.cost.q3) << ',' << format_number(s.error.mean) << ','
        << format_number(s.error.q1) << ',' << format_number(s.error.q3) << ',' << format_number(s.wall_ms.mean)
        << ',' << format_number(s.wall_ms.q1) << ',' << format_number(s.wall_ms.q3) << "\n";
  }
}

inline nlohmann::json summary_to_json(const std::vector<SummaryRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  auto stats = [](const Stats& s) {
    return nlohmann::json{{"mean", number_or_null(s.mean)}, {"q1", number_or_null(s.q1)}, {"q3", number_or_null(s.q3)}};
  };
  for (const auto& s : rows) {
    arr.push_back({{"method", s.method},
                   {"N", s.n},
                   {"n_l", s.n_l},
                   {"theta_max", s.theta_max},
                   {"runs", s.runs},
                   {"certified", s.certified},
                   {"largest_psd_block", s.largest_psd_block},
                   {"cost", stats(s.cost)},
                   {"mean_quat_err", stats(s.error)},
                   {"wall_ms", stats(s.wall_ms)}});
  }
  return arr;
}

}  // namespace sosra
