// sosra: generate instances, solve them with a certificate, run sweeps.
//
// Exit codes: 0 certified (or local convergence), 1 uncertified or solver
// failure, 2 usage or input error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sosra/sosra.hpp"

namespace {

constexpr int kExitCertified = 0;
constexpr int kExitUncertified = 1;
constexpr int kExitUsage = 2;

struct GenerateArgs {
  int n = 5;
  int loops = 0;
  double theta_max = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct SolveArgs {
  std::string in;
  std::string method = "sbsos";
  std::string partition = "jt";
  double cert_tol = sosra::kDefaultCertTolerance;
  std::string json_out;
  std::string export_sdp;
  bool no_boxes = false;
};

struct BenchArgs {
  std::string grid_file;
  std::string out_dir = ".";
  int workers = 1;
  bool no_timing = false;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_generate(const GenerateArgs& a) {
  const sosra::MeasurementGraph g = sosra::generate_synthetic({a.n, a.loops, a.theta_max, a.seed});
  if (a.out.empty() || a.out == "-") {
    std::cout << sosra::to_text(g);
    std::cerr << g.num_edges() << " edges\n";
  } else {
    sosra::save(g, a.out);
    std::cout << g.num_edges() << " edges\n";
  }
  return kExitCertified;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

int run_solve(const SolveArgs& a) {
  const sosra::MeasurementGraph g = sosra::load(a.in);
  const sosra::Method method = sosra::parse_method(a.method);
  sosra::PipelineOptions opts;
  opts.cert_tol = a.cert_tol;
  opts.junction_tree = a.partition == "jt";
  opts.redundant_boxes = !a.no_boxes;

  const sosra::SignSelection sel = sosra::quaternion_signs(g);
  if (!a.export_sdp.empty()) {
    std::ofstream out(a.export_sdp);
    if (!out) throw std::runtime_error("cannot write '" + a.export_sdp + "'");
    if (method == sosra::Method::kFredriksson) {
      sosra::write_sdpa(sosra::build_fredriksson_sdp(g, sel.signs).sdp, out);
    } else {
      const int cpv = a.no_boxes ? sosra::kNormConstraintsPerVertex : sosra::kConstraintsPerVertex;
      const auto part = opts.junction_tree ? sosra::junction_tree_partition(g, cpv)
                                           : sosra::single_block_partition(g, cpv);
      sosra::write_sdpa(sosra::build_relaxation(g, sel.signs, part).sdp, out);
    }
  }

  if (method == sosra::Method::kLocal) {
    const sosra::LocalResult r = sosra::local_solve(g, sel.signs, sel.chained);
    std::cout << "method local\ncost " << fmt(r.cost) << "\niterations " << r.iterations << "\nconverged "
              << (r.converged ? "yes" : "no") << "\n";
    nlohmann::json quats = nlohmann::json::array();
    for (const auto& q : r.solution) quats.push_back({q.w(), q.x(), q.y(), q.z()});
    write_json(a.json_out, {{"method", "local"},
                            {"cost", r.cost},
                            {"iterations", r.iterations},
                            {"converged", r.converged},
                            {"per_vertex_quaternions", quats}});
    return r.converged ? kExitCertified : kExitUncertified;
  }

  const sosra::PipelineResult r = method == sosra::Method::kSbsos ? sosra::solve_sbsos_with_signs(g, sel, opts)
                                                                  : sosra::solve_fredriksson_with_signs(g, sel, opts);
  const sosra::Certificate& c = r.certificate;
  std::cout << "method " << a.method << "\nsdp_status " << c.solver_message << "\nt_star " << fmt(c.t_star)
            << "\ncost " << fmt(c.cost) << "\ngap_abs " << fmt(c.gap_abs) << "\ngap_rel " << fmt(c.gap_rel)
            << "\nverdict " << sosra::to_string(c.verdict) << "\n";
  if (c.low_confidence_extraction) std::cout << "warning low-confidence-extraction\n";
  for (std::size_t v = 0; v < c.quaternions.size(); ++v) {
    const auto& q = c.quaternions[v];
    std::cout << "q " << v + 1 << " " << fmt(q.w()) << " " << fmt(q.x()) << " " << fmt(q.y()) << " " << fmt(q.z())
              << "\n";
  }
  nlohmann::json j = sosra::to_json(c);
  j["method"] = a.method;
  write_json(a.json_out, j);
  return c.verdict == sosra::Verdict::kCertifiedOptimal ? kExitCertified : kExitUncertified;
}

int run_bench(const BenchArgs& a) {
  const sosra::SweepGrid grid = sosra::load_grid(a.grid_file);
  const sosra::SweepResult res = sosra::run_sweep(grid, a.workers);
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  {
    std::ofstream out(dir / "runs.csv");
    sosra::write_records_csv(out, res.records, !a.no_timing);
  }
  const auto summary = sosra::summarize(res.records);
  {
    std::ofstream out(dir / "summary.csv");
    sosra::write_summary_csv(out, summary);
  }
  write_json((dir / "runs.json").string(),
             {{"records", sosra::records_to_json(res.records, !a.no_timing)}, {"summary", sosra::summary_to_json(summary)}});
  int sbsos_runs = 0;
  int certified = 0;
  for (const auto& r : res.records) {
    if (r.method != "sbsos") continue;
    ++sbsos_runs;
    certified += r.verdict == "certified-optimal";
  }
  std::cout << res.records.size() << " runs written to " << a.out_dir << "\n";
  std::cout << "sbsos certified " << certified << "/" << sbsos_runs << "\n";
  return res.all_sbsos_certified ? kExitCertified : kExitUncertified;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certifiably optimal rotation averaging over unit quaternions"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a random synthetic instance");
  generate->add_option("--n", gen.n, "Number of rotations")->required()->check(CLI::Range(2, 100000));
  generate->add_option("--loops", gen.loops, "Loop closures added to the chain")->check(CLI::NonNegativeNumber);
  generate->add_option("--theta-max", gen.theta_max, "Maximum measurement noise angle in radians")
      ->check(CLI::Range(0.0, std::numbers::pi));
  generate->add_option("--seed", gen.seed, "Random seed");
  generate->add_option("--out", gen.out, "Output file ('-' or omitted: stdout)");

  SolveArgs sol;
  auto* solve = app.add_subcommand("solve", "Solve an instance and certify the result");
  solve->add_option("--in", sol.in, "Instance file")->required();
  solve->add_option("--method", sol.method, "sbsos, fredriksson or local")
      ->check(CLI::IsMember({"sbsos", "fredriksson", "local"}));
  solve->add_option("--partition", sol.partition, "jt (junction tree) or single")
      ->check(CLI::IsMember({"jt", "single"}));
  solve->add_option("--cert-tol", sol.cert_tol, "Relative certification tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--json-out", sol.json_out, "Write the certificate as JSON");
  solve->add_option("--export-sdp", sol.export_sdp, "Write the SDP in SDPA sparse format");
  solve->add_flag("--no-boxes", sol.no_boxes, "Drop the redundant box constraints");

  BenchArgs bench;
  bench.workers = sosra::default_worker_count();
  auto* bench_cmd = app.add_subcommand("bench", "Run a seeded sweep and write CSV/JSON reports");
  bench_cmd->add_option("--grid-file", bench.grid_file, "Sweep grid (JSON)")->required();
  bench_cmd->add_option("--out-dir", bench.out_dir, "Output directory");
  bench_cmd->add_option("--workers", bench.workers, "Worker threads (default: $SOSRA_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--no-timing", bench.no_timing, "Leave wall_ms empty for byte-stable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return run_generate(gen);
    if (solve->parsed()) return run_solve(sol);
    if (bench_cmd->parsed()) return run_bench(bench);
  } catch (const sosra::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sosra::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUncertified;
  }
  return kExitUsage;
}
