// Generates one noisy instance, certifies it with the sparse relaxation and
// compares against the dense relaxation and the local baseline.

#include <cstdio>
#include <numbers>

#include "sosra/sosra.hpp"

int main() {
  const sosra::MeasurementGraph g = sosra::generate_synthetic({8, 4, 0.9 * std::numbers::pi, 7});
  const auto sparse = sosra::solve_sbsos(g);
  const auto dense = sosra::solve_fredriksson(g);
  const auto sel = sosra::quaternion_signs(g);
  const auto local = sosra::local_solve(g, sel.signs, sel.chained);

  std::printf("%-12s %14s %14s %12s %s\n", "method", "cost", "bound", "error", "verdict");
  for (const auto* r : {&sparse, &dense}) {
    const auto& c = r->certificate;
    std::printf("%-12s %14.9f %14.9f %12.6f %s\n", r == &sparse ? "sbsos" : "fredriksson", c.cost, c.t_star,
                sosra::mean_quaternion_norm_error(c.quaternions, *g.truth()), sosra::to_string(c.verdict));
  }
  std::printf("%-12s %14.9f %14s %12.6f %s\n", "local", local.cost, "-",
              sosra::mean_quaternion_norm_error(local.solution, *g.truth()),
              local.converged ? "converged" : "not-converged");
  return sparse.certificate.verdict == sosra::Verdict::kCertifiedOptimal ? 0 : 1;
}
