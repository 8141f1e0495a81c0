// Benchmark: OpenMP forward/adjoint kernels against the serial reference,
// with a bitwise cross-check of the results.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "boltzgrad/adjoint.hpp"
#include "boltzgrad/forward.hpp"
#include "boltzgrad/reduce.hpp"

using namespace boltzgrad;

namespace {

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s < best) best = s;
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forward/adjoint benchmark: serial reference vs OpenMP kernels"};
  std::int64_t n = 200000;
  int m = 20;
  double kappa = 2.0, beta = 1.0;
  std::string threads_list = "1,2,4";
  std::uint64_t seed = 7;
  int reps = 3;
  app.add_option("--n", n, "particles");
  app.add_option("--m-steps", m, "time steps");
  app.add_option("--kappa", kappa, "angular exponent");
  app.add_option("--beta", beta, "velocity exponent");
  app.add_option("--threads", threads_list, "comma-separated thread counts");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--reps", reps, "repetitions (best-of)");
  CLI11_PARSE(app, argc, argv);

  SimConfig cfg;
  cfg.n_particles = n;
  cfg.n_steps = m;
  cfg.kernel = make_kernel_spec(kappa, beta, 10.0);
  cfg.seed = seed;
  validate(cfg);

  std::printf("n=%lld m=%d kappa=%g beta=%g\n", static_cast<long long>(n), m, kappa, beta);
  std::printf("%-12s %10s %10s %10s %8s\n", "impl", "forward[s]", "adjoint[s]", "total[s]",
              "speedup");

  ForwardResult ref_fwd;
  GradientResult ref_grad;
  const double ref_f = time_best_of(reps, [&] { ref_fwd = ref::run_forward(cfg); });
  const double ref_a =
      time_best_of(reps, [&] { ref_grad = ref::adjoint_gradient(ref_fwd, cfg, Objective::Ty); });
  std::printf("%-12s %10.4f %10.4f %10.4f %8s\n", "serial-ref", ref_f, ref_a, ref_f + ref_a, "1.00");

  std::vector<int> counts;
  {
    std::size_t pos = 0;
    while (pos <= threads_list.size()) {
      const auto comma = threads_list.find(',', pos);
      const std::string tok =
          threads_list.substr(pos, comma == std::string::npos ? comma : comma - pos);
      if (!tok.empty()) counts.push_back(std::stoi(tok));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }

  bool all_match = true;
  for (const int t : counts) {
    set_thread_count(t);
    ForwardResult fwd;
    GradientResult grad;
    const double tf = time_best_of(reps, [&] { fwd = run_forward(cfg); });
    const double ta = time_best_of(reps, [&] { grad = adjoint_gradient(fwd, cfg, Objective::Ty); });
    const bool match =
        fwd.final_ensemble.v == ref_fwd.final_ensemble.v && grad.grad == ref_grad.grad;
    all_match = all_match && match;
    char label[32];
    std::snprintf(label, sizeof label, "omp-%d", t);
    std::printf("%-12s %10.4f %10.4f %10.4f %8.2f%s\n", label, tf, ta, tf + ta,
                (ref_f + ref_a) / (tf + ta), match ? "" : "  MISMATCH");
  }
  std::printf("result check: %s\n", all_match ? "all implementations agree bitwise" : "MISMATCH");
  return all_match ? 0 : 1;
}
