#include "boltzgrad/experiment.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "boltzgrad/forward.hpp"
#include "boltzgrad/reduce.hpp"

namespace boltzgrad {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace {

std::string timestamp_line() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::array<char, 64> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string("# generated ") + buf.data();
}

std::ofstream open_csv(const std::string& path, bool timestamp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  if (timestamp) out << timestamp_line() << "\n";
  return out;
}

const std::array<const char*, 3> kParamNames{"Tx0", "Ty0", "Tz0"};

std::string sweep_value_string(SweepAxis axis, double v) {
  if (axis == SweepAxis::Kappa) return format_double(v);
  return std::to_string(static_cast<std::int64_t>(std::llround(v)));
}

SimConfig config_for_value(const ExperimentPlan& plan, double v) {
  SimConfig cfg = plan.base;
  switch (plan.axis) {
    case SweepAxis::N: {
      const auto n = static_cast<std::int64_t>(std::llround(v));
      if (n <= 0 || std::abs(v - static_cast<double>(n)) > 1e-9)
        throw std::invalid_argument("experiment: N sweep values must be positive integers");
      cfg.n_particles = n;
      break;
    }
    case SweepAxis::M: {
      const auto m = static_cast<std::int64_t>(std::llround(v));
      if (m < 0 || std::abs(v - static_cast<double>(m)) > 1e-9)
        throw std::invalid_argument("experiment: M sweep values must be nonnegative integers");
      cfg.n_steps = static_cast<std::int32_t>(m);
      break;
    }
    case SweepAxis::Kappa:
      cfg.kernel = make_kernel_spec(v, plan.base.kernel.beta, plan.base.kernel.epsilon,
                                    plan.sigma_v_override);
      break;
  }
  validate(cfg);
  return cfg;
}

struct RowStats {
  std::array<double, 3> mean{}, std_of_mean{};
};

// Per-parameter statistics of one objective extracted from the matrix
// batches. The energy objective is the sum of the three component moments,
// and the adjoint recursion is linear in the final data, so its gradient row
// is the per-run sum of the component rows.
RowStats objective_row_stats(const MatrixStatistics& ms, Objective o) {
  const auto row_value = [&](const GradientMatrix& g, int p) {
    switch (o) {
      case Objective::Tx: return g.g[0][static_cast<std::size_t>(p)];
      case Objective::Ty: return g.g[1][static_cast<std::size_t>(p)];
      case Objective::Tz: return g.g[2][static_cast<std::size_t>(p)];
      default:
        return g.g[0][static_cast<std::size_t>(p)] + g.g[1][static_cast<std::size_t>(p)] +
               g.g[2][static_cast<std::size_t>(p)];
    }
  };
  RowStats rs;
  for (int p = 0; p < 3; ++p) {
    const double shift = row_value(ms.per_run.front(), p);
    double acc = 0.0;
    for (const auto& g : ms.per_run) acc += row_value(g, p) - shift;
    const double mean = shift + acc / ms.m_s;
    double var = 0.0;
    for (const auto& g : ms.per_run) {
      const double d = row_value(g, p) - mean;
      var += d * d;
    }
    rs.mean[static_cast<std::size_t>(p)] = mean;
    rs.std_of_mean[static_cast<std::size_t>(p)] =
        ms.m_s > 1 ? std::sqrt(var / (ms.m_s - 1)) / std::sqrt(static_cast<double>(ms.m_s)) : 0.0;
  }
  return rs;
}

}  // namespace

std::vector<std::string> run_experiment(const ExperimentPlan& plan) {
  if (plan.values.empty()) throw std::invalid_argument("experiment: empty sweep value list");
  if (plan.objectives.empty()) throw std::invalid_argument("experiment: no objectives");
  if (plan.m_s < 2) throw std::invalid_argument("experiment: need at least 2 runs");

  const BTildeMode mode = plan.ablate_btilde ? BTildeMode::Off : BTildeMode::Auto;

  // One adjoint batch and one finite-difference batch per sweep value; all
  // objectives share them.
  std::vector<MatrixStatistics> ad_stats, fd_stats;
  ad_stats.reserve(plan.values.size());
  fd_stats.reserve(plan.values.size());
  for (const double v : plan.values) {
    const SimConfig cfg = config_for_value(plan, v);
    ad_stats.push_back(
        batch_gradient_matrices(cfg, Method::Adjoint, plan.m_s, cfg.seed, mode, plan.delta_m));
    fd_stats.push_back(batch_gradient_matrices(cfg, Method::FiniteDifference, plan.m_s, cfg.seed,
                                               mode, plan.delta_m));
  }

  std::vector<std::string> written;
  for (const Objective obj : plan.objectives) {
    const std::string path = plan.out_prefix + "_" + objective_name(obj) + ".csv";
    std::ofstream out = open_csv(path, plan.timestamp);
    out << "sweep_value,parameter,grad_adjoint_mean,grad_adjoint_std,grad_fd_mean,"
           "grad_fd_std,error_e,wall_time_forward,wall_time_adjoint,bound_violations\n";
    for (std::size_t vi = 0; vi < plan.values.size(); ++vi) {
      const RowStats ad = objective_row_stats(ad_stats[vi], obj);
      const RowStats fd = objective_row_stats(fd_stats[vi], obj);
      // Wall times are zeroed without the timestamp header so reruns are
      // byte-identical.
      const double tf = plan.timestamp ? ad_stats[vi].mean_forward_seconds : 0.0;
      const double ta = plan.timestamp ? ad_stats[vi].mean_adjoint_seconds : 0.0;
      for (std::size_t p = 0; p < 3; ++p) {
        const double e = std::abs(ad.mean[p] - fd.mean[p]);
        out << sweep_value_string(plan.axis, plan.values[vi]) << ',' << kParamNames[p] << ','
            << format_double(ad.mean[p]) << ',' << format_double(ad.std_of_mean[p]) << ','
            << format_double(fd.mean[p]) << ',' << format_double(fd.std_of_mean[p]) << ','
            << format_double(e) << ',' << format_double(tf) << ',' << format_double(ta) << ','
            << ad_stats[vi].bound_violations << "\n";
      }
    }
    if (!out) throw std::runtime_error("write failure on " + path);
    written.push_back(path);
  }
  return written;
}

std::string run_relaxation(const SimConfig& cfg, const std::string& out_path, bool timestamp) {
  validate(cfg);
  std::ofstream out = open_csv(out_path, timestamp);
  out << "t,Tx,Ty,Tz,energy\n";
  SimConfig c = cfg;
  c.record_policy = RecordPolicy::None;
  auto init = init_ensemble(c);
  VelocityEnsemble ens = std::move(init.ensemble);
  const auto emit = [&](double t) {
    const auto temps = component_temperatures(ens);
    const double energy = temps[0] + temps[1] + temps[2];
    out << format_double(t) << ',' << format_double(temps[0]) << ',' << format_double(temps[1])
        << ',' << format_double(temps[2]) << ',' << format_double(energy) << "\n";
  };
  emit(0.0);
  StepDiagnostics diag;
  for (std::int32_t k = 0; k < c.n_steps; ++k) {
    if (c.algorithm == Algorithm::Separable)
      step_separable(ens, c, diag);
    else
      step_general(ens, c, diag);
    emit((k + 1) * c.dt);
  }
  if (!out) throw std::runtime_error("write failure on " + out_path);
  return out_path;
}

CalibrationResult calibrate(const SimConfig& cfg, const CalibrationOptions& opts) {
  validate(cfg);
  for (double t : opts.targets)
    if (!(t > 0.0)) throw std::invalid_argument("calibrate: targets must be positive");
  if (!(opts.step_size > 0.0)) throw std::invalid_argument("calibrate: step size must be > 0");
  if (opts.iterations < 1) throw std::invalid_argument("calibrate: need at least one iteration");

  std::ofstream out = open_csv(opts.out_path, opts.timestamp);
  out << "iter,Tx0,Ty0,Tz0,loss\n";

  CalibrationResult res;
  std::array<double, 3> m = cfg.initial_temperatures;
  double prev_loss = 0.0;
  int increases = 0;

  for (int it = 0; it < opts.iterations; ++it) {
    SimConfig c = cfg;
    c.initial_temperatures = m;
    c.seed = cfg.seed + static_cast<std::uint64_t>(it);
    c.record_policy = RecordPolicy::All;

    const ForwardResult fwd = run_forward(c);
    const std::array<Objective, 3> objs{Objective::Tx, Objective::Ty, Objective::Tz};
    std::array<double, 3> moments{};
    GradientMatrix gm;
    for (int l = 0; l < 3; ++l) {
      moments[static_cast<std::size_t>(l)] =
          objective_value(fwd.final_ensemble, objs[static_cast<std::size_t>(l)]);
      gm.g[static_cast<std::size_t>(l)] =
          adjoint_gradient(fwd, c, objs[static_cast<std::size_t>(l)]).grad;
    }

    double loss = 0.0;
    for (int l = 0; l < 3; ++l) {
      const double d = moments[static_cast<std::size_t>(l)] - opts.targets[static_cast<std::size_t>(l)];
      loss += 0.5 * d * d;
    }
    out << it << ',' << format_double(m[0]) << ',' << format_double(m[1]) << ','
        << format_double(m[2]) << ',' << format_double(loss) << "\n";

    res.final_m = m;
    res.final_loss = loss;
    res.iterations_run = it + 1;

    if (it > 0 && loss > prev_loss) {
      if (++increases >= 5) {
        res.diverged = true;
        res.message = "halted: loss increased for 5 consecutive iterations";
        break;
      }
    } else {
      increases = 0;
    }
    prev_loss = loss;

    // Chain rule through the three moment objectives.
    std::array<double, 3> grad{};
    for (int p = 0; p < 3; ++p)
      for (int l = 0; l < 3; ++l)
        grad[static_cast<std::size_t>(p)] +=
            (moments[static_cast<std::size_t>(l)] - opts.targets[static_cast<std::size_t>(l)]) *
            gm.g[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)];
    for (int p = 0; p < 3; ++p) {
      m[static_cast<std::size_t>(p)] -= opts.step_size * grad[static_cast<std::size_t>(p)];
      if (m[static_cast<std::size_t>(p)] < 1e-6) m[static_cast<std::size_t>(p)] = 1e-6;
    }
  }
  if (!out) throw std::runtime_error("write failure on " + opts.out_path);
  return res;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

void apply_config(const std::map<std::string, std::string>& kv, SimConfig& cfg) {
  double kappa = cfg.kernel.kappa, beta = cfg.kernel.beta, epsilon = cfg.kernel.epsilon;
  double sigma_v = 0.0;
  bool kernel_touched = false;
  for (const auto& [key, value] : kv) {
    const auto parse_double = [&]() {
      double d = 0;
      if (!(std::istringstream(value) >> d))
        throw std::invalid_argument("config: bad numeric value for " + key);
      return d;
    };
    if (key == "n") {
      cfg.n_particles = static_cast<std::int64_t>(parse_double());
    } else if (key == "m_steps") {
      cfg.n_steps = static_cast<std::int32_t>(parse_double());
    } else if (key == "dt") {
      cfg.dt = parse_double();
    } else if (key == "kappa") {
      kappa = parse_double();
      kernel_touched = true;
    } else if (key == "beta") {
      beta = parse_double();
      kernel_touched = true;
    } else if (key == "epsilon") {
      epsilon = parse_double();
      kernel_touched = true;
    } else if (key == "sigma_v") {
      sigma_v = parse_double();
      kernel_touched = true;
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_double());
    } else if (key == "algorithm") {
      if (value == "separable")
        cfg.algorithm = Algorithm::Separable;
      else if (value == "general")
        cfg.algorithm = Algorithm::General;
      else
        throw std::invalid_argument("config: algorithm must be separable or general");
    } else if (key == "tx0") {
      cfg.initial_temperatures[0] = parse_double();
    } else if (key == "ty0") {
      cfg.initial_temperatures[1] = parse_double();
    } else if (key == "tz0") {
      cfg.initial_temperatures[2] = parse_double();
    } else {
      throw std::invalid_argument("config: unknown key: " + key);
    }
  }
  if (kernel_touched) cfg.kernel = make_kernel_spec(kappa, beta, epsilon, sigma_v);
}

}  // namespace boltzgrad
