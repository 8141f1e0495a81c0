#include "boltzgrad/verify.hpp"

#include <cmath>
#include <stdexcept>

#include "boltzgrad/forward.hpp"

namespace boltzgrad {

double simulate_objective(const SimConfig& cfg, Objective o) {
  SimConfig c = cfg;
  c.record_policy = RecordPolicy::None;
  return objective_value(run_forward(c).final_ensemble, o);
}

double fd_component_custom(const std::function<double(const std::array<double, 3>&)>& j_of_m,
                           std::array<double, 3> m, int param, double delta_m) {
  if (!(delta_m > 0.0)) throw std::invalid_argument("fd: delta_m must be > 0");
  if (param < 0 || param > 2) throw std::invalid_argument("fd: parameter index out of range");
  std::array<double, 3> lo = m, hi = m;
  hi[static_cast<std::size_t>(param)] += delta_m;
  lo[static_cast<std::size_t>(param)] -= delta_m;
  return (j_of_m(hi) - j_of_m(lo)) / (2.0 * delta_m);
}

double fd_gradient_component(const SimConfig& cfg, Objective o, int param, double delta_m) {
  if (cfg.initial_temperatures[static_cast<std::size_t>(param)] - delta_m <= 0.0)
    throw std::invalid_argument("fd: perturbed temperature would be nonpositive");
  return fd_component_custom(
      [&](const std::array<double, 3>& m) {
        SimConfig c = cfg;
        c.initial_temperatures = m;
        return simulate_objective(c, o);
      },
      cfg.initial_temperatures, param, delta_m);
}

std::array<double, 3> fd_gradient(const SimConfig& cfg, Objective o, double delta_m) {
  std::array<double, 3> g{};
  for (int p = 0; p < 3; ++p) g[static_cast<std::size_t>(p)] = fd_gradient_component(cfg, o, p, delta_m);
  return g;
}

GradientMatrix adjoint_gradient_matrix(const SimConfig& cfg, BTildeMode mode,
                                       GradientResult* meta) {
  SimConfig c = cfg;
  if (c.record_policy == RecordPolicy::None) c.record_policy = RecordPolicy::All;
  const ForwardResult fwd = run_forward(c);
  GradientMatrix gm;
  const std::array<Objective, 3> objs{Objective::Tx, Objective::Ty, Objective::Tz};
  GradientResult last;
  double adjoint_seconds = 0.0;
  for (int l = 0; l < 3; ++l) {
    last = adjoint_gradient(fwd, c, objs[static_cast<std::size_t>(l)], mode);
    adjoint_seconds += last.wall_seconds_adjoint;
    gm.g[static_cast<std::size_t>(l)] = last.grad;
  }
  if (meta != nullptr) {
    *meta = last;
    meta->wall_seconds_adjoint = adjoint_seconds / 3.0;
  }
  return gm;
}

GradientMatrix fd_gradient_matrix(const SimConfig& cfg, double delta_m) {
  GradientMatrix gm;
  const std::array<Objective, 3> objs{Objective::Tx, Objective::Ty, Objective::Tz};
  for (int p = 0; p < 3; ++p) {
    if (cfg.initial_temperatures[static_cast<std::size_t>(p)] - delta_m <= 0.0)
      throw std::invalid_argument("fd: perturbed temperature would be nonpositive");
    SimConfig hi = cfg, lo = cfg;
    hi.initial_temperatures[static_cast<std::size_t>(p)] += delta_m;
    lo.initial_temperatures[static_cast<std::size_t>(p)] -= delta_m;
    hi.record_policy = RecordPolicy::None;
    lo.record_policy = RecordPolicy::None;
    const VelocityEnsemble ens_hi = run_forward(hi).final_ensemble;
    const VelocityEnsemble ens_lo = run_forward(lo).final_ensemble;
    for (int l = 0; l < 3; ++l) {
      const double jhi = objective_value(ens_hi, objs[static_cast<std::size_t>(l)]);
      const double jlo = objective_value(ens_lo, objs[static_cast<std::size_t>(l)]);
      gm.g[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)] =
          (jhi - jlo) / (2.0 * delta_m);
    }
  }
  return gm;
}

MatrixStatistics batch_gradient_matrices(const SimConfig& cfg, Method method, int m_s,
                                         std::uint64_t base_seed, BTildeMode mode,
                                         double delta_m, std::uint64_t seed_stride) {
  if (m_s < 1) throw std::invalid_argument("batch: m_s must be >= 1");
  MatrixStatistics out;
  out.m_s = m_s;
  out.per_run.resize(static_cast<std::size_t>(m_s));
  std::vector<double> fwd_sec(static_cast<std::size_t>(m_s), 0.0);
  std::vector<double> adj_sec(static_cast<std::size_t>(m_s), 0.0);
  std::vector<std::int64_t> viol(static_cast<std::size_t>(m_s), 0);
  std::vector<std::int64_t> guards(static_cast<std::size_t>(m_s), 0);

#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < m_s; ++r) {
    SimConfig c = cfg;
    c.seed = base_seed + static_cast<std::uint64_t>(r) * seed_stride;
    if (method == Method::Adjoint) {
      GradientResult meta;
      out.per_run[static_cast<std::size_t>(r)] = adjoint_gradient_matrix(c, mode, &meta);
      fwd_sec[static_cast<std::size_t>(r)] = meta.wall_seconds_forward;
      adj_sec[static_cast<std::size_t>(r)] = meta.wall_seconds_adjoint;
      viol[static_cast<std::size_t>(r)] = meta.bound_violations;
      guards[static_cast<std::size_t>(r)] = meta.eta_guard_hits;
    } else {
      out.per_run[static_cast<std::size_t>(r)] = fd_gradient_matrix(c, delta_m);
    }
  }

  for (int r = 0; r < m_s; ++r) {
    out.mean_forward_seconds += fwd_sec[static_cast<std::size_t>(r)] / m_s;
    out.mean_adjoint_seconds += adj_sec[static_cast<std::size_t>(r)] / m_s;
    out.bound_violations += viol[static_cast<std::size_t>(r)];
    out.eta_guard_hits += guards[static_cast<std::size_t>(r)];
  }
  for (int l = 0; l < 3; ++l) {
    for (int p = 0; p < 3; ++p) {
      // Shifted two-pass statistics: anchoring at the first run keeps the
      // spread exactly zero when every replicate is identical.
      const double shift = out.per_run[0].g[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)];
      double acc = 0.0;
      for (const auto& g : out.per_run)
        acc += g.g[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)] - shift;
      const double mean = shift + acc / m_s;
      double var = 0.0;
      for (const auto& g : out.per_run) {
        const double d = g.g[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)] - mean;
        var += d * d;
      }
      const double sample_std = m_s > 1 ? std::sqrt(var / (m_s - 1)) : 0.0;
      out.mean.g[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)] = mean;
      out.per_run_std.g[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)] = sample_std;
      out.std_of_mean.g[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)] =
          sample_std / std::sqrt(static_cast<double>(m_s));
    }
  }
  return out;
}

namespace {

int objective_row(Objective o) {
  switch (o) {
    case Objective::Tx: return 0;
    case Objective::Ty: return 1;
    case Objective::Tz: return 2;
    default: throw std::invalid_argument("batch statistics: energy objective has no matrix row");
  }
}

}  // namespace

RunStatistics batch_statistics(const SimConfig& cfg, Method method, Objective o, int m_s,
                               std::uint64_t base_seed, BTildeMode mode, double delta_m,
                               std::uint64_t seed_stride) {
  if (m_s < 2) throw std::invalid_argument("batch_statistics: m_s must be >= 2");
  RunStatistics st;
  st.m_s = m_s;
  st.per_run.resize(static_cast<std::size_t>(m_s));

  if (o == Objective::Energy) {
    // Energy is not part of the 3x3 matrix; run it directly.
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < m_s; ++r) {
      SimConfig c = cfg;
      c.seed = base_seed + static_cast<std::uint64_t>(r) * seed_stride;
      if (method == Method::Adjoint) {
        const ForwardResult fwd = run_forward(c);
        st.per_run[static_cast<std::size_t>(r)] = adjoint_gradient(fwd, c, o, mode).grad;
      } else {
        st.per_run[static_cast<std::size_t>(r)] = fd_gradient(c, o, delta_m);
      }
    }
  } else {
    const MatrixStatistics ms =
        batch_gradient_matrices(cfg, method, m_s, base_seed, mode, delta_m, seed_stride);
    const int row = objective_row(o);
    for (int r = 0; r < m_s; ++r)
      st.per_run[static_cast<std::size_t>(r)] = ms.per_run[static_cast<std::size_t>(r)].g[static_cast<std::size_t>(row)];
  }

  for (int p = 0; p < 3; ++p) {
    const double shift = st.per_run[0][static_cast<std::size_t>(p)];
    double acc = 0.0;
    for (const auto& g : st.per_run) acc += g[static_cast<std::size_t>(p)] - shift;
    const double mean = shift + acc / m_s;
    double var = 0.0;
    for (const auto& g : st.per_run) {
      const double d = g[static_cast<std::size_t>(p)] - mean;
      var += d * d;
    }
    const double sample_std = std::sqrt(var / (m_s - 1));
    st.mean[static_cast<std::size_t>(p)] = mean;
    st.per_run_std[static_cast<std::size_t>(p)] = sample_std;
    st.std_of_mean[static_cast<std::size_t>(p)] = sample_std / std::sqrt(static_cast<double>(m_s));
  }
  return st;
}

std::array<double, 3> gradient_error(const RunStatistics& a, const RunStatistics& b) {
  std::array<double, 3> e{};
  for (int p = 0; p < 3; ++p)
    e[static_cast<std::size_t>(p)] =
        std::abs(a.mean[static_cast<std::size_t>(p)] - b.mean[static_cast<std::size_t>(p)]);
  return e;
}

}  // namespace boltzgrad
