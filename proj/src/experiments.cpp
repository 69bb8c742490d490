#include "experiments.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <functional>

#include "epflow/homogenisation.hpp"
#include "epflow/integrators.hpp"
#include "epflow/point_vortex.hpp"
#include "epflow/rigid_body.hpp"
#include "epflow/spectral_euler.hpp"
#include "json.hpp"

namespace epflow::cli::detail {

namespace {

using integrators::derive_member_seed;

std::string member_name(const char* prefix, int m, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_member%04d.%s", prefix, m, ext);
  return buf;
}

int steps_of(const RunConfig& c) { return static_cast<int>(std::llround(c.integrator.T / c.integrator.dt)); }

bool keep_row(int i, int last, int stride) { return i % stride == 0 || i == last; }

template <class R>
struct Guarded {
  std::optional<R> value;
  std::string error;
};

/// Run every member, turning an IntegrationError into a failed status
/// instead of aborting the ensemble.
template <class R, class Fn>
std::vector<Guarded<R>> guarded_ensemble(const Context& ctx, std::uint64_t root, int members, Fn&& fn,
                                         std::vector<MemberStatus>& status) {
  auto results = integrators::run_ensemble(
      members, root,
      [&](int m, std::uint64_t seed) {
        Guarded<R> g;
        try {
          if (ctx.options.member_hook) ctx.options.member_hook(m);
          g.value = fn(m, seed);
        } catch (const integrators::IntegrationError& e) {
          g.error = e.what();
        }
        return g;
      },
      ctx.workers);
  for (int m = 0; m < members; ++m) {
    const auto& g = results[static_cast<std::size_t>(m)];
    status.push_back({m, derive_member_seed(root, static_cast<std::uint64_t>(m)), g.value.has_value(), g.error});
    if (!g.value && ctx.options.log != nullptr) *ctx.options.log << "member " << m << " failed: " << g.error << "\n";
  }
  return results;
}

rigid::RigidConfig rigid_config(const RunConfig& c) {
  rigid::RigidConfig r;
  r.inertia = Eigen::Vector3d(c.rigidbody.inertia[0], c.rigidbody.inertia[1], c.rigidbody.inertia[2]);
  r.pi0 = Eigen::Vector3d(c.rigidbody.pi0[0], c.rigidbody.pi0[1], c.rigidbody.pi0[2]);
  r.noise = build_noise(c.noise);
  r.T = c.integrator.T;
  r.dt = c.integrator.dt;
  r.scheme = rigid::scheme_from_string(c.integrator.scheme);
  r.tol = c.integrator.tol;
  r.max_iter = c.integrator.max_iter;
  return r;
}

std::vector<std::string> indexed(const std::string& stem, int rows, int cols) {
  std::vector<std::string> out;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out.push_back(stem + std::to_string(i + 1) + std::to_string(j + 1));
  }
  return out;
}

void append_matrix(std::vector<double>& row, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
  }
}

}  // namespace

ExperimentResult run_rigidbody(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const rigid::RigidConfig rc = rigid_config(c);
  const int n = steps_of(c);
  const int k = rc.noise.size();
  const int stride = c.output.stride;

  struct MemberOut {
    std::string csv;
    double casimir_drift = 0.0;
    double energy_drift = 0.0;
    double equivalence = 0.0;
  };
  ExperimentResult result;
  auto members = guarded_ensemble<MemberOut>(
      ctx, c.ensemble.seed, c.ensemble.members,
      [&](int, std::uint64_t seed) {
        const auto path = integrators::make_brownian(seed, k, rc.dt, n);
        const auto traj = rigid::simulate_rb(rc, path.increments);
        std::vector<lie::Rotation3> frames;
        frames.reserve(traj.size());
        for (const auto& s : traj) frames.push_back(s.frame);
        const auto mean = rigid::simulate_rb_mean(rc, frames);
        const auto diag = rigid::rb_diagnostics(traj, rc.inertia);
        io::CsvTable table({"t", "pi1", "pi2", "pi3", "energy", "casimir", "pibar1", "pibar2", "pibar3",
                            "equivalence_error"});
        MemberOut out;
        for (int i = 0; i <= n; ++i) {
          const auto& s = traj[static_cast<std::size_t>(i)];
          const auto& pb = mean[static_cast<std::size_t>(i)].pi_bar;
          const double eq = (s.frame.apply(pb) - s.pi).norm();
          out.equivalence = std::max(out.equivalence, eq);
          const auto& d = diag[static_cast<std::size_t>(i)];
          out.casimir_drift = std::max(out.casimir_drift, std::abs(d.casimir - diag.front().casimir));
          out.energy_drift = std::max(out.energy_drift, std::abs(d.energy - diag.front().energy));
          if (keep_row(i, n, stride)) {
            table.add_row({s.t, s.pi(0), s.pi(1), s.pi(2), d.energy, d.casimir, pb(0), pb(1), pb(2), eq});
          }
        }
        out.csv = table.str();
        return out;
      },
      result.members);

  io::CsvTable summary({"member", "casimir_drift", "energy_drift", "equivalence_error", "failed"});
  double worst_casimir = 0.0;
  double worst_equivalence = 0.0;
  for (int m = 0; m < c.ensemble.members; ++m) {
    const auto& g = members[static_cast<std::size_t>(m)];
    if (!g.value) {
      summary.add_row({static_cast<double>(m), NAN, NAN, NAN, 1.0});
      continue;
    }
    if (c.output.wants("csv")) ctx.out.write(member_name("rigidbody", m, "csv"), g.value->csv);
    summary.add_row({static_cast<double>(m), g.value->casimir_drift, g.value->energy_drift, g.value->equivalence, 0.0});
    worst_casimir = std::max(worst_casimir, g.value->casimir_drift);
    worst_equivalence = std::max(worst_equivalence, g.value->equivalence);
  }
  if (c.output.wants("csv")) ctx.out.write("rigidbody_summary.csv", summary.str());
  result.summary = {{"max_casimir_drift", worst_casimir}, {"max_equivalence_error", worst_equivalence}};

  if (c.rigidbody.averaged_members > 0) {
    const auto op = rigid::averaged_operator(rc, c.rigidbody.averaged_members,
                                             derive_member_seed(c.ensemble.seed, 0xA7E4A6EDULL), ctx.workers);
    const auto av = rigid::simulate_rb_averaged(rc, op);
    std::vector<std::string> cols{"t", "p1", "p2", "p3", "omega1", "omega2", "omega3", "energy", "casimir"};
    for (const auto& s : indexed("ebar", 3, 3)) cols.push_back(s);
    for (const auto& s : indexed("ebar_se", 3, 3)) cols.push_back(s);
    io::CsvTable table(cols);
    double drift = 0.0;
    for (int i = 0; i <= n; ++i) {
      const auto& s = av[static_cast<std::size_t>(i)];
      drift = std::max(drift, std::abs(s.casimir - av.front().casimir));
      if (!keep_row(i, n, stride)) continue;
      std::vector<double> row{s.t, s.momentum(0), s.momentum(1), s.momentum(2), s.omega(0), s.omega(1), s.omega(2),
                              s.energy, s.casimir};
      append_matrix(row, op.mean[static_cast<std::size_t>(i)]);
      append_matrix(row, op.standard_error[static_cast<std::size_t>(i)]);
      table.add_row(row);
    }
    if (c.output.wants("csv")) ctx.out.write("rigidbody_averaged.csv", table.str());
    result.summary.emplace_back("averaged_casimir_drift", drift);
  }
  return result;
}

ExperimentResult run_vortex(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const noise::NoiseBasis basis = build_noise(c.noise);
  vortex::VortexState s0;
  if (c.vortex.triangle_radius > 0.0) {
    s0 = vortex::equilateral_triangle(c.vortex.triangle_radius);
  } else {
    for (const auto& p : c.vortex.positions) s0.positions.emplace_back(p[0], p[1]);
    s0.strengths = c.vortex.strengths;
  }
  vortex::PvOptions opts;
  opts.T = c.integrator.T;
  opts.dt = c.integrator.dt;
  opts.scheme = vortex::pv_scheme_from_string(c.integrator.scheme);
  opts.tol = c.integrator.tol;
  opts.max_iter = c.integrator.max_iter;
  const int n = steps_of(c);
  const int nv = s0.size();

  std::vector<std::string> cols{"t"};
  for (int a = 1; a <= nv; ++a) {
    cols.push_back("x" + std::to_string(a));
    cols.push_back("y" + std::to_string(a));
  }
  cols.push_back("hamiltonian");
  for (int a = 1; a <= nv; ++a) {
    for (int b = a + 1; b <= nv; ++b) cols.push_back("side_" + std::to_string(a) + "_" + std::to_string(b));
  }
  for (const char* name : {"frame_angle", "frame_tx", "frame_ty", "pullback_error"}) cols.emplace_back(name);

  const auto det = vortex::simulate_pv(s0, basis, opts, Eigen::MatrixXd::Zero(n, 2));

  struct MemberOut {
    std::string csv;
    double side_drift = 0.0;
    double h_drift = 0.0;
    double pullback = 0.0;
  };
  ExperimentResult result;
  auto members = guarded_ensemble<MemberOut>(
      ctx, c.ensemble.seed, c.ensemble.members,
      [&](int, std::uint64_t seed) {
        const auto path = integrators::make_brownian(seed, 2, opts.dt, n);
        const auto traj = vortex::simulate_pv(s0, basis, opts, path.increments);
        const auto pulled = vortex::frame_pullback(traj);
        const auto diag = vortex::pv_diagnostics(traj);
        io::CsvTable table(cols);
        MemberOut out;
        for (int i = 0; i <= n; ++i) {
          const auto& st = traj[static_cast<std::size_t>(i)];
          const auto& d = diag[static_cast<std::size_t>(i)];
          double err = 0.0;
          for (int a = 0; a < nv; ++a) {
            err = std::max(err, (pulled[static_cast<std::size_t>(i)].positions[static_cast<std::size_t>(a)] -
                                 det[static_cast<std::size_t>(i)].positions[static_cast<std::size_t>(a)]).norm());
          }
          out.pullback = std::max(out.pullback, err);
          out.h_drift = std::max(out.h_drift, std::abs(d.hamiltonian - diag.front().hamiltonian));
          for (std::size_t j = 0; j < d.side_lengths.size(); ++j) {
            out.side_drift = std::max(out.side_drift, std::abs(d.side_lengths[j] - diag.front().side_lengths[j]));
          }
          if (!keep_row(i, n, c.output.stride)) continue;
          std::vector<double> row{st.t};
          for (const auto& x : st.positions) {
            row.push_back(x.x());
            row.push_back(x.y());
          }
          row.push_back(d.hamiltonian);
          row.insert(row.end(), d.side_lengths.begin(), d.side_lengths.end());
          row.push_back(st.frame.angle);
          row.push_back(st.frame.translation.x());
          row.push_back(st.frame.translation.y());
          row.push_back(err);
          table.add_row(row);
        }
        out.csv = table.str();
        return out;
      },
      result.members);

  io::CsvTable summary({"member", "side_length_drift", "hamiltonian_drift", "pullback_error", "failed"});
  double worst_side = 0.0;
  double worst_h = 0.0;
  double worst_pull = 0.0;
  for (int m = 0; m < c.ensemble.members; ++m) {
    const auto& g = members[static_cast<std::size_t>(m)];
    if (!g.value) {
      summary.add_row({static_cast<double>(m), NAN, NAN, NAN, 1.0});
      continue;
    }
    if (c.output.wants("csv")) ctx.out.write(member_name("vortex", m, "csv"), g.value->csv);
    summary.add_row({static_cast<double>(m), g.value->side_drift, g.value->h_drift, g.value->pullback, 0.0});
    worst_side = std::max(worst_side, g.value->side_drift);
    worst_h = std::max(worst_h, g.value->h_drift);
    worst_pull = std::max(worst_pull, g.value->pullback);
  }
  if (c.output.wants("csv")) ctx.out.write("vortex_summary.csv", summary.str());
  result.summary = {{"max_side_length_drift", worst_side},
                    {"max_hamiltonian_drift", worst_h},
                    {"max_pullback_error", worst_pull}};
  return result;
}

ExperimentResult run_euler2d(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const auto& e = c.euler2d;
  const noise::NoiseBasis basis = build_noise(c.noise);
  const int n = steps_of(c);
  const double dt = c.integrator.dt;
  const double dt_det = e.dt_det > 0.0 ? e.dt_det : dt;
  const int substeps = static_cast<int>(std::llround(dt / dt_det));
  const int k = basis.size();

  std::function<double(double, double)> init;
  if (e.initial == "cos-x") {
    init = [](double x, double) { return std::cos(x); };
  } else if (e.initial == "triad") {
    init = [](double x, double y) { return std::cos(x) + std::cos(y) + 0.5 * std::cos(x + y); };
  } else {
    init = [](double x, double y) { return std::cos(x) + 0.5 * std::cos(2.0 * y); };
  }
  const euler2d::VorticityField w0 = euler2d::dealiased(euler2d::VorticityField::sample(e.n, init));
  const auto ens0 = euler2d::euler2d_diagnostics(w0);

  struct MemberOut {
    std::string csv;
    std::vector<std::pair<int, std::string>> snapshots;
    double enstrophy_drift = 0.0;
    double oracle_error = 0.0;
    double divergence = 0.0;
    double circulation_drift = 0.0;
  };
  ExperimentResult result;
  auto members = guarded_ensemble<MemberOut>(
      ctx, c.ensemble.seed, c.ensemble.members,
      [&](int m, std::uint64_t seed) {
        const auto path = integrators::make_brownian(seed, k, dt, n);
        euler2d::VorticityField w = w0;
        euler2d::VorticityField det = w0;
        std::optional<euler2d::LoopMarkers> loop;
        if (e.loop_markers > 0) {
          loop = euler2d::LoopMarkers::circle({e.loop_center[0], e.loop_center[1]}, e.loop_radius, e.loop_markers);
        }
        Eigen::VectorXd wsum = Eigen::VectorXd::Zero(k);
        euler2d::StepOptions det_opts;
        det_opts.check_divergence = false;
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(k);

        io::CsvTable table({"t", "energy", "enstrophy", "circulation", "oracle_error", "max_divergence", "cfl"});
        MemberOut out;
        double circulation0 = 0.0;
        bool warned = false;
        auto record = [&](int i, const euler2d::StepInfo& info) {
          const auto d = euler2d::euler2d_diagnostics(w);
          out.enstrophy_drift = std::max(out.enstrophy_drift, std::abs(d.enstrophy - ens0.enstrophy) / ens0.enstrophy);
          out.divergence = std::max(out.divergence, info.max_divergence);
          if (!keep_row(i, n, c.output.stride)) return;
          double circ = NAN;
          if (loop) {
            circ = euler2d::loop_circulation(euler2d::biot_savart(w), *loop);
            if (i == 0) circulation0 = circ;
            out.circulation_drift = std::max(out.circulation_drift, std::abs(circ - circulation0));
          }
          Eigen::Vector2d s = Eigen::Vector2d::Zero();
          for (int j = 0; j < k; ++j) s += basis.vectors()[static_cast<std::size_t>(j)] * wsum(j);
          const double err = euler2d::l2_distance(w, euler2d::shift_field(det, s));
          out.oracle_error = err;
          table.add_row({w.t, d.energy, d.enstrophy, circ, err, info.max_divergence, info.cfl});
        };
        auto snapshot = [&](int i) {
          const bool due = e.snapshot_stride > 0 ? (i % e.snapshot_stride == 0 || i == n) : (i == 0 || i == n);
          if (due && c.output.wants("bin")) out.snapshots.emplace_back(i, euler2d::encode_snapshot(w));
        };

        euler2d::StepInfo info0;
        info0.max_divergence = euler2d::max_divergence(euler2d::biot_savart(w));
        record(0, info0);
        snapshot(0);
        for (int i = 1; i <= n; ++i) {
          const Eigen::VectorXd dw = path.increments.row(i - 1).transpose();
          const auto info = euler2d::step_salt_euler(w, basis, dt, dw, loop ? &*loop : nullptr);
          if (info.cfl_warning && !warned && ctx.options.log != nullptr) {
            *ctx.options.log << "member " << m << ": CFL number " << info.cfl << " exceeds 1 at t = " << w.t << "\n";
            warned = true;
          }
          for (int s = 0; s < substeps; ++s) euler2d::step_salt_euler(det, basis, dt_det, zero, nullptr, det_opts);
          wsum += dw;
          record(i, info);
          snapshot(i);
        }
        out.csv = table.str();
        return out;
      },
      result.members);

  io::CsvTable summary({"member", "enstrophy_drift", "oracle_error", "max_divergence", "circulation_drift", "failed"});
  double worst_ens = 0.0;
  double worst_err = 0.0;
  double worst_div = 0.0;
  double worst_circ = 0.0;
  for (int m = 0; m < c.ensemble.members; ++m) {
    const auto& g = members[static_cast<std::size_t>(m)];
    if (!g.value) {
      summary.add_row({static_cast<double>(m), NAN, NAN, NAN, NAN, 1.0});
      continue;
    }
    if (c.output.wants("csv")) ctx.out.write(member_name("euler2d", m, "csv"), g.value->csv);
    for (const auto& [step, bytes] : g.value->snapshots) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "euler2d_member%04d_step%06d.bin", m, step);
      ctx.out.write(buf, bytes);
    }
    const auto& v = *g.value;
    summary.add_row({static_cast<double>(m), v.enstrophy_drift, v.oracle_error, v.divergence, v.circulation_drift, 0.0});
    worst_ens = std::max(worst_ens, v.enstrophy_drift);
    worst_err = std::max(worst_err, v.oracle_error);
    worst_div = std::max(worst_div, v.divergence);
    worst_circ = std::max(worst_circ, v.circulation_drift);
  }
  if (c.output.wants("csv")) ctx.out.write("euler2d_summary.csv", summary.str());
  result.summary = {{"max_enstrophy_drift", worst_ens},
                    {"max_oracle_error", worst_err},
                    {"max_divergence", worst_div},
                    {"max_circulation_drift", worst_circ}};
  return result;
}

ExperimentResult run_homog(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const auto& h = c.homog;
  homog::ConvergenceSetup setup;
  if (h.fast == "lorenz63") {
    homog::FastFlowSpec spec = homog::lorenz63_default();
    spec.base_step = h.base_step;
    spec.burn_in = h.burn_in;
    setup.fast = homog::calibrate_observable(spec, derive_member_seed(c.ensemble.seed, 0xCA11B8A7EULL), h.calibration_time);
  } else {
    setup.fast = homog::ou_surrogate(h.ou_rate, h.ou_covariance, h.base_step);
  }
  setup.fields = build_noise(c.noise);
  setup.x0 = Eigen::Map<const Eigen::VectorXd>(h.x0.data(), static_cast<Eigen::Index>(h.x0.size()));
  setup.epsilons = h.epsilons;
  setup.members = c.ensemble.members;
  setup.seed = c.ensemble.seed;
  setup.slow_steps = h.slow_steps;
  setup.couple_limit = h.couple_limit;
  setup.alpha = h.alpha;
  setup.workers = ctx.workers;
  if (h.mean_velocity != "zero") {
    homog::MeanVelocity u;
    if (h.mean_velocity == "constant") {
      u.kind = homog::MeanVelocity::Kind::Constant;
      u.vector = Eigen::Map<const Eigen::VectorXd>(h.mean_vector.data(), static_cast<Eigen::Index>(h.mean_vector.size()));
    } else {
      u.kind = homog::MeanVelocity::Kind::Shear;
      u.amplitude = h.mean_amplitude;
    }
    setup.mean_velocity = u;
  }

  ExperimentResult result;
  const int members = c.ensemble.members;
  auto record_statuses = [&](int failed_eps, int failed_member, const std::string& error) {
    for (std::size_t e = 0; e < h.epsilons.size(); ++e) {
      const std::uint64_t eps_seed = derive_member_seed(c.ensemble.seed, e);
      for (int m = 0; m < members; ++m) {
        MemberStatus s{static_cast<int>(e) * members + m, derive_member_seed(eps_seed, static_cast<std::uint64_t>(m)), true, {}};
        if (static_cast<int>(e) == failed_eps && m == failed_member) {
          s.ok = false;
          s.error = error;
        }
        result.members.push_back(std::move(s));
      }
    }
  };

  if (ctx.options.member_hook) {
    // Every member of the first epsilon is visited before any work starts.
    for (int m = 0; m < members; ++m) {
      try {
        ctx.options.member_hook(m);
      } catch (const integrators::IntegrationError& e) {
        record_statuses(0, m, e.what());
        return result;
      }
    }
  }

  homog::ConvergenceReport report;
  try {
    report = homog::convergence_report(setup);
  } catch (const integrators::MemberError& e) {
    // The ensemble that failed is not known here; the index is reported as-is.
    record_statuses(0, e.member(), e.what());
    return result;
  }
  record_statuses(-1, -1, {});

  const int k = setup.fields.size();
  std::vector<std::string> cols{"epsilon", "ks_stat", "null_band"};
  for (const auto& s : indexed("sigma_hat_", k, k)) cols.push_back(s);
  for (const auto& s : indexed("gamma_hat_", k, k)) cols.push_back(s);
  for (const auto& s : indexed("sigma_se_", k, k)) cols.push_back(s);
  for (const auto& s : indexed("gamma_se_", k, k)) cols.push_back(s);
  io::CsvTable table(cols);
  for (const auto& row : report.rows) {
    std::vector<double> values{row.epsilon, row.ks_stat, row.null_band};
    append_matrix(values, row.wip.sigma_hat);
    append_matrix(values, row.wip.gamma_tilde_hat);
    append_matrix(values, row.wip.sigma_se);
    append_matrix(values, row.wip.gamma_tilde_se);
    table.add_row(values);
  }
  if (c.output.wants("csv")) ctx.out.write("homog_summary.csv", table.str());

  if (c.output.wants("jsonl")) {
    using nlohmann::json;
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    std::string lines;
    for (const auto& r : report.records) {
      json bb = json::array();
      for (Eigen::Index i = 0; i < r.bb1.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index j = 0; j < r.bb1.cols(); ++j) row.push_back(r.bb1(i, j));
        bb.push_back(row);
      }
      const json j = {{"epsilon", r.epsilon},     {"member", r.member},         {"seed", r.seed},
                      {"b1", vec(r.b1)},          {"bb1", bb},                 {"endpoint", vec(r.endpoint)},
                      {"limit_endpoint", vec(r.limit_endpoint)}};
      lines += j.dump() + "\n";
    }
    ctx.out.write("homog_members.jsonl", lines);
  }

  const auto& last = report.rows.back();
  result.summary = {{"trend_tau", report.trend_tau},
                    {"final_ks_stat", last.ks_stat},
                    {"final_null_band", last.null_band},
                    {"final_ks_over_band", last.ks_stat / last.null_band}};
  return result;
}

}  // namespace epflow::cli::detail
