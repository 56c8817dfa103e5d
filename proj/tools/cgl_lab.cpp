#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgl/acceptance.hpp"
#include "cgl/assembly.hpp"
#include "cgl/carleman.hpp"
#include "cgl/config.hpp"
#include "cgl/control.hpp"
#include "cgl/desk.hpp"
#include "cgl/evolution.hpp"
#include "cgl/geometry.hpp"
#include "cgl/io.hpp"
#include "cgl/weights.hpp"

using namespace cgl;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitPrecondition = 2;
constexpr int kExitDivergence = 3;

CVector initial_datum(const Desk& s, const RunConfig& cfg) { return bump(s, cfg, cfg.u0_h1 * cfg.u0_scale); }

std::string csv_of(const Trajectory& t) {
  std::ostringstream out;
  write_trajectory_csv(out, t);
  return out.str();
}

struct Outcome {
  int code = 0;
  Json checks = Json::object();
};

using Command = Outcome (*)(const RunConfig&, RunWriter&);

Outcome cmd_mesh(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  std::ostringstream out;
  write_mesh(out, s.mesh);
  w.write("mesh.txt", out.str());
  double length = 0.0;
  for (double e : s.mesh.edge_arclength) length += e;
  w.write_json("mesh.json", Json{{"vertices", s.mesh.vertex_count()},
                                 {"triangles", s.mesh.triangles.size()},
                                 {"boundary_vertices", s.mesh.boundary_count()},
                                 {"h_max", s.mesh.h_max},
                                 {"boundary_length", length}});
  return {};
}

Outcome cmd_forward(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const ThetaStepper stepper(s.ops, cfg.params, s.grid);
  const Trajectory u = solve_forward(stepper, initial_datum(s, cfg), Trajectory{}, Trajectory{});
  w.write("forward.csv", csv_of(u));
  w.write_json("energy.json", to_json(energy_report(u, s.ops, cfg.params.theta)));
  return {};
}

Outcome cmd_adjoint(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const ThetaStepper stepper(s.ops, cfg.params, s.grid);
  const Trajectory z = solve_adjoint(stepper, initial_datum(s, cfg), Trajectory{});
  w.write("adjoint.csv", csv_of(z));
  return {};
}

Outcome cmd_cubic(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const ThetaStepper stepper(s.ops, cfg.params, s.grid);
  const CubicResult r = solve_cubic(stepper, initial_datum(s, cfg), Trajectory{});
  w.write("cubic.csv", csv_of(r.state));
  Json log = Json::array();
  for (const auto& it : r.log) {
    log.push_back(Json{{"increment", json_number(it.increment)}, {"contraction", json_number(it.contraction)}});
  }
  w.write_json("cubic.json", Json{{"converged", r.converged}, {"iterations", log}});
  return {r.converged ? 0 : kExitDivergence};
}

Outcome cmd_weights(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const WeightSet ws = eval_weights(s.mesh, s.eta0, cfg.params, s.grid);
  std::ostringstream a, b;
  write_weights_csv(a, ws);
  write_envelope_csv(b, ws);
  w.write("weights.csv", a.str());
  w.write("envelope.csv", b.str());
  w.write_json("weights.json", Json{{"clamped_fraction", ws.clamped_fraction()},
                                    {"floor_applied_phi", ws.floor_applied_phi},
                                    {"floor_applied_check", ws.floor_applied_check},
                                    {"floor_applied_hat", ws.floor_applied_hat}});
  return {};
}

Outcome cmd_identity(const RunConfig& cfg, RunWriter& w) {
  Params p = cfg.params;
  p.s = cfg.s_list.front();
  p.lambda = cfg.lambda_list.front();
  const TestFunctionFamily family = make_family(cfg.seed, cfg.family_size, cfg.geom);
  const auto points = collocation_points(cfg.geom, p.T, cfg.collocation_count, cfg.seed + 5);
  Json rows = Json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < family.members.size(); ++k) {
    const IdentityDefect d = conjugate_identity_defect(family.members[k], p, cfg.geom, points);
    worst = std::max(worst, d.worst());
    Json row = to_json(d);
    row["member"] = k;
    rows.push_back(row);
  }
  w.write_json("identity.json", Json{{"s", p.s}, {"lambda", p.lambda}, {"worst", worst}, {"members", rows}});
  return {0, Json{{"identity", worst <= 1e-9}}};
}

Outcome cmd_ratio(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const TestFunctionFamily family = make_family(cfg.seed, cfg.family_size, cfg.geom);
  const auto rows =
      carleman_ratio(family, cfg.params, cfg.s_list, cfg.lambda_list, s.mesh, cfg.geom, s.grid, cfg.threads);
  std::ostringstream out;
  write_ratio_csv(out, rows);
  w.write("carleman_ratio.csv", out.str());
  return {};
}

void write_control(RunWriter& w, const ControlResult& r) {
  w.write_json("control.json", to_json(r));
  w.write("h.csv", csv_of(r.h));
  w.write("y.csv", csv_of(r.y));
}

Outcome cmd_linear(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const ThetaStepper stepper(s.ops, cfg.params, s.grid);
  const NodeEnvelope env = node_envelope(cfg.params, s.grid, s.eta0.sup_norm);
  const ControlResult r = solve_fi_variational(stepper, env, initial_datum(s, cfg), Trajectory{});
  write_control(w, r);
  return {0, Json{{"cg_converged", r.converged}, {"terminal_ratio_1e-3", r.terminal_ratio <= 1e-3}}};
}

Outcome cmd_hum(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const ThetaStepper stepper(s.ops, cfg.params, s.grid);
  const ControlResult r = penalized_hum(stepper, initial_datum(s, cfg), Trajectory{}, cfg.hum_eps);
  write_control(w, r);
  return {0, Json{{"cg_converged", r.converged}, {"terminal_ratio_1e-3", r.terminal_ratio <= 1e-3}}};
}

Outcome cmd_observability(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const ObservabilityReport r = observability_constant(s.ops, s.mesh, cfg.params, s.grid, s.eta0.sup_norm,
                                                       cfg.observability_samples, cfg.seed + 8, cfg.geom, cfg.threads);
  w.write_json("observability.json", to_json(r));
  return {};
}

Outcome cmd_nonlinear(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const ThetaStepper stepper(s.ops, cfg.params, s.grid);
  NonlinearControlLog log;
  const ControlResult r = nonlinear_null_control(stepper, node_envelope(cfg.params, s.grid, s.eta0.sup_norm),
                                                 initial_datum(s, cfg), log);
  std::string lines;
  for (const auto& it : log.iterations) lines += to_json(it).dump() + "\n";
  w.write("nonlinear.jsonl", lines);
  Json summary = to_json(log);
  summary["control"] = to_json(r);
  w.write_json("nonlinear.json", summary);
  w.write("h.csv", csv_of(r.h));
  if (log.diverged) std::cerr << "divergence: " << log.reason << "\n";
  return {log.converged ? 0 : kExitDivergence, Json{{"converged", log.converged}}};
}

Outcome cmd_delta(const RunConfig& cfg, RunWriter& w) {
  const Desk s = make_desk(cfg);
  const ThetaStepper stepper(s.ops, cfg.params, s.grid);
  const DeltaEstimate est = estimate_delta(stepper, node_envelope(cfg.params, s.grid, s.eta0.sup_norm),
                                           bump(s, cfg, cfg.delta_direction_h1), cfg.delta_scales);
  Json j = to_json(est);
  j["delta_h1"] = json_number(est.delta * cfg.delta_direction_h1);
  w.write_json("estimate_delta.json", j);
  return {0, Json{{"delta_positive", est.delta > 0.0}}};
}

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"mesh", cmd_mesh},
      {"solve-forward", cmd_forward},
      {"solve-adjoint", cmd_adjoint},
      {"solve-cubic", cmd_cubic},
      {"weights", cmd_weights},
      {"carleman-identity", cmd_identity},
      {"carleman-ratio", cmd_ratio},
      {"control-linear", cmd_linear},
      {"control-hum", cmd_hum},
      {"observability", cmd_observability},
      {"control-nonlinear", cmd_nonlinear},
      {"estimate-delta", cmd_delta},
  };
  return table;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Null control of the cubic complex Ginzburg-Landau equation with dynamic boundary conditions"};
  std::string command, config_pos, config_opt, out_dir;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("command", command, "mesh, solve-forward, solve-adjoint, solve-cubic, weights, carleman-identity, "
                                     "carleman-ratio, control-linear, control-hum, observability, control-nonlinear, "
                                     "estimate-delta, verify-all")
      ->required();
  app.add_option("config_file", config_pos, "key = value configuration file");
  app.add_option("--config", config_opt, "key = value configuration file");
  auto* out_flag = app.add_option("--out", out_dir, "output directory");
  auto* seed_flag = app.add_option("--seed", seed, "seed for every random draw");
  app.add_option("--set", sets, "override, key=value (repeatable)");
  auto* threads_flag = app.add_option("--threads", threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitPrecondition;
  }

  try {
    const bool known = command == "verify-all" || commands().count(command) > 0;
    require(known, "unknown command '" + command + "'");
    require(config_pos.empty() || config_opt.empty(),
            "give the configuration file either positionally or with --config");
    const std::string path = config_opt.empty() ? config_pos : config_opt;
    RunConfig cfg = load_config(path, sets);
    if (*out_flag) cfg.out_dir = out_dir;
    if (*seed_flag) cfg.seed = seed;
    if (*threads_flag) cfg.threads = threads;
    cfg.validate();

    if (command == "verify-all") {
      const AcceptanceReport report = run_acceptance(cfg, cfg.out_dir, &std::cout);
      return report.all_passed() ? 0 : kExitFailed;
    }

    const auto start = std::chrono::steady_clock::now();
    RunWriter writer(cfg.out_dir);
    if (!path.empty()) writer.add_input(path, read_file(path));
    const Outcome outcome = commands().at(command)(cfg, writer);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    writer.finish(cfg, command, outcome.checks, wall);
    return outcome.code;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const NumericalError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}
