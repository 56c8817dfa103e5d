#include "cgl/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cgl {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Json json_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "node_index,t,vertex_index,re,im\n";
  for (int k = 0; k < static_cast<int>(traj.frames.size()); ++k) {
    const std::string t = format_double(traj.grid.node(k));
    const CVector& frame = traj.frames[k];
    for (Eigen::Index i = 0; i < frame.size(); ++i) {
      out << k << ',' << t << ',' << i << ',' << format_double(frame[i].real()) << ','
          << format_double(frame[i].imag()) << '\n';
    }
  }
}

Json to_json(const VNormLedger& n) {
  return Json{{"log10_state", json_number(n.state)},
              {"log10_control", json_number(n.control_set)},
              {"log10_control_literal", json_number(n.control_literal)},
              {"log10_source", json_number(n.source)},
              {"log10_capacity_h2", json_number(n.capacity_h2)},
              {"log10_capacity_h1", json_number(n.capacity_h1)}};
}

Json to_json(const ControlResult& r) {
  return Json{{"terminal_ratio", json_number(r.terminal_ratio)},
              {"control_norm", json_number(r.control_norm)},
              {"support_violation", json_number(r.support_violation)},
              {"cg_iterations", r.cg_iters},
              {"cg_relative_residual", json_number(r.cg_residual)},
              {"cg_converged", r.converged},
              {"underflow_nodes", r.underflow_nodes},
              {"weighted_norms", to_json(r.weighted_norms)}};
}

Json to_json(const EnergyReport& e) {
  Json l2 = Json::array(), h1 = Json::array();
  for (double v : e.L2) l2.push_back(json_number(v));
  for (double v : e.H1) h1.push_back(json_number(v));
  return Json{{"L2", l2},
              {"H1", h1},
              {"bulk_dissipation", json_number(e.bulk_dissipation)},
              {"surface_dissipation", json_number(e.surface_dissipation)},
              {"c1_ratio", json_number(e.c1_ratio)}};
}

Json to_json(const NonlinearIterate& it) {
  return Json{{"iteration", it.iteration},
              {"log10_source_norm", json_number(it.source_norm)},
              {"log10_capacity_ratio", json_number(it.capacity_ratio)},
              {"control_increment", json_number(it.control_increment)},
              {"contraction", json_number(it.contraction)},
              {"cg_iterations", it.cg_iters}};
}

Json to_json(const NonlinearControlLog& log) {
  return Json{{"converged", log.converged},
              {"diverged", log.diverged},
              {"reason", log.reason},
              {"iterations", log.iterations.size()},
              {"max_contraction", json_number(log.max_contraction)},
              {"cubic_residual", json_number(log.cubic_residual)},
              {"state_residual", json_number(log.state_residual)},
              {"final_terminal_ratio", json_number(log.final_terminal_ratio)}};
}

Json to_json(const ObservabilityReport& r) {
  Json ratios = Json::array();
  for (double v : r.log10_ratios) ratios.push_back(json_number(v));
  return Json{{"max_ratio", json_number(r.max_ratio)},
              {"log10_max_ratio", json_number(r.log10_max_ratio)},
              {"excluded", r.excluded},
              {"log10_ratios", ratios}};
}

Json to_json(const DeltaEstimate& d) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < d.scales.size(); ++i) {
    rows.push_back(
        Json{{"scale", json_number(d.scales[i])}, {"converged", d.converged[i] != 0}, {"reason", d.reasons[i]}});
  }
  return Json{{"delta", json_number(d.delta)}, {"scan", rows}};
}

Json to_json(const IdentityDefect& d) {
  return Json{{"bulk", json_number(d.bulk)}, {"boundary", json_number(d.boundary)}, {"worst_point", d.worst_point}};
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), "cannot write '" + tmp + "'");
    out << content;
    out.flush();
    require(static_cast<bool>(out), "write failed for '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  require(!ec, "cannot move '" + tmp + "' into place: " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunWriter::RunWriter(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  require(!ec && fs::is_directory(dir_), "output directory '" + dir_ + "' is not writable");
}

std::string RunWriter::path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

void RunWriter::write(const std::string& name, const std::string& content) {
  write_file_atomic(path(name), content);
  const std::uint64_t h = fnv1a64(content);
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) {
      hashes_[i] = h;
      return;
    }
  }
  names_.push_back(name);
  hashes_.push_back(h);
}

void RunWriter::write_json(const std::string& name, const Json& value) { write(name, value.dump(2) + "\n"); }

void RunWriter::add_input(const std::string& name, std::string_view content) {
  inputs_[name] = hex64(fnv1a64(content));
}

void RunWriter::finish(const RunConfig& config, const std::string& command, const Json& checks, double wall_seconds,
                       const std::string& timing_detail) {
  write_file_atomic(path("timing.txt"),
                    "wall_clock_seconds = " + format_double(wall_seconds) + "\n" + timing_detail);
  Json outputs = Json::array();
  for (std::size_t i = 0; i < names_.size(); ++i) {
    outputs.push_back(Json{{"file", names_[i]}, {"fnv1a64", hex64(hashes_[i])}});
  }
  const std::string snapshot = config_text(config);
  Json manifest{{"artifact_version", kArtifactVersion},
                {"command", command},
                {"seed", config.seed},
                {"config", snapshot},
                {"config_fnv1a64", hex64(fnv1a64(snapshot))},
                {"inputs", inputs_},
                {"outputs", outputs},
                {"wall_clock_file", "timing.txt"},
                {"checks", checks}};
  write_file_atomic(path("manifest.json"), manifest.dump(2) + "\n");
}

}  // namespace cgl
