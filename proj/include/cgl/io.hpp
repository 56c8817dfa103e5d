#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cgl/carleman.hpp"
#include "cgl/config.hpp"
#include "cgl/control.hpp"
#include "cgl/evolution.hpp"

namespace cgl {

using Json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "1.0.0";

/// printf("%.17g").
std::string format_double(double value);

/// A number, or the strings "inf", "-inf", "nan" for non-finite values.
Json json_number(double value);

/// One row per (node, vertex): node_index,t,vertex_index,re,im.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

Json to_json(const ControlResult& result);  // summary only; trajectories go to CSV
Json to_json(const VNormLedger& norms);
Json to_json(const EnergyReport& report);
Json to_json(const NonlinearIterate& iterate);
Json to_json(const NonlinearControlLog& log);
Json to_json(const ObservabilityReport& report);
Json to_json(const DeltaEstimate& estimate);
Json to_json(const IdentityDefect& defect);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Output directory of one run. Every file is written to a temporary name and renamed into place;
/// the manifest lists each output with its hash.
class RunWriter {
 public:
  explicit RunWriter(std::string dir);

  const std::string& dir() const { return dir_; }
  std::string path(const std::string& name) const;

  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const Json& value);
  void add_input(const std::string& name, std::string_view content);

  /// Writes timing.txt (wall clock, not hashed) and then manifest.json.
  void finish(const RunConfig& config, const std::string& command, const Json& checks, double wall_seconds,
              const std::string& timing_detail = {});

  const std::vector<std::string>& outputs() const { return names_; }

 private:
  std::string dir_;
  std::vector<std::string> names_;
  std::vector<std::uint64_t> hashes_;
  Json inputs_ = Json::object();
};

void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace cgl
