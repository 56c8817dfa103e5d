#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cgl/params.hpp"

namespace cgl {

/// Everything a command needs: model constants, geometry, discretization and experiment options.
/// Defaults describe the desk instance.
struct RunConfig {
  Params params = desk_params();
  DiskGeometry geom;

  double h_target = 0.1;
  int steps = 64;
  std::uint64_t seed = 1;
  std::uint64_t mesh_seed = 1;
  int threads = 1;
  std::string out_dir = "cgl-out";

  // initial datum: Gaussian bump exp(-beta |x - center|^2) rescaled to u0_h1 in the 𝕙¹ norm
  double u0_x = 0.3;
  double u0_y = 0.1;
  double u0_beta = 4.0;
  double u0_h1 = 1e-3;
  double u0_scale = 1.0;  // extra factor applied after the rescaling

  // Carleman audit
  int family_size = 20;
  int collocation_count = 200;
  std::vector<double> s_list{5.0, 10.0, 20.0};
  std::vector<double> lambda_list{2.0};

  // controls
  double hum_eps = 1e-8;
  int observability_samples = 50;
  std::vector<double> delta_scales = default_delta_scales();
  double delta_direction_h1 = 0.1;

  static Params desk_params();
  static std::vector<double> default_delta_scales();  // 2^0, 2^-1, ..., 2^-12

  void validate() const;
};

/// Applies one `key = value` setting; throws PreconditionError for unknown keys or malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads `key = value` lines; `#` starts a comment, blank lines are ignored.
void read_config(std::istream& in, RunConfig& config);

/// Writes every key in a fixed order with round-trip precision.
void write_config(std::ostream& out, const RunConfig& config);
std::string config_text(const RunConfig& config);

/// Defaults, then the file (if any), then `key=value` overrides in order.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

/// All recognised keys in output order.
std::vector<std::string> config_keys();

}  // namespace cgl
