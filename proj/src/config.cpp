#include "cgl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace cgl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  require(ec == std::errc() && ptr == end && std::isfinite(v),
          "config: '" + key + "' expects a number, got '" + text + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& text) {
  Int v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  require(ec == std::errc() && ptr == end, "config: '" + key + "' expects an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw PreconditionError("config: '" + key + "' expects true or false, got '" + text + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  require(!out.empty(), "config: '" + key + "' expects a comma-separated list");
  return out;
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_double(values[i]);
  return out;
}

struct Binding {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define CGL_DOUBLE(name, member)                                                              \
  Binding {                                                                                   \
    name, [](const RunConfig& c) { return format_double(c.member); },                         \
        [](RunConfig& c, const std::string& v) { c.member = parse_double(name, v); }          \
  }
#define CGL_INT(name, member, type)                                                           \
  Binding {                                                                                   \
    name, [](const RunConfig& c) { return std::to_string(c.member); },                        \
        [](RunConfig& c, const std::string& v) { c.member = parse_int<type>(name, v); }       \
  }
#define CGL_LIST(name, member)                                                                \
  Binding {                                                                                   \
    name, [](const RunConfig& c) { return format_list(c.member); },                           \
        [](RunConfig& c, const std::string& v) { c.member = parse_list(name, v); }            \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table{
      CGL_DOUBLE("a", params.a),
      CGL_DOUBLE("b", params.b),
      CGL_DOUBLE("c", params.c),
      CGL_DOUBLE("alpha", params.alpha),
      CGL_DOUBLE("gamma", params.gamma),
      CGL_DOUBLE("T", params.T),
      CGL_DOUBLE("s", params.s),
      CGL_DOUBLE("lambda", params.lambda),
      CGL_DOUBLE("m", params.m),
      Binding{"strict_weights",
              [](const RunConfig& c) { return std::string(c.params.strict_weights ? "true" : "false"); },
              [](RunConfig& c, const std::string& v) { c.params.strict_weights = parse_bool("strict_weights", v); }},
      CGL_DOUBLE("theta", params.theta),
      CGL_DOUBLE("cg_tol", params.cg_tol),
      CGL_INT("cg_maxit", params.cg_maxit, int),
      CGL_DOUBLE("picard_tol", params.picard_tol),
      CGL_INT("picard_maxit", params.picard_maxit, int),
      CGL_INT("picard_cg_maxit", params.picard_cg_maxit, int),
      CGL_DOUBLE("weight_floor", params.weight_floor),
      CGL_DOUBLE("cubic_gate", params.cubic_gate),
      CGL_DOUBLE("R", geom.R),
      CGL_DOUBLE("r_inner", geom.r_inner),
      CGL_DOUBLE("r_control", geom.r_control),
      CGL_DOUBLE("h_target", h_target),
      CGL_INT("steps", steps, int),
      CGL_INT("seed", seed, std::uint64_t),
      CGL_INT("mesh_seed", mesh_seed, std::uint64_t),
      CGL_INT("threads", threads, int),
      Binding{"out_dir", [](const RunConfig& c) { return c.out_dir; },
              [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      CGL_DOUBLE("u0_x", u0_x),
      CGL_DOUBLE("u0_y", u0_y),
      CGL_DOUBLE("u0_beta", u0_beta),
      CGL_DOUBLE("u0_h1", u0_h1),
      CGL_DOUBLE("u0_scale", u0_scale),
      CGL_INT("family_size", family_size, int),
      CGL_INT("collocation_count", collocation_count, int),
      CGL_LIST("s_list", s_list),
      CGL_LIST("lambda_list", lambda_list),
      CGL_DOUBLE("hum_eps", hum_eps),
      CGL_INT("observability_samples", observability_samples, int),
      CGL_LIST("delta_scales", delta_scales),
      CGL_DOUBLE("delta_direction_h1", delta_direction_h1),
  };
  return table;
}

#undef CGL_DOUBLE
#undef CGL_INT
#undef CGL_LIST

}  // namespace

Params RunConfig::desk_params() {
  Params p;
  p.c = 1e6;
  return p;
}

std::vector<double> RunConfig::default_delta_scales() {
  std::vector<double> out;
  for (int k = 0; k <= 12; ++k) out.push_back(std::ldexp(1.0, -k));
  return out;
}

void RunConfig::validate() const {
  params.validate();
  geom.validate();
  require(h_target > 0.0, "config: h_target must be positive");
  require(steps >= 1, "config: steps must be at least 1");
  require(threads >= 1, "config: threads must be at least 1");
  require(!out_dir.empty(), "config: out_dir must not be empty");
  require(u0_beta >= 0.0 && u0_h1 >= 0.0, "config: u0_beta and u0_h1 must be non-negative");
  require(family_size >= 1 && collocation_count >= 1 && observability_samples >= 1,
          "config: sample counts must be positive");
  require(hum_eps > 0.0, "config: hum_eps must be positive");
  require(delta_direction_h1 > 0.0, "config: delta_direction_h1 must be positive");
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& b : bindings()) {
    if (key == b.key) {
      b.set(config, value);
      return;
    }
  }
  throw PreconditionError("config: unknown key '" + key + "'");
}

void read_config(std::istream& in, RunConfig& config) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config line " + std::to_string(number) + ": expected key = value");
    apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void write_config(std::ostream& out, const RunConfig& config) {
  for (const auto& b : bindings()) out << b.key << " = " << b.get(config) << '\n';
}

std::string config_text(const RunConfig& config) {
  std::ostringstream out;
  write_config(out, config);
  return out.str();
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config;
  if (!path.empty()) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "config: cannot open '" + path + "'");
    read_config(in, config);
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    require(eq != std::string::npos, "config: override '" + item + "' is not key=value");
    apply_setting(config, trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  config.validate();
  return config;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& b : bindings()) out.emplace_back(b.key);
  return out;
}

}  // namespace cgl
