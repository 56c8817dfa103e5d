#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "cgl/config.hpp"
#include "cgl/io.hpp"

using namespace cgl;

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("non-finite numbers become strings") {
  CHECK(json_number(INFINITY) == "inf");
  CHECK(json_number(-INFINITY) == "-inf");
  CHECK(json_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(json_number(0.25) == 0.25);
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("configuration text round trip") {
  RunConfig c;
  apply_setting(c, "alpha", "-0.25");
  apply_setting(c, "s_list", "3, 4.5");
  apply_setting(c, "strict_weights", "true");
  apply_setting(c, "out_dir", "somewhere");
  const std::string text = config_text(c);
  std::istringstream in("# comment\n\n" + text);
  RunConfig back;
  read_config(in, back);
  CHECK(config_text(back) == text);
  CHECK(back.params.alpha == -0.25);
  CHECK(back.s_list == std::vector<double>{3.0, 4.5});
  CHECK(back.params.strict_weights);
  CHECK(back.out_dir == "somewhere");
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == config_keys().size());
}

TEST_CASE("overrides take precedence over the file") {
  const auto path = std::filesystem::temp_directory_path() / "cgl_test_config.txt";
  {
    std::ofstream out(path);
    out << "steps = 12\nseed = 9\n";
  }
  const RunConfig c = load_config(path.string(), {"seed=4", "c = 2"});
  CHECK(c.steps == 12);
  CHECK(c.seed == 4);
  CHECK(c.params.c == 2.0);
  std::filesystem::remove(path);
  const RunConfig d = load_config("", {});
  CHECK(config_text(d) == config_text(RunConfig{}));
}

TEST_CASE("malformed configuration is rejected") {
  RunConfig c;
  CHECK_THROWS_AS(apply_setting(c, "no_such_key", "1"), PreconditionError);
  CHECK_THROWS_AS(apply_setting(c, "steps", "1.5"), PreconditionError);
  CHECK_THROWS_AS(apply_setting(c, "alpha", "abc"), PreconditionError);
  CHECK_THROWS_AS(apply_setting(c, "alpha", "nan"), PreconditionError);
  CHECK_THROWS_AS(load_config("", {"steps"}), PreconditionError);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg", {}), PreconditionError);
  RunConfig bad;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("run writer records hashes in the manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "cgl_test_writer";
  std::filesystem::remove_all(dir);
  RunWriter w(dir.string());
  w.write("a.txt", "hello");
  w.write_json("b.json", Json{{"x", 1}});
  w.finish(RunConfig{}, "unit", Json::object(), 0.5);
  const Json m = Json::parse(read_file((dir / "manifest.json").string()));
  CHECK(m["artifact_version"] == kArtifactVersion);
  REQUIRE(m["outputs"].size() == 2);
  CHECK(m["outputs"][0]["fnv1a64"] == hex64(fnv1a64("hello")));
  CHECK(read_file((dir / "a.txt").string()) == "hello");
  CHECK(std::filesystem::exists(dir / "timing.txt"));
  CHECK_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
  std::filesystem::remove_all(dir);
}
