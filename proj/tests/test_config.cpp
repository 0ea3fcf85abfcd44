#include "rdsync/config.hpp"
#include "rdsync/error.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>

using namespace rdsync;

TEST_CASE("sections, dotted keys, comments and bare strings") {
  const auto c = Config::parse(R"(
# leading comment
field.kind = v_e
[noise]
seed = 42   # trailing comment
sigma = 1.5
name = "a # not a comment"
[run]
x0 = [[1, 0], [0, 1]]
flag = true
)");
  CHECK(c.string("field.kind") == "v_e");
  CHECK(c.integer("noise.seed") == 42);
  CHECK(c.number("noise.sigma") == 1.5);
  CHECK(c.string("noise.name") == "a # not a comment");
  CHECK(c.boolean("run.flag", false));
  CHECK(c.points("run.x0", 2).size() == 2);
  CHECK(c.number("noise.missing", 7.0) == 7.0);
}

TEST_CASE("typed access errors name the key") {
  const auto c = Config::parse("[noise]\nseed = 1.5\nsigma = \"x\"\n[run]\nx0 = [1, 2, 3]\n");
  try {
    (void)c.integer("noise.seed");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key_path() == "noise.seed");
  }
  CHECK_THROWS_AS((void)c.number("noise.sigma"), ConfigError);
  CHECK_THROWS_AS((void)c.point("run.x0", 2), ConfigError);
  CHECK_THROWS_AS((void)c.at("nope"), ConfigError);
}

TEST_CASE("syntax errors report the line") {
  try {
    (void)Config::parse("[noise]\nseed 3\n", "x.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS((void)Config::parse("[noise\n"), ConfigError);
  CHECK_THROWS_AS((void)Config::parse("a =\n"), ConfigError);
}

TEST_CASE("unknown keys are rejected") {
  const auto c = Config::parse("[noise]\nseed = 1\nsede = 2\n");
  CHECK_NOTHROW(c.require_known({"noise.seed", "noise.sede"}));
  CHECK_THROWS_AS(c.require_known({"noise.seed"}), ConfigError);
  CHECK_NOTHROW(c.require_known({"noise."}));
}

TEST_CASE("JSON round trip and hash") {
  const auto c = Config::parse("[field]\nkind = \"ou\"\ndim = 3\n[run]\nworkers = 4\nx0 = [1, 2, 3]\n");
  const auto j = c.snapshot();
  CHECK(j["field"]["dim"] == 3);
  const auto back = Config::from_json(j);
  CHECK(back.values() == c.values());
  CHECK(back.hash() == c.hash());
  // Worker count and output directory do not enter the hash.
  auto w = c;
  w.set("run.workers", 1);
  w.set("output.dir", "elsewhere");
  CHECK(w.hash() == c.hash());
  w.set("field.dim", 2);
  CHECK(w.hash() != c.hash());
  // Text and JSON spellings of the same value hash equally.
  CHECK(Config::parse("a = 1.0\n").hash() == Config::parse("{\"a\": 1.0}").hash());
}

TEST_CASE("manifest documents load their config") {
  const auto c = Config::parse("[noise]\nseed = 9\n");
  Json manifest{{"config", c.snapshot()}, {"config_hash", c.hash()}, {"outputs", Json::array()}};
  const auto path = std::filesystem::temp_directory_path() / "rdsync_manifest_test.json";
  std::ofstream(path) << manifest.dump();
  const auto loaded = Config::load(path.string());
  CHECK(loaded.integer("noise.seed") == 9);
  std::filesystem::remove(path);
  CHECK_THROWS_AS((void)Config::load("/nonexistent/x.cfg"), ConfigError);
}

TEST_CASE("sha256 test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fields and integrators from config") {
  auto f = field_from_config(Config::parse("[field]\nkind = \"double_well\"\ndim = 2\n"));
  CHECK(f.dim() == 2);
  CHECK(f.is_gradient());
  auto lin = field_from_config(Config::parse("[field]\nkind = \"linear\"\nparams.matrix = [[-1, 0], [0, -2]]\n"));
  CHECK(lin.drift(Vec::Ones(2))[1] == doctest::Approx(-2.0));
  auto custom = field_from_config(Config::parse("[field]\nkind = \"custom\"\ndim = 1\nexpr = \"-x1^3\"\n"));
  CHECK(custom.drift(Vec::Constant(1, 2.0))[0] == doctest::Approx(-8.0));
  CHECK_THROWS_AS(field_from_config(Config::parse("[field]\nkind = \"nope\"\n")), ConfigError);
  CHECK_THROWS_AS(field_from_config(Config::parse("[field]\nkind = \"custom\"\ndim = 1\nexpr = \"x1 +\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(field_from_config(Config::parse("[field]\nkind = \"linear\"\nparams.matrix = [[1, 2], [3]]\n")),
                  ConfigError);

  const auto spec = integrator_from_config(Config::parse("[integrator]\nscheme = \"euler_maruyama\"\ndt = 0.01\n"));
  CHECK(spec.scheme == Scheme::euler_maruyama);
  CHECK(spec.dt == 0.01);
  CHECK_THROWS_AS(integrator_from_config(Config::parse("[integrator]\ndt = 0.01\n[noise]\ndelta = 0.02\n")),
                  ConfigError);
  CHECK_THROWS_AS(integrator_from_config(Config::parse("[integrator]\nscheme = \"rk4\"\n")), ConfigError);
}
