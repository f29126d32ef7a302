#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "drive/config.hpp"
#include "drive/error.hpp"
#include "support.hpp"

using namespace drive;
using testing::error_code_of;

namespace {

// The key a ValidationError names, or "" if something else happened.
std::string failing_key(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ValidationError) return e.what();
    return "other";
  }
  return "";
}

std::filesystem::path write_conf(const std::string& name, const std::string& body) {
  const auto p = testing::scratch_dir("config_" + name) / "c.conf";
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("no file and an empty file give the documented defaults") {
  const auto a = load_config({}, {});
  CHECK(a.similarity.tau == 0.93);
  CHECK(a.similarity.epsilon == 1.0);
  CHECK(a.train.batch_size == 64);
  CHECK(a.train.learning_rate == 1e-5);
  CHECK(a.loss.delta_t == 0.615);
  CHECK(a.loss.delta_i == 1.223);
  CHECK(a.world.n_samples == 2000);
  CHECK(a.log_level == "warn");
  const auto b = load_config(write_conf("empty", ""), {});
  CHECK(a.resolved() == b.resolved());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("file values and overrides layer in order") {
  const auto p = write_conf("layer", "# comment\nsimilarity.tau = 0.85\ntrain.epochs=3  # trailing\n\n");
  const auto c = load_config(p, {});
  CHECK(c.similarity.tau == 0.85);
  CHECK(c.train.epochs == 3);
  const auto o = load_config(p, {{"similarity.tau", "0.9"}});
  CHECK(o.similarity.tau == 0.9);
  CHECK(o.train.epochs == 3);
  CHECK(o.hash() != c.hash());
}

TEST_CASE("presets apply before explicit train keys") {
  CHECK(load_config(testing::fixture("toy.conf"), {}).train.learning_rate == 1e-3);
  const auto c = load_config({}, {{"train.learning_rate", "0.01"}, {"train.preset", "toy"}});
  CHECK(c.train.learning_rate == 0.01);
  CHECK(load_config({}, {{"train.preset", "default"}}).train.learning_rate == 1e-5);
  CHECK(failing_key([] { load_config({}, {{"train.preset", "huge"}}); }).find("train.preset") !=
        std::string::npos);
}

TEST_CASE("loss deltas feed the training objective") {
  const auto c = load_config({}, {{"loss.delta_t", "0.5"}});
  CHECK(c.train.delta_t == 0.5);
  CHECK(c.loss.delta_t == 0.5);
}

TEST_CASE("invalid values name their key") {
  CHECK(failing_key([] { load_config({}, {{"similarity.tau", "1.5"}}); }) == "tau");
  CHECK(failing_key([] { load_config({}, {{"similarity.epsilon", "2"}}); }) == "epsilon");
  CHECK(failing_key([] { load_config({}, {{"train.batch_size", "0"}}); }).find("train.") == 0);
  CHECK(failing_key([] { load_config({}, {{"world.n_relations", "1"}}); }).find("world.") == 0);
  CHECK(failing_key([] { load_config({}, {{"train.epochs", "three"}}); }).find("train.epochs") !=
        std::string::npos);
  CHECK(failing_key([] { load_config({}, {{"no.such.key", "1"}}); }).find("no.such.key") !=
        std::string::npos);
  CHECK(failing_key([] { load_config({}, {{"log.level", "loud"}}); }).find("log.level") !=
        std::string::npos);
  CHECK(failing_key([] { load_config({}, {{"paths.dataset", "/nonexistent/x.jsonl"}}); })
            .find("paths.dataset") != std::string::npos);
  // Output paths need not exist yet.
  CHECK(load_config({}, {{"paths.output", "/tmp/not/yet/there"}}).output_path ==
        "/tmp/not/yet/there");
}

TEST_CASE("malformed lines are parse errors with line numbers") {
  try {
    parse_config_text("a = 1\nthis line has no equals\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(error_code_of([] { parse_config_text(" = 3\n"); }) == ErrorCode::ParseError);
  const auto o = parse_config_text("x.y = a b  \n");
  REQUIRE(o.size() == 1);
  CHECK(o[0].second == "a b");
}

TEST_CASE("environment sets the annotation url below overrides") {
  ::setenv("DRIVE_ANNOTATION_URL", "http://env.example:1", 1);
  CHECK(load_config({}, {}).annotation.url == "http://env.example:1");
  CHECK(load_config({}, {{"annotation.url", "http://flag:2"}}).annotation.url == "http://flag:2");
  ::unsetenv("DRIVE_ANNOTATION_URL");
  CHECK(load_config({}, {}).annotation.url.empty());
}

TEST_CASE("every documented key resolves") {
  const auto c = load_config({}, {});
  const auto r = c.resolved();
  for (const auto& k : config_keys())
    if (k != "train.preset") CHECK_MESSAGE(r.count(k) == 1, k);
  CHECK(r.size() >= 30);
}
