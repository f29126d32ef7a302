#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "drive/error.hpp"
#include "drive/similarity.hpp"
#include "support.hpp"

using namespace drive;
using testing::error_code_of;

namespace {

Phrase noun(std::string_view t) { return Phrase::from_text(t, HeadRule::Nominal); }
Phrase verb(std::string_view t) { return Phrase::from_text(t, HeadRule::Verbal); }

// Two unit vectors in 2-D with exact inner product c.
EmbeddingLexicon planted_pair(const std::string& a, const std::string& b, double c) {
  EmbeddingLexicon lex(2);
  lex.add_vector(a, Eigen::Vector2d(1.0, 0.0));
  lex.add_vector(b, Eigen::Vector2d(c, std::sqrt(1.0 - c * c)));
  return lex;
}

}  // namespace

TEST_CASE("phrase embedding is the normalized token mean") {
  EmbeddingLexicon lex(2);
  lex.add_vector("red", Eigen::Vector2d(1.0, 0.0));
  lex.add_vector("car", Eigen::Vector2d(0.0, 1.0));
  lex.add_vector("big", Eigen::Vector2d(3.0, 4.0));

  const Vector one = phrase_embedding(noun("big"), lex);
  CHECK(one[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(one[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK((phrase_embedding(noun("big big"), lex) - one).norm() < 1e-12);

  const Vector mean = phrase_embedding(noun("red car"), lex);
  CHECK(mean.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(mean[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

  // Unknown tokens are ignored; a phrase with none known is an error.
  CHECK((phrase_embedding(noun("unknownword car"), lex) - Eigen::Vector2d(0, 1)).norm() < 1e-12);
  CHECK(error_code_of([&] { phrase_embedding(noun("zebra"), lex); }) == ErrorCode::NoKnownTokens);
}

TEST_CASE("a full-text lexicon entry overrides the token mean") {
  std::istringstream in("3 2\nplane 1 0\nsky 0 1\nplane_in_sky 0.6 -0.8\n");
  const auto lex = EmbeddingLexicon::read_vectors(in);
  CHECK(lex.size() == 3);
  const Vector v = phrase_embedding(noun("plane in sky"), lex);
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(-0.8));
}

TEST_CASE("approx_equal examples") {
  SimilarityConfig cfg;
  cfg.tau = 0.93;
  const auto lex = planted_pair("dog", "puppy", 0.90);
  CHECK(phrase_cosine(noun("dog"), noun("puppy"), lex) == doctest::Approx(0.90).epsilon(1e-12));
  CHECK_FALSE(approx_equal(noun("dog"), noun("puppy"), lex, cfg));
  CHECK(approx_equal(noun("dog"), noun("dog"), lex, cfg));
  cfg.tau = 0.90;
  CHECK(approx_equal(noun("dog"), noun("puppy"), lex, cfg));

  auto syn = EmbeddingLexicon::load(testing::fixture("lexicon.txt"),
                                    testing::fixture("synonyms.json"));
  SimilarityConfig def;
  CHECK(phrase_cosine(verb("driving"), verb("steering"), syn) == doctest::Approx(0.0));
  CHECK(relation_approx_equal(verb("driving"), verb("steering"), syn, def));
  CHECK_FALSE(relation_approx_equal(verb("driving"), verb("entering"), syn, def));
  CHECK(relation_approx_equal(verb("entering"), verb("entering"), syn, def));
  CHECK_FALSE(relation_approx_equal(verb("is in"), verb("flies through"), syn, def));
}

TEST_CASE("synonym sets respect the confidence threshold") {
  EmbeddingLexicon lex(2);
  lex.add_vector("a", Eigen::Vector2d(1, 0));
  lex.add_vector("b", Eigen::Vector2d(0, 1));
  lex.add_synonym_set({"a", "b"}, 0.7);
  SimilarityConfig cfg;
  cfg.epsilon = 1.0;
  CHECK_FALSE(approx_equal(noun("a"), noun("b"), lex, cfg));
  cfg.epsilon = 0.7;
  CHECK(approx_equal(noun("a"), noun("b"), lex, cfg));
  CHECK(approx_equal(noun("b"), noun("a"), lex, cfg));
  // Heads share the set even when the full texts do not.
  CHECK(approx_equal(noun("red a"), noun("b"), lex, cfg));
}

TEST_CASE("synonyms json accepts both layouts") {
  EmbeddingLexicon lex(2);
  lex.add_vector("x", Eigen::Vector2d(1, 0));
  lex.add_vector("y", Eigen::Vector2d(0, 1));
  lex.read_synonyms_json(R"([{"words":["x","y"],"confidence":0.5}])");
  CHECK(lex.share_synonym_set("x", "y", 0.5));
  CHECK_FALSE(lex.share_synonym_set("x", "y", 0.6));
  CHECK(error_code_of([&] { lex.read_synonyms_json("{\"x\":1}"); }) == ErrorCode::ParseError);
}

TEST_CASE("lexicon file errors") {
  std::istringstream short_row("1 3\nx 1 2\n");
  CHECK(error_code_of([&] { EmbeddingLexicon::read_vectors(short_row); }) ==
        ErrorCode::ParseError);
  std::istringstream bad_header("two 3\n");
  CHECK(error_code_of([&] { EmbeddingLexicon::read_vectors(bad_header); }) ==
        ErrorCode::ParseError);
  EmbeddingLexicon lex(3);
  CHECK(error_code_of([&] { lex.add_vector("x", Eigen::Vector2d(1, 0)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("lexicon write then read round trip") {
  std::mt19937_64 rng(3);
  EmbeddingLexicon lex(5);
  for (int i = 0; i < 20; ++i) lex.add_vector("w" + std::to_string(i), testing::random_unit(5, rng));
  lex.add_vector("two words", testing::random_unit(5, rng));
  std::stringstream s;
  lex.write_vectors(s);
  const auto back = EmbeddingLexicon::read_vectors(s);
  CHECK(back.size() == lex.size());
  for (int i = 0; i < 20; ++i) {
    const std::string w = "w" + std::to_string(i);
    CHECK(*back.find(w) == *lex.find(w));
  }
  CHECK(*back.find("two words") == *lex.find("two words"));
}

TEST_CASE("triplet_approx_equal examples") {
  const auto lex = EmbeddingLexicon::load(testing::fixture("lexicon.txt"),
                                          testing::fixture("synonyms.json"));
  SimilarityConfig cfg;
  const auto in_sky = Triplet::from_text("plane", "is in", "sky");
  const auto flies = Triplet::from_text("plane", "flies through", "sky");
  CHECK(triplet_approx_equal(in_sky, flies, lex, cfg));
  CHECK(triplet_approx_equal(in_sky, in_sky, lex, cfg));
  CHECK_FALSE(triplet_approx_equal(Triplet::from_text("man", "driving", "car"),
                                   Triplet::from_text("dog", "eats", "food"), lex, cfg));
  CHECK(render_caption(in_sky) == caption_phrase(in_sky).text);
}

TEST_CASE("similarity config validation") {
  SimilarityConfig cfg;
  cfg.tau = 1.5;
  try {
    cfg.validate();
    FAIL("expected ValidationError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ValidationError);
    CHECK(std::string(e.what()).find("tau") != std::string::npos);
  }
  cfg.tau = 0.9;
  cfg.epsilon = -0.1;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::ValidationError);
}

TEST_CASE("approx_equal is symmetric, reflexive and monotone in tau") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto w = testing::random_mining_world(seed, 40);
    std::vector<Phrase> phrases;
    for (const auto& s : w.dataset) {
      phrases.push_back(s.triplet.subject);
      phrases.push_back(s.triplet.relation);
    }
    SimilarityConfig hi, lo;
    hi.tau = 0.95;
    lo.tau = 0.5;
    for (const auto& a : phrases) {
      CHECK(approx_equal(a, a, w.lex, hi));
      for (const auto& b : phrases) {
        const bool ab = approx_equal(a, b, w.lex, hi);
        REQUIRE(ab == approx_equal(b, a, w.lex, hi));
        REQUIRE(relation_approx_equal(a, b, w.lex, hi) == relation_approx_equal(b, a, w.lex, hi));
        if (ab) REQUIRE(approx_equal(a, b, w.lex, lo));
      }
    }
  }
}

TEST_CASE("approximate equality is not transitive") {
  // Three unit vectors at 0, 20 and 40 degrees: neighbours at cos 20 > tau,
  // the ends at cos 40 < tau.
  const double pi = std::acos(-1.0);
  EmbeddingLexicon lex(2);
  for (int k = 0; k < 3; ++k) {
    const double a = k * 20.0 * pi / 180.0;
    lex.add_vector(std::string(1, char('a' + k)), Eigen::Vector2d(std::cos(a), std::sin(a)));
  }
  SimilarityConfig cfg;
  cfg.tau = 0.9;
  CHECK(approx_equal(noun("a"), noun("b"), lex, cfg));
  CHECK(approx_equal(noun("b"), noun("c"), lex, cfg));
  CHECK_FALSE(approx_equal(noun("a"), noun("c"), lex, cfg));
}

TEST_CASE("sweep over the default range has 20 points") {
  const auto lex = planted_pair("x", "y", 0.95);
  const std::vector<LabeledPair> pairs{{noun("x"), noun("y"), true}, {noun("x"), noun("x"), false}};
  const auto r = sweep_threshold(pairs, lex);
  REQUIRE(r.curve.size() == 20);
  CHECK(r.curve.front().tau == doctest::Approx(0.80));
  CHECK(r.curve.back().tau == doctest::Approx(0.99));
}

TEST_CASE("sweep on planted pairs recovers 0.90") {
  std::ifstream vectors(testing::fixture("sweep_lexicon.txt"));
  const auto lex = EmbeddingLexicon::read_vectors(vectors);
  std::vector<LabeledPair> pairs;
  std::ifstream in(testing::fixture("sweep_pairs.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    // {"a": "paK", "b": "pbK", "label": true}
    auto field = [&](const std::string& key) {
      const auto k = line.find("\"" + key + "\": \"") + key.size() + 5;
      return line.substr(k, line.find('"', k) - k);
    };
    pairs.push_back({noun(field("a")), noun(field("b")), line.find("true") != std::string::npos});
  }
  REQUIRE(pairs.size() == 16);
  const auto r = sweep_threshold(pairs, lex);
  CHECK(r.best_tau == doctest::Approx(0.90).epsilon(1e-12));
  CHECK(r.best_f1 == 1.0);

  // Independent recount at the reported tau.
  int tp = 0, fp = 0, fn = 0;
  for (const auto& p : pairs) {
    const bool pred = phrase_cosine(p.a, p.b, lex) >= r.best_tau;
    tp += pred && p.label;
    fp += pred && !p.label;
    fn += !pred && p.label;
  }
  const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
  CHECK(f1 == r.best_f1);
  CHECK(r.best_tau >= 0.80);
  CHECK(r.best_tau <= 0.99 + 1e-12);
}

TEST_CASE("sweep ties go to the lowest tau") {
  // One positive far above the range and one negative far below: every tau is
  // perfect.
  EmbeddingLexicon lex(2);
  lex.add_vector("a", Eigen::Vector2d(1, 0));
  lex.add_vector("b", Eigen::Vector2d(0.999, std::sqrt(1 - 0.999 * 0.999)));
  lex.add_vector("c", Eigen::Vector2d(0, 1));
  const std::vector<LabeledPair> pairs{{noun("a"), noun("b"), true}, {noun("a"), noun("c"), false}};
  const auto r = sweep_threshold(pairs, lex);
  CHECK(r.best_f1 == 1.0);
  CHECK(r.best_tau == doctest::Approx(0.80));
}

TEST_CASE("sweep error paths") {
  const auto lex = planted_pair("x", "y", 0.95);
  const std::vector<LabeledPair> all_pos{{noun("x"), noun("y"), true}};
  CHECK(error_code_of([&] { sweep_threshold(all_pos, lex); }) == ErrorCode::DegenerateLabels);
  const std::vector<LabeledPair> all_neg{{noun("x"), noun("y"), false}};
  CHECK(error_code_of([&] { sweep_threshold(all_neg, lex); }) == ErrorCode::DegenerateLabels);
  const std::vector<LabeledPair> mixed{{noun("x"), noun("y"), true}, {noun("x"), noun("x"), false}};
  CHECK(error_code_of([&] { sweep_threshold(mixed, lex, 0.9, 0.8); }) ==
        ErrorCode::InvalidInput);
  CHECK(error_code_of([&] { sweep_threshold(mixed, lex, 0.8, 0.9, 0.0); }) ==
        ErrorCode::InvalidInput);
}
