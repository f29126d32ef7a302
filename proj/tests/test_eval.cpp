#include <doctest.h>

#include <random>

#include "drive/error.hpp"
#include "drive/eval.hpp"
#include "drive/trainer.hpp"
#include "support.hpp"

using namespace drive;
using testing::error_code_of;

namespace {

World two_relation_world(std::uint64_t seed) {
  WorldConfig cfg;
  cfg.n_entities = 10;
  cfg.n_relations = 2;
  cfg.n_samples = 200;
  cfg.seed = seed;
  return synth_world(cfg);
}

// Plain cosine, no reliance on rows being unit length.
double cosine(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return a.row(i).dot(b.row(j)) / (a.row(i).norm() * b.row(j).norm());
}

double brute_force_r1(const Embeddings& e, const HNIndex& neg, Direction d) {
  const Matrix& q = d == Direction::TextToImage ? e.texts : e.images;
  const Matrix& c = d == Direction::TextToImage ? e.images : e.texts;
  std::size_t hits = 0, n = 0;
  for (std::size_t i = 0; i < neg.size(); ++i) {
    if (neg[i].empty()) continue;
    ++n;
    std::vector<std::size_t> cands{i};
    cands.insert(cands.end(), neg[i].begin(), neg[i].end());
    std::size_t best = cands[0];
    double best_s = -2.0;
    bool tie = false;
    for (auto j : cands) {
      const double s = cosine(q, Eigen::Index(i), c, Eigen::Index(j));
      if (s > best_s) {
        best_s = s;
        best = j;
        tie = false;
      } else if (s == best_s) {
        tie = true;
      }
    }
    hits += best == i && !tie;
  }
  return double(hits) / double(n);
}

EvalReport sample_report() {
  EvalReport r;
  r.r1_t2i = 0.75;
  r.r1_i2t = 0.5;
  r.per_subset["dynamic"] = {0.9, 0.8, 10};
  r.per_subset["stative"] = {0.6, 0.2, 10};
  r.delta_acc["stative"] = -0.3;
  r.reference = "dynamic";
  r.n_anchors = 25;
  r.skipped_empty = 5;
  return r;
}

}  // namespace

TEST_CASE("a perfect encoder scores 1") {
  const int n = 12;
  Embeddings e{Matrix::Identity(n, n), Matrix::Identity(n, n)};
  HNIndex neg(n);
  for (int i = 0; i < n; ++i) neg[i] = {std::size_t((i + 1) % n), std::size_t((i + 5) % n)};
  CHECK(recall_at_1(e, neg, Direction::TextToImage) == 1.0);
  CHECK(recall_at_1(e, neg, Direction::ImageToText) == 1.0);
}

TEST_CASE("exact ties are misses") {
  Embeddings e{Matrix::Identity(2, 2), Matrix::Ones(2, 2) / std::sqrt(2.0)};
  HNIndex neg{{1}, {0}};
  CHECK(recall_at_1(e, neg, Direction::TextToImage) == 0.0);
}

TEST_CASE("an untrained encoder is at chance on two-candidate sets") {
  double sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const World w = two_relation_world(seed);
    TrainConfig tc;
    tc.seed = seed + 100;
    const auto p = init_params(w, tc);
    for (const auto& n : w.negatives) CHECK(n.size() <= 1);
    sum += recall_at_1(p, w.samples, w.negatives, Direction::TextToImage);
  }
  CHECK(std::abs(sum / 20.0 - 0.5) <= 0.1);
}

TEST_CASE("scoring equals a brute-force cosine enumeration") {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 10; ++k) {
    WorldConfig cfg;
    cfg.n_entities = 5;
    cfg.n_relations = 4;
    cfg.n_samples = 100;
    cfg.seed = 40 + k;
    const World w = synth_world(cfg);
    const Embeddings e{testing::random_unit_rows(100, 3, rng), testing::random_unit_rows(100, 3, rng)};
    for (const auto d : {Direction::TextToImage, Direction::ImageToText})
      CHECK(recall_at_1(e, w.negatives, d) == brute_force_r1(e, w.negatives, d));
  }
}

TEST_CASE("recall is invariant under positive rescaling") {
  std::mt19937_64 rng(14);
  const World w = two_relation_world(3);
  const Embeddings e{testing::random_unit_rows(200, 4, rng), testing::random_unit_rows(200, 4, rng)};
  const Embeddings scaled{e.texts * 4.0, e.images * 0.25};
  for (const auto d : {Direction::TextToImage, Direction::ImageToText})
    CHECK(recall_at_1(e, w.negatives, d) == recall_at_1(scaled, w.negatives, d));
}

TEST_CASE("anchors without negatives are skipped and counted") {
  Embeddings e{Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
  HNIndex neg{{1}, {}, {}};
  const auto c = recall_counts(e, neg, Direction::TextToImage);
  CHECK(c.evaluated == 1);
  CHECK(c.skipped_empty == 2);
  HNIndex none(3);
  CHECK(error_code_of([&] { recall_at_1(e, none, Direction::TextToImage); }) ==
        ErrorCode::NoEvaluableAnchors);
  CHECK(recall_counts(e, none, Direction::TextToImage).rate() == 0.0);
  HNIndex wrong(2);
  CHECK(error_code_of([&] { recall_counts(e, wrong, Direction::TextToImage); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("delta_acc examples") {
  CHECK(delta_acc(0.624, 0.624) == 0.0);
  CHECK(delta_acc(0.3, 0.5) == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(delta_acc(0.624, 0.894) == doctest::Approx(-0.27).epsilon(1e-12));
}

TEST_CASE("subset rates aggregate to the overall rate") {
  std::mt19937_64 rng(15);
  WorldConfig cfg;
  cfg.n_samples = 400;
  const World w = synth_world(cfg);
  const Embeddings e{testing::random_unit_rows(400, 4, rng), testing::random_unit_rows(400, 4, rng)};
  const auto r = evaluate(e, w.samples, w.negatives, SubsetSplit::State);
  REQUIRE(r.per_subset.size() == 2);
  double t2i = 0.0, i2t = 0.0;
  std::size_t n = 0;
  for (const auto& [name, s] : r.per_subset) {
    t2i += s.r1_t2i * double(s.n);
    i2t += s.r1_i2t * double(s.n);
    n += s.n;
  }
  CHECK(n + r.skipped_empty == r.n_anchors);
  CHECK(r.n_anchors == 400);
  CHECK(t2i / double(n) == doctest::Approx(r.r1_t2i).epsilon(1e-12));
  CHECK(i2t / double(n) == doctest::Approx(r.r1_i2t).epsilon(1e-12));
  CHECK(r.delta_acc.at("stative") ==
        doctest::Approx(r.per_subset.at("stative").r1_t2i - r.per_subset.at("dynamic").r1_t2i));
  CHECK(r.delta_acc.count("dynamic") == 0);

  const auto plain = evaluate(e, w.samples, w.negatives, SubsetSplit::None);
  CHECK(plain.per_subset.empty());
  CHECK(plain.r1_t2i == r.r1_t2i);
  CHECK(error_code_of([&] {
          evaluate(e, w.samples, w.negatives, SubsetSplit::State, "nonexistent");
        }) == ErrorCode::InvalidInput);
  CHECK(parse_subset_split("state") == SubsetSplit::State);
  CHECK(error_code_of([] { parse_subset_split("verbs"); }) == ErrorCode::ValidationError);
}

TEST_CASE("json report is canonical and round trips") {
  const auto r = sample_report();
  const auto j = emit_report(r, "json");
  CHECK(emit_report(r, "json") == j);
  CHECK(j.find("\"r1_t2i\":0.750000") != std::string::npos);
  CHECK(j.find("\"stative\":-0.300000") != std::string::npos);
  CHECK(emit_report(parse_report_json(j), "json") == j);
  CHECK(j.find("\"delta_acc\"") < j.find("\"per_subset\""));

  EvalReport empty;
  empty.reference = "dynamic";
  const auto ej = emit_report(empty, "json");
  CHECK(ej.find("\"per_subset\":{}") != std::string::npos);
  CHECK(emit_report(parse_report_json(ej), "json") == ej);
  CHECK(error_code_of([] { parse_report_json("[1,2"); }) == ErrorCode::ParseError);
}

TEST_CASE("csv and plot-data formats") {
  const auto r = sample_report();
  const auto csv = emit_report(r, "csv");
  CHECK(csv.rfind("subset,direction,r1,n\nall,text_to_image,0.750000,20\n", 0) == 0);
  CHECK(csv.find("stative,image_to_text,0.200000,10") != std::string::npos);
  const auto plot = emit_report(r, "plot-data");
  CHECK(plot.find("# text_to_image") != std::string::npos);
  CHECK(plot.find("\n\n") != std::string::npos);
  CHECK(error_code_of([&] { emit_report(r, "xml"); }) == ErrorCode::UnsupportedFormat);
}
