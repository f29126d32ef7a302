#pragma once

// Shared test helpers: seeded generators and reference implementations that
// do not reuse library code paths.

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "drive/error.hpp"
#include "drive/loss.hpp"
#include "drive/miner.hpp"
#include "drive/similarity.hpp"

namespace testing {

using drive::Matrix;
using drive::Vector;

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(DRIVE_FIXTURE_DIR) / name;
}

// The code of the drive::Error thrown by f, or nullopt if none was thrown.
inline std::optional<drive::ErrorCode> error_code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const drive::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("drive_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Vector random_unit(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(d);
  do {
    for (int i = 0; i < d; ++i) v[i] = n(rng);
  } while (v.norm() < 1e-6);
  return v / v.norm();
}

inline Matrix random_unit_rows(int rows, int d, std::mt19937_64& rng) {
  Matrix m(rows, d);
  for (int i = 0; i < rows; ++i) m.row(i) = random_unit(d, rng).transpose();
  return m;
}

inline drive::MiniBatch random_minibatch(int d, int k, std::mt19937_64& rng) {
  return {random_unit(d, rng), random_unit(d, rng), random_unit_rows(k, d, rng),
          random_unit_rows(k, d, rng)};
}

// Reference losses written as scalar loops over already-unit rows.
inline double ref_clip(const Matrix& img, const Matrix& txt, double s) {
  const int n = static_cast<int>(img.rows());
  auto cosv = [&](int i, int j) {
    double dot = 0, ni = 0, nj = 0;
    for (int c = 0; c < img.cols(); ++c) {
      dot += img(i, c) * txt(j, c);
      ni += img(i, c) * img(i, c);
      nj += txt(j, c) * txt(j, c);
    }
    return dot / std::sqrt(ni * nj);
  };
  double rows = 0, cols = 0;
  for (int i = 0; i < n; ++i) {
    double z = 0;
    for (int j = 0; j < n; ++j) z += std::exp(s * cosv(i, j));
    rows += -std::log(std::exp(s * cosv(i, i)) / z);
  }
  for (int j = 0; j < n; ++j) {
    double z = 0;
    for (int i = 0; i < n; ++i) z += std::exp(s * cosv(i, j));
    cols += -std::log(std::exp(s * cosv(j, j)) / z);
  }
  return 0.5 * (rows / n + cols / n);
}

inline double ref_penalty(const Vector& a, const Matrix& hn) {
  if (hn.rows() == 0) return 0.0;
  double sum = 0;
  for (int k = 0; k < hn.rows(); ++k) {
    const double c = a.dot(hn.row(k).transpose()) / (a.norm() * hn.row(k).norm());
    const double sig = 1.0 / (1.0 + std::exp(-c));
    sum += -std::log(1.0 - sig);
  }
  return sum / double(hn.rows());
}

inline double ref_hn(const drive::MiniBatch& mb, double s, double dt, double di) {
  const double croco = ref_clip(mb.stacked_images(), mb.stacked_texts(), s);
  const double t = ref_penalty(mb.anchor_text, mb.hn_texts);
  const double i = ref_penalty(mb.anchor_image, mb.hn_images);
  return croco * (1.0 + 0.5 * (dt * t + di * i)) / 2.0;
}

// Naive pairwise mining straight from the definitions.
inline drive::HNMap naive_mine(const drive::Dataset& d, drive::DatasetMode mode,
                               const drive::EmbeddingLexicon& lex,
                               const drive::SimilarityConfig& cfg) {
  using drive::approx_equal;
  using drive::relation_approx_equal;
  using drive::triplet_approx_equal;
  drive::HNMap out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    drive::HNMap::Entry e{d[i].id, {}};
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (i == j) continue;
      const auto& ti = d[i].triplet;
      const auto& tj = d[j].triplet;
      bool hit;
      if (mode == drive::DatasetMode::Croco) {
        hit = approx_equal(ti.subject, tj.subject, lex, cfg) &&
              !relation_approx_equal(ti.relation, tj.relation, lex, cfg) &&
              approx_equal(ti.object, tj.object, lex, cfg) &&
              !triplet_approx_equal(ti, tj, lex, cfg) && !triplet_approx_equal(tj, ti, lex, cfg);
      } else {
        hit = d[i].plausibly_asymmetric && d[j].plausibly_asymmetric &&
              approx_equal(ti.subject, tj.object, lex, cfg) &&
              approx_equal(ti.object, tj.subject, lex, cfg) &&
              relation_approx_equal(ti.relation, tj.relation, lex, cfg) &&
              !approx_equal(ti.subject, ti.object, lex, cfg);
      }
      if (hit) e.negatives.push_back(d[j].id);
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

// A random vocabulary with planted near-duplicates and synonym sets, and a
// dataset drawn over it. Small vocabularies make collisions frequent.
struct MiningWorld {
  drive::EmbeddingLexicon lex{6};
  drive::Dataset dataset;
};

inline MiningWorld random_mining_world(std::uint64_t seed, int n_samples, int n_entities = 10,
                                       int n_relations = 8) {
  std::mt19937_64 rng(seed);
  MiningWorld w;
  const int dim = w.lex.dimension();
  std::vector<std::string> entities, relations;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < n_entities; ++i) {
    const std::string name = "ent" + std::to_string(i);
    Vector v = random_unit(dim, rng);
    // Every third entity is a near copy of its predecessor.
    if (i % 3 == 2) {
      Vector base = *w.lex.find(entities.back());
      Vector jitter(dim);
      for (int c = 0; c < dim; ++c) jitter[c] = noise(rng);
      v = base + 0.25 * jitter / jitter.norm();
    }
    w.lex.add_vector(name, v);
    entities.push_back(name);
  }
  const std::vector<std::string> preps{"in", "on", "near"};
  for (int i = 0; i < n_relations; ++i) {
    std::string name = "rel" + std::to_string(i);
    w.lex.add_vector(name, random_unit(dim, rng));
    if (i % 4 == 3) name += " " + preps[i % preps.size()];
    relations.push_back(name);
  }
  for (const auto& p : preps) w.lex.add_vector(p, random_unit(dim, rng));
  w.lex.add_synonym_set({"rel0", "rel1"});
  w.lex.add_synonym_set({"ent0", "ent4"}, 0.5);
  w.lex.add_synonym_set({"ent1", "ent5"});

  std::uniform_int_distribution<int> pe(0, n_entities - 1), pr(0, n_relations - 1);
  std::bernoulli_distribution plausible(0.8);
  for (int k = 0; k < n_samples; ++k) {
    drive::Sample s;
    s.id = "m" + std::to_string(k);
    s.triplet = drive::Triplet::from_text(entities[pe(rng)], relations[pr(rng)], entities[pe(rng)]);
    s.raw_caption = drive::render_caption(s.triplet);
    s.scene_relation_count = 1;
    s.object_count = 2;
    s.state = k % 2 ? drive::VerbState::Stative : drive::VerbState::Dynamic;
    s.plausibly_asymmetric = plausible(rng);
    w.dataset.push_back(std::move(s));
  }
  return w;
}

}  // namespace testing
