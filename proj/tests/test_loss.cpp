#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drive/error.hpp"
#include "drive/loss.hpp"
#include "support.hpp"

using namespace drive;
using testing::error_code_of;

namespace {

MiniBatch orthonormal_pair() {
  MiniBatch mb;
  mb.anchor_text = Eigen::Vector2d(1, 0);
  mb.anchor_image = Eigen::Vector2d(1, 0);
  mb.hn_texts = Matrix(1, 2);
  mb.hn_texts << 0, 1;
  mb.hn_images = mb.hn_texts;
  return mb;
}

LossConfig unit_scale() {
  LossConfig c;
  c.scale = 1.0;
  return c;
}

}  // namespace

TEST_CASE("clip_loss spot values") {
  std::mt19937_64 rng(1);
  const Matrix a = testing::random_unit_rows(1, 5, rng);
  const Matrix b = testing::random_unit_rows(1, 5, rng);
  CHECK(clip_loss(a, b, 14.3).loss == 0.0);

  const Matrix eye = Matrix::Identity(2, 2);
  CHECK(std::abs(clip_loss(eye, eye, 1.0).loss - std::log(1.0 + std::exp(-1.0))) < 1e-9);
}

TEST_CASE("clip_loss matches the scalar reference and is argument symmetric") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + int(rng() % 6), d = 2 + int(rng() % 7);
    const Matrix i = testing::random_unit_rows(n, d, rng);
    const Matrix t = testing::random_unit_rows(n, d, rng);
    const double s = 0.5 + double(rng() % 100) / 10.0;
    const double l = clip_loss(i, t, s).loss;
    CHECK(l == doctest::Approx(testing::ref_clip(i, t, s)).epsilon(1e-12));
    CHECK(l == doctest::Approx(clip_loss(t, i, s).loss).epsilon(1e-12));
    // Unnormalized rows give the same value.
    CHECK(l == doctest::Approx(clip_loss(3.0 * i, 0.5 * t, s).loss).epsilon(1e-12));
  }
}

TEST_CASE("clip_loss errors") {
  CHECK(error_code_of([] { clip_loss(Matrix(2, 3), Matrix(3, 3), 1.0); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(error_code_of([] { clip_loss(Matrix(0, 3), Matrix(0, 3), 1.0); }) ==
        ErrorCode::DimensionMismatch);
  Matrix z = Matrix::Zero(2, 2);
  CHECK(error_code_of([&] { clip_loss(z, Matrix::Identity(2, 2), 1.0); }) == ErrorCode::NonFinite);
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::nan("");
  CHECK(error_code_of([&] { clip_loss(nan, Matrix::Identity(2, 2), 1.0); }) ==
        ErrorCode::NonFinite);
}

TEST_CASE("croco_loss examples") {
  std::mt19937_64 rng(3);
  auto mb = testing::random_minibatch(6, 0, rng);
  CHECK(croco_loss(mb, 10.0).loss == 0.0);
  CHECK(std::abs(croco_loss(orthonormal_pair(), 1.0).loss - std::log(1.0 + std::exp(-1.0))) <
        1e-9);

  mb = testing::random_minibatch(6, 5, rng);
  const double base = croco_loss(mb, 7.0).loss;
  std::vector<int> perm{3, 0, 4, 1, 2};
  MiniBatch p = mb;
  for (int k = 0; k < 5; ++k) {
    p.hn_texts.row(k) = mb.hn_texts.row(perm[k]);
    p.hn_images.row(k) = mb.hn_images.row(perm[k]);
  }
  CHECK(croco_loss(p, 7.0).loss == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("hn penalty closed forms") {
  std::mt19937_64 rng(4);
  CHECK(hn_text_loss(testing::random_minibatch(4, 0, rng)).loss == 0.0);
  CHECK(hn_image_loss(testing::random_minibatch(4, 0, rng)).loss == 0.0);
  const auto ortho = orthonormal_pair();
  CHECK(std::abs(hn_text_loss(ortho).loss - std::log(2.0)) < 1e-9);
  CHECK(std::abs(hn_image_loss(ortho).loss - std::log(2.0)) < 1e-9);

  MiniBatch same = ortho;
  same.hn_texts.row(0) = same.anchor_text.transpose();
  const double at_one = -std::log(1.0 - 1.0 / (1.0 + std::exp(-1.0)));
  CHECK(std::abs(hn_text_loss(same).loss - at_one) < 1e-9);
  CHECK(at_one == doctest::Approx(1.313262).epsilon(1e-6));
}

TEST_CASE("hn_loss composed example") {
  const double croco = std::log(1.0 + std::exp(-1.0));
  const double expected = croco * (1.0 + 0.5 * (0.615 + 1.223) * std::log(2.0)) / 2.0;
  const auto r = hn_loss(orthonormal_pair(), unit_scale());
  CHECK(std::abs(r.breakdown.l_hn - expected) < 1e-12);
  CHECK(r.breakdown.l_croco == doctest::Approx(croco));
  CHECK(r.breakdown.l_hn_text == doctest::Approx(std::log(2.0)));
  CHECK(r.breakdown.l_hn_image == doctest::Approx(std::log(2.0)));
}

TEST_CASE("hn_loss reductions and reference equality") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const int d = 4 + int(rng() % 13), n = 1 + int(rng() % 8);
    const auto mb = testing::random_minibatch(d, n, rng);
    LossConfig zero = unit_scale();
    zero.scale = 5.0;
    zero.delta_t = zero.delta_i = 0.0;
    const auto r0 = hn_loss(mb, zero);
    CHECK(std::abs(r0.breakdown.l_hn - r0.breakdown.l_croco / 2.0) < 1e-12);

    LossConfig cfg;
    cfg.scale = 1.0 + double(k % 20);
    const auto r = hn_loss(mb, cfg);
    CHECK(r.breakdown.l_hn ==
          doctest::Approx(testing::ref_hn(mb, cfg.scale, cfg.delta_t, cfg.delta_i)).epsilon(1e-11));
    CHECK(r.breakdown.l_croco >= 0.0);
    CHECK(r.breakdown.l_hn_text >= 0.0);
    CHECK(r.breakdown.l_hn_image >= 0.0);
    CHECK(r.breakdown.l_hn >= 0.0);

    const auto single = testing::random_minibatch(d, 0, rng);
    CHECK(hn_loss(single, cfg).breakdown.l_hn == 0.0);
  }
}

TEST_CASE("text penalty is strictly monotone in cosine") {
  // Rotate the negative from orthogonal toward the anchor.
  MiniBatch mb = orthonormal_pair();
  double prev = -1.0;
  for (int k = 0; k <= 20; ++k) {
    const double c = -1.0 + 0.1 * k;
    mb.hn_texts.row(0) << c, std::sqrt(std::max(0.0, 1.0 - c * c));
    const double l = hn_text_loss(mb).loss;
    CHECK(l > prev);
    prev = l;
  }
}

TEST_CASE("batch_loss is the ordered sum of mini-batch losses") {
  std::mt19937_64 rng(6);
  const LossConfig cfg;
  for (int k = 0; k < 30; ++k) {
    std::vector<MiniBatch> mbs;
    const int count = 1 + int(rng() % 5);
    for (int j = 0; j < count; ++j) mbs.push_back(testing::random_minibatch(8, int(rng() % 6), rng));
    const auto r = batch_loss(mbs, cfg);
    double sum = 0.0;
    for (const auto& mb : mbs) sum += hn_loss(mb, cfg).breakdown.l_hn;
    CHECK(r.total == sum);
    CHECK(r.per_minibatch.size() == mbs.size());
    CHECK(r.grads.size() == mbs.size());

    // Appending one mini-batch adds exactly its value.
    auto more = mbs;
    more.push_back(testing::random_minibatch(8, 3, rng));
    CHECK(batch_loss(more, cfg).total == sum + hn_loss(more.back(), cfg).breakdown.l_hn);
  }
  const auto mb = testing::random_minibatch(5, 2, rng);
  const double one = hn_loss(mb, cfg).breakdown.l_hn;
  CHECK(batch_loss(std::vector<MiniBatch>{mb}, cfg).total == one);
  CHECK(batch_loss(std::vector<MiniBatch>(3, mb), cfg).total == one + one + one);
  CHECK(error_code_of([&] { batch_loss(std::vector<MiniBatch>{}, cfg); }) == ErrorCode::EmptyBatch);
}

TEST_CASE("mini-batch validation") {
  std::mt19937_64 rng(7);
  auto mb = testing::random_minibatch(4, 2, rng);
  mb.validate();
  MiniBatch scaled = mb;
  scaled.anchor_text *= 2.0;
  CHECK(error_code_of([&] { scaled.validate(); }) == ErrorCode::InvalidInput);
  scaled.validate(false);
  MiniBatch uneven = mb;
  uneven.hn_images = Matrix::Identity(1, 4);
  CHECK(error_code_of([&] { uneven.validate(); }) == ErrorCode::DimensionMismatch);
  MiniBatch zero = mb;
  zero.hn_texts.row(1).setZero();
  CHECK(error_code_of([&] { hn_text_loss(zero); }) == ErrorCode::NonFinite);
  CHECK(mb.stacked_texts().rows() == 3);
  CHECK(mb.stacked_images().row(0) == mb.anchor_image.transpose());
}

TEST_CASE("loss config validation") {
  LossConfig c;
  c.scale = 0.0;
  CHECK(error_code_of([&] { c.validate(); }) == ErrorCode::ValidationError);
  c = LossConfig{};
  c.delta_t = -1;
  CHECK(error_code_of([&] { c.validate(); }) == ErrorCode::ValidationError);
}
