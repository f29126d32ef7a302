#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace drive {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// One anchor image-caption pair and its hard-negative set. Rows of the hn_*
// matrices are the negatives, paired by row index.
struct MiniBatch {
  Vector anchor_text;
  Vector anchor_image;
  Matrix hn_texts;
  Matrix hn_images;

  Eigen::Index negatives() const { return hn_texts.rows(); }
  Eigen::Index dimension() const { return anchor_text.size(); }

  // Equal row counts, uniform dimension, finite, non-zero rows. With
  // require_unit every row must also be unit length to within 1e-9.
  void validate(bool require_unit = true) const;

  // Anchor in row 0, negatives below.
  Matrix stacked_texts() const;
  Matrix stacked_images() const;
};

// Gradient with the same layout as a MiniBatch, plus the scale.
struct MiniBatchGrad {
  Vector anchor_text;
  Vector anchor_image;
  Matrix hn_texts;
  Matrix hn_images;
  double scale = 0.0;

  static MiniBatchGrad zeros_like(const MiniBatch& mb);
  MiniBatchGrad& add_scaled(const MiniBatchGrad& other, double weight);
};

struct LossConfig {
  double scale = 1.0 / 0.07;
  double delta_t = 0.615;
  double delta_i = 1.223;

  void validate() const;
};

struct LossBreakdown {
  double l_croco = 0.0;
  double l_hn_text = 0.0;
  double l_hn_image = 0.0;
  double l_hn = 0.0;
};

struct ClipLossResult {
  double loss = 0.0;
  Matrix d_images;
  Matrix d_texts;
  double d_scale = 0.0;
};

struct MiniBatchLoss {
  double loss = 0.0;
  MiniBatchGrad grad;
};

struct HnLossResult {
  LossBreakdown breakdown;
  MiniBatchGrad grad;
};

struct BatchLossResult {
  double total = 0.0;
  std::vector<LossBreakdown> per_minibatch;
  std::vector<MiniBatchGrad> grads;
};

// Symmetric InfoNCE over scale * I^T-hat T-hat^T with diagonal targets,
// averaged over rows and over columns, then halved. Rows are L2-normalized
// inside the computation, so the returned gradients are with respect to the
// rows as passed in (which may be unnormalized). Throws DimensionMismatch /
// NonFinite.
ClipLossResult clip_loss(const Matrix& images, const Matrix& texts, double scale);

// clip_loss restricted to [anchor; negatives].
MiniBatchLoss croco_loss(const MiniBatch& mb, double scale);

// Mean over negatives of -ln(1 - sigmoid(cos(anchor, negative))); 0 with no
// negatives.
MiniBatchLoss hn_text_loss(const MiniBatch& mb);
MiniBatchLoss hn_image_loss(const MiniBatch& mb);

// l_croco * (1 + (delta_t * l_hn_text + delta_i * l_hn_image) / 2) / 2
HnLossResult hn_loss(const MiniBatch& mb, const LossConfig& cfg);

// Sum of hn_loss over mini-batches in input order; similarities never cross
// mini-batch boundaries. Throws EmptyBatch.
BatchLossResult batch_loss(std::span<const MiniBatch> minibatches, const LossConfig& cfg);

}  // namespace drive
