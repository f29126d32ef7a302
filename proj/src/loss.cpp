#include "drive/loss.hpp"

#include <cmath>

#include "drive/error.hpp"

namespace drive {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite())
    throw Error(ErrorCode::NonFinite, std::string(what) + " contains non-finite values");
}

// Row-wise L2 normalization; keeps the norms for the backward pass.
struct RowNormalized {
  Matrix unit;
  Vector norms;
};

RowNormalized normalize_rows(const Matrix& m, const char* what) {
  RowNormalized out{m, m.rowwise().norm()};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!(out.norms[i] > 0.0))
      throw Error(ErrorCode::NonFinite, std::string(what) + " has a zero row");
    out.unit.row(i) /= out.norms[i];
  }
  return out;
}

// d/dx of x/|x| applied to an upstream gradient on the unit vector.
Matrix normalize_backward(const RowNormalized& n, const Matrix& d_unit) {
  Matrix d = d_unit;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double along = n.unit.row(i).dot(d_unit.row(i));
    d.row(i) = (d_unit.row(i) - along * n.unit.row(i)) / n.norms[i];
  }
  return d;
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Mean softplus of anchor/negative cosines, with gradients w.r.t. the raw
// anchor and negative rows.
struct SimilarityPenalty {
  double loss = 0.0;
  Vector d_anchor;
  Matrix d_negatives;
};

SimilarityPenalty similarity_penalty(const Vector& anchor, const Matrix& negatives) {
  SimilarityPenalty out{0.0, Vector::Zero(anchor.size()),
                        Matrix::Zero(negatives.rows(), negatives.cols())};
  const Eigen::Index k = negatives.rows();
  if (k == 0) return out;

  const RowNormalized a = normalize_rows(anchor.transpose(), "anchor");
  const RowNormalized hn = normalize_rows(negatives, "negatives");
  Matrix d_a_unit = Matrix::Zero(1, anchor.size());
  Matrix d_hn_unit = Matrix::Zero(k, negatives.cols());
  double sum = 0.0;
  for (Eigen::Index n = 0; n < k; ++n) {
    const double c = a.unit.row(0).dot(hn.unit.row(n));
    sum += softplus(c);
    const double dc = sigmoid(c) / static_cast<double>(k);
    d_a_unit += dc * hn.unit.row(n);
    d_hn_unit.row(n) = dc * a.unit.row(0);
  }
  out.loss = sum / static_cast<double>(k);
  out.d_anchor = normalize_backward(a, d_a_unit).row(0).transpose();
  out.d_negatives = normalize_backward(hn, d_hn_unit);
  return out;
}

}  // namespace

void MiniBatch::validate(bool require_unit) const {
  const Eigen::Index d = anchor_text.size();
  if (d == 0 || anchor_image.size() != d || hn_texts.rows() != hn_images.rows() ||
      (hn_texts.rows() > 0 && (hn_texts.cols() != d || hn_images.cols() != d)))
    throw Error(ErrorCode::DimensionMismatch, "mini-batch shapes are inconsistent");
  if (!anchor_text.allFinite() || !anchor_image.allFinite() || !hn_texts.allFinite() ||
      !hn_images.allFinite())
    throw Error(ErrorCode::NonFinite, "mini-batch contains non-finite values");
  auto check_row = [&](double norm) {
    if (!(norm > 0.0)) throw Error(ErrorCode::NonFinite, "mini-batch has a zero row");
    if (require_unit && std::abs(norm - 1.0) > 1e-9)
      throw Error(ErrorCode::InvalidInput, "mini-batch row is not unit length");
  };
  check_row(anchor_text.norm());
  check_row(anchor_image.norm());
  for (Eigen::Index i = 0; i < hn_texts.rows(); ++i) {
    check_row(hn_texts.row(i).norm());
    check_row(hn_images.row(i).norm());
  }
}

Matrix MiniBatch::stacked_texts() const {
  Matrix m(1 + hn_texts.rows(), anchor_text.size());
  m.row(0) = anchor_text.transpose();
  if (hn_texts.rows() > 0) m.bottomRows(hn_texts.rows()) = hn_texts;
  return m;
}

Matrix MiniBatch::stacked_images() const {
  Matrix m(1 + hn_images.rows(), anchor_image.size());
  m.row(0) = anchor_image.transpose();
  if (hn_images.rows() > 0) m.bottomRows(hn_images.rows()) = hn_images;
  return m;
}

MiniBatchGrad MiniBatchGrad::zeros_like(const MiniBatch& mb) {
  return {Vector::Zero(mb.anchor_text.size()), Vector::Zero(mb.anchor_image.size()),
          Matrix::Zero(mb.hn_texts.rows(), mb.hn_texts.cols()),
          Matrix::Zero(mb.hn_images.rows(), mb.hn_images.cols()), 0.0};
}

MiniBatchGrad& MiniBatchGrad::add_scaled(const MiniBatchGrad& other, double weight) {
  anchor_text += weight * other.anchor_text;
  anchor_image += weight * other.anchor_image;
  hn_texts += weight * other.hn_texts;
  hn_images += weight * other.hn_images;
  scale += weight * other.scale;
  return *this;
}

void LossConfig::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::ValidationError, "scale");
  if (!(delta_t >= 0.0) || !std::isfinite(delta_t))
    throw Error(ErrorCode::ValidationError, "delta_t");
  if (!(delta_i >= 0.0) || !std::isfinite(delta_i))
    throw Error(ErrorCode::ValidationError, "delta_i");
}

ClipLossResult clip_loss(const Matrix& images, const Matrix& texts, double scale) {
  if (images.rows() == 0 || images.rows() != texts.rows() || images.cols() != texts.cols() ||
      images.cols() == 0)
    throw Error(ErrorCode::DimensionMismatch, "clip_loss needs two N x d matrices, N >= 1");
  require_finite(images, "images");
  require_finite(texts, "texts");
  if (!std::isfinite(scale)) throw Error(ErrorCode::NonFinite, "scale is not finite");

  const RowNormalized img = normalize_rows(images, "images");
  const RowNormalized txt = normalize_rows(texts, "texts");
  const Eigen::Index n = images.rows();
  const Matrix sims = img.unit * txt.unit.transpose();
  const Matrix logits = scale * sims;

  // Row softmax (image -> text) and column softmax (text -> image).
  Matrix p_row(n, n), p_col(n, n);
  double row_ce = 0.0, col_ce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) z += std::exp(logits(i, j) - m);
    const double lse = m + std::log(z);
    row_ce += lse - logits(i, i);
    for (Eigen::Index j = 0; j < n; ++j) p_row(i, j) = std::exp(logits(i, j) - lse);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double m = logits.col(j).maxCoeff();
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) z += std::exp(logits(i, j) - m);
    const double lse = m + std::log(z);
    col_ce += lse - logits(j, j);
    for (Eigen::Index i = 0; i < n; ++i) p_col(i, j) = std::exp(logits(i, j) - lse);
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  ClipLossResult out;
  out.loss = 0.5 * (row_ce * inv_n + col_ce * inv_n);
  if (!std::isfinite(out.loss)) throw Error(ErrorCode::NonFinite, "clip_loss is not finite");

  const Matrix eye = Matrix::Identity(n, n);
  const Matrix d_logits = (0.5 * inv_n) * ((p_row - eye) + (p_col - eye));
  out.d_scale = (d_logits.array() * sims.array()).sum();
  out.d_images = normalize_backward(img, scale * d_logits * txt.unit);
  out.d_texts = normalize_backward(txt, scale * d_logits.transpose() * img.unit);
  return out;
}

MiniBatchLoss croco_loss(const MiniBatch& mb, double scale) {
  mb.validate(false);
  const ClipLossResult clip = clip_loss(mb.stacked_images(), mb.stacked_texts(), scale);
  MiniBatchLoss out{clip.loss, MiniBatchGrad::zeros_like(mb)};
  const Eigen::Index k = mb.negatives();
  out.grad.anchor_image = clip.d_images.row(0).transpose();
  out.grad.anchor_text = clip.d_texts.row(0).transpose();
  if (k > 0) {
    out.grad.hn_images = clip.d_images.bottomRows(k);
    out.grad.hn_texts = clip.d_texts.bottomRows(k);
  }
  out.grad.scale = clip.d_scale;
  return out;
}

MiniBatchLoss hn_text_loss(const MiniBatch& mb) {
  mb.validate(false);
  const SimilarityPenalty p = similarity_penalty(mb.anchor_text, mb.hn_texts);
  MiniBatchLoss out{p.loss, MiniBatchGrad::zeros_like(mb)};
  out.grad.anchor_text = p.d_anchor;
  out.grad.hn_texts = p.d_negatives;
  return out;
}

MiniBatchLoss hn_image_loss(const MiniBatch& mb) {
  mb.validate(false);
  const SimilarityPenalty p = similarity_penalty(mb.anchor_image, mb.hn_images);
  MiniBatchLoss out{p.loss, MiniBatchGrad::zeros_like(mb)};
  out.grad.anchor_image = p.d_anchor;
  out.grad.hn_images = p.d_negatives;
  return out;
}

HnLossResult hn_loss(const MiniBatch& mb, const LossConfig& cfg) {
  cfg.validate();
  const MiniBatchLoss croco = croco_loss(mb, cfg.scale);
  const MiniBatchLoss text = hn_text_loss(mb);
  const MiniBatchLoss image = hn_image_loss(mb);

  HnLossResult out;
  LossBreakdown& b = out.breakdown;
  b.l_croco = croco.loss;
  b.l_hn_text = text.loss;
  b.l_hn_image = image.loss;
  b.l_hn = b.l_croco * (1.0 + 0.5 * (cfg.delta_t * b.l_hn_text + cfg.delta_i * b.l_hn_image)) /
           2.0;
  if (!std::isfinite(b.l_hn)) throw Error(ErrorCode::NonFinite, "hn_loss is not finite");

  // Product rule through l_croco * factor / 2.
  const double factor = 1.0 + 0.5 * (cfg.delta_t * b.l_hn_text + cfg.delta_i * b.l_hn_image);
  out.grad = MiniBatchGrad::zeros_like(mb);
  out.grad.add_scaled(croco.grad, factor / 2.0);
  out.grad.add_scaled(text.grad, b.l_croco * cfg.delta_t / 4.0);
  out.grad.add_scaled(image.grad, b.l_croco * cfg.delta_i / 4.0);
  return out;
}

BatchLossResult batch_loss(std::span<const MiniBatch> minibatches, const LossConfig& cfg) {
  if (minibatches.empty()) throw Error(ErrorCode::EmptyBatch, "batch has no mini-batches");
  BatchLossResult out;
  out.per_minibatch.reserve(minibatches.size());
  out.grads.reserve(minibatches.size());
  for (const MiniBatch& mb : minibatches) {
    HnLossResult r = hn_loss(mb, cfg);
    out.total += r.breakdown.l_hn;
    out.per_minibatch.push_back(r.breakdown);
    out.grads.push_back(std::move(r.grad));
  }
  return out;
}

}  // namespace drive
