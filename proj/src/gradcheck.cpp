#include "drive/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "drive/error.hpp"

namespace drive {

namespace {

Vector flatten(const Matrix& m) {
  Vector v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[k++] = m(i, j);
  return v;
}

Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[k++];
  return m;
}

}  // namespace

std::string GradReport::to_json() const {
  nlohmann::json j{{"max_relative_error", max_relative_error},
                   {"per_parameter_errors", per_parameter_errors}};
  return j.dump(2);
}

GradReport check_gradients(const ScalarFunction& f, const std::vector<ParameterBlock>& params,
                           double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidInput, "step must be positive");
  std::vector<Vector> values;
  values.reserve(params.size());
  for (const auto& p : params) {
    if (p.values.size() != p.analytic.size())
      throw Error(ErrorCode::DimensionMismatch, "gradient size mismatch for " + p.name);
    values.push_back(p.values);
  }

  GradReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    Vector numeric(values[b].size());
    for (Eigen::Index k = 0; k < values[b].size(); ++k) {
      const double saved = values[b][k];
      values[b][k] = saved + step;
      const double up = f(values);
      values[b][k] = saved - step;
      const double down = f(values);
      values[b][k] = saved;
      numeric[k] = (up - down) / (2.0 * step);
    }
    const Vector& analytic = params[b].analytic;
    if (!numeric.allFinite() || !analytic.allFinite())
      throw Error(ErrorCode::NonFinite, "non-finite gradient for " + params[b].name);
    const double denom = std::max({analytic.norm(), numeric.norm(), 1e-12});
    const double err = (analytic - numeric).norm() / denom;
    report.per_parameter_errors[params[b].name] = err;
    report.max_relative_error = std::max(report.max_relative_error, err);
  }
  return report;
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Clip: return "clip";
    case LossKind::Croco: return "croco";
    case LossKind::HnText: return "hn_text";
    case LossKind::HnImage: return "hn_image";
    case LossKind::Hn: return "hn";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view text) {
  for (LossKind k : {LossKind::Clip, LossKind::Croco, LossKind::HnText, LossKind::HnImage,
                     LossKind::Hn})
    if (to_string(k) == text) return k;
  throw Error(ErrorCode::InvalidInput, "unknown loss '" + std::string(text) + "'");
}

GradReport check_loss_gradients(LossKind kind, const MiniBatch& mb, const LossConfig& cfg,
                                double step) {
  const Eigen::Index k = mb.negatives();
  const Eigen::Index d = mb.dimension();

  auto rebuild = [&](const std::vector<Vector>& v) {
    MiniBatch m;
    m.anchor_text = v[0];
    m.anchor_image = v[1];
    m.hn_texts = unflatten(v[2], k, d);
    m.hn_images = unflatten(v[3], k, d);
    return m;
  };
  auto scale_of = [&](const std::vector<Vector>& v) {
    return v.size() > 4 ? v[4][0] : cfg.scale;
  };

  ScalarFunction f;
  MiniBatchGrad g;
  bool uses_scale = true;
  switch (kind) {
    case LossKind::Clip: {
      f = [&](const std::vector<Vector>& v) {
        const MiniBatch m = rebuild(v);
        return clip_loss(m.stacked_images(), m.stacked_texts(), scale_of(v)).loss;
      };
      const ClipLossResult r = clip_loss(mb.stacked_images(), mb.stacked_texts(), cfg.scale);
      g = MiniBatchGrad::zeros_like(mb);
      g.anchor_image = r.d_images.row(0).transpose();
      g.anchor_text = r.d_texts.row(0).transpose();
      if (k > 0) {
        g.hn_images = r.d_images.bottomRows(k);
        g.hn_texts = r.d_texts.bottomRows(k);
      }
      g.scale = r.d_scale;
      break;
    }
    case LossKind::Croco:
      f = [&](const std::vector<Vector>& v) { return croco_loss(rebuild(v), scale_of(v)).loss; };
      g = croco_loss(mb, cfg.scale).grad;
      break;
    case LossKind::HnText:
      f = [&](const std::vector<Vector>& v) { return hn_text_loss(rebuild(v)).loss; };
      g = hn_text_loss(mb).grad;
      uses_scale = false;
      break;
    case LossKind::HnImage:
      f = [&](const std::vector<Vector>& v) { return hn_image_loss(rebuild(v)).loss; };
      g = hn_image_loss(mb).grad;
      uses_scale = false;
      break;
    case LossKind::Hn:
      f = [&](const std::vector<Vector>& v) {
        LossConfig c = cfg;
        c.scale = scale_of(v);
        return hn_loss(rebuild(v), c).breakdown.l_hn;
      };
      g = hn_loss(mb, cfg).grad;
      break;
  }

  std::vector<ParameterBlock> blocks = {
      {"anchor_text", mb.anchor_text, g.anchor_text},
      {"anchor_image", mb.anchor_image, g.anchor_image},
      {"hn_texts", flatten(mb.hn_texts), flatten(g.hn_texts)},
      {"hn_images", flatten(mb.hn_images), flatten(g.hn_images)},
  };
  if (uses_scale)
    blocks.push_back({"scale", Vector::Constant(1, cfg.scale), Vector::Constant(1, g.scale)});
  return check_gradients(f, blocks, step);
}

}  // namespace drive
