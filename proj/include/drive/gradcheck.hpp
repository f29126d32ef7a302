#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drive/loss.hpp"

namespace drive {

struct GradReport {
  double max_relative_error = 0.0;
  std::map<std::string, double> per_parameter_errors;

  std::string to_json() const;
};

// A named parameter tensor flattened to a vector, with its analytic gradient.
struct ParameterBlock {
  std::string name;
  Vector values;
  Vector analytic;
};

using ScalarFunction = std::function<double(const std::vector<Vector>& values)>;

// Central differences per scalar at `step`. The error for a block is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12) with |.| the
// Euclidean norm over the block, so a one-element block gets the plain scalar
// relative error. Throws NonFinite.
GradReport check_gradients(const ScalarFunction& f, const std::vector<ParameterBlock>& params,
                           double step);

enum class LossKind { Clip, Croco, HnText, HnImage, Hn };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

// Checks one loss of the family on a mini-batch. Blocks: anchor_text,
// anchor_image, hn_texts, hn_images, plus scale for the contrastive terms.
// LossKind::Clip is checked on the stacked [anchor; negatives] matrices.
GradReport check_loss_gradients(LossKind kind, const MiniBatch& mb, const LossConfig& cfg,
                                double step);

}  // namespace drive
