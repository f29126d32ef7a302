#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drive/encoder.hpp"
#include "drive/world.hpp"

namespace drive {

enum class LossMode { Clip, Hn };
enum class Optimizer { Sgd, Adam };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);  // "clip" | "hn"
std::string_view to_string(Optimizer opt);
Optimizer parse_optimizer(std::string_view text);  // "sgd" | "adam"

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 1e-5;
  int epochs = 7;
  LossMode loss_mode = LossMode::Hn;
  double delta_t = 0.615;
  double delta_i = 1.223;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int embed_dim = 8;
  double init_std = 0.02;
  double initial_scale = 1.0 / 0.07;
  bool learn_scale = true;
  std::uint64_t seed = 1;

  void validate() const;
};

// Desk-scale preset: same as the defaults but with learning rate 1e-3.
TrainConfig toy_preset();

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean per-step objective over the epoch
  double r1_t2i = 0.0;
  double r1_i2t = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  double initial_loss = 0.0;  // objective over one pass before any update
  std::size_t used_anchors = 0;
  std::size_t skipped_empty = 0;
  bool operator==(const TrainHistory&) const = default;
};

// epoch,loss,r1_t2i,r1_i2t
std::string history_csv(const TrainHistory& h);

struct TrainResult {
  EncoderParams params;
  TrainHistory history;
};

// Seeded Gaussian initialization, scale_logit = ln(initial_scale).
EncoderParams init_params(const World& world, const TrainConfig& tc);

// One mini-batch per anchor with a non-empty hard-negative set, grouped into
// optimizer steps of at least batch_size pairs (a step may overshoot so an
// anchor never leaves its negatives behind). Anchor order is reshuffled per
// epoch from the training seed.
struct StepPlan {
  std::vector<std::vector<std::size_t>> steps;  // anchor positions per step
  std::size_t skipped_empty = 0;
};
StepPlan plan_hn_steps(const HNIndex& negatives, int batch_size, std::vector<std::size_t> order);

// Throws NoNegatives (HN mode, no anchor has negatives) or DivergedLoss.
TrainResult train(const World& world, const TrainConfig& tc);

}  // namespace drive
