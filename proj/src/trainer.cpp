#include "drive/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <random>

#include "drive/error.hpp"
#include "drive/eval.hpp"

namespace drive {

namespace {

// Scale is exp(scale_logit), kept within [1, 100].
constexpr double kMaxLogit = 4.605170185988092;  // ln 100

struct Gradients {
  Matrix entity, relation, text_proj, image_proj;
  double scale_logit = 0.0;
  explicit Gradients(const EncoderParams& p)
      : entity(Matrix::Zero(p.entity_table.rows(), p.entity_table.cols())),
        relation(Matrix::Zero(p.relation_table.rows(), p.relation_table.cols())),
        text_proj(Matrix::Zero(p.text_projection.rows(), p.text_projection.cols())),
        image_proj(Matrix::Zero(p.image_projection.rows(), p.image_projection.cols())) {}
};

class Stepper {
 public:
  Stepper(const EncoderParams& p, const TrainConfig& tc) : tc_(tc), m_(p), v_(p) {}

  void apply(EncoderParams& p, const Gradients& g) {
    ++t_;
    update(p.entity_table, g.entity, m_.entity, v_.entity);
    update(p.relation_table, g.relation, m_.relation, v_.relation);
    update(p.text_projection, g.text_proj, m_.text_proj, v_.text_proj);
    update(p.image_projection, g.image_proj, m_.image_proj, v_.image_proj);
    if (tc_.learn_scale) {
      Matrix s(1, 1), gs(1, 1), ms(1, 1), vs(1, 1);
      s(0, 0) = p.scale_logit;
      gs(0, 0) = g.scale_logit;
      ms(0, 0) = m_.scale_logit;
      vs(0, 0) = v_.scale_logit;
      update(s, gs, ms, vs);
      p.scale_logit = std::clamp(s(0, 0), 0.0, kMaxLogit);
      m_.scale_logit = ms(0, 0);
      v_.scale_logit = vs(0, 0);
    }
  }

 private:
  void update(Matrix& w, const Matrix& g, Matrix& m, Matrix& v) {
    if (tc_.optimizer == Optimizer::Sgd) {
      w -= tc_.learning_rate * g;
      return;
    }
    m = tc_.beta1 * m + (1.0 - tc_.beta1) * g;
    v = tc_.beta2 * v + (1.0 - tc_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(tc_.beta1, t_);
    const double c2 = 1.0 - std::pow(tc_.beta2, t_);
    w.array() -= tc_.learning_rate * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + tc_.adam_epsilon);
  }

  const TrainConfig& tc_;
  Gradients m_, v_;
  int t_ = 0;
};

// Raw (unnormalized) projections for a set of samples, kept for backprop.
struct Forward {
  std::vector<std::size_t> rows;
  Matrix z;  // text features, one row per sample
  Matrix x;  // image features
  Matrix u;  // z * W_t
  Matrix v;  // x * W_i
};

Forward forward(const EncoderParams& p, const World& w, const std::vector<std::size_t>& rows) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Forward f{rows, Matrix(n, p.text_projection.rows()), Matrix(n, p.image_projection.rows()), {}, {}};
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t i = rows[k];
    f.z.row(k) = text_features(p, {w.subject[i], w.relation[i], w.object[i]}).transpose();
    const auto& img = w.samples[i].image_features;
    for (Eigen::Index c = 0; c < f.x.cols(); ++c) f.x(k, c) = img[c];
  }
  f.u = f.z * p.text_projection;
  f.v = f.x * p.image_projection;
  return f;
}

void backward(const EncoderParams& p, const World& w, const Forward& f, const Matrix& du,
              const Matrix& dv, Gradients& g) {
  g.text_proj.noalias() += f.z.transpose() * du;
  g.image_proj.noalias() += f.x.transpose() * dv;
  const Matrix dz = du * p.text_projection.transpose();
  const Eigen::Index L = p.entity_table.cols();
  for (Eigen::Index k = 0; k < dz.rows(); ++k) {
    const std::size_t i = f.rows[k];
    g.entity.row(w.subject[i]) += dz.row(k).segment(0, L);
    g.relation.row(w.relation[i]) += dz.row(k).segment(L, L);
    g.entity.row(w.object[i]) += dz.row(k).segment(2 * L, L);
  }
}

double scale_of(const EncoderParams& p) { return std::exp(p.scale_logit); }

// One optimizer step's objective and gradient. HN: sum of hn_loss over the
// step's mini-batches. CLIP: clip_loss over the step's pairs.
double step_objective(const EncoderParams& p, const World& w, const TrainConfig& tc,
                      const std::vector<std::size_t>& step, Gradients* g) {
  const double scale = scale_of(p);
  if (tc.loss_mode == LossMode::Clip) {
    const Forward f = forward(p, w, step);
    const ClipLossResult r = clip_loss(f.v, f.u, scale);
    if (g) {
      backward(p, w, f, r.d_texts, r.d_images, *g);
      g->scale_logit += r.d_scale * scale;
    }
    return r.loss;
  }
  const LossConfig lc{scale, tc.delta_t, tc.delta_i};
  std::vector<MiniBatch> mbs;
  std::vector<Forward> fwd;
  mbs.reserve(step.size());
  fwd.reserve(step.size());
  for (std::size_t a : step) {
    std::vector<std::size_t> rows{a};
    rows.insert(rows.end(), w.negatives[a].begin(), w.negatives[a].end());
    Forward f = forward(p, w, rows);
    const Eigen::Index k = f.u.rows() - 1;
    mbs.push_back({f.u.row(0).transpose(), f.v.row(0).transpose(), f.u.bottomRows(k),
                   f.v.bottomRows(k)});
    fwd.push_back(std::move(f));
  }
  const BatchLossResult r = batch_loss(mbs, lc);
  if (g) {
    for (std::size_t b = 0; b < mbs.size(); ++b) {
      const MiniBatchGrad& mg = r.grads[b];
      const Eigen::Index k = mbs[b].negatives();
      Matrix du(k + 1, mg.anchor_text.size()), dv(k + 1, mg.anchor_image.size());
      du.row(0) = mg.anchor_text.transpose();
      dv.row(0) = mg.anchor_image.transpose();
      du.bottomRows(k) = mg.hn_texts;
      dv.bottomRows(k) = mg.hn_images;
      backward(p, w, fwd[b], du, dv, *g);
      g->scale_logit += mg.scale * scale;
    }
  }
  return r.total;
}

std::vector<std::vector<std::size_t>> plan_epoch(const World& w, const TrainConfig& tc,
                                                 std::mt19937_64& rng, std::size_t* skipped) {
  if (tc.loss_mode == LossMode::Hn) {
    std::vector<std::size_t> order(w.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    StepPlan plan = plan_hn_steps(w.negatives, tc.batch_size, std::move(order));
    if (skipped) *skipped = plan.skipped_empty;
    return std::move(plan.steps);
  }
  std::vector<std::size_t> order(w.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> steps;
  for (std::size_t s = 0; s < order.size(); s += tc.batch_size)
    steps.emplace_back(order.begin() + s,
                       order.begin() + std::min(order.size(), s + tc.batch_size));
  if (skipped) *skipped = 0;
  return steps;
}

double recall_or_zero(const Embeddings& e, const HNIndex& n, Direction d) {
  return recall_counts(e, n, d).rate();
}

}  // namespace

std::string_view to_string(LossMode mode) { return mode == LossMode::Clip ? "clip" : "hn"; }

LossMode parse_loss_mode(std::string_view text) {
  if (text == "clip") return LossMode::Clip;
  if (text == "hn") return LossMode::Hn;
  throw Error(ErrorCode::ValidationError, "mode");
}

std::string_view to_string(Optimizer opt) { return opt == Optimizer::Sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(std::string_view text) {
  if (text == "sgd") return Optimizer::Sgd;
  if (text == "adam") return Optimizer::Adam;
  throw Error(ErrorCode::ValidationError, "optimizer");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorCode::ValidationError, "batch_size");
  // Zero is allowed so a run can be used to inspect the initialization.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorCode::ValidationError, "learning_rate");
  if (epochs < 1) throw Error(ErrorCode::ValidationError, "epochs");
  if (!(delta_t >= 0.0)) throw Error(ErrorCode::ValidationError, "delta_t");
  if (!(delta_i >= 0.0)) throw Error(ErrorCode::ValidationError, "delta_i");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw Error(ErrorCode::ValidationError, "beta1");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw Error(ErrorCode::ValidationError, "beta2");
  if (!(adam_epsilon > 0.0)) throw Error(ErrorCode::ValidationError, "adam_epsilon");
  if (embed_dim < 1) throw Error(ErrorCode::ValidationError, "embed_dim");
  if (!(init_std > 0.0)) throw Error(ErrorCode::ValidationError, "init_std");
  if (!(initial_scale >= 1.0 && initial_scale <= 100.0))
    throw Error(ErrorCode::ValidationError, "initial_scale");
}

TrainConfig toy_preset() {
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  return tc;
}

std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,loss,r1_t2i,r1_i2t\n";
  for (const auto& e : h.epochs)
    out += fmt::format("{},{:.9f},{:.6f},{:.6f}\n", e.epoch, e.loss, e.r1_t2i, e.r1_i2t);
  return out;
}

EncoderParams init_params(const World& world, const TrainConfig& tc) {
  tc.validate();
  const Eigen::Index L = world.entity_latents.cols() > 0
                             ? world.entity_latents.cols()
                             : static_cast<Eigen::Index>(world.samples.empty()
                                                             ? 0
                                                             : world.samples[0].image_features.size() / 3);
  if (L == 0) throw Error(ErrorCode::EmptyDataset, "world has no samples");
  const Eigen::Index D = static_cast<Eigen::Index>(world.samples[0].image_features.size());
  std::mt19937_64 rng(tc.seed);
  std::normal_distribution<double> normal(0.0, tc.init_std);
  auto draw = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
    return m;
  };
  EncoderParams p;
  p.entity_names = world.entity_names;
  p.relation_names = world.relation_names;
  p.entity_table = draw(static_cast<Eigen::Index>(world.entity_names.size()), L);
  p.relation_table = draw(static_cast<Eigen::Index>(world.relation_names.size()), L);
  p.text_projection = draw(3 * L, tc.embed_dim);
  p.image_projection = draw(D, tc.embed_dim);
  p.scale_logit = std::log(tc.initial_scale);
  return p;
}

StepPlan plan_hn_steps(const HNIndex& negatives, int batch_size, std::vector<std::size_t> order) {
  StepPlan plan;
  std::vector<std::size_t> current;
  std::size_t pairs = 0;
  for (std::size_t a : order) {
    if (negatives[a].empty()) {
      ++plan.skipped_empty;
      continue;
    }
    current.push_back(a);
    pairs += 1 + negatives[a].size();
    if (pairs >= static_cast<std::size_t>(batch_size)) {
      plan.steps.push_back(std::move(current));
      current.clear();
      pairs = 0;
    }
  }
  if (!current.empty()) plan.steps.push_back(std::move(current));
  return plan;
}

TrainResult train(const World& world, const TrainConfig& tc) {
  tc.validate();
  if (world.samples.empty()) throw Error(ErrorCode::EmptyDataset, "world has no samples");
  if (world.negatives.size() != world.samples.size())
    throw Error(ErrorCode::DimensionMismatch, "world hard-negative index size");
  if (tc.loss_mode == LossMode::Hn &&
      std::all_of(world.negatives.begin(), world.negatives.end(),
                  [](const auto& v) { return v.empty(); }))
    throw Error(ErrorCode::NoNegatives, "no anchor has a hard negative");

  TrainResult out{init_params(world, tc), {}};
  EncoderParams& p = out.params;
  Stepper stepper(p, tc);
  std::mt19937_64 rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);

  auto check = [](double loss) {
    if (!std::isfinite(loss)) throw Error(ErrorCode::DivergedLoss, "training loss is not finite");
    return loss;
  };
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::size_t skipped = 0;
    const auto steps = plan_epoch(world, tc, rng, &skipped);
    if (epoch == 1) {
      double sum = 0.0;
      for (const auto& s : steps) sum += check(step_objective(p, world, tc, s, nullptr));
      out.history.initial_loss = steps.empty() ? 0.0 : sum / double(steps.size());
      out.history.skipped_empty = skipped;
      out.history.used_anchors = world.samples.size() - skipped;
    }
    double sum = 0.0;
    for (const auto& s : steps) {
      Gradients g(p);
      sum += check(step_objective(p, world, tc, s, &g));
      stepper.apply(p, g);
      if (!p.entity_table.allFinite() || !p.relation_table.allFinite() ||
          !p.text_projection.allFinite() || !p.image_projection.allFinite() ||
          !std::isfinite(p.scale_logit))
        throw Error(ErrorCode::DivergedLoss, "parameters are not finite after an update");
    }
    const Embeddings e = encode_dataset(p, world.samples);
    out.history.epochs.push_back({epoch, steps.empty() ? 0.0 : sum / double(steps.size()),
                                  recall_or_zero(e, world.negatives, Direction::TextToImage),
                                  recall_or_zero(e, world.negatives, Direction::ImageToText)});
  }
  return out;
}

}  // namespace drive
