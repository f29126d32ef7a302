#include "drive/world.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include "drive/error.hpp"

namespace drive {

namespace {

std::string padded(char prefix, int id, int count) {
  const int width = static_cast<int>(std::to_string(std::max(count - 1, 0)).size());
  std::string digits = std::to_string(id);
  return std::string(1, prefix) + std::string(width - std::min<int>(width, digits.size()), '0') +
         digits;
}

Matrix unit_rows(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    do {
      for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
    } while (m.row(i).norm() == 0.0);
    m.row(i) /= m.row(i).norm();
  }
  return m;
}

}  // namespace

void WorldConfig::validate() const {
  if (n_entities < 2) throw Error(ErrorCode::ValidationError, "n_entities");
  if (n_relations < 2) throw Error(ErrorCode::ValidationError, "n_relations");
  if (latent_dim < 1) throw Error(ErrorCode::ValidationError, "latent_dim");
  if (!(image_noise_sigma >= 0.0)) throw Error(ErrorCode::ValidationError, "image_noise_sigma");
  if (!(stative_fraction >= 0.0 && stative_fraction <= 1.0))
    throw Error(ErrorCode::ValidationError, "stative_fraction");
  if (!(stative_attenuation > 0.0 && stative_attenuation <= 1.0))
    throw Error(ErrorCode::ValidationError, "stative_attenuation");
  if (n_samples < 0) throw Error(ErrorCode::ValidationError, "n_samples");
}

std::string entity_name(int id, int count) { return padded('e', id, count); }
std::string relation_name(int id, int count) { return padded('r', id, count); }

World synth_world(const WorldConfig& cfg) {
  cfg.validate();
  const std::int64_t capacity =
      std::int64_t(cfg.n_entities) * cfg.n_entities * cfg.n_relations;
  if (cfg.n_samples > capacity)
    throw Error(ErrorCode::InsufficientVocabulary,
                "cannot place " + std::to_string(cfg.n_samples) + " distinct triplets in " +
                    std::to_string(capacity));

  std::mt19937_64 rng(cfg.seed);
  World w;
  w.entity_latents = unit_rows(cfg.n_entities, cfg.latent_dim, rng);
  w.relation_latents = unit_rows(cfg.n_relations, cfg.latent_dim, rng);
  const int n_stative = static_cast<int>(std::lround(cfg.stative_fraction * cfg.n_relations));
  for (int r = 0; r < cfg.n_relations; ++r) w.relation_is_stative.push_back(r < n_stative);
  for (int e = 0; e < cfg.n_entities; ++e) w.entity_names.push_back(entity_name(e, cfg.n_entities));
  for (int r = 0; r < cfg.n_relations; ++r)
    w.relation_names.push_back(relation_name(r, cfg.n_relations));

  // Distinct triplet codes, (s * n_rel + r) * n_ent + o.
  std::vector<std::int64_t> codes;
  if (capacity <= 4'000'000) {
    codes.resize(static_cast<std::size_t>(capacity));
    for (std::int64_t c = 0; c < capacity; ++c) codes[static_cast<std::size_t>(c)] = c;
    for (int k = 0; k < cfg.n_samples; ++k) {
      std::uniform_int_distribution<std::int64_t> pick(k, capacity - 1);
      std::swap(codes[k], codes[static_cast<std::size_t>(pick(rng))]);
    }
    codes.resize(cfg.n_samples);
  } else {
    std::unordered_set<std::int64_t> seen;
    std::uniform_int_distribution<std::int64_t> pick(0, capacity - 1);
    while (static_cast<int>(codes.size()) < cfg.n_samples) {
      const std::int64_t c = pick(rng);
      if (seen.insert(c).second) codes.push_back(c);
    }
  }

  const int L = cfg.latent_dim;
  std::normal_distribution<double> noise(0.0, 1.0);
  const int id_width = static_cast<int>(std::to_string(std::max(cfg.n_samples - 1, 0)).size());
  for (int k = 0; k < cfg.n_samples; ++k) {
    const std::int64_t c = codes[k];
    const int o = static_cast<int>(c % cfg.n_entities);
    const int r = static_cast<int>((c / cfg.n_entities) % cfg.n_relations);
    const int s = static_cast<int>(c / (std::int64_t(cfg.n_entities) * cfg.n_relations));
    w.subject.push_back(s);
    w.relation.push_back(r);
    w.object.push_back(o);

    Sample smp;
    std::string digits = std::to_string(k);
    smp.id = "w" + std::string(id_width - std::min<int>(id_width, digits.size()), '0') + digits;
    smp.triplet = Triplet::from_text(w.entity_names[s], w.relation_names[r], w.entity_names[o]);
    smp.raw_caption = render_caption(smp.triplet);
    smp.state = w.relation_is_stative[r] ? VerbState::Stative : VerbState::Dynamic;
    smp.scene_relation_count = 1;
    smp.object_count = 2;
    const double alpha = w.relation_is_stative[r] ? cfg.stative_attenuation : 1.0;
    smp.image_features.resize(3 * L);
    for (int j = 0; j < L; ++j) {
      smp.image_features[j] = w.entity_latents(s, j);
      smp.image_features[L + j] = alpha * w.relation_latents(r, j);
      smp.image_features[2 * L + j] = w.entity_latents(o, j);
    }
    if (cfg.image_noise_sigma > 0.0)
      for (double& x : smp.image_features) x += cfg.image_noise_sigma * noise(rng);
    w.samples.push_back(std::move(smp));
  }
  w.negatives = group_negatives(w.samples);
  return w;
}

HNIndex group_negatives(const Dataset& dataset) {
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    groups[{dataset[i].triplet.subject.text, dataset[i].triplet.object.text}].push_back(i);
  HNIndex out(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& t = dataset[i].triplet;
    for (std::size_t j : groups.at({t.subject.text, t.object.text}))
      if (j != i && dataset[j].triplet.relation.text != t.relation.text) out[i].push_back(j);
  }
  return out;
}

World world_from_dataset(Dataset dataset) {
  World w;
  std::set<std::string> entities, relations;
  std::map<std::string, bool> stative;
  for (const auto& s : dataset) {
    entities.insert(s.triplet.subject.text);
    entities.insert(s.triplet.object.text);
    relations.insert(s.triplet.relation.text);
    stative[s.triplet.relation.text] = s.state == VerbState::Stative;
  }
  w.entity_names.assign(entities.begin(), entities.end());
  w.relation_names.assign(relations.begin(), relations.end());
  for (const auto& r : w.relation_names) w.relation_is_stative.push_back(stative[r]);
  auto index_of = [](const std::vector<std::string>& names, const std::string& n) {
    return static_cast<int>(std::lower_bound(names.begin(), names.end(), n) - names.begin());
  };
  for (const auto& s : dataset) {
    w.subject.push_back(index_of(w.entity_names, s.triplet.subject.text));
    w.relation.push_back(index_of(w.relation_names, s.triplet.relation.text));
    w.object.push_back(index_of(w.entity_names, s.triplet.object.text));
  }
  w.negatives = group_negatives(dataset);
  w.samples = std::move(dataset);
  return w;
}

}  // namespace drive
