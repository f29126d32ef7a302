#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drive/loss.hpp"
#include "drive/miner.hpp"
#include "drive/triplet.hpp"

namespace drive {

struct WorldConfig {
  int n_entities = 30;
  int n_relations = 20;
  int latent_dim = 6;
  double image_noise_sigma = 0.1;
  double stative_fraction = 0.5;
  // Scales the relation block of a stative sample's image features.
  double stative_attenuation = 0.3;
  int n_samples = 2000;
  std::uint64_t seed = 1;

  void validate() const;
};

// A synthetic relational world. Sample k is the triplet
// (entity subject[k], relation relation[k], entity object[k]) and its image
// features are [latent_s, alpha * latent_r, latent_o] + N(0, sigma^2), with
// alpha = stative_attenuation for stative relations and 1 otherwise.
struct World {
  Dataset samples;
  HNIndex negatives;  // same (subject, object), different relation
  Matrix entity_latents;
  Matrix relation_latents;
  std::vector<bool> relation_is_stative;
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
  std::vector<int> subject;
  std::vector<int> relation;
  std::vector<int> object;

  int image_dim() const { return static_cast<int>(3 * entity_latents.cols()); }
};

// Draws n_samples distinct triplets. Throws InsufficientVocabulary when
// n_samples exceeds n_entities^2 * n_relations.
World synth_world(const WorldConfig& cfg);

std::string entity_name(int id, int count);
std::string relation_name(int id, int count);

// Negatives by exact identity: same subject and object text, different
// relation. This is what a world file implies when no hard-negative file is
// given.
HNIndex group_negatives(const Dataset& dataset);

// Rebuilds world indices (names, ids) from a dataset written by synth. The
// latents are not recoverable and are left empty.
World world_from_dataset(Dataset dataset);

}  // namespace drive
