#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "drive/loss.hpp"
#include "drive/triplet.hpp"

namespace drive {

// Lookup tables feeding two linear projections.
//   text  = normalize(text_projection^T  [entity[s]; relation[r]; entity[o]])
//   image = normalize(image_projection^T image_features)
struct EncoderParams {
  Matrix entity_table;      // n_entities x latent_dim
  Matrix relation_table;    // n_relations x latent_dim
  Matrix text_projection;   // 3*latent_dim x embed_dim
  Matrix image_projection;  // image_dim x embed_dim
  double scale_logit = 0.0;
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;

  int latent_dim() const { return static_cast<int>(entity_table.cols()); }
  int embed_dim() const { return static_cast<int>(text_projection.cols()); }
  int image_dim() const { return static_cast<int>(image_projection.rows()); }
  // Throws DimensionMismatch / NonFinite.
  void validate() const;
  bool operator==(const EncoderParams&) const;
};

struct TripletIds {
  int subject = 0;
  int relation = 0;
  int object = 0;
};

// Text-side input before projection.
Vector text_features(const EncoderParams& p, const TripletIds& ids);

// Throws DimensionMismatch on bad ids or shapes, NormalizationUndefined on a
// zero projection.
Vector encode_text(const EncoderParams& p, const TripletIds& ids);
Vector encode_image(const EncoderParams& p, const std::vector<double>& image_features);

// Resolves phrase text to table rows by name. Throws InvalidInput for an
// unknown entity or relation.
TripletIds triplet_ids(const EncoderParams& p, const Triplet& t);

// Row k is the unit embedding of sample k.
struct Embeddings {
  Matrix texts;
  Matrix images;
};
Embeddings encode_dataset(const EncoderParams& p, const Dataset& dataset);

// <path> holds the tables as little-endian float64 in the order entity,
// relation, text projection, image projection, scale logit, each matrix
// row-major. <path>.json describes the shapes, names and config hash.
void save_checkpoint(const std::filesystem::path& path, const EncoderParams& p,
                     const std::string& config_hash);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace drive
