#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "drive/loss.hpp"
#include "drive/similarity.hpp"
#include "drive/trainer.hpp"
#include "drive/world.hpp"

namespace drive {

struct AnnotationEndpoint {
  std::string url;
  int timeout_ms = 5000;
  std::string cache_path;
  std::string stub_path;  // offline stub fixture; used when url is empty
};

struct AppConfig {
  std::string dataset_path;
  std::string lexicon_path;
  std::string synonyms_path;
  std::string output_path;
  SimilarityConfig similarity;
  LossConfig loss;
  TrainConfig train;
  WorldConfig world;
  AnnotationEndpoint annotation;
  std::string log_level = "warn";

  // Every key with its resolved value, sorted by key.
  std::map<std::string, std::string> resolved() const;
  // FNV-1a over the "key=value\n" lines of resolved().
  std::string hash() const;
  void validate() const;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Flat "dotted.key = value" lines; '#' starts a comment. Throws ParseError
// (with line number) for malformed lines.
Overrides parse_config_text(std::string_view text);

// Defaults < file < DRIVE_ANNOTATION_URL < overrides. An empty path means no
// file. Unknown keys and invalid values throw ValidationError naming the key.
// "train.preset" ("default" or "toy") is applied before the other train keys.
AppConfig load_config(const std::filesystem::path& path, const Overrides& overrides);

// Keys accepted by load_config.
std::vector<std::string> config_keys();

}  // namespace drive
