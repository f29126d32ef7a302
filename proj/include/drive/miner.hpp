#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "drive/similarity.hpp"
#include "drive/triplet.hpp"

namespace drive {

enum class DatasetMode { Croco, CrocoD };

std::string_view to_string(DatasetMode mode);
DatasetMode parse_dataset_mode(std::string_view text);  // "croco" | "croco-d"

// Anchor id -> hard-negative ids, anchors and their lists both in source
// dataset order.
struct HNMap {
  struct Entry {
    std::string anchor;
    std::vector<std::string> negatives;
    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> entries;

  const std::vector<std::string>* find(std::string_view anchor) const;
  std::size_t total_negatives() const;
  bool operator==(const HNMap&) const = default;
};

// Index form used internally and by the trainer: negatives[i] lists dataset
// positions, ascending.
using HNIndex = std::vector<std::vector<std::size_t>>;

HNMap to_hnmap(const Dataset& dataset, const HNIndex& index);
// Throws InvalidInput if the map names an id missing from the dataset.
HNIndex to_hnindex(const Dataset& dataset, const HNMap& map);

// s_i ~ s_j, R_i !~ R_j, o_i ~ o_j, and the full triplets are not
// approximately equal in either canonicalization.
bool is_croco_hn(const Triplet& ti, const Triplet& tj, const EmbeddingLexicon& lex,
                 const SimilarityConfig& cfg);

// Same relation, subject and object swapped: s_i ~ o_j, o_i ~ s_j, R_i ~ R_j,
// and the anchor is not self-symmetric (s_i !~ o_i).
bool is_crocod_hn(const Triplet& ti, const Triplet& tj, const EmbeddingLexicon& lex,
                  const SimilarityConfig& cfg);

// Pairwise predicate mine() applies, including the plausibility gate that
// CROCO-D puts on both samples.
bool is_hard_negative(const Sample& anchor, const Sample& candidate, DatasetMode mode,
                      const EmbeddingLexicon& lex, const SimilarityConfig& cfg);

// Checks ids are unique (DuplicateId) and every sample is admitted.
void validate_for_mining(const Dataset& dataset);

// Candidate generation goes through a subject (CROCO) or object (CROCO-D)
// bucket index over distinct phrases; anchors are split across `workers`
// threads and merged in anchor order.
HNIndex mine_index(const Dataset& dataset, DatasetMode mode,
                   const EmbeddingLexicon& lex, const SimilarityConfig& cfg,
                   unsigned workers = 1);

HNMap mine(const Dataset& dataset, DatasetMode mode, const EmbeddingLexicon& lex,
           const SimilarityConfig& cfg, unsigned workers = 1);

std::pair<Dataset, Dataset> split_by_state(const Dataset& dataset);

struct DatasetStats {
  std::size_t caption_count = 0;
  std::size_t distinct_relations = 0;
  double mean_relation_frequency = 0.0;
  double std_relation_frequency = 0.0;
  std::size_t distinct_entities = 0;
  double mean_relations_per_entity = 0.0;
  double std_relations_per_entity = 0.0;
};

// Population standard deviations. Throws EmptyDataset.
DatasetStats dataset_stats(const Dataset& dataset);

}  // namespace drive
