#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drive/encoder.hpp"
#include "drive/miner.hpp"

namespace drive {

enum class Direction { TextToImage, ImageToText };

std::string_view to_string(Direction d);

struct RecallCounts {
  std::size_t hits = 0;
  std::size_t evaluated = 0;
  std::size_t skipped_empty = 0;
  double rate() const { return evaluated ? double(hits) / double(evaluated) : 0.0; }
};

// Candidates for anchor i are i and negatives[i]. A hit needs the anchor's own
// match to score strictly above every other candidate. `anchors` restricts the
// count to a subset of positions; null means all.
RecallCounts recall_counts(const Embeddings& e, const HNIndex& negatives, Direction d,
                           const std::vector<std::size_t>* anchors = nullptr);

// Throws NoEvaluableAnchors.
double recall_at_1(const Embeddings& e, const HNIndex& negatives, Direction d);
double recall_at_1(const EncoderParams& p, const Dataset& dataset, const HNIndex& negatives,
                   Direction d);

double delta_acc(double subset_acc, double reference_acc);

struct SubsetRecall {
  double r1_t2i = 0.0;
  double r1_i2t = 0.0;
  std::size_t n = 0;
  bool operator==(const SubsetRecall&) const = default;
};

struct EvalReport {
  double r1_t2i = 0.0;
  double r1_i2t = 0.0;
  std::map<std::string, SubsetRecall> per_subset;
  // subset -> r1_t2i(subset) - r1_t2i(reference), for every subset other
  // than the reference.
  std::map<std::string, double> delta_acc;
  std::string reference;
  std::size_t n_anchors = 0;
  std::size_t skipped_empty = 0;
};

enum class SubsetSplit { None, State };
SubsetSplit parse_subset_split(std::string_view text);  // "none" | "state"

// Throws NoEvaluableAnchors; InvalidInput when the reference subset is
// missing or empty.
EvalReport evaluate(const Embeddings& e, const Dataset& dataset, const HNIndex& negatives,
                    SubsetSplit split, const std::string& reference = "dynamic");
EvalReport evaluate(const EncoderParams& p, const Dataset& dataset, const HNIndex& negatives,
                    SubsetSplit split, const std::string& reference = "dynamic");

// "json" (sorted keys, 6 decimals), "csv" (subset,direction,r1,n) or
// "plot-data" (one blank-line separated series per direction). Throws
// UnsupportedFormat.
std::string emit_report(const EvalReport& report, std::string_view format);
// Inverse of the json form. Throws ParseError.
EvalReport parse_report_json(std::string_view text);

}  // namespace drive
