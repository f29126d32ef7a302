#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "drive/triplet.hpp"

namespace drive {

// Word vectors plus curated synonym sets. Multi-word keys are allowed; in the
// plain-text vector file they are written with '_' in place of spaces
// ("plane_is_in_sky"), which lets fixtures plant phrase- or caption-level
// vectors directly.
class EmbeddingLexicon {
 public:
  explicit EmbeddingLexicon(int dimension);

  int dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }

  void add_vector(std::string word, Eigen::VectorXd v);
  // Membership is looked up symmetrically. confidence in [0, 1]; a set only
  // counts when confidence >= the configured epsilon.
  void add_synonym_set(const std::vector<std::string>& words, double confidence = 1.0);

  const Eigen::VectorXd* find(std::string_view word) const;
  bool share_synonym_set(std::string_view a, std::string_view b, double epsilon) const;

  // "<vocab_size> <dimension>" header, then "word v1 ... vd" per line.
  static EmbeddingLexicon read_vectors(std::istream& in);
  void write_vectors(std::ostream& out) const;
  // [["driving","steering"], ...] or [{"words": [...], "confidence": 0.8}, ...]
  void read_synonyms_json(std::string_view text);
  static EmbeddingLexicon load(const std::filesystem::path& vectors,
                               const std::filesystem::path& synonyms = {});

 private:
  struct SynonymSet {
    double confidence;
  };
  int dimension_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
  std::vector<SynonymSet> sets_;
  std::unordered_map<std::string, std::vector<std::size_t>> membership_;
};

struct SimilarityConfig {
  double tau = 0.93;
  double epsilon = 1.0;

  void validate() const;  // ValidationError("tau") / ValidationError("epsilon")
};

struct SweepPoint {
  double tau;
  double precision;
  double recall;
  double f1;
};

struct ThresholdSweepResult {
  double best_tau = 0.0;
  double best_f1 = 0.0;
  std::vector<SweepPoint> curve;
};

struct LabeledPair {
  Phrase a;
  Phrase b;
  bool label;
};

// Unit-length mean of the known token vectors, or the phrase's own entry when
// the lexicon has one for its full text. Throws NoKnownTokens.
Eigen::VectorXd phrase_embedding(const Phrase& p, const EmbeddingLexicon& lex);

double phrase_cosine(const Phrase& a, const Phrase& b, const EmbeddingLexicon& lex);

// Identical text, or a shared synonym set on text or head.
bool synonym_match(const Phrase& a, const Phrase& b, const EmbeddingLexicon& lex,
                   const SimilarityConfig& cfg);

// Synonym branch (identical text, or a shared synonym set on text or head)
// OR cosine >= tau.
bool approx_equal(const Phrase& a, const Phrase& b, const EmbeddingLexicon& lex,
                  const SimilarityConfig& cfg);
bool relation_approx_equal(const Phrase& r1, const Phrase& r2,
                           const EmbeddingLexicon& lex, const SimilarityConfig& cfg);

// The whole caption as one phrase, subject + relation + object tokens.
Phrase caption_phrase(const Triplet& t);

// Both the rendered captions and the standardized forms (tj's subject and
// object replaced by ti's) must reach tau. Anchor-side canonicalization, so
// this is not symmetric in general.
bool triplet_approx_equal(const Triplet& ti, const Triplet& tj,
                          const EmbeddingLexicon& lex, const SimilarityConfig& cfg);

// Cosine-only classification at each tau in lo, lo+step, ..., <= hi.
// Ties on F1 go to the lowest tau. Throws DegenerateLabels.
ThresholdSweepResult sweep_threshold(const std::vector<LabeledPair>& pairs,
                                     const EmbeddingLexicon& lex, double lo = 0.80,
                                     double hi = 0.99, double step = 0.01);

}  // namespace drive
