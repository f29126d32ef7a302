#include "drive/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "drive/error.hpp"

namespace drive {

namespace {

std::string key_from_file(std::string word) {
  std::replace(word.begin(), word.end(), '_', ' ');
  return normalize_text(word);
}

std::string key_to_file(std::string word) {
  std::replace(word.begin(), word.end(), ' ', '_');
  return word;
}

}  // namespace

EmbeddingLexicon::EmbeddingLexicon(int dimension) : dimension_(dimension) {
  if (dimension <= 0)
    throw Error(ErrorCode::InvalidInput, "lexicon dimension must be positive");
}

void EmbeddingLexicon::add_vector(std::string word, Eigen::VectorXd v) {
  if (v.size() != dimension_)
    throw Error(ErrorCode::DimensionMismatch,
                "vector for '" + word + "' has wrong dimension");
  if (!v.allFinite())
    throw Error(ErrorCode::NonFinite, "vector for '" + word + "' is not finite");
  word = normalize_text(word);
  if (!vectors_.count(word)) order_.push_back(word);
  vectors_[word] = std::move(v);
}

void EmbeddingLexicon::add_synonym_set(const std::vector<std::string>& words,
                                       double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw Error(ErrorCode::InvalidInput, "synonym confidence outside [0, 1]");
  const std::size_t id = sets_.size();
  sets_.push_back({confidence});
  for (const auto& w : words) {
    auto& ids = membership_[normalize_text(w)];
    if (ids.empty() || ids.back() != id) ids.push_back(id);
  }
}

const Eigen::VectorXd* EmbeddingLexicon::find(std::string_view word) const {
  auto it = vectors_.find(std::string(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

bool EmbeddingLexicon::share_synonym_set(std::string_view a, std::string_view b,
                                         double epsilon) const {
  auto ia = membership_.find(std::string(a));
  auto ib = membership_.find(std::string(b));
  if (ia == membership_.end() || ib == membership_.end()) return false;
  for (std::size_t x : ia->second)
    for (std::size_t y : ib->second)
      if (x == y && sets_[x].confidence >= epsilon) return true;
  return false;
}

EmbeddingLexicon EmbeddingLexicon::read_vectors(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line))
    throw Error(ErrorCode::ParseError, "lexicon: missing header");
  std::istringstream header(line);
  long vocab = -1;
  long dim = -1;
  if (!(header >> vocab >> dim) || vocab < 0 || dim <= 0)
    throw Error(ErrorCode::ParseError, "lexicon:1: bad header");
  EmbeddingLexicon lex(static_cast<int>(dim));
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    Eigen::VectorXd v(dim);
    for (long k = 0; k < dim; ++k)
      if (!(ls >> v[k]))
        throw Error(ErrorCode::ParseError,
                    "lexicon:" + std::to_string(line_no) + ": expected " +
                        std::to_string(dim) + " values");
    std::string extra;
    if (ls >> extra)
      throw Error(ErrorCode::ParseError,
                  "lexicon:" + std::to_string(line_no) + ": trailing values");
    lex.add_vector(key_from_file(word), std::move(v));
  }
  if (static_cast<long>(lex.size()) != vocab)
    throw Error(ErrorCode::ParseError, "lexicon: header vocab size " +
                                           std::to_string(vocab) + " but read " +
                                           std::to_string(lex.size()));
  return lex;
}

void EmbeddingLexicon::write_vectors(std::ostream& out) const {
  out << order_.size() << ' ' << dimension_ << '\n';
  out.precision(17);
  for (const auto& w : order_) {
    out << key_to_file(w);
    for (double x : vectors_.at(w)) out << ' ' << x;
    out << '\n';
  }
}

void EmbeddingLexicon::read_synonyms_json(std::string_view text) {
  using nlohmann::json;
  try {
    for (const json& entry : json::parse(text)) {
      if (entry.is_array()) {
        add_synonym_set(entry.get<std::vector<std::string>>());
      } else {
        add_synonym_set(entry.at("words").get<std::vector<std::string>>(),
                        entry.value("confidence", 1.0));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("synonyms: ") + e.what());
  }
}

EmbeddingLexicon EmbeddingLexicon::load(const std::filesystem::path& vectors,
                                        const std::filesystem::path& synonyms) {
  std::ifstream in(vectors);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + vectors.string());
  EmbeddingLexicon lex = read_vectors(in);
  if (!synonyms.empty()) {
    std::ifstream sin(synonyms);
    if (!sin) throw Error(ErrorCode::IoError, "cannot open " + synonyms.string());
    std::stringstream ss;
    ss << sin.rdbuf();
    lex.read_synonyms_json(ss.str());
  }
  return lex;
}

void SimilarityConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::ValidationError, "tau");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw Error(ErrorCode::ValidationError, "epsilon");
}

Eigen::VectorXd phrase_embedding(const Phrase& p, const EmbeddingLexicon& lex) {
  Eigen::VectorXd sum;
  if (const auto* whole = lex.find(p.text); whole && p.tokens.size() > 1) {
    sum = *whole;
  } else {
    sum = Eigen::VectorXd::Zero(lex.dimension());
    int known = 0;
    for (const auto& w : p.tokens) {
      const auto* v = lex.find(w.surface);
      if (!v) v = lex.find(w.lemma);
      if (!v) continue;
      sum += *v;
      ++known;
    }
    if (known == 0)
      throw Error(ErrorCode::NoKnownTokens, "no known tokens in '" + p.text + "'");
    sum /= known;
  }
  const double norm = sum.norm();
  if (!(norm > 0.0))
    throw Error(ErrorCode::NormalizationUndefined,
                "embedding of '" + p.text + "' is the zero vector");
  return sum / norm;
}

double phrase_cosine(const Phrase& a, const Phrase& b, const EmbeddingLexicon& lex) {
  return phrase_embedding(a, lex).dot(phrase_embedding(b, lex));
}

bool synonym_match(const Phrase& a, const Phrase& b, const EmbeddingLexicon& lex,
                   const SimilarityConfig& cfg) {
  if (a.text == b.text) return true;
  const std::string_view names_a[] = {a.text, a.head};
  const std::string_view names_b[] = {b.text, b.head};
  for (auto x : names_a)
    for (auto y : names_b)
      if (lex.share_synonym_set(x, y, cfg.epsilon)) return true;
  return false;
}

bool approx_equal(const Phrase& a, const Phrase& b, const EmbeddingLexicon& lex,
                  const SimilarityConfig& cfg) {
  return synonym_match(a, b, lex, cfg) || phrase_cosine(a, b, lex) >= cfg.tau;
}

bool relation_approx_equal(const Phrase& r1, const Phrase& r2,
                           const EmbeddingLexicon& lex, const SimilarityConfig& cfg) {
  return approx_equal(r1, r2, lex, cfg);
}

Phrase caption_phrase(const Triplet& t) {
  std::vector<Word> words;
  for (const Phrase* p : {&t.subject, &t.relation, &t.object})
    words.insert(words.end(), p->tokens.begin(), p->tokens.end());
  return Phrase::from_words(std::move(words), t.subject.tokens.size() +
                                                  t.relation.head_index());
}

bool triplet_approx_equal(const Triplet& ti, const Triplet& tj,
                          const EmbeddingLexicon& lex, const SimilarityConfig& cfg) {
  const Eigen::VectorXd anchor = phrase_embedding(caption_phrase(ti), lex);
  if (anchor.dot(phrase_embedding(caption_phrase(tj), lex)) < cfg.tau) return false;
  const Triplet standardized{ti.subject, tj.relation, ti.object};
  return anchor.dot(phrase_embedding(caption_phrase(standardized), lex)) >= cfg.tau;
}

ThresholdSweepResult sweep_threshold(const std::vector<LabeledPair>& pairs,
                                     const EmbeddingLexicon& lex, double lo,
                                     double hi, double step) {
  if (!(lo < hi) || !(step > 0.0))
    throw Error(ErrorCode::InvalidInput, "sweep needs lo < hi and step > 0");
  std::size_t positives = 0;
  for (const auto& p : pairs) positives += p.label ? 1 : 0;
  if (positives == 0 || positives == pairs.size())
    throw Error(ErrorCode::DegenerateLabels,
                "sweep needs at least one positive and one negative label");

  std::vector<double> cosines;
  cosines.reserve(pairs.size());
  for (const auto& p : pairs) cosines.push_back(phrase_cosine(p.a, p.b, lex));

  // Grid points are snapped to 1e-9 so lo + k*step lands on the decimal value.
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  ThresholdSweepResult result;
  result.best_f1 = -1.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double tau = std::round((lo + static_cast<double>(k) * step) * 1e9) / 1e9;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const bool predicted = cosines[i] >= tau;
      if (predicted && pairs[i].label) ++tp;
      if (predicted && !pairs[i].label) ++fp;
      if (!predicted && pairs[i].label) ++fn;
    }
    const double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
    const double recall = double(tp) / double(tp + fn);
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / double(2 * tp + fp + fn);
    result.curve.push_back({tau, precision, recall, f1});
    if (f1 > result.best_f1) {
      result.best_f1 = f1;
      result.best_tau = tau;
    }
  }
  return result;
}

}  // namespace drive
