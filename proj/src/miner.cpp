#include "drive/miner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "drive/error.hpp"

namespace drive {

namespace {

std::string phrase_key(const Phrase& p) {
  std::string key = p.text;
  key += '\x1f';
  key += p.head;
  for (const auto& w : p.tokens) {
    key += '\x1f';
    key += w.lemma;
  }
  return key;
}

[[noreturn]] void rethrow_for_pair(const Error& e, const Sample& a, const Sample& b) {
  throw Error(e.code(), "pair (" + a.id + ", " + b.id + "): " + e.what());
}

// Distinct phrases with their embeddings computed once. Comparisons reproduce
// approx_equal exactly: same synonym rule, same vectors, same dot product.
class PhraseTable {
 public:
  PhraseTable(const EmbeddingLexicon& lex, const SimilarityConfig& cfg)
      : lex_(lex), cfg_(cfg) {}

  std::size_t intern(const Phrase& p) {
    auto [it, inserted] = ids_.emplace(phrase_key(p), phrases_.size());
    if (inserted) {
      phrases_.push_back(&p);
      try {
        embeddings_.emplace_back(phrase_embedding(p, lex_));
        errors_.emplace_back();
      } catch (const Error& e) {
        embeddings_.emplace_back();
        errors_.emplace_back(e);
      }
    }
    return it->second;
  }

  bool approx(std::size_t a, std::size_t b) const {
    if (a == b) return true;
    if (synonym_match(*phrases_[a], *phrases_[b], lex_, cfg_)) return true;
    if (errors_[a]) throw *errors_[a];
    if (errors_[b]) throw *errors_[b];
    return embeddings_[a]->dot(*embeddings_[b]) >= cfg_.tau;
  }

 private:
  const EmbeddingLexicon& lex_;
  const SimilarityConfig& cfg_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<const Phrase*> phrases_;
  std::vector<std::optional<Eigen::VectorXd>> embeddings_;
  std::vector<std::optional<Error>> errors_;
};

struct SampleIds {
  std::size_t subject;
  std::size_t relation;
  std::size_t object;
};

class IndexedMiner {
 public:
  IndexedMiner(const Dataset& dataset, DatasetMode mode, const EmbeddingLexicon& lex,
               const SimilarityConfig& cfg)
      : dataset_(dataset), mode_(mode), lex_(lex), cfg_(cfg), table_(lex, cfg) {
    ids_.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const Triplet& t = dataset[i].triplet;
      SampleIds s{table_.intern(t.subject), table_.intern(t.relation),
                  table_.intern(t.object)};
      ids_.push_back(s);
      // CROCO buckets candidates by subject, CROCO-D by object: the first
      // clause of each predicate compares against that slot.
      const std::size_t bucket_key = mode == DatasetMode::Croco ? s.subject : s.object;
      auto [it, inserted] = bucket_of_.emplace(bucket_key, buckets_.size());
      if (inserted) buckets_.push_back({bucket_key, {}});
      buckets_[it->second].members.push_back(i);
    }
  }

  std::vector<std::size_t> negatives_of(std::size_t i) const {
    std::vector<std::size_t> out;
    const Sample& anchor = dataset_[i];
    if (mode_ == DatasetMode::CrocoD && !anchor.plausibly_asymmetric) return out;
    const SampleIds& a = ids_[i];
    for (const Bucket& bucket : buckets_) {
      bool match = false;
      try {
        match = table_.approx(a.subject, bucket.phrase);
      } catch (const Error& e) {
        if (auto j = first_eligible(bucket, i)) rethrow_for_pair(e, anchor, dataset_[*j]);
        continue;
      }
      if (!match) continue;
      for (std::size_t j : bucket.members) {
        if (j == i || !eligible(j)) continue;
        try {
          if (accept(i, j)) out.push_back(j);
        } catch (const Error& e) {
          rethrow_for_pair(e, anchor, dataset_[j]);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Bucket {
    std::size_t phrase;
    std::vector<std::size_t> members;
  };

  bool eligible(std::size_t j) const {
    return mode_ != DatasetMode::CrocoD || dataset_[j].plausibly_asymmetric;
  }

  std::optional<std::size_t> first_eligible(const Bucket& b, std::size_t i) const {
    for (std::size_t j : b.members)
      if (j != i && eligible(j)) return j;
    return std::nullopt;
  }

  // Remaining clauses, evaluated in the same order as the predicates.
  bool accept(std::size_t i, std::size_t j) const {
    const SampleIds& a = ids_[i];
    const SampleIds& b = ids_[j];
    if (mode_ == DatasetMode::Croco) {
      if (table_.approx(a.relation, b.relation)) return false;
      if (!table_.approx(a.object, b.object)) return false;
      const Triplet& ti = dataset_[i].triplet;
      const Triplet& tj = dataset_[j].triplet;
      return !(triplet_approx_equal(ti, tj, lex_, cfg_) ||
               triplet_approx_equal(tj, ti, lex_, cfg_));
    }
    return table_.approx(a.object, b.subject) && table_.approx(a.relation, b.relation) &&
           !table_.approx(a.subject, a.object);
  }

  const Dataset& dataset_;
  DatasetMode mode_;
  const EmbeddingLexicon& lex_;
  const SimilarityConfig& cfg_;
  PhraseTable table_;
  std::vector<SampleIds> ids_;
  std::unordered_map<std::size_t, std::size_t> bucket_of_;
  std::vector<Bucket> buckets_;
};

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_std(const std::vector<double>& xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace

std::string_view to_string(DatasetMode mode) {
  return mode == DatasetMode::Croco ? "croco" : "croco-d";
}

DatasetMode parse_dataset_mode(std::string_view text) {
  const std::string t = normalize_text(text);
  if (t == "croco") return DatasetMode::Croco;
  if (t == "croco-d" || t == "croco_d" || t == "crocod") return DatasetMode::CrocoD;
  throw Error(ErrorCode::InvalidInput, "unknown dataset mode '" + t + "'");
}

const std::vector<std::string>* HNMap::find(std::string_view anchor) const {
  for (const auto& e : entries)
    if (e.anchor == anchor) return &e.negatives;
  return nullptr;
}

std::size_t HNMap::total_negatives() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.negatives.size();
  return n;
}

HNMap to_hnmap(const Dataset& dataset, const HNIndex& index) {
  HNMap map;
  map.entries.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    HNMap::Entry e{dataset[i].id, {}};
    if (i < index.size())
      for (std::size_t j : index[i]) e.negatives.push_back(dataset[j].id);
    map.entries.push_back(std::move(e));
  }
  return map;
}

HNIndex to_hnindex(const Dataset& dataset, const HNMap& map) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < dataset.size(); ++i) pos.emplace(dataset[i].id, i);
  HNIndex index(dataset.size());
  for (const auto& e : map.entries) {
    auto a = pos.find(e.anchor);
    if (a == pos.end())
      throw Error(ErrorCode::InvalidInput, "hnmap anchor '" + e.anchor + "' not in dataset");
    auto& list = index[a->second];
    for (const auto& id : e.negatives) {
      auto j = pos.find(id);
      if (j == pos.end())
        throw Error(ErrorCode::InvalidInput, "hnmap negative '" + id + "' not in dataset");
      list.push_back(j->second);
    }
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return index;
}

bool is_croco_hn(const Triplet& ti, const Triplet& tj, const EmbeddingLexicon& lex,
                 const SimilarityConfig& cfg) {
  return approx_equal(ti.subject, tj.subject, lex, cfg) &&
         !relation_approx_equal(ti.relation, tj.relation, lex, cfg) &&
         approx_equal(ti.object, tj.object, lex, cfg) &&
         !(triplet_approx_equal(ti, tj, lex, cfg) || triplet_approx_equal(tj, ti, lex, cfg));
}

bool is_crocod_hn(const Triplet& ti, const Triplet& tj, const EmbeddingLexicon& lex,
                  const SimilarityConfig& cfg) {
  return approx_equal(ti.subject, tj.object, lex, cfg) &&
         approx_equal(ti.object, tj.subject, lex, cfg) &&
         relation_approx_equal(ti.relation, tj.relation, lex, cfg) &&
         !approx_equal(ti.subject, ti.object, lex, cfg);
}

bool is_hard_negative(const Sample& anchor, const Sample& candidate, DatasetMode mode,
                      const EmbeddingLexicon& lex, const SimilarityConfig& cfg) {
  if (mode == DatasetMode::Croco) return is_croco_hn(anchor.triplet, candidate.triplet, lex, cfg);
  if (!anchor.plausibly_asymmetric || !candidate.plausibly_asymmetric) return false;
  return is_crocod_hn(anchor.triplet, candidate.triplet, lex, cfg);
}

void validate_for_mining(const Dataset& dataset) {
  std::unordered_set<std::string> seen;
  for (const auto& s : dataset) {
    if (!seen.insert(s.id).second)
      throw Error(ErrorCode::DuplicateId, "duplicate sample id '" + s.id + "'");
    if (!admit_sample(s.scene_relation_count, s.object_count))
      throw Error(ErrorCode::InvalidInput, "sample '" + s.id + "' fails the admission filter");
  }
}

HNIndex mine_index(const Dataset& dataset, DatasetMode mode, const EmbeddingLexicon& lex,
                   const SimilarityConfig& cfg, unsigned workers) {
  validate_for_mining(dataset);
  const IndexedMiner miner(dataset, mode, lex, cfg);
  const std::size_t n = dataset.size();
  HNIndex result(n);
  std::vector<std::exception_ptr> failures(n);

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  auto run = [&](unsigned w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        result[i] = miner.negatives_of(i);
      } catch (...) {
        failures[i] = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return result;
}

HNMap mine(const Dataset& dataset, DatasetMode mode, const EmbeddingLexicon& lex,
           const SimilarityConfig& cfg, unsigned workers) {
  return to_hnmap(dataset, mine_index(dataset, mode, lex, cfg, workers));
}

std::pair<Dataset, Dataset> split_by_state(const Dataset& dataset) {
  std::pair<Dataset, Dataset> out;
  for (const auto& s : dataset)
    (s.state == VerbState::Stative ? out.first : out.second).push_back(s);
  return out;
}

DatasetStats dataset_stats(const Dataset& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "dataset is empty");
  std::map<std::string, std::size_t> relation_freq;
  std::map<std::string, std::set<std::string>> entity_relations;
  for (const auto& s : dataset) {
    const auto& t = s.triplet;
    ++relation_freq[t.relation.text];
    entity_relations[t.subject.text].insert(t.relation.text);
    entity_relations[t.object.text].insert(t.relation.text);
  }
  std::vector<double> freq;
  for (const auto& [_, n] : relation_freq) freq.push_back(static_cast<double>(n));
  std::vector<double> per_entity;
  for (const auto& [_, rels] : entity_relations)
    per_entity.push_back(static_cast<double>(rels.size()));

  DatasetStats st;
  st.caption_count = dataset.size();
  st.distinct_relations = relation_freq.size();
  st.mean_relation_frequency = mean_of(freq);
  st.std_relation_frequency = population_std(freq, st.mean_relation_frequency);
  st.distinct_entities = entity_relations.size();
  st.mean_relations_per_entity = mean_of(per_entity);
  st.std_relations_per_entity = population_std(per_entity, st.mean_relations_per_entity);
  return st;
}

}  // namespace drive
