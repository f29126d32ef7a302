#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace drive {

struct Word {
  std::string surface;
  std::string lemma;

  bool operator==(const Word&) const = default;
};

// Where the head of a phrase sits when it has to be inferred from plain text.
enum class HeadRule {
  Nominal,  // last token
  Verbal,   // first token that is not an auxiliary
};

// A normalized span of a caption: lowercase, single-space separated.
struct Phrase {
  std::string text;
  std::string head;
  std::vector<Word> tokens;

  // head_index selects the token whose lemma becomes the head.
  static Phrase from_words(std::vector<Word> words, std::size_t head_index);
  // Lemmas default to surface forms.
  static Phrase from_text(std::string_view text, HeadRule rule);

  std::size_t head_index() const;
  bool valid() const;
  bool operator==(const Phrase&) const = default;
};

struct Triplet {
  Phrase subject;
  Phrase relation;
  Phrase object;

  static Triplet from_text(std::string_view s, std::string_view r,
                           std::string_view o);
  bool valid() const;
  bool operator==(const Triplet&) const = default;
};

enum class VerbState { Stative, Dynamic };

std::string_view to_string(VerbState state);
VerbState parse_verb_state(std::string_view text);

struct TaggedToken {
  std::string surface;
  std::string lemma;
  std::string pos;       // coarse universal POS ("NOUN", "VERB", "ADP", ...)
  std::size_t head = 0;  // 0-based; ROOT points at itself
  std::string dep;

  bool operator==(const TaggedToken&) const = default;
};

struct TaggedCaption {
  std::string id;
  std::string raw;
  std::vector<TaggedToken> tokens;

  // Throws InvalidInput when an invariant is broken.
  void validate() const;
  bool operator==(const TaggedCaption&) const = default;
};

struct Sample {
  std::string id;
  std::string raw_caption;
  Triplet triplet;
  VerbState state = VerbState::Dynamic;
  std::int64_t scene_relation_count = 0;
  std::int64_t object_count = 0;
  std::vector<double> image_features;
  // Set by the annotation step for directional mining; a reversed caption is
  // only a CROCO-D negative if both sides are plausible.
  bool plausibly_asymmetric = true;

  bool operator==(const Sample&) const = default;
};

using Dataset = std::vector<Sample>;

// Lowercase, trim and collapse internal whitespace.
std::string normalize_text(std::string_view text);
std::vector<std::string> split_words(std::string_view text);
bool is_auxiliary(std::string_view word);
bool is_preposition(std::string_view word);

// Filter from caption simplification: 1-2 scene relations and 1-3 objects.
bool admit_sample(std::int64_t rel_count, std::int64_t obj_count);

// Throws NoSubject / NoRelation / NoObject when the dependency is absent.
Triplet extract_triplet(const TaggedCaption& tc);

std::string render_caption(const Triplet& t);

// Minimal dependency tagging of an already simplified triplet; extract_triplet
// recovers the same triplet from the result.
TaggedCaption tag_triplet(const Triplet& t, std::string id = {},
                          std::string raw = {});

}  // namespace drive
