#include "drive/triplet.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

#include "drive/error.hpp"

namespace drive {

namespace {

constexpr std::array<std::string_view, 15> kAuxiliaries = {
    "is", "are", "was", "were", "be", "been", "being", "am",
    "has", "have", "had", "do", "does", "did", "'s"};

constexpr std::array<std::string_view, 36> kPrepositions = {
    "in",     "on",     "at",      "through", "over",    "under",
    "near",   "with",   "into",    "onto",    "across",  "toward",
    "towards", "behind", "beside", "above",   "below",   "along",
    "around", "from",   "to",      "of",      "by",      "up",
    "down",   "off",    "out",     "inside",  "outside", "next",
    "against", "between", "beneath", "beyond", "past",   "upon"};

bool is_subject_dep(std::string_view dep) {
  return dep == "nsubj" || dep == "nsubjpass" || dep == "nsubj:pass";
}

// Dependents that extend the relation span.
bool is_span_dep(std::string_view dep) {
  return dep == "aux" || dep == "auxpass" || dep == "aux:pass" ||
         dep == "prt" || dep == "compound:prt" || dep == "prep";
}

bool is_direct_object_dep(std::string_view dep) {
  return dep == "dobj" || dep == "obj";
}

Word lower_word(const TaggedToken& t) {
  return {normalize_text(t.surface),
          normalize_text(t.lemma.empty() ? t.surface : t.lemma)};
}

}  // namespace

bool is_auxiliary(std::string_view word) {
  return std::find(kAuxiliaries.begin(), kAuxiliaries.end(), word) !=
         kAuxiliaries.end();
}

bool is_preposition(std::string_view word) {
  return std::find(kPrepositions.begin(), kPrepositions.end(), word) !=
         kPrepositions.end();
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Phrase Phrase::from_words(std::vector<Word> words, std::size_t head_index) {
  if (words.empty() || head_index >= words.size())
    throw Error(ErrorCode::InvalidInput, "phrase needs a head token");
  Phrase p;
  for (auto& w : words) {
    w.surface = normalize_text(w.surface);
    w.lemma = normalize_text(w.lemma.empty() ? w.surface : w.lemma);
    if (w.surface.empty() || w.surface.find(' ') != std::string::npos)
      throw Error(ErrorCode::InvalidInput, "phrase token must be one word");
    if (!p.text.empty()) p.text.push_back(' ');
    p.text += w.surface;
  }
  p.head = words[head_index].lemma;
  p.tokens = std::move(words);
  return p;
}

Phrase Phrase::from_text(std::string_view text, HeadRule rule) {
  std::vector<Word> words;
  for (auto& w : split_words(normalize_text(text))) words.push_back({w, w});
  if (words.empty())
    throw Error(ErrorCode::InvalidInput, "empty phrase");
  std::size_t head = words.size() - 1;
  if (rule == HeadRule::Verbal) {
    head = 0;
    // "is holding" heads on "holding", but the copula in "is in" is the verb.
    while (head + 1 < words.size() && is_auxiliary(words[head].surface) &&
           !is_preposition(words[head + 1].surface))
      ++head;
  }
  return from_words(std::move(words), head);
}

std::size_t Phrase::head_index() const {
  for (std::size_t i = tokens.size(); i-- > 0;)
    if (tokens[i].lemma == head) return i;
  return 0;
}

bool Phrase::valid() const {
  if (text.empty() || tokens.empty()) return false;
  if (text.front() == ' ' || text.back() == ' ') return false;
  std::string joined;
  bool head_found = false;
  for (const auto& w : tokens) {
    if (!joined.empty()) joined.push_back(' ');
    joined += w.surface;
    head_found = head_found || w.lemma == head;
  }
  return head_found && joined == text;
}

Triplet Triplet::from_text(std::string_view s, std::string_view r,
                           std::string_view o) {
  return {Phrase::from_text(s, HeadRule::Nominal),
          Phrase::from_text(r, HeadRule::Verbal),
          Phrase::from_text(o, HeadRule::Nominal)};
}

bool Triplet::valid() const {
  return subject.valid() && relation.valid() && object.valid();
}

std::string_view to_string(VerbState state) {
  return state == VerbState::Stative ? "stative" : "dynamic";
}

VerbState parse_verb_state(std::string_view text) {
  const std::string t = normalize_text(text);
  if (t == "stative") return VerbState::Stative;
  if (t == "dynamic") return VerbState::Dynamic;
  throw Error(ErrorCode::InvalidInput, "unknown verb state '" + t + "'");
}

void TaggedCaption::validate() const {
  if (tokens.empty())
    throw Error(ErrorCode::InvalidInput, "tagged caption '" + id + "' is empty");
  std::size_t roots = 0;
  for (const auto& t : tokens) {
    if (t.head >= tokens.size())
      throw Error(ErrorCode::InvalidInput,
                  "tagged caption '" + id + "' has out-of-range head index");
    if (t.dep == "ROOT") ++roots;
  }
  if (roots != 1)
    throw Error(ErrorCode::InvalidInput,
                "tagged caption '" + id + "' must have exactly one ROOT");
}

bool admit_sample(std::int64_t rel_count, std::int64_t obj_count) {
  return rel_count > 0 && rel_count < 3 && obj_count > 0 && obj_count <= 3;
}

Triplet extract_triplet(const TaggedCaption& tc) {
  tc.validate();
  const auto& toks = tc.tokens;
  std::size_t root = 0;
  while (toks[root].dep != "ROOT") ++root;
  if (toks[root].pos != "VERB" && toks[root].pos != "AUX")
    throw Error(ErrorCode::NoRelation,
                "caption '" + tc.id + "' has no verbal root");

  // Closure of span dependents under the root, then the contiguous run that
  // contains the root.
  std::vector<bool> in_span(toks.size(), false);
  in_span[root] = true;
  for (bool grew = true; grew;) {
    grew = false;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (!in_span[i] && i != toks[i].head && in_span[toks[i].head] &&
          is_span_dep(toks[i].dep)) {
        in_span[i] = grew = true;
      }
    }
  }
  std::size_t lo = root, hi = root;
  while (lo > 0 && in_span[lo - 1]) --lo;
  while (hi + 1 < toks.size() && in_span[hi + 1]) ++hi;
  auto in_relation = [&](std::size_t i) { return i >= lo && i <= hi; };

  std::optional<std::size_t> subject;
  std::optional<std::size_t> direct_object;
  std::optional<std::size_t> prep_object;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (in_relation(i)) continue;
    const auto& t = toks[i];
    if (!subject && is_subject_dep(t.dep) && t.head == root) subject = i;
    if (!direct_object && is_direct_object_dep(t.dep) && in_relation(t.head))
      direct_object = i;
    if (!prep_object && t.dep == "pobj" && in_relation(t.head) &&
        t.head != root)
      prep_object = i;
  }
  if (!subject)
    throw Error(ErrorCode::NoSubject, "caption '" + tc.id + "' has no subject");
  const auto object = direct_object ? direct_object : prep_object;
  if (!object)
    throw Error(ErrorCode::NoObject, "caption '" + tc.id + "' has no object");

  std::vector<Word> relation_words;
  for (std::size_t i = lo; i <= hi; ++i) relation_words.push_back(lower_word(toks[i]));
  return {Phrase::from_words({lower_word(toks[*subject])}, 0),
          Phrase::from_words(std::move(relation_words), root - lo),
          Phrase::from_words({lower_word(toks[*object])}, 0)};
}

std::string render_caption(const Triplet& t) {
  return t.subject.text + " " + t.relation.text + " " + t.object.text;
}

TaggedCaption tag_triplet(const Triplet& t, std::string id, std::string raw) {
  TaggedCaption tc;
  tc.id = std::move(id);
  tc.raw = raw.empty() ? render_caption(t) : std::move(raw);

  const std::size_t n_s = t.subject.tokens.size();
  const std::size_t n_r = t.relation.tokens.size();
  const std::size_t subject_head = t.subject.head_index();
  const std::size_t verb = n_s + t.relation.head_index();
  const std::size_t relation_end = n_s + n_r;  // one past
  const std::size_t object_head = relation_end + t.object.head_index();
  const bool prepositional = verb + 1 < relation_end;

  auto push = [&](const Word& w, std::string pos, std::size_t head,
                  std::string dep) {
    tc.tokens.push_back({w.surface, w.lemma, std::move(pos), head, std::move(dep)});
  };
  for (std::size_t i = 0; i < n_s; ++i) {
    if (i == subject_head)
      push(t.subject.tokens[i], "NOUN", verb, "nsubj");
    else
      push(t.subject.tokens[i], "NOUN", subject_head, "compound");
  }
  for (std::size_t i = n_s; i < relation_end; ++i) {
    const Word& w = t.relation.tokens[i - n_s];
    if (i < verb)
      push(w, "AUX", verb, "aux");
    else if (i == verb)
      push(w, "VERB", verb, "ROOT");
    else if (i + 1 == relation_end)
      push(w, "ADP", verb, "prep");
    else
      push(w, "ADP", verb, "prt");
  }
  const std::size_t object_parent = prepositional ? relation_end - 1 : verb;
  for (std::size_t i = relation_end; i < relation_end + t.object.tokens.size(); ++i) {
    const Word& w = t.object.tokens[i - relation_end];
    if (i == object_head)
      push(w, "NOUN", object_parent, prepositional ? "pobj" : "dobj");
    else
      push(w, "NOUN", object_head, "compound");
  }
  return tc;
}

}  // namespace drive
