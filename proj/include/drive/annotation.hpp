#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "drive/triplet.hpp"

namespace drive {

// What the simplification/classification service returns for one caption.
struct Annotation {
  Triplet triplet;
  VerbState state = VerbState::Dynamic;

  bool operator==(const Annotation&) const = default;
};

// Request body {"caption": ...} for the annotation service.
std::string annotation_request_body(std::string_view caption);
// Response {"triplet": {"s","r","o"}, "state": "stative"|"dynamic"}.
// Throws MalformedResponse.
Annotation parse_annotation_response(std::string_view body);
std::string annotation_response_body(const Annotation& a);

class AnnotationClient {
 public:
  virtual ~AnnotationClient() = default;
  // Throws on any failure; the Annotator maps failures to
  // AnnotationUnavailable unless the payload was unparsable.
  virtual Annotation request(std::string_view caption) = 0;
};

// Offline stand-in for the LLM simplifier and verb-state classifier.
//
// Simplification is rule based: the first non-auxiliary token found in the verb table is
// the main verb, auxiliaries directly before it and prepositions directly
// after it join the relation, the subject is the nearest content word before
// the relation, and the object is the last word of the chunk that follows it
// (up to the next preposition). The state comes from a per-caption override
// if one exists, otherwise from the verb table.
class StubAnnotationClient : public AnnotationClient {
 public:
  StubAnnotationClient() = default;

  // Fixture layout:
  //   {"verbs": {"rides": "dynamic", ...},
  //    "captions": {"the clocktower holds lights":
  //                   {"s": "clocktower", "r": "holds", "o": "lights",
  //                    "state": "stative"}}}
  // Caption entries may omit s/r/o to override only the state.
  static StubAnnotationClient from_json_text(std::string_view text);
  static StubAnnotationClient load(const std::filesystem::path& path);

  void set_verb_state(std::string verb, VerbState state);
  void set_caption_override(std::string caption, std::optional<Triplet> triplet,
                            std::optional<VerbState> state);

  Annotation request(std::string_view caption) override;

 private:
  struct Override {
    std::optional<Triplet> triplet;
    std::optional<VerbState> state;
  };
  std::map<std::string, VerbState, std::less<>> verbs_;
  std::map<std::string, Override, std::less<>> overrides_;
};

class HttpAnnotationClient : public AnnotationClient {
 public:
  // base_url like "http://127.0.0.1:8080"; requests go to base_url + path.
  HttpAnnotationClient(std::string base_url, int timeout_ms,
                       std::string path = "/annotate");

  Annotation request(std::string_view caption) override;

 private:
  std::string base_url_;
  int timeout_ms_;
  std::string path_;
};

struct AnnotationResult {
  TaggedCaption tagged;
  VerbState state = VerbState::Dynamic;

  bool operator==(const AnnotationResult&) const = default;
};

// Caching front end over a client. Safe for concurrent callers: the first
// completed answer for a caption wins and every later call returns it.
// With a cache path, entries are loaded at construction and new ones are
// appended as JSONL ({"key","caption","s","r","o","state"}).
class Annotator {
 public:
  explicit Annotator(AnnotationClient& client,
                     std::filesystem::path cache_path = {});

  AnnotationResult annotate(std::string_view raw_caption);

  std::size_t cache_size() const;
  static std::string cache_key(std::string_view raw_caption);

 private:
  AnnotationResult to_result(const std::string& key,
                             const std::string& caption,
                             const Annotation& a) const;

  AnnotationClient& client_;
  std::filesystem::path cache_path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, Annotation> cache_;
};

}  // namespace drive
