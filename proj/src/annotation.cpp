#include "drive/annotation.hpp"

#include <httplib.h>

#include <array>
#include <cctype>
#include <json.hpp>
#include <sstream>

#include "drive/error.hpp"
#include "drive/hash.hpp"

namespace drive {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 20> kDeterminers = {
    "a",    "an",    "the",   "some",  "two",   "three", "four",
    "his",  "her",   "their", "its",   "this",  "that",  "these",
    "those", "my",   "our",   "your",  "several", "many"};

bool is_determiner(std::string_view w) {
  for (auto d : kDeterminers)
    if (d == w) return true;
  return false;
}

std::string strip_punctuation(std::string_view text) {
  std::string out;
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || std::isspace(u) || c == '\'' || c == '-')
      out.push_back(c);
    else
      out.push_back(' ');
  }
  return normalize_text(out);
}

[[noreturn]] void unavailable(std::string_view caption, std::string_view why) {
  throw Error(ErrorCode::AnnotationUnavailable,
              "cannot annotate '" + std::string(caption) + "': " +
                  std::string(why));
}

}  // namespace

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[i] = kDigits[value & 0xF];
  return out;
}

std::string annotation_request_body(std::string_view caption) {
  return json{{"caption", std::string(caption)}}.dump();
}

Annotation parse_annotation_response(std::string_view body) {
  try {
    const json j = json::parse(body);
    const json& t = j.at("triplet");
    return {Triplet::from_text(t.at("s").get<std::string>(),
                               t.at("r").get<std::string>(),
                               t.at("o").get<std::string>()),
            parse_verb_state(j.at("state").get<std::string>())};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse,
                std::string("annotation response: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedResponse,
                std::string("annotation response: ") + e.what());
  }
}

std::string annotation_response_body(const Annotation& a) {
  return json{{"triplet",
               {{"s", a.triplet.subject.text},
                {"r", a.triplet.relation.text},
                {"o", a.triplet.object.text}}},
              {"state", std::string(to_string(a.state))}}
      .dump();
}

StubAnnotationClient StubAnnotationClient::from_json_text(std::string_view text) {
  StubAnnotationClient stub;
  try {
    const json j = json::parse(text);
    if (j.contains("verbs"))
      for (const auto& [verb, state] : j.at("verbs").items())
        stub.set_verb_state(verb, parse_verb_state(state.get<std::string>()));
    if (j.contains("captions")) {
      for (const auto& [caption, entry] : j.at("captions").items()) {
        std::optional<Triplet> triplet;
        std::optional<VerbState> state;
        if (entry.contains("s"))
          triplet = Triplet::from_text(entry.at("s").get<std::string>(),
                                       entry.at("r").get<std::string>(),
                                       entry.at("o").get<std::string>());
        if (entry.contains("state"))
          state = parse_verb_state(entry.at("state").get<std::string>());
        stub.set_caption_override(caption, std::move(triplet), state);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("stub fixture: ") + e.what());
  }
  return stub;
}

StubAnnotationClient StubAnnotationClient::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void StubAnnotationClient::set_verb_state(std::string verb, VerbState state) {
  verbs_[normalize_text(verb)] = state;
}

void StubAnnotationClient::set_caption_override(std::string caption,
                                                std::optional<Triplet> triplet,
                                                std::optional<VerbState> state) {
  overrides_[strip_punctuation(caption)] = {std::move(triplet), state};
}

Annotation StubAnnotationClient::request(std::string_view caption) {
  const std::string text = strip_punctuation(caption);
  const Override* ov = nullptr;
  if (auto it = overrides_.find(text); it != overrides_.end()) ov = &it->second;

  auto verb_state = [&](std::string_view verb) -> VerbState {
    if (ov && ov->state) return *ov->state;
    auto it = verbs_.find(verb);
    if (it == verbs_.end()) unavailable(caption, "no verb-state entry");
    return it->second;
  };

  if (ov && ov->triplet)
    return {*ov->triplet, verb_state(ov->triplet->relation.head)};

  const auto words = split_words(text);
  // An auxiliary is the main verb only when no other known verb follows it
  // ("plane is in sky" but "man is holding racquet").
  std::size_t verb = words.size();
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!verbs_.count(words[i])) continue;
    if (verb == words.size()) verb = i;
    if (!is_auxiliary(words[i])) {
      verb = i;
      break;
    }
  }
  if (verb == words.size()) unavailable(caption, "no known verb");

  std::size_t rel_begin = verb;
  while (rel_begin > 0 && is_auxiliary(words[rel_begin - 1])) --rel_begin;
  std::size_t rel_end = verb + 1;
  while (rel_end < words.size() && is_preposition(words[rel_end])) ++rel_end;

  std::optional<std::size_t> subject;
  for (std::size_t i = rel_begin; i-- > 0;) {
    if (!is_determiner(words[i]) && !is_preposition(words[i])) {
      subject = i;
      break;
    }
  }
  if (!subject) unavailable(caption, "no subject before the verb");

  std::optional<std::size_t> object;
  for (std::size_t i = rel_end; i < words.size() && !is_preposition(words[i]); ++i)
    if (!is_determiner(words[i])) object = i;
  if (!object) unavailable(caption, "no object after the verb");

  std::vector<Word> relation;
  for (std::size_t i = rel_begin; i < rel_end; ++i)
    relation.push_back({words[i], words[i]});
  Triplet t{Phrase::from_words({{words[*subject], words[*subject]}}, 0),
            Phrase::from_words(std::move(relation), verb - rel_begin),
            Phrase::from_words({{words[*object], words[*object]}}, 0)};
  const VerbState state = verb_state(words[verb]);
  return {std::move(t), state};
}

HttpAnnotationClient::HttpAnnotationClient(std::string base_url, int timeout_ms,
                                           std::string path)
    : base_url_(std::move(base_url)), timeout_ms_(timeout_ms), path_(std::move(path)) {}

Annotation HttpAnnotationClient::request(std::string_view caption) {
  httplib::Client cli(base_url_);
  const auto timeout = std::chrono::milliseconds(timeout_ms_);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  auto res = cli.Post(path_, annotation_request_body(caption), "application/json");
  if (!res)
    throw Error(ErrorCode::AnnotationUnavailable,
                "annotation service: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::AnnotationUnavailable,
                "annotation service returned HTTP " + std::to_string(res->status));
  return parse_annotation_response(res->body);
}

Annotator::Annotator(AnnotationClient& client, std::filesystem::path cache_path)
    : client_(client), cache_path_(std::move(cache_path)) {
  if (cache_path_.empty() || !std::filesystem::exists(cache_path_)) return;
  std::ifstream in(cache_path_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      cache_[j.at("key").get<std::string>()] = {
          Triplet::from_text(j.at("s").get<std::string>(), j.at("r").get<std::string>(),
                             j.at("o").get<std::string>()),
          parse_verb_state(j.at("state").get<std::string>())};
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, cache_path_.string() + ":" +
                                             std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string Annotator::cache_key(std::string_view raw_caption) {
  return hex64(fnv1a64(normalize_text(raw_caption)));
}

AnnotationResult Annotator::to_result(const std::string& key,
                                      const std::string& caption,
                                      const Annotation& a) const {
  return {tag_triplet(a.triplet, key, caption), a.state};
}

AnnotationResult Annotator::annotate(std::string_view raw_caption) {
  const std::string caption = normalize_text(raw_caption);
  const std::string key = cache_key(caption);
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end())
      return to_result(key, caption, it->second);
  }

  Annotation fresh;
  try {
    fresh = client_.request(caption);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedResponse ||
        e.code() == ErrorCode::AnnotationUnavailable)
      throw;
    throw Error(ErrorCode::AnnotationUnavailable, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::AnnotationUnavailable, e.what());
  }

  std::unique_lock lock(mutex_);
  auto [it, inserted] = cache_.emplace(key, std::move(fresh));
  if (inserted && !cache_path_.empty()) {
    std::ofstream out(cache_path_, std::ios::app);
    const Annotation& a = it->second;
    out << json{{"key", key},
                {"caption", caption},
                {"s", a.triplet.subject.text},
                {"r", a.triplet.relation.text},
                {"o", a.triplet.object.text},
                {"state", std::string(to_string(a.state))}}
               .dump()
        << '\n';
  }
  return to_result(key, caption, it->second);
}

std::size_t Annotator::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

}  // namespace drive
