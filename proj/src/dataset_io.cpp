#include "drive/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "drive/error.hpp"

namespace drive {

using nlohmann::json;

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

void check_header(std::istream& in, std::string_view schema, std::size_t& line_no) {
  std::string line;
  if (!std::getline(in, line)) parse_error(1, "missing schema header");
  line_no = 1;
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    parse_error(1, e.what());
  }
  if (!h.is_object() || h.value("schema", "") != schema)
    parse_error(1, "expected schema '" + std::string(schema) + "'");
  const int version = h.value("version", -1);
  if (version != kDatasetSchemaVersion)
    throw Error(ErrorCode::SchemaVersionMismatch,
                std::string(schema) + " version " + std::to_string(version) +
                    ", expected " + std::to_string(kDatasetSchemaVersion));
}

template <typename F>
void for_each_record(std::istream& in, std::size_t line_no, F&& f) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      parse_error(line_no, e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ParseError) throw;
      parse_error(line_no, e.what());
    }
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& dataset) {
  out << json{{"schema", "drive.dataset"}, {"version", kDatasetSchemaVersion}}.dump() << '\n';
  for (const auto& s : dataset) {
    json j{{"id", s.id},
           {"raw", s.raw_caption},
           {"s", s.triplet.subject.text},
           {"r", s.triplet.relation.text},
           {"o", s.triplet.object.text},
           {"state", std::string(to_string(s.state))},
           {"img", s.image_features},
           {"scene_rel", s.scene_relation_count},
           {"obj_count", s.object_count}};
    if (!s.plausibly_asymmetric) j["plausible"] = false;
    out << j.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::size_t line_no = 0;
  check_header(in, "drive.dataset", line_no);
  Dataset out;
  for_each_record(in, line_no, [&](const json& j) {
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.raw_caption = j.at("raw").get<std::string>();
    s.triplet = Triplet::from_text(j.at("s").get<std::string>(), j.at("r").get<std::string>(),
                                   j.at("o").get<std::string>());
    s.state = parse_verb_state(j.at("state").get<std::string>());
    s.image_features = j.at("img").get<std::vector<double>>();
    s.scene_relation_count = j.at("scene_rel").get<std::int64_t>();
    s.object_count = j.at("obj_count").get<std::int64_t>();
    s.plausibly_asymmetric = j.value("plausible", true);
    out.push_back(std::move(s));
  });
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream ss;
  write_dataset(ss, dataset);
  write_file(path, ss.str());
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_dataset(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_hnmap(std::ostream& out, const HNMap& map) {
  out << json{{"schema", "drive.hnmap"}, {"version", kDatasetSchemaVersion}}.dump() << '\n';
  for (const auto& e : map.entries)
    out << json{{"anchor", e.anchor}, {"hn", e.negatives}}.dump() << '\n';
}

HNMap read_hnmap(std::istream& in) {
  std::size_t line_no = 0;
  check_header(in, "drive.hnmap", line_no);
  HNMap map;
  for_each_record(in, line_no, [&](const json& j) {
    map.entries.push_back(
        {j.at("anchor").get<std::string>(), j.at("hn").get<std::vector<std::string>>()});
  });
  return map;
}

void write_hnmap(const std::filesystem::path& path, const HNMap& map) {
  std::ostringstream ss;
  write_hnmap(ss, map);
  write_file(path, ss.str());
}

HNMap read_hnmap(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_hnmap(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<TaggedCaption> read_tagged_captions(std::istream& in) {
  std::vector<TaggedCaption> out;
  for_each_record(in, 0, [&](const json& j) {
    TaggedCaption tc;
    tc.id = j.at("id").get<std::string>();
    tc.raw = j.value("raw", "");
    for (const json& t : j.at("tokens")) {
      tc.tokens.push_back({t.at("surface").get<std::string>(),
                           t.value("lemma", t.at("surface").get<std::string>()),
                           t.at("pos").get<std::string>(), t.at("head").get<std::size_t>(),
                           t.at("dep").get<std::string>()});
    }
    tc.validate();
    out.push_back(std::move(tc));
  });
  return out;
}

void write_tagged_captions(std::ostream& out, const std::vector<TaggedCaption>& captions) {
  for (const auto& tc : captions) {
    json tokens = json::array();
    for (const auto& t : tc.tokens)
      tokens.push_back({{"surface", t.surface},
                        {"lemma", t.lemma},
                        {"pos", t.pos},
                        {"head", t.head},
                        {"dep", t.dep}});
    out << json{{"id", tc.id}, {"raw", tc.raw}, {"tokens", tokens}}.dump() << '\n';
  }
}

std::string slurp(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace drive
