#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "drive/miner.hpp"
#include "drive/triplet.hpp"

namespace drive {

// Dataset and hard-negative files are JSONL with a schema header on the first
// line: {"schema":"drive.dataset","version":1} followed by one record per line
//   {"id","raw","s","r","o","state","img":[...],"scene_rel","obj_count"}
// ("plausible": false is written only for samples excluded from CROCO-D).
// Hard-negative records are {"anchor": id, "hn": [ids]}.
inline constexpr int kDatasetSchemaVersion = 1;

void write_dataset(std::ostream& out, const Dataset& dataset);
// Throws ParseError (with line number) or SchemaVersionMismatch.
Dataset read_dataset(std::istream& in);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

void write_hnmap(std::ostream& out, const HNMap& map);
HNMap read_hnmap(std::istream& in);
void write_hnmap(const std::filesystem::path& path, const HNMap& map);
HNMap read_hnmap(const std::filesystem::path& path);

// {"id","raw","tokens":[{"surface","lemma","pos","head","dep"}]} per line, no
// header.
std::vector<TaggedCaption> read_tagged_captions(std::istream& in);
void write_tagged_captions(std::ostream& out, const std::vector<TaggedCaption>& captions);

std::string slurp(const std::filesystem::path& path);
// Writes via a temporary file in the same directory, then renames.
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace drive
