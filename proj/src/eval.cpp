#include "drive/eval.hpp"

#include <cmath>
#include <fmt/format.h>
#include <json.hpp>

#include "drive/error.hpp"

namespace drive {

namespace {

std::string fixed6(double v) {
  std::string s = fmt::format("{:.6f}", v);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::TextToImage ? "text_to_image" : "image_to_text";
}

RecallCounts recall_counts(const Embeddings& e, const HNIndex& negatives, Direction d,
                           const std::vector<std::size_t>* anchors) {
  if (e.texts.rows() != e.images.rows() ||
      static_cast<std::size_t>(e.texts.rows()) != negatives.size())
    throw Error(ErrorCode::DimensionMismatch, "embeddings and hard-negative index disagree");
  // Query from one modality, candidates drawn from the other.
  const Matrix& query = d == Direction::TextToImage ? e.texts : e.images;
  const Matrix& cand = d == Direction::TextToImage ? e.images : e.texts;
  RecallCounts c;
  auto score = [&](std::size_t i) {
    if (negatives[i].empty()) {
      ++c.skipped_empty;
      return;
    }
    ++c.evaluated;
    const double own = query.row(i).dot(cand.row(i));
    for (std::size_t j : negatives[i])
      if (!(own > query.row(i).dot(cand.row(j)))) return;
    ++c.hits;
  };
  if (anchors) {
    for (std::size_t i : *anchors) score(i);
  } else {
    for (std::size_t i = 0; i < negatives.size(); ++i) score(i);
  }
  return c;
}

double recall_at_1(const Embeddings& e, const HNIndex& negatives, Direction d) {
  const RecallCounts c = recall_counts(e, negatives, d);
  if (c.evaluated == 0)
    throw Error(ErrorCode::NoEvaluableAnchors, "no anchor has a hard negative");
  return c.rate();
}

double recall_at_1(const EncoderParams& p, const Dataset& dataset, const HNIndex& negatives,
                   Direction d) {
  return recall_at_1(encode_dataset(p, dataset), negatives, d);
}

double delta_acc(double subset_acc, double reference_acc) { return subset_acc - reference_acc; }

SubsetSplit parse_subset_split(std::string_view text) {
  if (text == "none") return SubsetSplit::None;
  if (text == "state") return SubsetSplit::State;
  throw Error(ErrorCode::ValidationError, "subsets");
}

EvalReport evaluate(const Embeddings& e, const Dataset& dataset, const HNIndex& negatives,
                    SubsetSplit split, const std::string& reference) {
  if (dataset.size() != negatives.size())
    throw Error(ErrorCode::DimensionMismatch, "dataset and hard-negative index disagree");
  EvalReport r;
  const RecallCounts t2i = recall_counts(e, negatives, Direction::TextToImage);
  const RecallCounts i2t = recall_counts(e, negatives, Direction::ImageToText);
  if (t2i.evaluated == 0)
    throw Error(ErrorCode::NoEvaluableAnchors, "no anchor has a hard negative");
  r.r1_t2i = t2i.rate();
  r.r1_i2t = i2t.rate();
  r.n_anchors = dataset.size();
  r.skipped_empty = t2i.skipped_empty;
  if (split == SubsetSplit::None) return r;

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (!negatives[i].empty()) members[std::string(to_string(dataset[i].state))].push_back(i);
  for (const auto& [name, idx] : members) {
    const RecallCounts a = recall_counts(e, negatives, Direction::TextToImage, &idx);
    const RecallCounts b = recall_counts(e, negatives, Direction::ImageToText, &idx);
    r.per_subset[name] = {a.rate(), b.rate(), a.evaluated};
  }
  r.reference = reference;
  auto ref = r.per_subset.find(reference);
  if (ref == r.per_subset.end())
    throw Error(ErrorCode::InvalidInput, "reference subset '" + reference + "' has no anchors");
  for (const auto& [name, s] : r.per_subset)
    if (name != reference) r.delta_acc[name] = delta_acc(s.r1_t2i, ref->second.r1_t2i);
  return r;
}

EvalReport evaluate(const EncoderParams& p, const Dataset& dataset, const HNIndex& negatives,
                    SubsetSplit split, const std::string& reference) {
  return evaluate(encode_dataset(p, dataset), dataset, negatives, split, reference);
}

std::string emit_report(const EvalReport& r, std::string_view format) {
  if (format == "json") {
    // Keys in sorted order at every level.
    std::string out = "{";
    out += "\"delta_acc\":{";
    bool first = true;
    for (const auto& [k, v] : r.delta_acc) {
      out += (first ? "" : ",") + quoted(k) + ":" + fixed6(v);
      first = false;
    }
    out += "},\"n_anchors\":" + std::to_string(r.n_anchors);
    out += ",\"per_subset\":{";
    first = true;
    for (const auto& [k, s] : r.per_subset) {
      out += (first ? "" : ",") + quoted(k) + ":{\"n\":" + std::to_string(s.n) +
             ",\"r1_i2t\":" + fixed6(s.r1_i2t) + ",\"r1_t2i\":" + fixed6(s.r1_t2i) + "}";
      first = false;
    }
    out += "},\"r1_i2t\":" + fixed6(r.r1_i2t) + ",\"r1_t2i\":" + fixed6(r.r1_t2i);
    out += ",\"reference\":" + quoted(r.reference);
    out += ",\"skipped_empty\":" + std::to_string(r.skipped_empty) + "}\n";
    return out;
  }
  const std::size_t evaluated = r.n_anchors - r.skipped_empty;
  if (format == "csv") {
    std::string out = "subset,direction,r1,n\n";
    auto row = [&](const std::string& name, double t2i, double i2t, std::size_t n) {
      out += name + ",text_to_image," + fixed6(t2i) + "," + std::to_string(n) + "\n";
      out += name + ",image_to_text," + fixed6(i2t) + "," + std::to_string(n) + "\n";
    };
    row("all", r.r1_t2i, r.r1_i2t, evaluated);
    for (const auto& [k, s] : r.per_subset) row(k, s.r1_t2i, s.r1_i2t, s.n);
    return out;
  }
  if (format == "plot-data") {
    // x = subset index (0 is all), y = R@1.
    std::string out;
    for (Direction d : {Direction::TextToImage, Direction::ImageToText}) {
      out += "# ";
      out += to_string(d);
      out += "\n# x subset r1\n";
      const bool t2i = d == Direction::TextToImage;
      out += "0 all " + fixed6(t2i ? r.r1_t2i : r.r1_i2t) + "\n";
      int x = 1;
      for (const auto& [k, s] : r.per_subset)
        out += std::to_string(x++) + " " + k + " " + fixed6(t2i ? s.r1_t2i : s.r1_i2t) + "\n";
      out += "\n\n";
    }
    return out;
  }
  throw Error(ErrorCode::UnsupportedFormat, "unsupported report format '" + std::string(format) + "'");
}

EvalReport parse_report_json(std::string_view text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.r1_t2i = j.at("r1_t2i").get<double>();
    r.r1_i2t = j.at("r1_i2t").get<double>();
    r.n_anchors = j.at("n_anchors").get<std::size_t>();
    r.skipped_empty = j.at("skipped_empty").get<std::size_t>();
    r.reference = j.at("reference").get<std::string>();
    for (const auto& [k, v] : j.at("per_subset").items())
      r.per_subset[k] = {v.at("r1_t2i").get<double>(), v.at("r1_i2t").get<double>(),
                         v.at("n").get<std::size_t>()};
    for (const auto& [k, v] : j.at("delta_acc").items()) r.delta_acc[k] = v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
  return r;
}

}  // namespace drive
