#include "drive/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "drive/dataset_io.hpp"
#include "drive/error.hpp"

namespace drive {

namespace {

Vector normalized(const Vector& v, const char* what) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw Error(ErrorCode::NormalizationUndefined, std::string(what) + " embedding has zero norm");
  return v / n;
}

int index_of(const std::vector<std::string>& names, const std::string& name, const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    throw Error(ErrorCode::InvalidInput, std::string("unknown ") + what + " '" + name + "'");
  return static_cast<int>(it - names.begin());
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_f64(const std::string& in, std::size_t& pos) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b)
    bits |= std::uint64_t(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  pos += 8;
  return std::bit_cast<double>(bits);
}

void put_matrix(std::string& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

Matrix get_matrix(const std::string& in, std::size_t& pos, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get_f64(in, pos);
  return m;
}

}  // namespace

void EncoderParams::validate() const {
  const Eigen::Index L = entity_table.cols();
  if (L == 0 || relation_table.cols() != L || text_projection.rows() != 3 * L ||
      image_projection.cols() != text_projection.cols() || text_projection.cols() == 0 ||
      static_cast<std::size_t>(entity_table.rows()) != entity_names.size() ||
      static_cast<std::size_t>(relation_table.rows()) != relation_names.size())
    throw Error(ErrorCode::DimensionMismatch, "encoder parameter shapes are inconsistent");
  if (!entity_table.allFinite() || !relation_table.allFinite() || !text_projection.allFinite() ||
      !image_projection.allFinite() || !std::isfinite(scale_logit))
    throw Error(ErrorCode::NonFinite, "encoder parameters contain non-finite values");
}

bool EncoderParams::operator==(const EncoderParams& o) const {
  auto same = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return same(entity_table, o.entity_table) && same(relation_table, o.relation_table) &&
         same(text_projection, o.text_projection) && same(image_projection, o.image_projection) &&
         std::bit_cast<std::uint64_t>(scale_logit) == std::bit_cast<std::uint64_t>(o.scale_logit) &&
         entity_names == o.entity_names && relation_names == o.relation_names;
}

Vector text_features(const EncoderParams& p, const TripletIds& ids) {
  if (ids.subject < 0 || ids.subject >= p.entity_table.rows() || ids.object < 0 ||
      ids.object >= p.entity_table.rows() || ids.relation < 0 ||
      ids.relation >= p.relation_table.rows())
    throw Error(ErrorCode::DimensionMismatch, "triplet id out of range");
  const Eigen::Index L = p.entity_table.cols();
  Vector z(3 * L);
  z.segment(0, L) = p.entity_table.row(ids.subject).transpose();
  z.segment(L, L) = p.relation_table.row(ids.relation).transpose();
  z.segment(2 * L, L) = p.entity_table.row(ids.object).transpose();
  return z;
}

Vector encode_text(const EncoderParams& p, const TripletIds& ids) {
  if (p.text_projection.rows() != 3 * p.entity_table.cols())
    throw Error(ErrorCode::DimensionMismatch, "text projection shape");
  return normalized(p.text_projection.transpose() * text_features(p, ids), "text");
}

Vector encode_image(const EncoderParams& p, const std::vector<double>& image_features) {
  if (static_cast<Eigen::Index>(image_features.size()) != p.image_projection.rows())
    throw Error(ErrorCode::DimensionMismatch,
                "image features have " + std::to_string(image_features.size()) +
                    " values, projection expects " + std::to_string(p.image_projection.rows()));
  const Eigen::Map<const Vector> x(image_features.data(),
                                   static_cast<Eigen::Index>(image_features.size()));
  return normalized(p.image_projection.transpose() * x, "image");
}

TripletIds triplet_ids(const EncoderParams& p, const Triplet& t) {
  return {index_of(p.entity_names, t.subject.text, "entity"),
          index_of(p.relation_names, t.relation.text, "relation"),
          index_of(p.entity_names, t.object.text, "entity")};
}

Embeddings encode_dataset(const EncoderParams& p, const Dataset& dataset) {
  const auto n = static_cast<Eigen::Index>(dataset.size());
  Embeddings e{Matrix(n, p.embed_dim()), Matrix(n, p.embed_dim())};
  for (Eigen::Index k = 0; k < n; ++k) {
    e.texts.row(k) = encode_text(p, triplet_ids(p, dataset[k].triplet)).transpose();
    e.images.row(k) = encode_image(p, dataset[k].image_features).transpose();
  }
  return e;
}

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& p,
                     const std::string& config_hash) {
  p.validate();
  std::string bytes;
  put_matrix(bytes, p.entity_table);
  put_matrix(bytes, p.relation_table);
  put_matrix(bytes, p.text_projection);
  put_matrix(bytes, p.image_projection);
  put_f64(bytes, p.scale_logit);
  write_file(path, bytes);

  nlohmann::ordered_json side;
  side["format"] = "f64le";
  side["order"] = {"entity_table", "relation_table", "text_projection", "image_projection",
                   "scale_logit"};
  side["shapes"] = {
      {"entity_table", {p.entity_table.rows(), p.entity_table.cols()}},
      {"relation_table", {p.relation_table.rows(), p.relation_table.cols()}},
      {"text_projection", {p.text_projection.rows(), p.text_projection.cols()}},
      {"image_projection", {p.image_projection.rows(), p.image_projection.cols()}},
  };
  side["entity_names"] = p.entity_names;
  side["relation_names"] = p.relation_names;
  side["config_hash"] = config_hash;
  write_file(path.string() + ".json", side.dump(2) + "\n");
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(slurp(path.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, "checkpoint sidecar: " + std::string(e.what()));
  }
  const std::string bytes = slurp(path);
  EncoderParams p;
  try {
    auto shape = [&](const char* name) {
      const auto& s = side.at("shapes").at(name);
      return std::pair<Eigen::Index, Eigen::Index>(s.at(0).get<Eigen::Index>(),
                                                   s.at(1).get<Eigen::Index>());
    };
    const auto e = shape("entity_table"), r = shape("relation_table"),
               t = shape("text_projection"), i = shape("image_projection");
    const std::size_t expected =
        8 * static_cast<std::size_t>(e.first * e.second + r.first * r.second +
                                     t.first * t.second + i.first * i.second + 1);
    if (bytes.size() != expected)
      throw Error(ErrorCode::ParseError, "checkpoint has " + std::to_string(bytes.size()) +
                                             " bytes, sidecar implies " +
                                             std::to_string(expected));
    std::size_t pos = 0;
    p.entity_table = get_matrix(bytes, pos, e.first, e.second);
    p.relation_table = get_matrix(bytes, pos, r.first, r.second);
    p.text_projection = get_matrix(bytes, pos, t.first, t.second);
    p.image_projection = get_matrix(bytes, pos, i.first, i.second);
    p.scale_logit = get_f64(bytes, pos);
    p.entity_names = side.at("entity_names").get<std::vector<std::string>>();
    p.relation_names = side.at("relation_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, "checkpoint sidecar: " + std::string(ex.what()));
  }
  p.validate();
  return p;
}

}  // namespace drive
