#include "drive/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fmt/format.h>
#include <functional>

#include "drive/dataset_io.hpp"
#include "drive/error.hpp"
#include "drive/hash.hpp"

namespace drive {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw Error(ErrorCode::ValidationError, key);
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw Error(ErrorCode::ValidationError, key);
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw Error(ErrorCode::ValidationError, key);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::ValidationError, key);
}

struct Field {
  std::function<void(AppConfig&, const std::string&)> set;
  std::function<std::string(const AppConfig&)> get;
};

template <class T>
Field real(T AppConfig::*group, double T::*member, const char* key) {
  return {[=](AppConfig& c, const std::string& v) { (c.*group).*member = to_double(key, v); },
          [=](const AppConfig& c) { return fmt::format("{}", (c.*group).*member); }};
}

template <class T>
Field integer(T AppConfig::*group, int T::*member, const char* key) {
  return {[=](AppConfig& c, const std::string& v) {
            const long long n = to_int(key, v);
            if (n < INT32_MIN || n > INT32_MAX) throw Error(ErrorCode::ValidationError, key);
            (c.*group).*member = static_cast<int>(n);
          },
          [=](const AppConfig& c) { return std::to_string((c.*group).*member); }};
}

template <class T>
Field seed(T AppConfig::*group, std::uint64_t T::*member, const char* key) {
  return {[=](AppConfig& c, const std::string& v) { (c.*group).*member = to_u64(key, v); },
          [=](const AppConfig& c) { return std::to_string((c.*group).*member); }};
}

Field text(std::string AppConfig::*member) {
  return {[=](AppConfig& c, const std::string& v) { c.*member = v; },
          [=](const AppConfig& c) { return c.*member; }};
}

Field endpoint_text(std::string AnnotationEndpoint::*member) {
  return {[=](AppConfig& c, const std::string& v) { c.annotation.*member = v; },
          [=](const AppConfig& c) { return c.annotation.*member; }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["paths.dataset"] = text(&AppConfig::dataset_path);
    t["paths.lexicon"] = text(&AppConfig::lexicon_path);
    t["paths.synonyms"] = text(&AppConfig::synonyms_path);
    t["paths.output"] = text(&AppConfig::output_path);
    t["similarity.tau"] = real(&AppConfig::similarity, &SimilarityConfig::tau, "tau");
    t["similarity.epsilon"] = real(&AppConfig::similarity, &SimilarityConfig::epsilon, "epsilon");
    t["loss.scale"] = real(&AppConfig::loss, &LossConfig::scale, "loss.scale");
    t["loss.delta_t"] = real(&AppConfig::loss, &LossConfig::delta_t, "loss.delta_t");
    t["loss.delta_i"] = real(&AppConfig::loss, &LossConfig::delta_i, "loss.delta_i");
    t["train.batch_size"] = integer(&AppConfig::train, &TrainConfig::batch_size, "train.batch_size");
    t["train.learning_rate"] =
        real(&AppConfig::train, &TrainConfig::learning_rate, "train.learning_rate");
    t["train.epochs"] = integer(&AppConfig::train, &TrainConfig::epochs, "train.epochs");
    t["train.loss_mode"] = {
        [](AppConfig& c, const std::string& v) {
          try {
            c.train.loss_mode = parse_loss_mode(v);
          } catch (const Error&) {
            throw Error(ErrorCode::ValidationError, "train.loss_mode");
          }
        },
        [](const AppConfig& c) { return std::string(to_string(c.train.loss_mode)); }};
    t["train.optimizer"] = {
        [](AppConfig& c, const std::string& v) {
          try {
            c.train.optimizer = parse_optimizer(v);
          } catch (const Error&) {
            throw Error(ErrorCode::ValidationError, "train.optimizer");
          }
        },
        [](const AppConfig& c) { return std::string(to_string(c.train.optimizer)); }};
    t["train.beta1"] = real(&AppConfig::train, &TrainConfig::beta1, "train.beta1");
    t["train.beta2"] = real(&AppConfig::train, &TrainConfig::beta2, "train.beta2");
    t["train.adam_epsilon"] =
        real(&AppConfig::train, &TrainConfig::adam_epsilon, "train.adam_epsilon");
    t["train.embed_dim"] = integer(&AppConfig::train, &TrainConfig::embed_dim, "train.embed_dim");
    t["train.init_std"] = real(&AppConfig::train, &TrainConfig::init_std, "train.init_std");
    t["train.initial_scale"] =
        real(&AppConfig::train, &TrainConfig::initial_scale, "train.initial_scale");
    t["train.learn_scale"] = {
        [](AppConfig& c, const std::string& v) {
          c.train.learn_scale = to_bool("train.learn_scale", v);
        },
        [](const AppConfig& c) { return std::string(c.train.learn_scale ? "true" : "false"); }};
    t["train.seed"] = seed(&AppConfig::train, &TrainConfig::seed, "train.seed");
    t["world.n_entities"] = integer(&AppConfig::world, &WorldConfig::n_entities, "world.n_entities");
    t["world.n_relations"] =
        integer(&AppConfig::world, &WorldConfig::n_relations, "world.n_relations");
    t["world.latent_dim"] = integer(&AppConfig::world, &WorldConfig::latent_dim, "world.latent_dim");
    t["world.image_noise_sigma"] =
        real(&AppConfig::world, &WorldConfig::image_noise_sigma, "world.image_noise_sigma");
    t["world.stative_fraction"] =
        real(&AppConfig::world, &WorldConfig::stative_fraction, "world.stative_fraction");
    t["world.stative_attenuation"] =
        real(&AppConfig::world, &WorldConfig::stative_attenuation, "world.stative_attenuation");
    t["world.n_samples"] = integer(&AppConfig::world, &WorldConfig::n_samples, "world.n_samples");
    t["world.seed"] = seed(&AppConfig::world, &WorldConfig::seed, "world.seed");
    t["annotation.url"] = endpoint_text(&AnnotationEndpoint::url);
    t["annotation.cache_path"] = endpoint_text(&AnnotationEndpoint::cache_path);
    t["annotation.stub"] = endpoint_text(&AnnotationEndpoint::stub_path);
    t["annotation.timeout_ms"] = {
        [](AppConfig& c, const std::string& v) {
          const long long n = to_int("annotation.timeout_ms", v);
          if (n <= 0 || n > INT32_MAX) throw Error(ErrorCode::ValidationError, "annotation.timeout_ms");
          c.annotation.timeout_ms = static_cast<int>(n);
        },
        [](const AppConfig& c) { return std::to_string(c.annotation.timeout_ms); }};
    t["log.level"] = text(&AppConfig::log_level);
    return t;
  }();
  return table;
}

void apply(AppConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "train.preset") return;
  auto it = fields().find(key);
  if (it == fields().end()) throw Error(ErrorCode::ValidationError, key);
  it->second.set(cfg, value);
}

void apply_preset(AppConfig& cfg, const std::string& name) {
  if (name == "toy") {
    cfg.train = toy_preset();
  } else if (name == "default") {
    cfg.train = TrainConfig{};
  } else {
    throw Error(ErrorCode::ValidationError, "train.preset");
  }
}

}  // namespace

std::map<std::string, std::string> AppConfig::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

std::string AppConfig::hash() const {
  std::string canon;
  for (const auto& [k, v] : resolved()) canon += k + "=" + v + "\n";
  return hex64(fnv1a64(canon));
}

void AppConfig::validate() const {
  similarity.validate();
  loss.validate();
  try {
    train.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationError, std::string("train.") + e.what());
  }
  try {
    world.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationError, std::string("world.") + e.what());
  }
  for (const auto& [key, path] : {std::pair{"paths.dataset", &dataset_path},
                                  std::pair{"paths.lexicon", &lexicon_path},
                                  std::pair{"paths.synonyms", &synonyms_path}})
    if (!path->empty() && !std::filesystem::exists(*path))
      throw Error(ErrorCode::ValidationError, key);
  static const char* levels[] = {"error", "warn", "info", "debug"};
  if (std::find(std::begin(levels), std::end(levels), log_level) == std::end(levels))
    throw Error(ErrorCode::ValidationError, "log.level");
}

Overrides parse_config_text(std::string_view text) {
  Overrides out;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

AppConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  Overrides layers;
  if (!path.empty()) layers = parse_config_text(slurp(path));
  if (const char* env = std::getenv("DRIVE_ANNOTATION_URL"); env && *env)
    layers.emplace_back("annotation.url", env);
  layers.insert(layers.end(), overrides.begin(), overrides.end());

  AppConfig cfg;
  // The last preset named anywhere wins and sits under every explicit key.
  for (const auto& [k, v] : layers)
    if (k == "train.preset") apply_preset(cfg, v);
  for (const auto& [k, v] : layers) apply(cfg, k, v);
  cfg.train.delta_t = cfg.loss.delta_t;
  cfg.train.delta_i = cfg.loss.delta_i;
  cfg.validate();
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out{"train.preset"};
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

}  // namespace drive
