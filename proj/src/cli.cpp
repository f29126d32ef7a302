#include "drive/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <random>
#include <sstream>

#include "drive/annotation.hpp"
#include "drive/config.hpp"
#include "drive/dataset_io.hpp"
#include "drive/error.hpp"
#include "drive/eval.hpp"
#include "drive/gradcheck.hpp"
#include "drive/miner.hpp"
#include "drive/trainer.hpp"

namespace drive {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  Overrides overrides;

  AppConfig load() {
    Overrides all = overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::ValidationError, s);
      all.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return load_config(config_path, all);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override a config key, key=value");
}

// Typed options that map onto config keys; only set ones take effect.
template <class T>
void add_override(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key,
                  const std::string& help) {
  cmd->add_option_function<T>(
      flag,
      [&c, key](const T& v) {
        if constexpr (std::is_same_v<T, std::string>)
          c.overrides.emplace_back(key, v);
        else
          c.overrides.emplace_back(key, fmt::format("{}", v));
      },
      help);
}

std::string sidecar_text(const AppConfig& cfg, const std::string& command,
                         const std::map<std::string, std::string>& inputs) {
  ojson j;
  j["command"] = command;
  j["config_hash"] = cfg.hash();
  j["config"] = cfg.resolved();
  j["inputs"] = inputs;
  return j.dump(2) + "\n";
}

void write_artifact(const std::string& path, const std::string& bytes, const AppConfig& cfg,
                    const std::string& command, const std::map<std::string, std::string>& inputs) {
  write_file(path, bytes);
  write_file(path + ".meta.json", sidecar_text(cfg, command, inputs));
}

std::string dataset_text(const Dataset& d) {
  std::ostringstream s;
  write_dataset(s, d);
  return s.str();
}

std::string hnmap_text(const HNMap& m) {
  std::ostringstream s;
  write_hnmap(s, m);
  return s.str();
}

EmbeddingLexicon load_lexicon(const AppConfig& cfg) {
  if (cfg.lexicon_path.empty()) throw Error(ErrorCode::ValidationError, "paths.lexicon");
  return EmbeddingLexicon::load(cfg.lexicon_path, cfg.synonyms_path);
}

World load_world(const std::string& world_path, const std::string& hnmap_path) {
  World w = world_from_dataset(read_dataset(std::filesystem::path(world_path)));
  if (!hnmap_path.empty()) w.negatives = to_hnindex(w.samples, read_hnmap(std::filesystem::path(hnmap_path)));
  return w;
}

void emit(std::ostream& out, const std::string& path, const std::string& bytes,
          const AppConfig& cfg, const std::string& command,
          const std::map<std::string, std::string>& inputs) {
  if (path.empty() || path == "-")
    out << bytes;
  else
    write_artifact(path, bytes, cfg, command, inputs);
}

int cmd_annotate(Common& c, const std::string& input, const std::string& out_path,
                 const std::string& tagged_out, std::ostream& out) {
  const AppConfig cfg = c.load();
  std::unique_ptr<AnnotationClient> client;
  if (!cfg.annotation.url.empty())
    client = std::make_unique<HttpAnnotationClient>(cfg.annotation.url, cfg.annotation.timeout_ms);
  else if (!cfg.annotation.stub_path.empty())
    client = std::make_unique<StubAnnotationClient>(StubAnnotationClient::load(cfg.annotation.stub_path));
  else
    client = std::make_unique<StubAnnotationClient>();
  Annotator annotator(*client, cfg.annotation.cache_path);

  Dataset samples;
  std::vector<TaggedCaption> tagged;
  std::size_t filtered = 0, dropped = 0, line_no = 0;
  std::istringstream lines(slurp(input));
  std::string line;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: {}", line_no, e.what()));
    }
    Sample s;
    std::int64_t rel = 0, obj = 0;
    try {
      s.id = rec.at("id").get<std::string>();
      s.raw_caption = rec.at("raw").get<std::string>();
      rel = rec.at("scene_rel").get<std::int64_t>();
      obj = rec.at("obj_count").get<std::int64_t>();
      if (rec.contains("img")) s.image_features = rec["img"].get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: {}", line_no, e.what()));
    }
    if (!admit_sample(rel, obj)) {
      ++filtered;
      continue;
    }
    const AnnotationResult a = annotator.annotate(s.raw_caption);
    try {
      s.triplet = extract_triplet(a.tagged);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoSubject || e.code() == ErrorCode::NoRelation ||
          e.code() == ErrorCode::NoObject) {
        ++dropped;
        continue;
      }
      throw;
    }
    s.state = a.state;
    s.scene_relation_count = rel;
    s.object_count = obj;
    TaggedCaption t = a.tagged;
    t.id = s.id;
    tagged.push_back(std::move(t));
    samples.push_back(std::move(s));
  }
  const std::map<std::string, std::string> inputs{{"input", input}};
  write_artifact(out_path, dataset_text(samples), cfg, "annotate", inputs);
  if (!tagged_out.empty()) {
    std::ostringstream s;
    write_tagged_captions(s, tagged);
    write_artifact(tagged_out, s.str(), cfg, "annotate", inputs);
  }
  out << json{{"kept", samples.size()}, {"filtered", filtered}, {"dropped", dropped}}.dump() << "\n";
  return 0;
}

int cmd_mine(Common& c, const std::string& mode_text, unsigned workers, std::ostream& out) {
  const AppConfig cfg = c.load();
  const DatasetMode mode = parse_dataset_mode(mode_text);
  if (cfg.dataset_path.empty()) throw Error(ErrorCode::ValidationError, "paths.dataset");
  const Dataset d = read_dataset(std::filesystem::path(cfg.dataset_path));
  const EmbeddingLexicon lex = load_lexicon(cfg);
  const HNMap m = mine(d, mode, lex, cfg.similarity, workers);
  emit(out, cfg.output_path, hnmap_text(m), cfg, "mine",
       {{"dataset", cfg.dataset_path}, {"lexicon", cfg.lexicon_path},
        {"synonyms", cfg.synonyms_path}, {"mode", std::string(to_string(mode))}});
  return 0;
}

int cmd_sweep(Common& c, const std::string& pairs_path, double lo, double hi, double step,
              std::ostream& out) {
  const AppConfig cfg = c.load();
  const EmbeddingLexicon lex = load_lexicon(cfg);
  std::vector<LabeledPair> pairs;
  std::istringstream lines(slurp(pairs_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      pairs.push_back({Phrase::from_text(j.at("a").get<std::string>(), HeadRule::Nominal),
                       Phrase::from_text(j.at("b").get<std::string>(), HeadRule::Nominal),
                       j.at("label").get<bool>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  const ThresholdSweepResult r = sweep_threshold(pairs, lex, lo, hi, step);
  std::string body = fmt::format("{{\"best_f1\":{:.6f},\"best_tau\":{:.2f},\"curve\":[", r.best_f1,
                                 r.best_tau);
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    const SweepPoint& p = r.curve[i];
    body += fmt::format("{}{{\"f1\":{:.6f},\"precision\":{:.6f},\"recall\":{:.6f},\"tau\":{:.2f}}}",
                        i ? "," : "", p.f1, p.precision, p.recall, p.tau);
  }
  body += "]}\n";
  emit(out, cfg.output_path, body, cfg, "sweep",
       {{"pairs", pairs_path}, {"lexicon", cfg.lexicon_path}, {"synonyms", cfg.synonyms_path}});
  return 0;
}

int cmd_stats(Common& c, std::ostream& out) {
  const AppConfig cfg = c.load();
  if (cfg.dataset_path.empty()) throw Error(ErrorCode::ValidationError, "paths.dataset");
  const Dataset d = read_dataset(std::filesystem::path(cfg.dataset_path));
  const DatasetStats s = dataset_stats(d);
  const auto [stative, dynamic] = split_by_state(d);
  const std::string body = fmt::format(
      "{{\"caption_count\":{},\"distinct_entities\":{},\"distinct_relations\":{},"
      "\"dynamic_count\":{},\"mean_relation_frequency\":{:.6f},"
      "\"mean_relations_per_entity\":{:.6f},\"stative_count\":{},"
      "\"std_relation_frequency\":{:.6f},\"std_relations_per_entity\":{:.6f}}}\n",
      s.caption_count, s.distinct_entities, s.distinct_relations, dynamic.size(),
      s.mean_relation_frequency, s.mean_relations_per_entity, stative.size(),
      s.std_relation_frequency, s.std_relations_per_entity);
  emit(out, cfg.output_path, body, cfg, "stats", {{"dataset", cfg.dataset_path}});
  return 0;
}

int cmd_synth(Common& c, const std::string& hnmap_out) {
  const AppConfig cfg = c.load();
  if (cfg.output_path.empty()) throw Error(ErrorCode::ValidationError, "paths.output");
  const World w = synth_world(cfg.world);
  write_artifact(cfg.output_path, dataset_text(w.samples), cfg, "synth", {});
  if (!hnmap_out.empty())
    write_artifact(hnmap_out, hnmap_text(to_hnmap(w.samples, w.negatives)), cfg, "synth", {});
  return 0;
}

int cmd_train(Common& c, const std::string& world_path, const std::string& hnmap_path,
              const std::string& params_out, const std::string& history_out, std::ostream& out) {
  const AppConfig cfg = c.load();
  const World w = load_world(world_path, hnmap_path);
  const TrainResult r = train(w, cfg.train);
  const std::map<std::string, std::string> inputs{{"world", world_path}, {"hnmap", hnmap_path}};
  save_checkpoint(params_out, r.params, cfg.hash());
  write_file(params_out + ".meta.json", sidecar_text(cfg, "train", inputs));
  if (!history_out.empty())
    write_artifact(history_out, history_csv(r.history), cfg, "train", inputs);
  const EpochRecord& last = r.history.epochs.back();
  out << fmt::format(
      "{{\"epochs\":{},\"final_loss\":{:.6f},\"initial_loss\":{:.6f},\"r1_i2t\":{:.6f},"
      "\"r1_t2i\":{:.6f},\"skipped_empty\":{},\"used_anchors\":{}}}\n",
      r.history.epochs.size(), last.loss, r.history.initial_loss, last.r1_i2t, last.r1_t2i,
      r.history.skipped_empty, r.history.used_anchors);
  return 0;
}

int cmd_eval(Common& c, const std::string& params_path, const std::string& world_path,
             const std::string& hnmap_path, const std::string& subsets, const std::string& format,
             const std::string& reference, std::ostream& out) {
  const AppConfig cfg = c.load();
  const EncoderParams p = load_checkpoint(params_path);
  const World w = load_world(world_path, hnmap_path);
  const EvalReport r = evaluate(p, w.samples, w.negatives, parse_subset_split(subsets), reference);
  emit(out, cfg.output_path, emit_report(r, format), cfg, "eval",
       {{"params", params_path}, {"world", world_path}, {"hnmap", hnmap_path}});
  return 0;
}

int cmd_gradcheck(Common& c, const std::string& loss, int dim, int negatives, std::uint64_t seed,
                  double step, std::ostream& out) {
  const AppConfig cfg = c.load();
  if (dim < 1) throw Error(ErrorCode::ValidationError, "dim");
  if (negatives < 0) throw Error(ErrorCode::ValidationError, "negatives");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto unit = [&] {
    Vector v(dim);
    do {
      for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    } while (v.norm() == 0.0);
    return Vector(v / v.norm());
  };
  MiniBatch mb{unit(), unit(), Matrix(negatives, dim), Matrix(negatives, dim)};
  for (int k = 0; k < negatives; ++k) {
    mb.hn_texts.row(k) = unit().transpose();
    mb.hn_images.row(k) = unit().transpose();
  }
  const GradReport r = check_loss_gradients(parse_loss_kind(loss), mb, cfg.loss, step);
  emit(out, cfg.output_path, r.to_json() + "\n", cfg, "gradcheck", {{"loss", loss}});
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hard-negative mining, loss and toy-training toolkit", "drive"};
  app.require_subcommand(1);
  Common common;
  std::function<int()> action;

  auto* annotate = app.add_subcommand("annotate", "simplify, tag and state-label raw captions");
  std::string ann_input, ann_out, ann_tagged;
  annotate->add_option("--input", ann_input, "JSONL {id, raw, scene_rel, obj_count[, img]}")
      ->required()
      ->check(CLI::ExistingFile);
  annotate->add_option("--out", ann_out, "dataset JSONL")->required();
  annotate->add_option("--tagged-out", ann_tagged, "tagged caption JSONL");
  add_override<std::string>(annotate, common, "--stub", "annotation.stub", "offline stub fixture");
  add_override<std::string>(annotate, common, "--url", "annotation.url", "annotation service");
  add_override<std::string>(annotate, common, "--cache", "annotation.cache_path", "JSONL cache");
  add_common(annotate, common);
  annotate->callback([&] {
    action = [&] { return cmd_annotate(common, ann_input, ann_out, ann_tagged, out); };
  });

  auto* mine_cmd = app.add_subcommand("mine", "mine hard-negative sets");
  std::string mine_mode = "croco";
  unsigned mine_workers = 1;
  mine_cmd->add_option("--mode", mine_mode, "croco | croco-d")
      ->check(CLI::IsMember({"croco", "croco-d"}));
  mine_cmd->add_option("--workers", mine_workers, "worker threads")->check(CLI::Range(1u, 256u));
  add_override<std::string>(mine_cmd, common, "--dataset", "paths.dataset", "dataset JSONL");
  add_override<std::string>(mine_cmd, common, "--lexicon", "paths.lexicon", "word vectors");
  add_override<std::string>(mine_cmd, common, "--synonyms", "paths.synonyms", "synonym sets JSON");
  add_override<double>(mine_cmd, common, "--tau", "similarity.tau", "cosine threshold");
  add_override<double>(mine_cmd, common, "--epsilon", "similarity.epsilon", "synonym confidence");
  add_override<std::string>(mine_cmd, common, "--out", "paths.output", "hard-negative JSONL");
  add_common(mine_cmd, common);
  mine_cmd->callback([&] { action = [&] { return cmd_mine(common, mine_mode, mine_workers, out); }; });

  auto* sweep = app.add_subcommand("sweep", "F1 sweep of the cosine threshold");
  std::string sweep_pairs;
  double sweep_lo = 0.80, sweep_hi = 0.99, sweep_step = 0.01;
  sweep->add_option("--pairs", sweep_pairs, "JSONL {a, b, label}")->required()->check(CLI::ExistingFile);
  sweep->add_option("--lo", sweep_lo);
  sweep->add_option("--hi", sweep_hi);
  sweep->add_option("--step", sweep_step);
  add_override<std::string>(sweep, common, "--lexicon", "paths.lexicon", "word vectors");
  add_override<std::string>(sweep, common, "--synonyms", "paths.synonyms", "synonym sets JSON");
  add_override<std::string>(sweep, common, "--out", "paths.output", "result JSON");
  add_common(sweep, common);
  sweep->callback([&] {
    action = [&] { return cmd_sweep(common, sweep_pairs, sweep_lo, sweep_hi, sweep_step, out); };
  });

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  add_override<std::string>(stats, common, "--dataset", "paths.dataset", "dataset JSONL");
  add_override<std::string>(stats, common, "--out", "paths.output", "result JSON");
  add_common(stats, common);
  stats->callback([&] { action = [&] { return cmd_stats(common, out); }; });

  auto* synth = app.add_subcommand("synth", "generate a synthetic world");
  std::string synth_hn;
  add_override<std::string>(synth, common, "--out", "paths.output", "dataset JSONL");
  synth->add_option("--out-hnmap", synth_hn, "hard-negative JSONL");
  add_override<std::uint64_t>(synth, common, "--seed", "world.seed", "world seed");
  add_override<int>(synth, common, "--samples", "world.n_samples", "sample count");
  add_common(synth, common);
  synth->callback([&] { action = [&] { return cmd_synth(common, synth_hn); }; });

  auto* train_cmd = app.add_subcommand("train", "train toy encoders");
  std::string tr_world, tr_hn, tr_params, tr_history;
  train_cmd->add_option("--world", tr_world, "dataset JSONL")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--hnmap", tr_hn, "hard-negative JSONL")->check(CLI::ExistingFile);
  train_cmd->add_option("--out-params", tr_params, "checkpoint")->required();
  train_cmd->add_option("--out-history", tr_history, "history CSV");
  add_override<std::string>(train_cmd, common, "--mode", "train.loss_mode", "clip | hn");
  add_override<std::string>(train_cmd, common, "--preset", "train.preset", "default | toy");
  add_override<std::uint64_t>(train_cmd, common, "--seed", "train.seed", "training seed");
  add_override<int>(train_cmd, common, "--epochs", "train.epochs", "epochs");
  add_override<double>(train_cmd, common, "--lr", "train.learning_rate", "learning rate");
  add_override<int>(train_cmd, common, "--batch-size", "train.batch_size", "pairs per step");
  add_common(train_cmd, common);
  train_cmd->callback([&] {
    action = [&] { return cmd_train(common, tr_world, tr_hn, tr_params, tr_history, out); };
  });

  auto* eval_cmd = app.add_subcommand("eval", "within-set R@1 report");
  std::string ev_params, ev_world, ev_hn, ev_subsets = "state", ev_format = "json",
                                          ev_ref = "dynamic";
  eval_cmd->add_option("--params", ev_params, "checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--world", ev_world, "dataset JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--hnmap", ev_hn, "hard-negative JSONL")->check(CLI::ExistingFile);
  eval_cmd->add_option("--subsets", ev_subsets, "none | state")->check(CLI::IsMember({"none", "state"}));
  eval_cmd->add_option("--format", ev_format, "json | csv | plot-data");
  eval_cmd->add_option("--reference", ev_ref, "reference subset for delta_acc");
  add_override<std::string>(eval_cmd, common, "--out", "paths.output", "report file");
  add_common(eval_cmd, common);
  eval_cmd->callback([&] {
    action = [&] {
      return cmd_eval(common, ev_params, ev_world, ev_hn, ev_subsets, ev_format, ev_ref, out);
    };
  });

  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of one loss");
  std::string gc_loss = "hn";
  int gc_dim = 8, gc_neg = 3;
  std::uint64_t gc_seed = 1;
  double gc_step = 1e-4;
  gc->add_option("--loss", gc_loss, "clip | croco | hn_text | hn_image | hn")
      ->check(CLI::IsMember({"clip", "croco", "hn_text", "hn_image", "hn"}));
  gc->add_option("--dim", gc_dim);
  gc->add_option("--negatives", gc_neg);
  gc->add_option("--seed", gc_seed);
  gc->add_option("--step", gc_step);
  add_override<std::string>(gc, common, "--out", "paths.output", "report JSON");
  add_common(gc, common);
  gc->callback([&] {
    action = [&] { return cmd_gradcheck(common, gc_loss, gc_dim, gc_neg, gc_seed, gc_step, out); };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.back()->help());
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    err << json{{"error", std::string(error_code_name(e.code()))}, {"message", e.what()}}.dump()
        << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", "IoError"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace drive
