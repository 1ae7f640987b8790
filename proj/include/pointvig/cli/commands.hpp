#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pointvig/analysis/complexity.hpp"
#include "pointvig/analysis/diversity.hpp"
#include "pointvig/io/checkpoint.hpp"
#include "pointvig/io/cloud_io.hpp"
#include "pointvig/io/csv.hpp"
#include "pointvig/io/dataset_cache.hpp"
#include "pointvig/io/manifest.hpp"
#include "pointvig/training/trainer.hpp"

namespace pointvig::cli {

namespace fs = std::filesystem;
using io::FieldSpec;
using io::FieldType;

inline const std::vector<std::string> kCommands{"train-cls",         "train-seg",        "eval",           "bench-dilation",
                                                "analyze-diversity", "count-complexity", "export-features"};

namespace detail {

inline bool trains(const std::string& cmd) { return cmd == "train-cls" || cmd == "train-seg" || cmd == "bench-dilation"; }
inline bool reads_data(const std::string& cmd) { return trains(cmd) || cmd == "eval" || cmd == "analyze-diversity"; }

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

/// Keys accepted by each command. Training hyperparameters carry no silent
/// defaults: every one must be written in the config.
inline std::vector<FieldSpec> run_schema(const std::string& cmd) {
  std::vector<FieldSpec> s{
      {"run.output_dir", FieldType::path, true, {}},
      {"run.seed", FieldType::integer, true, {}},
      {"run.strict_deterministic", FieldType::boolean, false, {}},
  };
  auto add = [&](std::vector<FieldSpec> more) { s.insert(s.end(), more.begin(), more.end()); };
  if (detail::trains(cmd) || cmd == "count-complexity") add({{"model.spec", FieldType::path, true, {}}});
  if (detail::reads_data(cmd))
    add({{"data.source", FieldType::text, true, {"synthetic", "list", "cache"}},
         {"data.points", FieldType::integer, false, {}},
         {"data.train_per_class", FieldType::integer, false, {}},
         {"data.test_per_class", FieldType::integer, false, {}},
         {"data.train_scenes", FieldType::integer, false, {}},
         {"data.test_scenes", FieldType::integer, false, {}},
         {"data.min_objects", FieldType::integer, false, {}},
         {"data.max_objects", FieldType::integer, false, {}},
         {"data.train_seed", FieldType::integer, false, {}},
         {"data.test_seed", FieldType::integer, false, {}},
         {"data.train_list", FieldType::path, false, {}},
         {"data.test_list", FieldType::path, false, {}},
         {"data.train_cache", FieldType::path, false, {}},
         {"data.test_cache", FieldType::path, false, {}},
         {"data.save_cache", FieldType::boolean, false, {}},
         {"data.task", FieldType::text, false, {"shapes", "scenes"}}});
  if (detail::trains(cmd))
    add({{"train.epochs", FieldType::integer, true, {}},
         {"train.batch_size", FieldType::integer, true, {}},
         {"train.lr_max", FieldType::real, true, {}},
         {"train.lr_min", FieldType::real, true, {}},
         {"train.restart_period", FieldType::real, true, {}},
         {"train.adam_beta1", FieldType::real, true, {}},
         {"train.adam_beta2", FieldType::real, true, {}},
         {"train.adam_eps", FieldType::real, true, {}},
         {"train.scale_lo", FieldType::real, true, {}},
         {"train.scale_hi", FieldType::real, true, {}}});
  if (cmd == "eval") add({{"eval.checkpoint", FieldType::path, true, {}}, {"eval.batch_size", FieldType::integer, false, {}}});
  if (cmd == "bench-dilation")
    add({{"bench.seeds", FieldType::int_list, true, {}},
         {"bench.strategies", FieldType::text_list, true, {"adaptive", "uniform", "random"}}});
  if (cmd == "analyze-diversity")
    add({{"analyze.checkpoint", FieldType::path, true, {}},
         {"analyze.mean", FieldType::text, false, {"scalar", "per_channel"}},
         {"analyze.batch_size", FieldType::integer, false, {}}});
  if (cmd == "count-complexity")
    add({{"complexity.points", FieldType::integer, true, {}},
         {"complexity.reference_params", FieldType::real, false, {}},
         {"complexity.reference_flops", FieldType::real, false, {}}});
  if (cmd == "export-features")
    add({{"export.checkpoint", FieldType::path, true, {}},
         {"export.cloud", FieldType::path, true, {}},
         {"export.points", FieldType::integer, false, {}},
         {"export.stage", FieldType::integer, false, {}}});
  return s;
}

/// Applies `key=value` overrides on top of a loaded document.
inline void apply_overrides(io::KvDoc& doc, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || io::trim(kv.substr(0, eq)).empty())
      throw Error(ErrorKind::parse, "override '" + kv + "' is not key=value");
    doc.set(io::trim(kv.substr(0, eq)), io::trim(kv.substr(eq + 1)));
  }
}

/// Resolves path fields against `base`, then checks everything that does not
/// need the parsed values: keys required by the chosen data source and the
/// existence of every input file. All problems surface in one error.
inline io::Config validate_run(const std::string& cmd, io::KvDoc doc, const fs::path& base) {
  require(std::find(kCommands.begin(), kCommands.end(), cmd) != kCommands.end(), ErrorKind::validation,
          "unknown command '" + cmd + "'");
  const auto schema = run_schema(cmd);
  std::vector<std::string> extra;
  for (const auto& f : schema) {
    if (f.type != FieldType::path || !doc.has(f.key)) continue;
    auto& v = doc.entries[f.key].value;
    if (v.empty()) continue;
    fs::path p(v);
    if (p.is_relative()) p = base / p;
    v = p.lexically_normal().string();
    if (f.key != "run.output_dir" && !fs::exists(p)) extra.push_back("'" + f.key + "' names a missing file: " + p.string());
  }
  if (doc.has("data.source")) {
    const std::string src = doc.entries.at("data.source").value;
    const bool scenes = cmd == "train-seg" || cmd == "bench-dilation" ||
                        (doc.has("data.task") && doc.entries.at("data.task").value == "scenes");
    std::vector<std::string> need;
    const bool need_train = detail::trains(cmd);
    if (src == "synthetic") {
      need = {"data.points", "data.test_seed"};
      need.push_back(scenes ? "data.test_scenes" : "data.test_per_class");
      if (need_train) {
        need.push_back("data.train_seed");
        need.push_back(scenes ? "data.train_scenes" : "data.train_per_class");
      }
      if (!detail::trains(cmd) && !doc.has("data.task")) need.push_back("data.task");
    } else if (src == "list") {
      need = {"data.test_list"};
      if (need_train) need.push_back("data.train_list");
    } else if (src == "cache") {
      need = {"data.test_cache"};
      if (need_train) need.push_back("data.train_cache");
    }
    for (const auto& k : need)
      if (!doc.has(k)) extra.push_back("data.source = " + src + " needs '" + k + "'");
  }
  return io::Config(std::move(doc), schema, 1, std::move(extra));
}

struct Datasets {
  std::vector<PointCloud> train, test;
};

/// Text list of clouds: `path [label]` per line, paths relative to the list.
inline std::vector<PointCloud> load_list(const std::string& path, std::size_t points, std::uint64_t seed) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorKind::io, "cannot open list '" + path + "'");
  std::vector<PointCloud> out;
  std::string line;
  std::size_t n = 0;
  const fs::path base = fs::path(path).parent_path();
  while (std::getline(f, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string file;
    if (!(ls >> file)) continue;
    int label = -1;
    if (std::string tok; ls >> tok) {
      long long v = 0;
      if (!io::detail::parse_int(tok, v))
        throw Error(ErrorKind::parse, path + ":" + std::to_string(n) + ": bad label '" + tok + "'");
      label = static_cast<int>(v);
    }
    fs::path p(file);
    if (p.is_relative()) p = base / p;
    PointCloud c = io::load_cloud(p.string(), {points, pointvig::detail::mix_seed(seed, n, 0)});
    c.label = label;
    out.push_back(std::move(c));
  }
  require(!out.empty(), ErrorKind::empty_input, path + ": no clouds listed");
  return out;
}

inline Datasets load_data(const io::Config& c, const std::string& cmd, bool need_train, const std::string& out_dir,
                          std::vector<std::string>& artifacts) {
  Datasets d;
  const std::string src = c.text("data.source");
  const bool scenes = cmd == "train-seg" || cmd == "bench-dilation" || c.text("data.task", "") == "scenes";
  const auto points = static_cast<std::size_t>(c.integer("data.points", 0));
  if (src == "synthetic") {
    auto make = [&](const char* count_key, const char* seed_key) {
      const auto n = static_cast<std::size_t>(c.integer(count_key));
      const auto seed = static_cast<std::uint64_t>(c.integer(seed_key));
      if (!scenes) return make_synthetic_shapes(n, points, seed);
      SceneConfig sc;
      sc.n_points = points;
      sc.min_objects = static_cast<std::size_t>(c.integer("data.min_objects", 2));
      sc.max_objects = static_cast<std::size_t>(c.integer("data.max_objects", 4));
      return make_synthetic_scenes(n, sc, seed);
    };
    if (need_train) d.train = make(scenes ? "data.train_scenes" : "data.train_per_class", "data.train_seed");
    d.test = make(scenes ? "data.test_scenes" : "data.test_per_class", "data.test_seed");
  } else if (src == "list") {
    const auto seed = static_cast<std::uint64_t>(c.integer("run.seed"));
    if (need_train) d.train = load_list(c.text("data.train_list"), points, seed);
    d.test = load_list(c.text("data.test_list"), points, seed + 1);
  } else {
    if (need_train) d.train = io::load_dataset(c.text("data.train_cache"));
    d.test = io::load_dataset(c.text("data.test_cache"));
  }
  if (c.boolean("data.save_cache") && src != "cache") {
    if (need_train) {
      io::save_dataset(out_dir + "/train.pvtn", d.train, src + " training set");
      artifacts.push_back("train.pvtn");
    }
    io::save_dataset(out_dir + "/test.pvtn", d.test, src + " test set");
    artifacts.push_back("test.pvtn");
  }
  return d;
}

inline TrainConfig train_config(const io::Config& c) {
  TrainConfig t;
  t.epochs = static_cast<std::size_t>(c.integer("train.epochs"));
  t.batch_size = static_cast<std::size_t>(c.integer("train.batch_size"));
  t.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  t.schedule = {c.real("train.lr_max"), c.real("train.lr_min"), c.real("train.restart_period")};
  t.adam = {c.real("train.adam_beta1"), c.real("train.adam_beta2"), c.real("train.adam_eps")};
  t.scale_lo = c.real("train.scale_lo");
  t.scale_hi = c.real("train.scale_hi");
  t.strict_deterministic = c.boolean("run.strict_deterministic", true);
  t.validate();
  return t;
}

inline const io::CsvRow kMetricsHeader{"metric", "value"};

inline std::vector<io::CsvRow> metrics_rows(const MetricsReport& r) {
  std::vector<io::CsvRow> rows{{"OA", detail::num(r.overall_accuracy)},
                               {"mAcc", detail::num(r.mean_class_accuracy)},
                               {"mIoU", detail::num(r.mean_iou)}};
  for (std::size_t i = 0; i < r.class_accuracy.size(); ++i) rows.push_back({"acc." + std::to_string(i), detail::num(r.class_accuracy[i])});
  for (std::size_t i = 0; i < r.class_iou.size(); ++i) rows.push_back({"iou." + std::to_string(i), detail::num(r.class_iou[i])});
  return rows;
}

inline nlohmann::json metrics_json(const MetricsReport& r) {
  auto fin = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"OA", fin(r.overall_accuracy)}, {"mAcc", fin(r.mean_class_accuracy)}, {"mIoU", fin(r.mean_iou)}};
}

struct RunResult {
  io::Manifest manifest;
  std::string output_dir;
};

using Log = std::function<void(const std::string&)>;

namespace detail {


inline void out_csv(RunResult& r, const std::string& name, const io::CsvRow& header, const std::vector<io::CsvRow>& rows) {
  io::write_csv_file(r.output_dir + "/" + name, header, rows);
  r.manifest.artifacts.push_back(name);
}

inline void cmd_train(const io::Config& c, const std::string& cmd, RunResult& r, const Log& log) {
  const ModelSpec spec = io::load_model_spec(c.text("model.spec"));
  if (cmd == "train-cls")
    require(spec.task == Task::classification, ErrorKind::validation, "train-cls needs a classification model spec");
  else
    require(spec.segmentation(), ErrorKind::validation, "train-seg needs a segmentation model spec");
  const TrainConfig tc = train_config(c);
  const auto data = load_data(c, cmd, true, r.output_dir, r.manifest.artifacts);
  auto model = build_model<float>(spec, tc.seed);
  const auto history = train(model, data.train, data.test, tc, [&](const EpochRecord& e) {
    log("epoch " + std::to_string(e.epoch) + " lr " + num(e.lr) + " loss " + num(e.train_loss) + " OA " +
        num(e.metrics.overall_accuracy) + " mIoU " + num(e.metrics.mean_iou));
  });
  out_csv(r, "epoch_log.csv", kEpochLogHeader, epoch_log_rows(history));
  io::save_checkpoint(r.output_dir + "/checkpoint.pvtn", model, tc.seed, static_cast<long long>(tc.epochs));
  r.manifest.artifacts.push_back("checkpoint.pvtn");
  const auto final_eval = evaluate(model, data.test, tc.batch_size);
  out_csv(r, "metrics.csv", kMetricsHeader, metrics_rows(final_eval.report));
  r.manifest.extra["params"] = model.store.count_params();
  r.manifest.extra["test"] = metrics_json(final_eval.report);
}

inline std::vector<io::CsvRow> confusion_rows(const Confusion& conf) {
  std::vector<io::CsvRow> rows;
  for (std::size_t t = 0; t < conf.classes; ++t) {
    io::CsvRow row{std::to_string(t)};
    for (std::size_t p = 0; p < conf.classes; ++p) row.push_back(std::to_string(conf.at(t, p)));
    rows.push_back(row);
  }
  return rows;
}

inline void cmd_eval(const io::Config& c, RunResult& r, const Log& log) {
  io::CheckpointInfo info;
  auto model = io::load_checkpoint<float>(c.text("eval.checkpoint"), &info);
  const auto data = load_data(c, model.spec.segmentation() ? "train-seg" : "train-cls", false, r.output_dir,
                              r.manifest.artifacts);
  const auto bs = static_cast<std::size_t>(c.integer("eval.batch_size", 32));
  const auto res = evaluate(model, data.test, bs);
  out_csv(r, "metrics.csv", kMetricsHeader, metrics_rows(res.report));
  io::CsvRow header{"truth"};
  for (std::size_t p = 0; p < model.spec.num_classes; ++p) header.push_back("pred." + std::to_string(p));
  out_csv(r, "confusion.csv", header, confusion_rows(res.confusion));
  const auto pred = predict(model, data.test, bs);
  std::vector<io::CsvRow> rows;
  std::size_t k = 0;
  for (std::size_t s = 0; s < data.test.size(); ++s) {
    const auto& cl = data.test[s];
    if (model.spec.segmentation())
      for (std::size_t i = 0; i < cl.size(); ++i, ++k)
        rows.push_back({std::to_string(s), std::to_string(i), std::to_string(cl.point_labels[i]), std::to_string(pred[k])});
    else
      rows.push_back({std::to_string(s), "", std::to_string(cl.label), std::to_string(pred[k++])});
  }
  out_csv(r, "predictions.csv", {"sample", "point", "truth", "prediction"}, rows);
  r.manifest.extra["checkpoint_seed"] = info.seed;
  r.manifest.extra["test"] = metrics_json(res.report);
  log("OA " + num(res.report.overall_accuracy) + " mIoU " + num(res.report.mean_iou));
}

inline ModelSpec with_strategy(ModelSpec spec, graph::DilationStrategy s) {
  for (auto& st : spec.stages)
    if (st.dilation) st.dilation->strategy = s;
  return spec;
}

inline void cmd_bench(const io::Config& c, RunResult& r, const Log& log) {
  const ModelSpec base = io::load_model_spec(c.text("model.spec"));
  require(base.segmentation(), ErrorKind::validation, "bench-dilation needs a segmentation model spec");
  TrainConfig tc = train_config(c);
  const auto data = load_data(c, "bench-dilation", true, r.output_dir, r.manifest.artifacts);
  std::vector<io::CsvRow> rows;
  nlohmann::json means = nlohmann::json::object();
  for (const auto& name : c.text_list("bench.strategies")) {
    const auto strategy = graph::parse_strategy(name);
    double sum = 0;
    const auto seeds = c.int_list("bench.seeds");
    for (auto seed : seeds) {
      tc.seed = static_cast<std::uint64_t>(seed);
      auto model = build_model<float>(with_strategy(base, strategy), tc.seed);
      train(model, data.train, {}, tc);
      const double miou = evaluate(model, data.test, tc.batch_size).report.mean_iou;
      rows.push_back({name, std::to_string(seed), num(miou)});
      sum += miou;
      log(name + " seed " + std::to_string(seed) + " mIoU " + num(miou));
    }
    means[name] = sum / static_cast<double>(seeds.size());
  }
  out_csv(r, "bench_dilation.csv", {"strategy", "seed", "mIoU"}, rows);
  r.manifest.extra["mean_mIoU"] = means;
}

inline void cmd_diversity(const io::Config& c, RunResult& r, const Log& log) {
  auto model = io::load_checkpoint<float>(c.text("analyze.checkpoint"));
  const auto data = load_data(c, model.spec.segmentation() ? "train-seg" : "train-cls", false, r.output_dir,
                              r.manifest.artifacts);
  const auto mode = c.text("analyze.mean", "scalar") == "per_channel" ? DiversityMean::per_channel : DiversityMean::scalar;
  const auto rep = diversity_profile(model, data.test, static_cast<std::size_t>(c.integer("analyze.batch_size", 32)), mode);
  out_csv(r, "diversity.csv", kDiversityHeader, diversity_rows(rep));
  r.manifest.extra["modules"] = rep.modules();
  log("diversity over " + std::to_string(rep.modules()) + " modules");
}

inline void cmd_complexity(const io::Config& c, RunResult& r, const Log& log) {
  const ModelSpec spec = io::load_model_spec(c.text("model.spec"));
  const auto n = static_cast<std::size_t>(c.integer("complexity.points"));
  ComplexityReference ref;
  ref.params = c.real("complexity.reference_params", ref.params);
  ref.flops = c.real("complexity.reference_flops", ref.flops);
  const auto model = build_model<float>(spec, static_cast<std::uint64_t>(c.integer("run.seed")));
  const std::size_t params = count_params(model.store);
  const std::string report = complexity_report(spec, n, params, ref);
  {
    std::ofstream f(r.output_dir + "/complexity_report.txt");
    require(static_cast<bool>(f), ErrorKind::io, "cannot write complexity report");
    f << report;
  }
  r.manifest.artifacts.push_back("complexity_report.txt");
  const auto fr = count_flops(spec, n);
  std::vector<io::CsvRow> rows;
  for (const auto& l : fr.layers) rows.push_back({l.name, l.kind, std::to_string(l.flops)});
  out_csv(r, "complexity_layers.csv", {"layer", "kind", "flops"}, rows);
  r.manifest.extra["params"] = params;
  r.manifest.extra["network_flops"] = fr.network_flops();
  r.manifest.extra["search_flops"] = fr.search_flops();
  log(report);
}

inline void cmd_export(const io::Config& c, RunResult& r, const Log& log) {
  auto model = io::load_checkpoint<float>(c.text("export.checkpoint"));
  const auto cloud = io::load_cloud(c.text("export.cloud"), {static_cast<std::size_t>(c.integer("export.points", 0)),
                                                             static_cast<std::uint64_t>(c.integer("run.seed"))});
  NoGradGuard guard;
  NetworkTrace<float> trace;
  ForwardContext<float> ctx;
  ctx.trace = &trace;
  const auto batch = make_batch<float>({&cloud}, model.spec.input_width);
  const Tensor<float> logits = forward(model, batch, ctx);
  const auto stage = static_cast<std::size_t>(c.integer("export.stage", static_cast<long long>(model.spec.stages.size()) - 1));
  require(stage < trace.encoder_outputs.size(), ErrorKind::validation,
          "export.stage " + std::to_string(stage) + " exceeds the " + std::to_string(trace.encoder_outputs.size()) + " stages");
  const auto& f = trace.encoder_outputs[stage];
  const auto& p = trace.encoder_positions[stage];
  io::CsvRow header{"x", "y", "z"};
  for (std::size_t j = 0; j < f.dim(1); ++j) header.push_back("f" + std::to_string(j));
  std::vector<io::CsvRow> rows;
  for (std::size_t i = 0; i < f.dim(0); ++i) {
    io::CsvRow row{num(p.at(i, 0)), num(p.at(i, 1)), num(p.at(i, 2))};
    for (std::size_t j = 0; j < f.dim(1); ++j) row.push_back(num(f.at(i, j)));
    rows.push_back(std::move(row));
  }
  out_csv(r, "features.csv", header, rows);
  io::CsvRow lh{"row", "prediction"};
  for (std::size_t j = 0; j < logits.dim(1); ++j) lh.push_back("logit" + std::to_string(j));
  std::vector<io::CsvRow> lrows;
  const auto pred = argmax_rows(logits);
  for (std::size_t i = 0; i < logits.dim(0); ++i) {
    io::CsvRow row{std::to_string(i), std::to_string(pred[i])};
    for (std::size_t j = 0; j < logits.dim(1); ++j) row.push_back(num(logits.at(i, j)));
    lrows.push_back(std::move(row));
  }
  out_csv(r, "logits.csv", lh, lrows);
  r.manifest.extra["stage"] = stage;
  r.manifest.extra["points"] = cloud.size();
  log("exported " + std::to_string(f.dim(0)) + " x " + std::to_string(f.dim(1)) + " features");
}

}  // namespace detail

/// Runs one command from a resolved document. Writes every artifact and the
/// manifest into run.output_dir.
inline RunResult run_command(const std::string& cmd, const io::KvDoc& doc, const fs::path& base, const Log& log = {}) {
  const io::Config c = validate_run(cmd, doc, base);
  const Log say = log ? log : [](const std::string&) {};
  RunResult r;
  r.output_dir = c.text("run.output_dir");
  std::error_code ec;
  fs::create_directories(r.output_dir, ec);
  require(!ec && fs::is_directory(r.output_dir), ErrorKind::io, "cannot create output directory '" + r.output_dir + "'");
  r.manifest.command = cmd;
  r.manifest.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  r.manifest.strict_deterministic = c.boolean("run.strict_deterministic", true);
  r.manifest.config = io::config_echo(c.doc());
  if (cmd == "train-cls" || cmd == "train-seg")
    detail::cmd_train(c, cmd, r, say);
  else if (cmd == "eval")
    detail::cmd_eval(c, r, say);
  else if (cmd == "bench-dilation")
    detail::cmd_bench(c, r, say);
  else if (cmd == "analyze-diversity")
    detail::cmd_diversity(c, r, say);
  else if (cmd == "count-complexity")
    detail::cmd_complexity(c, r, say);
  else
    detail::cmd_export(c, r, say);
  io::write_manifest(r.output_dir + "/manifest.json", r.manifest);
  return r;
}

/// Exit status per error category, so scripts can tell failures apart.
inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation: return 2;
    case ErrorKind::parse: return 3;
    case ErrorKind::io: return 4;
    case ErrorKind::bad_magic: return 5;
    case ErrorKind::divergence: return 6;
    default: return 1;
  }
}

}  // namespace pointvig::cli
