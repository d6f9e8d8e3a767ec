// spk: scene parsing benchmark toolkit CLI.
//
// Every subcommand echoes its resolved configuration to run.json in the
// output directory; identical config and inputs produce byte-identical
// outputs. Exit codes: 0 success, 2 validation failure, 3 I/O failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spk/spk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format6(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::string format6(std::optional<double> value) {
  return value ? format6(*value) : "n/a";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw spk::IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_json_file(const fs::path& path, const json& doc) {
  spk::write_text_file(path, spk::dump_json_fixed(doc) + "\n");
}

void write_run_json(const fs::path& out_dir, const std::string& subcommand,
                    json config) {
  write_json_file(out_dir / "run.json",
                  json{{"schema_version", spk::kSchemaVersion},
                       {"tool", "spk"},
                       {"version", spk::kVersion},
                       {"subcommand", subcommand},
                       {"config", std::move(config)}});
}

std::vector<spk::LabelId> parse_id_list(const std::string& csv) {
  std::vector<spk::LabelId> ids;
  std::stringstream in(csv);
  std::string field;
  while (std::getline(in, field, ',')) {
    if (field.empty()) continue;
    try {
      ids.push_back(spk::LabelId(std::stoul(field)));
    } catch (const std::exception&) {
      throw spk::ValidationError("bad id '" + field + "' in list '" + csv + "'");
    }
  }
  return ids;
}

std::vector<spk::LabelId> load_benchmark_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw spk::IoError("cannot open benchmark file " + path.string());
  std::vector<spk::LabelId> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      ids.push_back(spk::LabelId(std::stoul(line)));
    } catch (const std::exception&) {
      throw spk::ValidationError("bad label id '" + line + "' in " + path.string());
    }
  }
  if (ids.empty()) throw spk::ValidationError("benchmark file lists no labels");
  return ids;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string gt_dir, pred_dir, taxonomy_path, out_dir, benchmark_path;
  std::size_t shards = 1;
  bool lenient = false;
};

void run_eval(const EvalArgs& args) {
  spk::Taxonomy taxonomy = spk::Taxonomy::load_tsv_file(args.taxonomy_path);

  std::vector<spk::LabelId> benchmark;
  if (!args.benchmark_path.empty()) {
    benchmark = load_benchmark_file(args.benchmark_path);
    for (spk::LabelId id : benchmark) {
      if (!taxonomy.contains(id)) {
        throw spk::ValidationError("benchmark label " + std::to_string(id) +
                                   " not in the taxonomy");
      }
    }
  } else {
    for (spk::LabelId id = 1; id <= taxonomy.label_count(); ++id) {
      benchmark.push_back(id);
    }
  }
  std::size_t num_classes = benchmark.size();
  spk::LabelRemap class_map(taxonomy.dictionary_size());
  for (spk::LabelId id = 1; id < taxonomy.dictionary_size(); ++id) {
    class_map.set(id, spk::kVoidLabel);
  }
  for (std::size_t i = 0; i < benchmark.size(); ++i) {
    class_map.set(benchmark[i], spk::LabelId(i + 1));
  }

  // pair gt and pred mask files by filename
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(args.gt_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.ends_with(".pgm") && !name.ends_with("_inst.pgm")) {
      names.push_back(name);
    }
  }
  std::sort(names.begin(), names.end());
  std::vector<std::string> missing;
  std::vector<std::string> paired;
  for (const std::string& name : names) {
    if (fs::exists(fs::path(args.pred_dir) / name)) {
      paired.push_back(name);
    } else {
      missing.push_back(name);
    }
  }
  if (!missing.empty() && !args.lenient) {
    std::string listed;
    for (const auto& m : missing) listed += " " + m;
    throw spk::ValidationError("prediction missing for" + listed);
  }
  if (paired.empty()) throw spk::ValidationError("no ground-truth/prediction pairs");

  auto shard_states = spk::run_sharded<spk::ConfusionMatrix>(
      paired.size(), args.shards, [&](std::size_t begin, std::size_t end) {
        spk::ConfusionMatrix cm(num_classes);
        for (std::size_t i = begin; i < end; ++i) {
          spk::LabelMask gt = spk::read_mask_file(fs::path(args.gt_dir) / paired[i]);
          spk::LabelMask pred =
              spk::read_mask_file(fs::path(args.pred_dir) / paired[i]);
          spk::check_labels(gt, taxonomy.dictionary_size(), paired[i]);
          spk::check_labels(pred, taxonomy.dictionary_size(), paired[i]);
          spk::accumulate(cm, gt, pred, class_map);
        }
        return cm;
      });
  spk::ConfusionMatrix cm(num_classes);
  for (const auto& shard : shard_states) cm.merge(shard);

  spk::MetricsReport report = spk::build_report(cm);
  json doc = spk::report_to_json(report);
  doc["images"] = paired.size();
  doc["missing_pairs"] = missing;
  doc["matrix_scope"] = "dataset-global";

  // stuff/discrete split from the taxonomy's macro classes
  std::set<std::size_t> stuff_idx, object_idx;
  for (std::size_t i = 0; i < benchmark.size(); ++i) {
    if (taxonomy.macro(benchmark[i]) == spk::MacroClass::Stuff) {
      stuff_idx.insert(i + 1);
    } else {
      object_idx.insert(i + 1);
    }
  }
  auto [stuff_metrics, object_metrics] = spk::split_report(cm, stuff_idx, object_idx);
  auto split_json = [](const spk::SplitMetrics& m) {
    return json{{"classes", m.class_count},
                {"mean_accuracy", spk::json_number(m.mean_accuracy)},
                {"mean_iou", spk::json_number(m.mean_iou)}};
  };
  doc["splits"] = {{"stuff", split_json(stuff_metrics)},
                   {"object", split_json(object_metrics)}};

  ensure_dir(args.out_dir);
  write_json_file(fs::path(args.out_dir) / "report.json", doc);

  std::string tsv = "# class_index\tlabel_id\tname\tgt_pixels\taccuracy\tiou\n";
  for (std::size_t i = 1; i <= num_classes; ++i) {
    spk::LabelId label = benchmark[i - 1];
    tsv += std::to_string(i) + "\t" + std::to_string(label) + "\t" +
           taxonomy.name(label) + "\t" + std::to_string(cm.gt_pixels(i)) + "\t" +
           format6(report.per_class_accuracy[i]) + "\t" +
           format6(report.per_class_iou[i]) + "\n";
  }
  spk::write_text_file(fs::path(args.out_dir) / "per_class.tsv", tsv);

  write_run_json(args.out_dir, "eval",
                 json{{"gt", args.gt_dir},
                      {"pred", args.pred_dir},
                      {"taxonomy", args.taxonomy_path},
                      {"benchmark", args.benchmark_path},
                      {"classes", num_classes},
                      {"shards", args.shards},
                      {"lenient", args.lenient}});
  std::cout << "eval: " << paired.size() << " pairs, pixel accuracy "
            << format6(report.pixel_accuracy) << ", mean IoU "
            << format6(report.mean_iou) << "\n";
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string corpus_dir, taxonomy_path, out_dir, order_log_path;
  std::size_t shards = 1;
  std::size_t mode_grid = spk::kModeGridSize;
  std::size_t window = 1000;
};

struct StatsShard {
  spk::CorpusStats stats;
  spk::ModeAccumulator mode;
  StatsShard() : mode(1) {}
  explicit StatsShard(std::size_t grid) : mode(grid) {}
};

void run_stats(const StatsArgs& args) {
  spk::Taxonomy taxonomy = spk::Taxonomy::load_tsv_file(args.taxonomy_path);
  auto ids = spk::list_corpus_ids(args.corpus_dir);
  if (ids.empty()) throw spk::ValidationError("corpus holds no records");
  auto scenes = spk::load_scenes(args.corpus_dir);

  auto shard_states = spk::run_sharded<StatsShard>(
      ids.size(), args.shards, [&](std::size_t begin, std::size_t end) {
        StatsShard shard(args.mode_grid);
        for (std::size_t i = begin; i < end; ++i) {
          spk::ImageRecord record =
              spk::read_record(args.corpus_dir, ids[i], scenes);
          spk::check_labels(record.labels, taxonomy.dictionary_size(), record.id);
          shard.stats.add(record);
          shard.mode.add(record.labels);
        }
        return shard;
      });
  spk::CorpusStats stats;
  spk::ModeAccumulator mode_acc(args.mode_grid);
  for (const auto& shard : shard_states) {
    stats.merge(shard.stats);
    mode_acc.merge(shard.mode);
  }

  spk::LabelMask mode = mode_acc.mode();
  // second pass for mode accuracy keeps at most one mask resident
  double acc_sum = 0.0;
  std::size_t acc_n = 0;
  for (const std::string& id : ids) {
    spk::LabelMask mask =
        spk::read_mask_file(fs::path(args.corpus_dir) / (id + "_seg.pgm"));
    if (auto acc = spk::mode_image_accuracy(mode, mask)) {
      acc_sum += *acc;
      ++acc_n;
    }
  }
  std::optional<double> mode_accuracy;
  if (acc_n > 0) mode_accuracy = acc_sum / double(acc_n);

  auto ranking = spk::frequency_ranking(stats.instance_counts());
  spk::SummaryRow summary = spk::summary_table(stats);
  spk::PerImageHistograms histograms = spk::per_image_histograms(stats);

  json zipf = nullptr;
  try {
    spk::ZipfFit fit = spk::zipf_fit(ranking);
    zipf = json{{"exponent", spk::json_number(fit.exponent)},
                {"intercept", spk::json_number(fit.intercept)},
                {"r_squared", spk::json_number(fit.r_squared)},
                {"ranks_used", fit.ranks_used},
                {"count_floor", fit.count_floor}};
  } catch (const spk::ValidationError&) {
    // too few ranks; reported as null
  }

  // growth curves from the corpus scan order, or a supplied labeling order
  std::vector<std::pair<std::uint32_t, spk::LabelId>> order_log;
  std::string order_source = "corpus-scan-order";
  if (!args.order_log_path.empty()) {
    std::ifstream in(args.order_log_path);
    if (!in) throw spk::IoError("cannot open order log " + args.order_log_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream fields(line);
      std::uint32_t inst;
      spk::LabelId label;
      char tab;
      if (!(fields >> inst >> std::noskipws >> tab >> std::skipws >> label)) {
        throw spk::ValidationError("bad order log row: " + line);
      }
      order_log.emplace_back(inst, label);
    }
    order_source = args.order_log_path;
  } else {
    order_log = stats.order_log();
  }

  ensure_dir(args.out_dir);
  if (!order_log.empty()) {
    spk::GrowthCurves curves = spk::growth_curves(order_log, args.window);
    std::size_t step = std::max<std::size_t>(1, order_log.size() / 10000);
    std::string tsv = "# n\tclasses\tp_new\n";
    for (std::size_t i = 0; i < order_log.size(); i += step) {
      tsv += std::to_string(i + 1) + "\t" +
             std::to_string(curves.classes_after[i]) + "\t" +
             format6(curves.new_class_probability[i]) + "\n";
    }
    spk::write_text_file(fs::path(args.out_dir) / "growth.tsv", tsv);
  }

  json doc{{"schema_version", spk::kSchemaVersion},
           {"images", stats.images()},
           {"summary",
            {{"images", summary.images},
             {"object_instances", summary.object_instances},
             {"object_classes", summary.object_classes},
             {"part_instances", summary.part_instances},
             {"part_classes", summary.part_classes},
             {"mean_classes_per_image",
              spk::json_number(summary.mean_classes_per_image)}}},
           {"per_image_means",
            {{"instances", spk::json_number(histograms.instances.mean)},
             {"classes", spk::json_number(histograms.classes.mean)}}},
           {"per_image_extremes",
            {{"min_instances", histograms.instances.min},
             {"max_instances", histograms.instances.max}}},
           {"zipf", zipf},
           {"mode",
            {{"grid", args.mode_grid},
             {"accuracy", spk::json_number(mode_accuracy)}}},
           {"order_log_source", order_source}};
  write_json_file(fs::path(args.out_dir) / "stats.json", doc);

  std::string ranking_tsv =
      "# rank\tlabel_id\tname\tinstances\tpixels\tscene_spread\tpart_spread\n";
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    spk::LabelId label = ranking[r].first;
    std::uint64_t pixels = 0;
    if (auto it = stats.pixel_counts().find(label);
        it != stats.pixel_counts().end()) {
      pixels = it->second;
    }
    ranking_tsv += std::to_string(r + 1) + "\t" + std::to_string(label) + "\t" +
                   (taxonomy.contains(label) ? taxonomy.name(label) : "?") +
                   "\t" + std::to_string(ranking[r].second) + "\t" +
                   std::to_string(pixels) + "\t" +
                   std::to_string(stats.scene_spread(label)) + "\t" +
                   std::to_string(stats.part_spread(label)) + "\n";
  }
  spk::write_text_file(fs::path(args.out_dir) / "ranking.tsv", ranking_tsv);

  auto histogram_tsv = [](const spk::Histogram& h) {
    std::string tsv = "# value\tcount\n";
    for (const auto& [value, count] : h.buckets) {
      tsv += std::to_string(value) + "\t" + std::to_string(count) + "\n";
    }
    return tsv;
  };
  spk::write_text_file(fs::path(args.out_dir) / "histogram_instances.tsv",
                       histogram_tsv(histograms.instances));
  spk::write_text_file(fs::path(args.out_dir) / "histogram_classes.tsv",
                       histogram_tsv(histograms.classes));
  spk::write_mask_file(fs::path(args.out_dir) / "mode.pgm", mode);

  write_run_json(args.out_dir, "stats",
                 json{{"corpus", args.corpus_dir},
                      {"taxonomy", args.taxonomy_path},
                      {"order_log", args.order_log_path},
                      {"mode_grid", args.mode_grid},
                      {"window", args.window},
                      {"shards", args.shards}});
  std::cout << "stats: " << stats.images() << " images, "
            << summary.object_instances << " instances, "
            << summary.object_classes << " classes\n";
}

// ---------------------------------------------------------------------------
// consistency

struct ConsistencyArgs {
  std::string dir_a, dir_b, taxonomy_path, out_dir;
  double tau = spk::kDefaultMatchIou;
  bool lenient = false;
};

void run_consistency(const ConsistencyArgs& args) {
  spk::Taxonomy taxonomy = spk::Taxonomy::load_tsv_file(args.taxonomy_path);
  auto ids_a = spk::list_corpus_ids(args.dir_a);
  auto ids_b = spk::list_corpus_ids(args.dir_b);
  std::vector<std::string> ids;
  std::vector<std::string> unpaired;
  std::set<std::string> set_b(ids_b.begin(), ids_b.end());
  for (const auto& id : ids_a) {
    if (set_b.count(id)) {
      ids.push_back(id);
    } else {
      unpaired.push_back(id);
    }
  }
  for (const auto& id : ids_b) {
    if (!std::binary_search(ids_a.begin(), ids_a.end(), id)) {
      unpaired.push_back(id);
    }
  }
  if (!unpaired.empty() && !args.lenient) {
    throw spk::ValidationError("annotation sets differ; first unpaired id: " +
                               unpaired.front());
  }
  if (ids.empty()) throw spk::ValidationError("no paired annotations");

  spk::ConsistencyReport report;
  for (const std::string& id : ids) {
    spk::ImageRecord a = spk::read_record(args.dir_a, id);
    spk::ImageRecord b = spk::read_record(args.dir_b, id);
    spk::check_labels(a.labels, taxonomy.dictionary_size(), id);
    spk::check_labels(b.labels, taxonomy.dictionary_size(), id);
    report.add({id, spk::compare_annotations(a.labels, a.instances, b.labels,
                                             b.instances, args.tau)});
  }
  json doc = spk::consistency_report_to_json(report);
  doc["unpaired"] = unpaired;
  doc["tau"] = spk::json_number(args.tau);

  ensure_dir(args.out_dir);
  write_json_file(fs::path(args.out_dir) / "consistency.json", doc);
  write_run_json(args.out_dir, "consistency",
                 json{{"a", args.dir_a},
                      {"b", args.dir_b},
                      {"taxonomy", args.taxonomy_path},
                      {"tau", spk::json_number(args.tau)},
                      {"lenient", args.lenient}});
  spk::ConsistencyFractions f = spk::fractions(report.corpus);
  std::cout << "consistency: " << ids.size() << " pairs, agreement "
            << format6(f.agreement) << "\n";
}

// ---------------------------------------------------------------------------
// fuse

struct FuseArgs {
  std::string stuff_path, objects_path, streams_path, out_dir;
  std::string mode = "hard";
};

void run_fuse(const FuseArgs& args) {
  auto mode = spk::parse_fusion_mode(args.mode);
  if (!mode) throw spk::ValidationError("fusion mode must be hard or soft");
  spk::StreamSpec spec = spk::StreamSpec::load_tsv_file(args.streams_path);
  spk::ScoreMap stuff = spk::read_scoremap_file(args.stuff_path);
  spk::ScoreMap objects = spk::read_scoremap_file(args.objects_path);
  spk::validate_scores(stuff);
  spk::validate_scores(objects);
  spk::LabelMask fused = spk::fuse_scene(stuff, objects, spec, *mode);
  spk::ScoreMap fg = spk::objectness(stuff, spec);

  ensure_dir(args.out_dir);
  spk::write_mask_file(fs::path(args.out_dir) / "fused.pgm", fused);
  spk::write_scoremap_file(fs::path(args.out_dir) / "objectness.scr", fg);
  write_run_json(args.out_dir, "fuse",
                 json{{"stuff", args.stuff_path},
                      {"objects", args.objects_path},
                      {"streams", args.streams_path},
                      {"mode", args.mode}});
  std::cout << "fuse: " << fused.height() << "x" << fused.width() << " scene ("
            << args.mode << " mode)\n";
}

// ---------------------------------------------------------------------------
// parts

struct PartsArgs {
  std::string scene_path, streams_path, out_dir, objects_path;
  std::vector<std::string> part_scores;
  double theta = spk::kDefaultPartThreshold;
};

void run_parts(const PartsArgs& args) {
  spk::StreamSpec spec = spk::StreamSpec::load_tsv_file(args.streams_path);
  spk::LabelMask scene = spk::read_mask_file(args.scene_path);
  spk::ScoreMap object_scores;
  if (!args.objects_path.empty()) {
    object_scores = spk::read_scoremap_file(args.objects_path);
  } else {
    object_scores = spk::ScoreMap(scene.height(), scene.width(), 1, 0.0f);
  }
  std::map<spk::LabelId, spk::ScoreMap> part_scores;
  for (const std::string& entry : args.part_scores) {
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw spk::ValidationError("--part-scores expects <object_id>=<path>, got " +
                                 entry);
    }
    spk::LabelId object;
    try {
      object = spk::LabelId(std::stoul(entry.substr(0, eq)));
    } catch (const std::exception&) {
      throw spk::ValidationError("bad object id in --part-scores " + entry);
    }
    part_scores.emplace(object, spk::read_scoremap_file(entry.substr(eq + 1)));
  }
  spk::PartSegmentation result =
      spk::segment_parts(object_scores, scene, part_scores, spec, args.theta);

  ensure_dir(args.out_dir);
  spk::write_mask_file(fs::path(args.out_dir) / "parts.pgm", result.parts);
  json doc{{"schema_version", spk::kSchemaVersion},
           {"missing_scores", result.missing_scores},
           {"theta", spk::json_number(args.theta)}};
  write_json_file(fs::path(args.out_dir) / "parts_report.json", doc);
  write_run_json(args.out_dir, "parts",
                 json{{"scene", args.scene_path},
                      {"streams", args.streams_path},
                      {"objects", args.objects_path},
                      {"part_scores", args.part_scores},
                      {"theta", spk::json_number(args.theta)}});
  std::cout << "parts: wrote part mask";
  if (!result.missing_scores.empty()) {
    std::cout << " (" << result.missing_scores.size()
              << " objects lacked score maps)";
  }
  std::cout << "\n";
}

// ---------------------------------------------------------------------------
// merge

struct MergeArgs {
  std::string mask_path, taxonomy_path, out_dir, levels = "0";
};

void run_merge(const MergeArgs& args) {
  spk::Taxonomy taxonomy = spk::Taxonomy::load_tsv_file(args.taxonomy_path);
  spk::LabelMask scene = spk::read_mask_file(args.mask_path);
  spk::check_labels(scene, taxonomy.dictionary_size(), args.mask_path);
  std::vector<std::size_t> levels;
  for (spk::LabelId level : parse_id_list(args.levels)) {
    levels.push_back(level);
  }
  if (levels.empty()) throw spk::ValidationError("no merge levels given");
  std::sort(levels.begin(), levels.end());
  auto merged = spk::hierarchical_output(scene, taxonomy, levels);

  ensure_dir(args.out_dir);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    spk::write_mask_file(
        fs::path(args.out_dir) / ("merged_level" + std::to_string(levels[i]) + ".pgm"),
        merged[i]);
  }
  write_run_json(args.out_dir, "merge",
                 json{{"mask", args.mask_path},
                      {"taxonomy", args.taxonomy_path},
                      {"levels", levels}});
  std::cout << "merge: wrote " << levels.size() << " level(s)\n";
}

// ---------------------------------------------------------------------------
// removal

struct RemovalArgs {
  std::string image_path, scores_path, streams_path, out_dir, targets;
  double theta = 0.5;
  std::size_t radius = 3;
  std::size_t iterations = spk::kDefaultInpaintIterations;
};

void run_removal(const RemovalArgs& args) {
  spk::StreamSpec spec = spk::StreamSpec::load_tsv_file(args.streams_path);
  spk::RgbImage image = spk::read_image(spk::read_file(args.image_path));
  spk::ScoreMap scores = spk::read_scoremap_file(args.scores_path);
  spk::validate_scores(scores);
  if (scores.height() != image.height() || scores.width() != image.width()) {
    throw spk::ValidationError("score map and image dimensions differ");
  }
  spk::RemovalRequest request;
  for (spk::LabelId id : parse_id_list(args.targets)) request.targets.insert(id);
  if (request.targets.empty()) throw spk::ValidationError("no target labels");
  request.threshold = args.theta;
  request.dilation = args.radius;
  spk::ByteMask hole =
      spk::removal_mask(scores, spec.object_ids(), request);
  spk::RgbImage filled = spk::inpaint(image, hole, args.iterations);

  ensure_dir(args.out_dir);
  spk::Grid<std::uint32_t> hole16(hole.height(), hole.width());
  for (std::size_t i = 0; i < hole.size(); ++i) hole16[i] = hole[i] ? 65535 : 0;
  spk::write_mask_file(fs::path(args.out_dir) / "hole.pgm", hole16);
  spk::write_file(fs::path(args.out_dir) / "inpainted.ppm",
                  spk::write_image(filled));
  write_run_json(args.out_dir, "removal",
                 json{{"image", args.image_path},
                      {"scores", args.scores_path},
                      {"streams", args.streams_path},
                      {"targets", args.targets},
                      {"theta", spk::json_number(args.theta)},
                      {"radius", args.radius},
                      {"iterations", args.iterations}});
  std::size_t removed = 0;
  for (std::size_t i = 0; i < hole.size(); ++i) removed += hole[i];
  std::cout << "removal: filled " << removed << " pixels\n";
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out_dir;
  spk::SyntheticSceneSpec spec;
  bool no_photos = false;
};

void run_synth(const SynthArgs& args) {
  spk::SyntheticGenerator generator(args.spec);
  ensure_dir(args.out_dir);
  fs::path out(args.out_dir);
  std::map<std::string, std::string> scenes;
  spk::SyntheticManifest manifest =
      generator.generate_all([&](const spk::SyntheticImage& image) {
        spk::write_record(out, image.record);
        if (!args.no_photos) {
          spk::write_file(out / (image.record.id + ".ppm"),
                          spk::write_image(image.photo));
        }
        scenes[image.record.id] = image.record.scene;
      });
  spk::save_scenes(out, scenes);
  spk::write_text_file(out / "taxonomy.tsv", generator.make_taxonomy().to_tsv());
  spk::write_text_file(out / "streams.tsv", generator.make_stream_spec().to_tsv());
  write_json_file(out / "manifest.json", spk::manifest_to_json(manifest));
  write_run_json(args.out_dir, "synth",
                 json{{"out", args.out_dir},
                      {"grid", args.spec.grid},
                      {"vocabulary", args.spec.vocabulary},
                      {"zipf_exponent", spk::json_number(args.spec.zipf_exponent)},
                      {"min_instances", args.spec.min_instances},
                      {"max_instances", args.spec.max_instances},
                      {"stuff_ratio", spk::json_number(args.spec.stuff_ratio)},
                      {"part_probability", spk::json_number(args.spec.part_probability)},
                      {"part_classes", args.spec.part_classes},
                      {"scene_categories", args.spec.scene_categories},
                      {"images", args.spec.images},
                      {"seed", args.spec.seed},
                      {"no_photos", args.no_photos}});
  std::cout << "synth: wrote " << args.spec.images << " images to "
            << args.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// import-ade20k

struct ImportArgs {
  std::string release_dir, out_dir;
  std::size_t min_side = 0;  // 0 keeps original sizes
  bool lenient = false;
};

// Larger-than-min-side rasters shrink so the shorter side lands exactly on
// min_side, nearest-neighbor for labels and instances alike.
void rescale_record(spk::ImageRecord& record, std::size_t min_side) {
  std::size_t h = record.labels.height();
  std::size_t w = record.labels.width();
  if (std::min(h, w) <= min_side) return;
  std::size_t nh, nw;
  if (h <= w) {
    nh = min_side;
    nw = std::size_t(std::llround(double(w) * double(min_side) / double(h)));
  } else {
    nw = min_side;
    nh = std::size_t(std::llround(double(h) * double(min_side) / double(w)));
  }
  record.labels = spk::resize_nearest(record.labels, nh, nw);
  record.instances = spk::resize_nearest(record.instances, nh, nw);
  for (spk::PartLevel& part : record.parts) {
    part.labels = spk::resize_nearest(part.labels, nh, nw);
    part.instances = spk::resize_nearest(part.instances, nh, nw);
  }
}

void run_import(const ImportArgs& args) {
  spk::Ade20kImporter importer(args.release_dir, {.strict = !args.lenient});
  ensure_dir(args.out_dir);
  fs::path out(args.out_dir);
  std::map<std::string, std::string> scenes;
  std::size_t imported = 0, train = 0, val = 0, rescaled = 0;
  while (auto record = importer.next()) {
    if (args.min_side > 0) {
      std::size_t before = record->labels.height();
      rescale_record(*record, args.min_side);
      if (record->labels.height() != before) ++rescaled;
    }
    spk::write_record(out, *record);
    scenes[record->id] = record->scene;
    ++imported;
    if (record->id.find("train") != std::string::npos) ++train;
    if (record->id.find("val") != std::string::npos) ++val;
  }
  if (imported > 0) spk::save_scenes(out, scenes);
  json errors = json::array();
  for (const auto& e : importer.errors()) {
    errors.push_back({{"path", e.path.string()}, {"message", e.message}});
  }
  write_json_file(out / "import.json",
                  json{{"schema_version", spk::kSchemaVersion},
                       {"discovered", importer.discovered()},
                       {"imported", imported},
                       {"train_records", train},
                       {"val_records", val},
                       {"rescaled_records", rescaled},
                       {"min_side", args.min_side},
                       {"rescale_filter", "nearest-neighbor"},
                       {"errors", errors}});
  write_run_json(args.out_dir, "import-ade20k",
                 json{{"release", args.release_dir},
                      {"out", args.out_dir},
                      {"min_side", args.min_side},
                      {"lenient", args.lenient}});
  std::cout << "import-ade20k: " << imported << " of " << importer.discovered()
            << " records (" << train << " train, " << val << " val)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spk: scene parsing benchmark toolkit"};
  app.require_subcommand(1);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--gt", eval_args.gt_dir, "ground-truth mask directory")->required();
  eval->add_option("--pred", eval_args.pred_dir, "prediction mask directory")->required();
  eval->add_option("--taxonomy", eval_args.taxonomy_path, "taxonomy TSV")->required();
  eval->add_option("--out", eval_args.out_dir, "output directory")->required();
  eval->add_option("--benchmark", eval_args.benchmark_path,
                   "file listing benchmark label ids, one per line");
  eval->add_option("--shards", eval_args.shards, "parallel shards");
  eval->add_flag("--lenient", eval_args.lenient, "skip unpaired masks instead of aborting");
  eval->callback([&] { run_eval(eval_args); });

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "corpus statistics and mode segmentation");
  stats->add_option("--corpus", stats_args.corpus_dir, "corpus directory")->required();
  stats->add_option("--taxonomy", stats_args.taxonomy_path, "taxonomy TSV")->required();
  stats->add_option("--out", stats_args.out_dir, "output directory")->required();
  stats->add_option("--order-log", stats_args.order_log_path,
                    "labeling-order TSV (instance<TAB>label) for growth curves");
  stats->add_option("--mode-grid", stats_args.mode_grid, "mode segmentation grid");
  stats->add_option("--window", stats_args.window, "new-class probability window");
  stats->add_option("--shards", stats_args.shards, "parallel shards");
  stats->callback([&] { run_stats(stats_args); });

  ConsistencyArgs consistency_args;
  auto* consistency =
      app.add_subcommand("consistency", "agreement between two annotation rounds");
  consistency->add_option("--a", consistency_args.dir_a, "first annotation directory")->required();
  consistency->add_option("--b", consistency_args.dir_b, "second annotation directory")->required();
  consistency->add_option("--taxonomy", consistency_args.taxonomy_path, "taxonomy TSV")->required();
  consistency->add_option("--out", consistency_args.out_dir, "output directory")->required();
  consistency->add_option("--tau", consistency_args.tau, "segment match IoU threshold");
  consistency->add_flag("--lenient", consistency_args.lenient, "skip unpaired ids");
  consistency->callback([&] { run_consistency(consistency_args); });

  FuseArgs fuse_args;
  auto* fuse = app.add_subcommand("fuse", "merge stuff and object streams into a scene");
  fuse->add_option("--stuff", fuse_args.stuff_path, "stuff stream score map")->required();
  fuse->add_option("--objects", fuse_args.objects_path, "object stream score map")->required();
  fuse->add_option("--streams", fuse_args.streams_path, "stream spec TSV")->required();
  fuse->add_option("--out", fuse_args.out_dir, "output directory")->required();
  fuse->add_option("--mode", fuse_args.mode, "fusion mode: hard or soft");
  fuse->callback([&] { run_fuse(fuse_args); });

  PartsArgs parts_args;
  auto* parts = app.add_subcommand("parts", "segment parts on a fused scene");
  parts->add_option("--scene", parts_args.scene_path, "fused scene mask")->required();
  parts->add_option("--streams", parts_args.streams_path, "stream spec TSV")->required();
  parts->add_option("--out", parts_args.out_dir, "output directory")->required();
  parts->add_option("--objects", parts_args.objects_path, "object stream score map");
  parts->add_option("--part-scores", parts_args.part_scores,
                    "per-object part score maps, <object_id>=<path>");
  parts->add_option("--theta", parts_args.theta, "part acceptance threshold");
  parts->callback([&] { run_parts(parts_args); });

  MergeArgs merge_args;
  auto* merge = app.add_subcommand("merge", "hypernym-merge a mask at tree levels");
  merge->add_option("--mask", merge_args.mask_path, "input mask")->required();
  merge->add_option("--taxonomy", merge_args.taxonomy_path, "taxonomy TSV")->required();
  merge->add_option("--out", merge_args.out_dir, "output directory")->required();
  merge->add_option("--levels", merge_args.levels, "comma-separated tree levels");
  merge->callback([&] { run_merge(merge_args); });

  RemovalArgs removal_args;
  auto* removal = app.add_subcommand("removal", "remove target objects and inpaint");
  removal->add_option("--image", removal_args.image_path, "input PPM image")->required();
  removal->add_option("--scores", removal_args.scores_path, "object score map")->required();
  removal->add_option("--streams", removal_args.streams_path, "stream spec TSV")->required();
  removal->add_option("--targets", removal_args.targets, "comma-separated target label ids")->required();
  removal->add_option("--out", removal_args.out_dir, "output directory")->required();
  removal->add_option("--theta", removal_args.theta, "score threshold");
  removal->add_option("--radius", removal_args.radius, "dilation radius");
  removal->add_option("--iterations", removal_args.iterations, "diffusion iteration cap");
  removal->callback([&] { run_removal(removal_args); });

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic oracle corpus");
  synth->add_option("--out", synth_args.out_dir, "output directory")->required();
  synth->add_option("--images", synth_args.spec.images, "number of images");
  synth->add_option("--grid", synth_args.spec.grid, "image side length");
  synth->add_option("--vocabulary", synth_args.spec.vocabulary, "scene-level classes");
  synth->add_option("--zipf", synth_args.spec.zipf_exponent, "Zipf exponent");
  synth->add_option("--min-instances", synth_args.spec.min_instances, "per image");
  synth->add_option("--max-instances", synth_args.spec.max_instances, "per image");
  synth->add_option("--stuff-ratio", synth_args.spec.stuff_ratio, "stuff fraction");
  synth->add_option("--part-classes", synth_args.spec.part_classes, "part vocabulary");
  synth->add_option("--part-probability", synth_args.spec.part_probability,
                    "chance an object instance carries a part");
  synth->add_option("--scenes", synth_args.spec.scene_categories, "scene categories");
  synth->add_option("--seed", synth_args.spec.seed, "random seed");
  synth->add_flag("--no-photos", synth_args.no_photos, "skip PPM rendering");
  synth->callback([&] { run_synth(synth_args); });

  ImportArgs import_args;
  auto* import_cmd = app.add_subcommand("import-ade20k", "import a release tree");
  import_cmd->add_option("--release", import_args.release_dir, "release root")->required();
  import_cmd->add_option("--out", import_args.out_dir, "output directory")->required();
  import_cmd->add_option("--min-side", import_args.min_side,
                         "shrink larger rasters so the short side hits this "
                         "(nearest-neighbor; 0 keeps original sizes)");
  import_cmd->add_flag("--lenient", import_args.lenient, "skip bad records with a log");
  import_cmd->callback([&] { run_import(import_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const spk::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const spk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
