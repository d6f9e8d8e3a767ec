// End-to-end checks of the CLI binary. CTest exports SPK_CLI_BIN; when the
// suite runs without it these tests are skipped.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "spk/spk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_bin() { return std::getenv("SPK_CLI_BIN"); }

int run_cli(const std::string& args) {
  std::string cmd = std::string(cli_bin()) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::current_path() / "cli_scratch" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return json::parse(in);
}

}  // namespace

TEST_CASE("cli: synth, eval on itself, stats, consistency, merge") {
  if (!cli_bin()) {
    WARN("SPK_CLI_BIN not set; skipping CLI tests");
    return;
  }
  fs::path root = scratch("pipeline");
  fs::path corpus = root / "corpus";
  std::string synth_flags = " --images 6 --grid 32 --vocabulary 12"
                            " --min-instances 3 --max-instances 6"
                            " --part-classes 2 --seed 5";
  REQUIRE(run_cli("synth --out " + corpus.string() + synth_flags) == 0);
  REQUIRE(fs::exists(corpus / "manifest.json"));
  REQUIRE(fs::exists(corpus / "taxonomy.tsv"));
  REQUIRE(fs::exists(corpus / "run.json"));

  SECTION("eval with pred == gt scores 1.0 everywhere") {
    fs::path out = root / "eval";
    REQUIRE(run_cli("eval --gt " + corpus.string() + " --pred " + corpus.string() +
                    " --taxonomy " + (corpus / "taxonomy.tsv").string() +
                    " --out " + out.string()) == 0);
    json report = load_json(out / "report.json");
    CHECK(report["pixel_accuracy"] == 1.0);
    CHECK(report["mean_accuracy"] == 1.0);
    CHECK(report["mean_iou"] == 1.0);
    CHECK(report["weighted_iou"] == 1.0);
    CHECK(report["challenge_score"] == 1.0);
    CHECK(report["splits"]["stuff"]["mean_iou"] == 1.0);
  }

  SECTION("stats closes the loop against the generator manifest") {
    fs::path out = root / "stats";
    REQUIRE(run_cli("stats --corpus " + corpus.string() + " --taxonomy " +
                    (corpus / "taxonomy.tsv").string() + " --out " +
                    out.string() + " --mode-grid 32") == 0);
    json stats = load_json(out / "stats.json");
    json manifest = load_json(corpus / "manifest.json");
    std::uint64_t manifest_instances = 0;
    std::map<std::uint64_t, std::uint64_t> manifest_counts;
    for (const auto& row : manifest["instance_counts"]) {
      manifest_instances += row[1].get<std::uint64_t>();
      manifest_counts[row[0].get<std::uint64_t>()] = row[1].get<std::uint64_t>();
    }
    CHECK(stats["summary"]["object_instances"] == manifest_instances);
    CHECK(stats["summary"]["images"] == manifest["images"]);
    CHECK(fs::exists(out / "mode.pgm"));

    // per-class instance counts in ranking.tsv must equal the manifest
    std::ifstream ranking(out / "ranking.tsv");
    REQUIRE(ranking.good());
    std::map<std::uint64_t, std::uint64_t> ranked_counts;
    std::string line;
    while (std::getline(ranking, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream fields(line);
      std::uint64_t rank, label, instances;
      fields >> rank >> label >> line >> instances;  // name lands in `line`
      ranked_counts[label] = instances;
    }
    CHECK(ranked_counts == manifest_counts);
  }

  SECTION("a single-pair toy fixture reproduces the hand-worked metrics") {
    fs::path toy = root / "toy";
    fs::create_directories(toy / "gt");
    fs::create_directories(toy / "pred");
    spk::LabelMask gt(2, 2);
    gt(0, 0) = 1; gt(0, 1) = 1; gt(1, 0) = 2; gt(1, 1) = 2;
    spk::LabelMask pred(2, 2);
    pred(0, 0) = 1; pred(0, 1) = 2; pred(1, 0) = 2; pred(1, 1) = 2;
    spk::write_mask_file(toy / "gt" / "img.pgm", gt);
    spk::write_mask_file(toy / "pred" / "img.pgm", pred);
    spk::write_text_file(toy / "taxonomy.tsv",
                         "1\twall\t\tS\t0\t\n2\tcar\t\tO\t0\t\n");
    fs::path out = toy / "eval";
    REQUIRE(run_cli("eval --gt " + (toy / "gt").string() + " --pred " +
                    (toy / "pred").string() + " --taxonomy " +
                    (toy / "taxonomy.tsv").string() + " --out " +
                    out.string()) == 0);
    json report = load_json(out / "report.json");
    CHECK(report["pixel_accuracy"] == 0.75);
    CHECK(report["mean_accuracy"] == 0.75);
    CHECK(report["mean_iou"] == 0.583333);
    CHECK(report["splits"]["stuff"]["classes"] == 1);
    CHECK(report["splits"]["object"]["classes"] == 1);
    CHECK(report["splits"]["stuff"]["mean_iou"] == 0.5);
    CHECK(report["splits"]["object"]["mean_iou"] == 0.666667);
  }

  SECTION("shard count and thread cap never change the outputs") {
    fs::path out1 = root / "eval_s1";
    fs::path out4 = root / "eval_s4";
    std::string base = "eval --gt " + corpus.string() + " --pred " +
                       corpus.string() + " --taxonomy " +
                       (corpus / "taxonomy.tsv").string();
    REQUIRE(run_cli(base + " --shards 1 --out " + out1.string()) == 0);
    std::string cmd = "SPK_THREADS=2 " + std::string(cli_bin()) + " " + base +
                      " --shards 4 --out " + out4.string() + " >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(spk::read_file(out1 / "report.json") ==
          spk::read_file(out4 / "report.json"));
    CHECK(spk::read_file(out1 / "per_class.tsv") ==
          spk::read_file(out4 / "per_class.tsv"));
  }

  SECTION("consistency of a corpus against itself is full agreement") {
    fs::path out = root / "consistency";
    REQUIRE(run_cli("consistency --a " + corpus.string() + " --b " +
                    corpus.string() + " --taxonomy " +
                    (corpus / "taxonomy.tsv").string() + " --out " +
                    out.string()) == 0);
    json report = load_json(out / "consistency.json");
    CHECK(report["pixel_weighted"]["agreement"] == 1.0);
    CHECK(report["mean"]["quality"] == 0.0);
  }

  SECTION("merge emits one mask per level") {
    fs::path out = root / "merge";
    std::string mask = (corpus / "syn_000000_seg.pgm").string();
    REQUIRE(run_cli("merge --mask " + mask + " --taxonomy " +
                    (corpus / "taxonomy.tsv").string() + " --levels 0,1 --out " +
                    out.string()) == 0);
    CHECK(fs::exists(out / "merged_level0.pgm"));
    CHECK(fs::exists(out / "merged_level1.pgm"));
    // level 1 of a depth-1 tree is the identity
    CHECK(spk::read_mask_file(out / "merged_level1.pgm") ==
          spk::read_mask_file(mask));
  }
}

TEST_CASE("cli: fuse gates on objectness and removal inpaints") {
  if (!cli_bin()) {
    WARN("SPK_CLI_BIN not set; skipping CLI tests");
    return;
  }
  fs::path root = scratch("fusion");
  // stream spec: stuff {1,2}, objects {3,4}
  spk::StreamSpec spec({1, 2}, {3, 4}, {}, 5);
  spk::write_text_file(root / "streams.tsv", spec.to_tsv());

  // zero-objectness stuff scores: label 2 wins at every pixel
  spk::ScoreMap stuff(4, 4, 3, 0.0f);
  spk::ScoreMap objects(4, 4, 2, 0.0f);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      stuff.at(r, c, 0) = 0.3f;
      stuff.at(r, c, 1) = 0.7f;
      objects.at(r, c, 0) = 1.0f;
    }
  }
  stuff.set_normalized(true);
  objects.set_normalized(true);
  spk::write_scoremap_file(root / "stuff.scr", stuff);
  spk::write_scoremap_file(root / "objects.scr", objects);

  fs::path out = root / "fused";
  REQUIRE(run_cli("fuse --stuff " + (root / "stuff.scr").string() +
                  " --objects " + (root / "objects.scr").string() +
                  " --streams " + (root / "streams.tsv").string() + " --out " +
                  out.string()) == 0);
  spk::LabelMask fused = spk::read_mask_file(out / "fused.pgm");
  for (std::size_t i = 0; i < fused.size(); ++i) REQUIRE(fused[i] == 2);

  SECTION("removal cuts the scored region and keeps the rest intact") {
    spk::RgbImage image(4, 4, spk::Rgb{10, 200, 30});
    spk::write_file(root / "photo.ppm", spk::write_image(image));
    spk::ScoreMap scores(4, 4, 2, 0.0f);
    scores.at(1, 1, 0) = 1.0f;  // object label 3
    spk::write_scoremap_file(root / "removal.scr", scores);
    fs::path rem = root / "removal";
    REQUIRE(run_cli("removal --image " + (root / "photo.ppm").string() +
                    " --scores " + (root / "removal.scr").string() +
                    " --streams " + (root / "streams.tsv").string() +
                    " --targets 3 --radius 0 --out " + rem.string()) == 0);
    spk::LabelMask hole = spk::read_mask_file(rem / "hole.pgm");
    CHECK(hole(1, 1) == 65535);
    CHECK(hole(0, 0) == 0);
    spk::RgbImage filled = spk::read_image(spk::read_file(rem / "inpainted.ppm"));
    CHECK(filled == image);  // constant image diffuses to itself
  }

  SECTION("parts subcommand thresholds part scores over the scene") {
    spk::StreamSpec part_spec({1}, {3}, {{3, {9}}}, 10);
    spk::write_text_file(root / "pstreams.tsv", part_spec.to_tsv());
    spk::LabelMask scene(2, 2, 1);
    scene(0, 0) = 3;
    spk::write_mask_file(root / "scene.pgm", scene);
    spk::ScoreMap part_scores(2, 2, 2, 0.0f);
    part_scores.at(0, 0, 0) = 0.9f;
    spk::write_scoremap_file(root / "p3.scr", part_scores);
    fs::path out_parts = root / "parts";
    REQUIRE(run_cli("parts --scene " + (root / "scene.pgm").string() +
                    " --streams " + (root / "pstreams.tsv").string() +
                    " --part-scores 3=" + (root / "p3.scr").string() +
                    " --out " + out_parts.string()) == 0);
    spk::LabelMask parts = spk::read_mask_file(out_parts / "parts.pgm");
    CHECK(parts(0, 0) == 9);
    CHECK(parts(0, 1) == spk::kVoidLabel);
  }
}

TEST_CASE("cli: import-ade20k decodes a fabricated mini release") {
  if (!cli_bin()) {
    WARN("SPK_CLI_BIN not set; skipping CLI tests");
    return;
  }
  fs::path root = scratch("ade");
  fs::path release = root / "release" / "images" / "training" / "a" / "alley";
  fs::create_directories(release);
  // release packing: class = (R / 10) * 256 + G, instance = B
  auto encode = [](spk::LabelId label, std::uint8_t instance) {
    return spk::Rgb{std::uint8_t((label / 256) * 10),
                    std::uint8_t(label % 256), instance};
  };
  spk::RgbImage seg(2, 3, encode(7, 0));
  seg(0, 0) = encode(300, 1);
  seg(1, 2) = encode(0, 0);  // unlabeled
  spk::write_file(release / "ADE_train_00000001_seg.ppm", spk::write_image(seg));
  spk::RgbImage seg2(2, 3, encode(12, 0));
  spk::write_file(release / "ADE_train_00000002_seg.ppm", spk::write_image(seg2));

  fs::path out = root / "imported";
  REQUIRE(run_cli("import-ade20k --release " + (root / "release").string() +
                  " --out " + out.string()) == 0);
  json report = load_json(out / "import.json");
  CHECK(report["discovered"] == 2);
  CHECK(report["imported"] == 2);
  CHECK(report["train_records"] == 2);
  spk::LabelMask labels = spk::read_mask_file(out / "ADE_train_00000001_seg.pgm");
  CHECK(labels(0, 0) == 300);
  CHECK(labels(0, 1) == 7);
  CHECK(labels(1, 2) == 0);
  spk::InstanceMap instances =
      spk::read_mask_file(out / "ADE_train_00000001_inst.pgm");
  CHECK(instances(0, 0) == 1);
  CHECK(instances(1, 2) == 0);
  auto scenes = spk::load_scenes(out);
  CHECK(scenes.at("ADE_train_00000001") == "alley");

  SECTION("min-side rescaling shrinks large rasters with nearest-neighbor") {
    fs::path big_release = root / "big" / "images" / "training" / "b" / "bar";
    fs::create_directories(big_release);
    spk::RgbImage big(8, 12, encode(7, 0));
    spk::write_file(big_release / "ADE_train_00000009_seg.ppm",
                    spk::write_image(big));
    fs::path out3 = root / "imported_scaled";
    REQUIRE(run_cli("import-ade20k --release " + (root / "big").string() +
                    " --out " + out3.string() + " --min-side 4") == 0);
    spk::LabelMask scaled =
        spk::read_mask_file(out3 / "ADE_train_00000009_seg.pgm");
    CHECK(scaled.height() == 4);
    CHECK(scaled.width() == 6);
    json scaled_report = load_json(out3 / "import.json");
    CHECK(scaled_report["rescaled_records"] == 1);
  }

  SECTION("empty release imports nothing and exits cleanly") {
    fs::path empty = root / "empty";
    fs::create_directories(empty);
    fs::path out2 = root / "imported_empty";
    REQUIRE(run_cli("import-ade20k --release " + empty.string() + " --out " +
                    out2.string()) == 0);
    json empty_report = load_json(out2 / "import.json");
    CHECK(empty_report["discovered"] == 0);
    CHECK(empty_report["imported"] == 0);
  }
}

TEST_CASE("cli: validation failures exit 2, I/O failures exit 3") {
  if (!cli_bin()) {
    WARN("SPK_CLI_BIN not set; skipping CLI tests");
    return;
  }
  fs::path root = scratch("errors");
  CHECK(run_cli("eval") == 2);              // missing required options
  CHECK(run_cli("no-such-subcommand") == 2);
  CHECK(run_cli("synth --out " + (root / "bad").string() +
                " --min-instances 0") == 2);
  CHECK(run_cli("stats --corpus " + (root / "missing").string() +
                " --taxonomy " + (root / "missing.tsv").string() + " --out " +
                (root / "out").string()) == 3);
}
