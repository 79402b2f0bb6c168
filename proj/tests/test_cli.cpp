#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "tss/cli/cli.hpp"
#include "tss/dsp/wav_io.hpp"
#include "tss/metrics/metrics.hpp"
#include "tss/mix/manifest.hpp"

namespace fs = std::filesystem;
using tss::testing::read_file;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run tss_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = tss::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string s(const fs::path& p) { return p.string(); }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

// synth -> mix (min and sparse) -> train, shared by the cases below.
struct Fixture {
  fs::path root;
  Fixture() {
    root = tss::testing::scratch_dir("cli");
    REQUIRE(tss_run({"synth", "--speakers", "3", "--utts-per-speaker", "3", "--duration", "1.0", "--duration-jitter",
                     "0.2", "--enroll-duration", "1.0", "--seed", "4", "--out", s(root / "src")})
                .code == 0);
    REQUIRE(tss_run({"mix", "--mode", "min", "--manifest-in", s(root / "src/sources.jsonl"), "--out",
                     s(root / "min"), "--seed", "5", "--count", "4"})
                .code == 0);
    REQUIRE(tss_run({"mix", "--manifest-in", s(root / "src/sources.jsonl"), "--out", s(root / "sparse"), "--seed",
                     "6", "--count", "4", "--overlap-targets", "0,1"})
                .code == 0);
    std::ofstream(root / "exp.json") << R"({
      "model": {"filters": 8, "n_stacks": 2, "layers_per_stack": 1, "bottleneck": 8, "hidden": 8,
                "embed_dim": 4, "n_mels": 8, "vad_tap": 2},
      "train": {"max_epochs": 1, "batch_size": 2, "clip_seconds": 0.5, "seed": 3}
    })";
    const Run t = tss_run({"train", "--config", s(root / "exp.json"), "--data", s(root / "sparse/manifest.jsonl"),
                           "--val", s(root / "min/manifest.jsonl"), "--out", s(root / "model")});
    INFO(t.err);
    REQUIRE(t.code == 0);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("usage errors exit 1 with a machine-parsable line") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"frobnicate"}, {"synth", "--seed", "1", "--out", "x", "--bogus", "2"}, {"synth", "--seed", "1"},
           {"separate", "--model", "m", "--input", "i", "--out", "o", "--gamma", "2"}}) {
    const Run r = tss_run(args);
    CHECK(r.code == 1);
    CHECK(r.err.rfind("tss-error: usage: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
  const Run help = tss_run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("bench-rtf") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
  const auto dir = tss::testing::scratch_dir("cli_errors");
  const Run missing = tss_run({"mix", "--manifest-in", s(dir / "none.jsonl"), "--out", s(dir / "o"), "--seed", "1"});
  CHECK(missing.code == 2);
  CHECK(missing.err.rfind("tss-error: ", 0) == 0);
  std::ofstream(dir / "bad.jsonl") << "not json\n";
  const Run bad = tss_run({"mix", "--manifest-in", s(dir / "bad.jsonl"), "--out", s(dir / "o"), "--seed", "1"});
  CHECK(bad.code == 2);
  CHECK(bad.err.rfind("tss-error: format: ", 0) == 0);
  const Run no_model = tss_run({"eval", "--model", s(dir / "nothing"), "--manifest", s(dir / "bad.jsonl"),
                                "--report", s(dir / "r.csv")});
  CHECK(no_model.code == 2);
}

TEST_CASE("synth writes sources, intervals and a registry") {
  const auto& f = fixture();
  const auto reg = nlohmann::json::parse(read_file(f.root / "src/registry.json"));
  CHECK(reg["speakers"].size() == 3);
  const auto sources = tss::mix::read_sources(f.root / "src/sources.jsonl");
  CHECK(sources.size() == 9);
  for (const auto& r : sources) {
    CHECK(fs::exists(f.root / "src" / r.wav_path));
    CHECK(fs::exists(f.root / "src" / r.intervals_path));
    const double seconds = tss::dsp::read_wav(f.root / "src" / r.wav_path).seconds();
    CHECK(seconds >= 0.8 - 1e-9);
    CHECK(seconds <= 1.2 + 1e-9);
  }
}

TEST_CASE("train writes a checkpoint, config and stats") {
  const auto& f = fixture();
  CHECK(fs::exists(f.root / "model/model.ckpt"));
  CHECK(fs::exists(f.root / "model/config.json"));
  CHECK(fs::exists(f.root / "model/experiment.json"));
  const auto stats = lines(read_file(f.root / "model/stats.csv"));
  REQUIRE(stats.size() == 2);
  CHECK(stats[0] == "epoch,train_loss,val_loss,lr,seconds");
}

TEST_CASE("min-mode mixtures all land in the 100% bucket") {
  const auto& f = fixture();
  const Run r = tss_run({"eval", "--model", s(f.root / "model"), "--manifest", s(f.root / "min/manifest.jsonl"),
                         "--report", s(f.root / "min_report.csv")});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto rows = lines(read_file(f.root / "min_report.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "bucket,n,SDRi_mean,SISNRi_mean,n_silent_flagged");
  CHECK(rows[1].rfind("100%,4,", 0) == 0);
  CHECK(rows[2].rfind("Average,4,", 0) == 0);

  const Run all = tss_run({"eval", "--model", s(f.root / "model"), "--manifest", s(f.root / "min/manifest.jsonl"),
                           "--report", s(f.root / "all.csv"), "--all-buckets"});
  CHECK(lines(read_file(f.root / "all.csv")).size() == 8);
  CHECK(all.code == 0);
}

TEST_CASE("separate defaults to gamma 0.4 and agrees with eval") {
  const auto& f = fixture();
  const fs::path manifest = f.root / "sparse/manifest.jsonl";
  const Run ev = tss_run({"eval", "--model", s(f.root / "model"), "--manifest", s(manifest), "--report",
                          s(f.root / "sparse_report.csv"), "--per-example", s(f.root / "per_example.csv")});
  REQUIRE(ev.code == 0);
  const auto per = lines(read_file(f.root / "per_example.csv"));
  const auto records = tss::mix::read_manifest(manifest);
  REQUIRE(per.size() == records.size() + 1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const fs::path out = f.root / ("sep" + std::to_string(i) + ".wav");
    const Run sep = tss_run({"separate", "--model", s(f.root / "model"), "--input", s(f.root / "sparse" / rec.mixture_path),
                             "--enroll", s(f.root / "sparse" / *rec.enroll_path), "--out", s(out)});
    INFO(sep.err);
    REQUIRE(sep.code == 0);
    const auto echoed = nlohmann::json::parse(lines(sep.out)[0].substr(7));
    CHECK(echoed["resolved"]["gamma"] == 0.4);
    const auto ex = tss::mix::load_example(manifest, rec);
    const auto estimate = tss::dsp::read_wav(out);
    const auto e = tss::metrics::improvements(ex.example.mixture.view(), estimate.view(), ex.example.target.view());
    char expected[160];
    std::snprintf(expected, sizeof expected, ",%.6f,%.6f,%.6f,%.6f,%d,", e.sdr_db, e.si_snr_db, e.sdri_db, e.si_snri_db,
                  e.silent_estimate ? 1 : 0);
    CHECK(per[i + 1].find(expected) != std::string::npos);
  }
}

TEST_CASE("bench-rtf emits one row per k") {
  const auto& f = fixture();
  const Run r = tss_run({"bench-rtf", "--model", s(f.root / "model"), "--manifest", s(f.root / "sparse/manifest.jsonl"),
                         "--k-sweep", "1,2", "--report", s(f.root / "rtf.csv"), "--oracle-gate"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto rows = lines(read_file(f.root / "rtf.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "k,SDRi_mean,SISNRi_mean,RTF");
  CHECK(rows[1].rfind("1,", 0) == 0);
  CHECK(rows[2].rfind("2,", 0) == 0);
  const Run bad = tss_run({"bench-rtf", "--model", s(f.root / "model"), "--manifest", s(f.root / "sparse/manifest.jsonl"),
                           "--k-sweep", "1,5", "--report", s(f.root / "rtf.csv")});
  CHECK(bad.code == 1);
}

TEST_CASE("seeded commands reproduce byte-identical files") {
  const auto& f = fixture();
  const fs::path again = tss::testing::scratch_dir("cli_again");
  REQUIRE(tss_run({"synth", "--speakers", "3", "--utts-per-speaker", "3", "--duration", "1.0", "--duration-jitter",
                   "0.2", "--enroll-duration", "1.0", "--seed", "4", "--out", s(again / "src")})
              .code == 0);
  REQUIRE(tss_run({"mix", "--manifest-in", s(again / "src/sources.jsonl"), "--out", s(again / "sparse"), "--seed", "6",
                   "--count", "4", "--overlap-targets", "0,1"})
              .code == 0);
  for (const char* sub : {"src", "sparse"})
    for (const auto& e : fs::recursive_directory_iterator(f.root / sub)) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), f.root);
      CHECK_MESSAGE(read_file(e.path()) == read_file(again / rel), rel.string());
    }
}

TEST_CASE("a diverging run exits 3") {
  const auto& f = fixture();
  std::ofstream(f.root / "diverge.json") << R"({
    "model": {"filters": 8, "n_stacks": 1, "layers_per_stack": 1, "bottleneck": 8, "hidden": 8,
              "embed_dim": 4, "n_mels": 8, "vad_tap": 1},
    "train": {"max_epochs": 2, "batch_size": 2, "clip_seconds": 0.5, "lr0": 1e300, "grad_clip": 0}
  })";
  const Run r = tss_run({"train", "--config", s(f.root / "diverge.json"), "--data", s(f.root / "sparse/manifest.jsonl"),
                         "--val", s(f.root / "min/manifest.jsonl"), "--out", s(f.root / "diverged")});
  CHECK(r.code == 3);
  CHECK(r.err.find("tss-error: numeric: ") != std::string::npos);
}
