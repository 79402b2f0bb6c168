#include "tss/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "tss/dsp/vad_ops.hpp"
#include "tss/dsp/wav_io.hpp"
#include "tss/errors.hpp"
#include "tss/metrics/metrics.hpp"
#include "tss/mix/manifest.hpp"
#include "tss/mix/mixer.hpp"
#include "tss/mix/synth.hpp"
#include "tss/model/inference.hpp"
#include "tss/model/separator.hpp"
#include "tss/train/trainer.hpp"

namespace tss::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Relative paths are taken from TSS_DATA_ROOT when it is set.
fs::path resolve(const std::string& p) {
  const fs::path path(p);
  const char* root = std::getenv("TSS_DATA_ROOT");
  if (path.is_absolute() || root == nullptr || *root == '\0') return path;
  return fs::path(root) / path;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "'" + item + "' is not a number");
    }
  }
  if (out.empty()) throw CLI::ValidationError(flag, "empty list");
  return out;
}

void echo(std::ostream& out, const std::string& command, const json& config) {
  out << "config " << json{{"command", command}, {"resolved", config}}.dump() << '\n';
}

dsp::Waveform quantize_f32(const dsp::Waveform& w) {
  std::vector<double> v(w.samples());
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  return dsp::Waveform(std::move(v), w.sample_rate());
}

ad::Tensor embedding_for(const model::SeparatorModel& m, const mix::LoadedExample& ex) {
  return m.embedding_for({ex.speaker_id, ex.enrollment});
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  int speakers = 8;
  int utts = 10;
  double duration = 3.0;
  double jitter = 0.0;
  double enroll_duration = 4.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  if (a.speakers < 2) throw DomainError("synth: need at least two speakers");
  if (a.utts < 1) throw DomainError("synth: need at least one utterance per speaker");
  if (!(a.jitter >= 0.0 && a.jitter < a.duration)) throw DomainError("synth: jitter must lie in [0, duration)");
  echo(out, "synth",
       {{"speakers", a.speakers}, {"utts_per_speaker", a.utts}, {"duration", a.duration}, {"jitter", a.jitter},
        {"enroll_duration", a.enroll_duration}, {"seed", a.seed}, {"out", a.out}});
  const fs::path dir = resolve(a.out);
  fs::create_directories(dir / "wav");
  fs::create_directories(dir / "enroll");
  std::vector<mix::SourceRecord> records;
  json speakers = json::array();
  const std::uint64_t utt_seed = mix::derive_seed(a.seed, 0);
  const std::uint64_t enroll_seed = mix::derive_seed(a.seed, 1);
  const std::uint64_t length_seed = mix::derive_seed(a.seed, 2);
  for (int s = 0; s < a.speakers; ++s) {
    const mix::SpeakerProfile profile = mix::speaker_profile(s, a.speakers);
    const std::string enroll_rel = "enroll/" + profile.id + ".wav";
    const mix::SourceUtterance enrollment =
        mix::synth_source(profile, a.enroll_duration, mix::derive_seed(enroll_seed, static_cast<std::uint64_t>(s)));
    dsp::write_wav(dir / enroll_rel, enrollment.wave);
    for (int u = 0; u < a.utts; ++u) {
      const auto item = static_cast<std::uint64_t>(s) * 100000 + static_cast<std::uint64_t>(u);
      std::mt19937_64 len_rng(mix::derive_seed(length_seed, item));
      const double d = a.duration + a.jitter * std::uniform_real_distribution<double>(-1.0, 1.0)(len_rng);
      const mix::SourceUtterance utt = mix::synth_source(profile, d, mix::derive_seed(utt_seed, item));
      char stem[64];
      std::snprintf(stem, sizeof stem, "wav/%s_u%03d", profile.id.c_str(), u);
      mix::SourceRecord r{std::string(stem) + ".wav", std::string(stem) + "_vad.txt", profile.id, enroll_rel};
      dsp::write_wav(dir / r.wav_path, utt.wave);
      dsp::write_intervals(dir / r.intervals_path, utt.activity, utt.wave.sample_rate());
      records.push_back(std::move(r));
    }
    speakers.push_back({{"id", profile.id},
                        {"band_low_hz", profile.band_low_hz},
                        {"band_high_hz", profile.band_high_hz},
                        {"modulation_hz", profile.modulation_hz},
                        {"enroll_path", enroll_rel},
                        {"n_utterances", a.utts}});
  }
  mix::write_sources(dir / "sources.jsonl", records);
  metrics::write_text(dir / "registry.json",
                      json{{"sample_rate", dsp::kDefaultSampleRate}, {"seed", a.seed}, {"speakers", speakers}}.dump(2) +
                          "\n");
  err << "synth: wrote " << records.size() << " utterances for " << a.speakers << " speakers to " << dir.string()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- mix

struct MixArgs {
  std::string mode = "max";
  std::string manifest_in;
  std::string out;
  std::uint64_t seed = 0;
  std::string noise_dir;
  std::string overlap_targets;
  int count = 0;
  double noise_prob = 0.5;
};

int cmd_mix(const MixArgs& a, std::ostream& out, std::ostream& err) {
  mix::MixSpec spec;
  spec.mode = mix::parse_mix_mode(a.mode);
  spec.noise_prob = a.noise_prob;
  const fs::path listing = resolve(a.manifest_in);
  const fs::path dir = resolve(a.out);
  if (!a.noise_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(resolve(a.noise_dir)))
      if (e.path().extension() == ".wav") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("mix: no .wav files in " + a.noise_dir);
    spec.noise_files = std::move(files);
  }
  spec.validate();
  const std::vector<mix::SourceRecord> sources = mix::read_sources(listing);
  if (sources.empty()) throw FormatError("mix: empty source listing " + listing.string());
  std::vector<mix::SourceUtterance> pool;
  std::map<std::string, std::string> enroll_of;
  for (const auto& r : sources) {
    pool.push_back(mix::load_source(listing, r));
    if (r.enroll_path) {
      const fs::path abs = fs::absolute(listing.parent_path() / *r.enroll_path);
      fs::create_directories(dir);
      enroll_of[r.speaker_id] = fs::relative(abs, fs::absolute(dir)).generic_string();
    }
  }
  const std::size_t count = a.count > 0 ? static_cast<std::size_t>(a.count) : pool.size();
  json resolved{{"mode", a.overlap_targets.empty() ? a.mode : "sparse"},
                {"manifest_in", listing.string()},
                {"out", dir.string()},
                {"seed", a.seed},
                {"count", count},
                {"noise_prob", spec.noise_prob},
                {"speaker_snr_db", {spec.speaker_snr_low_db, spec.speaker_snr_high_db}},
                {"noise_snr_db", {spec.noise_snr_low_db, spec.noise_snr_high_db}},
                {"noise", spec.noise_files.empty() ? "pink" : a.noise_dir}};
  std::vector<double> targets;
  if (!a.overlap_targets.empty()) {
    targets = parse_list(a.overlap_targets, "--overlap-targets");
    resolved["overlap_targets"] = targets;
  }
  echo(out, "mix", resolved);

  auto enroll_for = [&](const std::string& id) -> std::optional<std::string> {
    const auto it = enroll_of.find(id);
    if (it == enroll_of.end()) return std::nullopt;
    return it->second;
  };
  std::vector<mix::ManifestRecord> records;
  char stem[32];
  if (targets.empty()) {
    std::set<std::string> ids;
    for (const auto& u : pool) ids.insert(u.speaker_id);
    if (ids.size() < 2) throw DomainError("mix: sources need at least two speakers");
    for (std::size_t i = 0; i < count; ++i) {
      std::mt19937_64 rng(mix::derive_seed(a.seed, i));
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const std::size_t ia = pick(rng);
      std::size_t ib = ia;
      while (pool[ib].speaker_id == pool[ia].speaker_id) ib = pick(rng);
      mix::MixSpec item = spec;
      item.rng_seed = rng();
      const mix::MixtureExample ex = mix::mix(pool[ia], pool[ib], item);
      std::snprintf(stem, sizeof stem, "mix%05zu", i);
      records.push_back(mix::save_example(dir, stem, ex, enroll_for(ex.meta.target_id)));
    }
  } else {
    const auto items = mix::gen_sparse_set(pool, count, targets, true, spec, a.seed);
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!items[i].example) {
        mix::ManifestRecord r;
        r.skipped = true;
        r.skip_reason = items[i].skip_reason;
        r.requested_overlap = items[i].requested_overlap;
        records.push_back(std::move(r));
        err << "mix: warning: item " << i << " skipped: " << items[i].skip_reason << '\n';
        ++skipped;
        continue;
      }
      std::snprintf(stem, sizeof stem, "mix%05zu", i);
      mix::ManifestRecord r = mix::save_example(dir, stem, *items[i].example, enroll_for(items[i].example->meta.target_id));
      r.requested_overlap = items[i].requested_overlap;
      records.push_back(std::move(r));
    }
    if (skipped == items.size()) throw DomainError("mix: every requested overlap was infeasible");
  }
  mix::write_manifest(dir / "manifest.jsonl", records);
  err << "mix: wrote " << records.size() << " records to " << (dir / "manifest.jsonl").string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string val;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  train::ExperimentConfig cfg = a.config.empty() ? train::ExperimentConfig{} : train::load_experiment_config(resolve(a.config));
  const fs::path data_path = resolve(a.data);
  std::vector<mix::LoadedExample> train_loaded = mix::load_manifest(data_path);
  if (train_loaded.empty()) throw DomainError("train: training manifest is empty");
  std::vector<mix::LoadedExample> val_loaded;
  if (!a.val.empty()) {
    val_loaded = mix::load_manifest(resolve(a.val));
  } else {
    std::vector<std::size_t> order(train_loaded.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(mix::derive_seed(cfg.train.seed, 0xfa11));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::ceil(cfg.train.val_fraction * static_cast<double>(order.size())));
    if (n_val >= order.size()) throw DomainError("train: too few examples for a validation split");
    std::vector<mix::LoadedExample> kept;
    std::vector<bool> is_val(order.size(), false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
    for (std::size_t i = 0; i < order.size(); ++i) (is_val[i] ? val_loaded : kept).push_back(std::move(train_loaded[i]));
    train_loaded = std::move(kept);
  }
  if (val_loaded.empty()) throw DomainError("train: validation set is empty");
  if (cfg.model.provider == model::EmbeddingProvider::kLookup && cfg.model.speaker_ids.empty()) {
    std::set<std::string> ids;
    for (const auto& e : train_loaded) ids.insert(e.speaker_id);
    for (const auto& e : val_loaded) ids.insert(e.speaker_id);
    cfg.model.speaker_ids.assign(ids.begin(), ids.end());
  }
  if (cfg.train.mode == train::TrainMode::kBaseline) cfg.model.with_vad = false;
  echo(out, "train",
       {{"model", cfg.model},
        {"train", cfg.train},
        {"data", data_path.string()},
        {"val", a.val.empty() ? json("split") : json(resolve(a.val).string())},
        {"n_train", train_loaded.size()},
        {"n_val", val_loaded.size()},
        {"out", resolve(a.out).string()}});

  model::SeparatorModel m(cfg.model);
  const std::vector<train::Example> tr = train::prepare_examples(m, std::move(train_loaded));
  const std::vector<train::Example> va = train::prepare_examples(m, std::move(val_loaded));
  const fs::path dir = resolve(a.out);
  fs::create_directories(dir);
  train::save_experiment_config(dir / "experiment.json", cfg);
  train::FitOptions opts;
  opts.out_dir = dir;
  opts.on_epoch = [&](const train::EpochStats& s) {
    char line[200];
    std::snprintf(line, sizeof line, "epoch %d train_loss %.4f val_loss %.4f lr %g skipped %zu (%.1fs)\n", s.epoch,
                  s.train_loss, s.val_loss, s.lr, s.skipped_batches, s.seconds);
    err << line << std::flush;
  };
  const train::FitResult r = train::fit(m, tr, va, cfg.train, opts);
  err << "train: best epoch " << r.best_epoch << " val_loss " << r.best_val_loss << ", skipped batches "
      << r.skipped_batches << '\n';
  return kOk;
}

// ---------------------------------------------------------------- separate

struct SeparateArgs {
  std::string model;
  std::string input;
  std::string enroll;
  std::string speaker_id;
  double gamma = dsp::kDefaultThreshold;
  int early_exit_k = 0;
  std::string out;
};

int cmd_separate(const SeparateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.enroll.empty() == a.speaker_id.empty()) throw CLI::ValidationError("separate", "give exactly one of --enroll or --speaker-id");
  const model::SeparatorModel m = model::SeparatorModel::load(resolve(a.model));
  model::InferenceOptions opts;
  opts.gamma = a.gamma;
  if (a.early_exit_k > 0) {
    opts.early_exit = true;
    opts.exit_stack = a.early_exit_k;
  }
  echo(out, "separate",
       {{"model", resolve(a.model).string()},
        {"input", resolve(a.input).string()},
        {"enroll", a.enroll},
        {"speaker_id", a.speaker_id},
        {"gamma", opts.gamma},
        {"smoothing_ms", opts.smoothing_ms},
        {"early_exit_k", a.early_exit_k > 0 ? json(a.early_exit_k) : json(nullptr)},
        {"out", resolve(a.out).string()}});
  const dsp::Waveform x = dsp::read_wav(resolve(a.input));
  model::SpeakerRef ref{a.speaker_id, std::nullopt};
  if (!a.enroll.empty()) ref.enrollment = dsp::read_wav(resolve(a.enroll));
  const model::InferenceResult r = model::infer(m, x, m.embedding_for(ref), opts);
  dsp::write_wav(resolve(a.out), r.estimate);
  err << "separate: " << r.gate.count_active() << " of " << r.gate.size() << " samples gated active\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string manifest;
  std::string report;
  std::string per_example;
  double gamma = dsp::kDefaultThreshold;
  int early_exit_k = 0;
  bool all_buckets = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const model::SeparatorModel m = model::SeparatorModel::load(resolve(a.model));
  const fs::path manifest = resolve(a.manifest);
  model::InferenceOptions opts;
  opts.gamma = a.gamma;
  if (a.early_exit_k > 0) {
    opts.early_exit = true;
    opts.exit_stack = a.early_exit_k;
  }
  echo(out, "eval",
       {{"model", resolve(a.model).string()},
        {"manifest", manifest.string()},
        {"report", resolve(a.report).string()},
        {"gamma", opts.gamma},
        {"early_exit_k", a.early_exit_k > 0 ? json(a.early_exit_k) : json(nullptr)},
        {"sdr", "energy-ratio"}});
  const auto records = mix::read_manifest(manifest);
  if (records.empty()) throw DomainError("eval: manifest has no usable records");
  std::vector<metrics::TaggedResult> results;
  std::string rows = "index,mixture_path,overlap_ratio,bucket,SDR,SISNR,SDRi,SISNRi,silent,capped\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const mix::LoadedExample ex = mix::load_example(manifest, records[i]);
    const model::InferenceResult r = model::infer(m, ex.example.mixture, embedding_for(m, ex), opts);
    const dsp::Waveform estimate = quantize_f32(r.estimate);
    metrics::TaggedResult t;
    t.result = metrics::improvements(ex.example.mixture.view(), estimate.view(), ex.example.target.view());
    t.bucket = metrics::overlap_bucket(ex.example.overlap_ratio);
    results.push_back(t);
    char line[512];
    std::snprintf(line, sizeof line, "%zu,%s,%.6f,%d,%.6f,%.6f,%.6f,%.6f,%d,%d\n", i, records[i].mixture_path.c_str(),
                  ex.example.overlap_ratio, t.bucket, t.result.sdr_db, t.result.si_snr_db, t.result.sdri_db,
                  t.result.si_snri_db, t.result.silent_estimate ? 1 : 0, t.result.capped ? 1 : 0);
    rows += line;
  }
  std::vector<int> buckets;
  if (a.all_buckets) buckets = {0, 20, 40, 60, 80, 100};
  const metrics::BucketReport report = metrics::bucket_report(results, buckets);
  metrics::write_text(resolve(a.report), report.to_csv());
  if (!a.per_example.empty()) metrics::write_text(resolve(a.per_example), rows);
  out << report.to_csv();
  err << "eval: " << results.size() << " examples\n";
  return kOk;
}

// ---------------------------------------------------------------- bench-rtf

struct BenchArgs {
  std::string model;
  std::string manifest;
  std::string k_sweep = "1,2,3,4";
  std::string report;
  double gamma = dsp::kDefaultThreshold;
  bool oracle_gate = false;
  int repeats = 1;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const model::SeparatorModel m = model::SeparatorModel::load(resolve(a.model));
  const fs::path manifest = resolve(a.manifest);
  std::vector<int> ks;
  for (double k : parse_list(a.k_sweep, "--k-sweep")) {
    if (k != std::floor(k) || k < 1 || k > m.config().n_stacks)
      throw CLI::ValidationError("--k-sweep", "k must be an integer in [1, " + std::to_string(m.config().n_stacks) + "]");
    ks.push_back(static_cast<int>(k));
  }
  if (a.repeats < 1) throw CLI::ValidationError("--repeats", "must be >= 1");
  echo(out, "bench-rtf",
       {{"model", resolve(a.model).string()},
        {"manifest", manifest.string()},
        {"k_sweep", ks},
        {"gamma", a.gamma},
        {"oracle_gate", a.oracle_gate},
        {"repeats", a.repeats},
        {"threads", 1},
        {"report", resolve(a.report).string()}});
  const auto records = mix::read_manifest(manifest);
  if (records.empty()) throw DomainError("bench-rtf: manifest has no usable records");
  std::vector<mix::LoadedExample> examples;
  std::vector<ad::Tensor> embeddings;
  for (const auto& r : records) {
    examples.push_back(mix::load_example(manifest, r));
    embeddings.push_back(embedding_for(m, examples.back()));
  }
  std::vector<metrics::RtfRow> rows;
  for (int k : ks) {
    model::InferenceOptions opts;
    opts.gamma = a.gamma;
    opts.early_exit = true;
    opts.exit_stack = k;
    auto options_for = [&](std::size_t i) {
      model::InferenceOptions o = opts;
      if (a.oracle_gate) o.gate_override = examples[i].example.z;
      return o;
    };
    model::infer(m, examples[0].example.mixture, embeddings[0], options_for(0));  // warm-up
    std::vector<model::InferenceResult> last(examples.size());
    const metrics::RtfMeasurement meas = metrics::measure_rtf(
        examples.size() * static_cast<std::size_t>(a.repeats),
        [&](std::size_t j) {
          const std::size_t i = j % examples.size();
          last[i] = model::infer(m, examples[i].example.mixture, embeddings[i], options_for(i));
        },
        [&](std::size_t j) { return examples[j % examples.size()].example.mixture.seconds(); });
    metrics::RtfRow row;
    row.k = k;
    row.rtf = meas.rtf();
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto& ex = examples[i].example;
      const auto e = metrics::improvements(ex.mixture.view(), quantize_f32(last[i].estimate).view(), ex.target.view());
      row.sdri_mean += e.sdri_db / static_cast<double>(examples.size());
      row.si_snri_mean += e.si_snri_db / static_cast<double>(examples.size());
    }
    rows.push_back(row);
    err << "bench-rtf: k=" << k << " RTF " << row.rtf << '\n';
  }
  const std::string csv = metrics::rtf_csv(rows);
  metrics::write_text(resolve(a.report), csv);
  out << csv;
  return kOk;
}

int fail(std::ostream& err, int code, const char* kind, const std::string& message) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  err << "tss-error: " << kind << ": " << line << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparsely overlapped target speech separation toolkit", "tss"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesize speaker utterances, interval files and a speaker registry");
  s->add_option("--speakers", synth.speakers, "Number of synthetic speakers")->capture_default_str();
  s->add_option("--utts-per-speaker", synth.utts, "Utterances per speaker")->capture_default_str();
  s->add_option("--duration", synth.duration, "Utterance duration in seconds")->capture_default_str();
  s->add_option("--duration-jitter", synth.jitter, "Uniform +/- jitter on the duration (s)")->capture_default_str();
  s->add_option("--enroll-duration", synth.enroll_duration, "Enrollment utterance duration (s)")->capture_default_str();
  s->add_option("--seed", synth.seed, "Master seed")->required();
  s->add_option("--out", synth.out, "Output directory")->required();

  MixArgs mixa;
  auto* mx = app.add_subcommand("mix", "Build two-speaker mixtures from a source listing");
  mx->add_option("--mode", mixa.mode, "min or max")->check(CLI::IsMember({"min", "max"}))->capture_default_str();
  mx->add_option("--manifest-in", mixa.manifest_in, "sources.jsonl written by synth")->required();
  mx->add_option("--out", mixa.out, "Output directory (manifest.jsonl + WAVs)")->required();
  mx->add_option("--seed", mixa.seed, "Master seed")->required();
  mx->add_option("--noise-dir", mixa.noise_dir, "Directory of noise WAVs (default: seeded pink noise)");
  mx->add_option("--overlap-targets", mixa.overlap_targets, "Comma list of overlap ratios for a sparse set");
  mx->add_option("--count", mixa.count, "Number of mixtures (default: number of sources)");
  mx->add_option("--noise-prob", mixa.noise_prob, "Probability of adding noise")->check(CLI::Range(0.0, 1.0))->capture_default_str();

  TrainArgs traina;
  auto* tr = app.add_subcommand("train", "Train a separator");
  tr->add_option("--config", traina.config, "Experiment config JSON {model, train}");
  tr->add_option("--data", traina.data, "Training manifest")->required();
  tr->add_option("--val", traina.val, "Validation manifest (default: seeded split of --data)");
  tr->add_option("--out", traina.out, "Checkpoint directory")->required();

  SeparateArgs sep;
  auto* sp = app.add_subcommand("separate", "Extract the target speaker from a mixture WAV");
  sp->add_option("--model", sep.model, "Checkpoint directory")->required();
  sp->add_option("--input", sep.input, "Mixture WAV")->required();
  sp->add_option("--enroll", sep.enroll, "Enrollment WAV of the target speaker");
  sp->add_option("--speaker-id", sep.speaker_id, "Target speaker id (lookup models)");
  sp->add_option("--gamma", sep.gamma, "VAD threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sp->add_option("--early-exit-k", sep.early_exit_k, "Stop inactive frames after stack k")->check(CLI::PositiveNumber);
  sp->add_option("--out", sep.out, "Output WAV")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate on a manifest, report per overlap bucket");
  e->add_option("--model", ev.model, "Checkpoint directory")->required();
  e->add_option("--manifest", ev.manifest, "Mixture manifest")->required();
  e->add_option("--report", ev.report, "Bucket report CSV")->required();
  e->add_option("--per-example", ev.per_example, "Per-example CSV");
  e->add_option("--gamma", ev.gamma, "VAD threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  e->add_option("--early-exit-k", ev.early_exit_k, "Stop inactive frames after stack k")->check(CLI::PositiveNumber);
  e->add_flag("--all-buckets", ev.all_buckets, "Emit all six 20% buckets, empty ones left blank");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench-rtf", "Real-time factor per early-exit stack");
  b->add_option("--model", bench.model, "Checkpoint directory")->required();
  b->add_option("--manifest", bench.manifest, "Mixture manifest")->required();
  b->add_option("--k-sweep", bench.k_sweep, "Comma list of exit stacks")->capture_default_str();
  b->add_option("--report", bench.report, "RTF CSV")->required();
  b->add_option("--gamma", bench.gamma, "VAD threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  b->add_flag("--oracle-gate", bench.oracle_gate, "Gate with the reference activity instead of the VAD branch");
  b->add_option("--repeats", bench.repeats, "Timed passes over the manifest")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    return fail(err, kUsage, "usage", ex.what());
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out, err);
    if (mx->parsed()) return cmd_mix(mixa, out, err);
    if (tr->parsed()) return cmd_train(traina, out, err);
    if (sp->parsed()) return cmd_separate(sep, out, err);
    if (e->parsed()) return cmd_eval(ev, out, err);
    if (b->parsed()) return cmd_bench(bench, out, err);
    return fail(err, kUsage, "usage", "no command given");
  } catch (const CLI::Error& ex) {
    return fail(err, kUsage, "usage", ex.what());
  } catch (const NumericError& ex) {
    return fail(err, kNumericError, "numeric", ex.what());
  } catch (const IoError& ex) {
    return fail(err, kDataError, "io", ex.what());
  } catch (const FormatError& ex) {
    return fail(err, kDataError, "format", ex.what());
  } catch (const DomainError& ex) {
    return fail(err, kDataError, "data", ex.what());
  } catch (const StateError& ex) {
    return fail(err, kDataError, "state", ex.what());
  } catch (const std::filesystem::filesystem_error& ex) {
    return fail(err, kDataError, "io", ex.what());
  }
}

}  // namespace tss::cli
