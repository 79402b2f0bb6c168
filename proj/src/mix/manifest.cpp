#include "tss/mix/manifest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "tss/dsp/vad_ops.hpp"
#include "tss/dsp/wav_io.hpp"
#include "tss/errors.hpp"

namespace tss::mix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<json> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void write_lines(const fs::path& path, const std::vector<json>& lines) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& j : lines) out << j.dump() << '\n';
}

template <typename T>
T field(const json& j, const char* key, const fs::path& path) {
  const auto it = j.find(key);
  if (it == j.end()) throw FormatError(path.string() + ": record lacks '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": field '" + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& listing, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? p : listing.parent_path() / p;
}

}  // namespace

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  std::vector<json> lines;
  for (const auto& r : records) {
    json j;
    if (r.skipped) {
      j["skipped"] = true;
      j["skip_reason"] = r.skip_reason;
      if (r.requested_overlap) j["requested_overlap"] = *r.requested_overlap;
      j["seed"] = r.seed;
      lines.push_back(std::move(j));
      continue;
    }
    j["mixture_path"] = r.mixture_path;
    j["target_path"] = r.target_path;
    if (r.enroll_path) j["enroll_path"] = *r.enroll_path;
    j["speaker_id"] = r.speaker_id;
    j["interferer_id"] = r.interferer_id;
    j["vad_path"] = r.vad_path;
    j["overlap_ratio"] = r.overlap_ratio;
    j["mode"] = r.mode;
    j["snr_db"] = r.snr_db;
    j["noise_snr_db"] = r.noise_snr_db ? json(*r.noise_snr_db) : json(nullptr);
    j["seed"] = r.seed;
    if (r.requested_overlap) j["requested_overlap"] = *r.requested_overlap;
    lines.push_back(std::move(j));
  }
  write_lines(path, lines);
}

std::vector<ManifestRecord> read_manifest(const fs::path& path, bool keep_skipped) {
  std::vector<ManifestRecord> out;
  for (const auto& j : read_lines(path)) {
    ManifestRecord r;
    r.skipped = j.value("skipped", false);
    if (r.skipped) {
      if (!keep_skipped) continue;
      r.skip_reason = j.value("skip_reason", "");
      out.push_back(std::move(r));
      continue;
    }
    r.mixture_path = field<std::string>(j, "mixture_path", path);
    r.target_path = field<std::string>(j, "target_path", path);
    if (j.contains("enroll_path")) r.enroll_path = field<std::string>(j, "enroll_path", path);
    r.speaker_id = field<std::string>(j, "speaker_id", path);
    r.interferer_id = j.value("interferer_id", "");
    r.vad_path = field<std::string>(j, "vad_path", path);
    r.overlap_ratio = field<double>(j, "overlap_ratio", path);
    r.mode = field<std::string>(j, "mode", path);
    r.snr_db = field<double>(j, "snr_db", path);
    if (j.contains("noise_snr_db") && !j["noise_snr_db"].is_null()) r.noise_snr_db = field<double>(j, "noise_snr_db", path);
    r.seed = field<std::uint64_t>(j, "seed", path);
    if (j.contains("requested_overlap")) r.requested_overlap = field<double>(j, "requested_overlap", path);
    out.push_back(std::move(r));
  }
  return out;
}

ManifestRecord save_example(const fs::path& dir, const std::string& stem, const MixtureExample& example,
                            const std::optional<std::string>& enroll_path) {
  fs::create_directories(dir);
  ManifestRecord r;
  r.mixture_path = stem + "_mix.wav";
  r.target_path = stem + "_target.wav";
  r.vad_path = stem + "_vad.txt";
  dsp::write_wav(dir / r.mixture_path, example.mixture);
  dsp::write_wav(dir / r.target_path, example.target);
  dsp::write_intervals(dir / r.vad_path, dsp::mask_to_intervals(example.z), example.mixture.sample_rate());
  r.enroll_path = enroll_path;
  r.speaker_id = example.meta.target_id;
  r.interferer_id = example.meta.interferer_id;
  r.overlap_ratio = example.overlap_ratio;
  r.mode = example.meta.mode;
  r.snr_db = example.meta.snr_db;
  r.noise_snr_db = example.meta.noise_snr_db;
  r.seed = example.meta.seed;
  return r;
}

LoadedExample load_example(const fs::path& manifest_path, const ManifestRecord& record) {
  if (record.skipped) throw DomainError("load_example: record was skipped at generation time");
  LoadedExample out;
  MixtureExample& ex = out.example;
  ex.mixture = dsp::read_wav(resolve(manifest_path, record.mixture_path));
  const dsp::Waveform target = dsp::read_wav(resolve(manifest_path, record.target_path));
  if (target.size() != ex.mixture.size())
    throw FormatError(record.target_path + ": target length differs from mixture length");
  const int sr = ex.mixture.sample_rate();
  const auto intervals = dsp::read_intervals(resolve(manifest_path, record.vad_path), sr);
  for (const auto& iv : intervals)
    if (iv.end > ex.mixture.size()) throw FormatError(record.vad_path + ": interval beyond mixture end");
  ex.z = dsp::intervals_to_mask(intervals, ex.mixture.size());
  ex.target = dsp::apply_mask(target, ex.z);
  ex.overlap_ratio = record.overlap_ratio;
  ex.meta.mode = record.mode;
  ex.meta.snr_db = record.snr_db;
  ex.meta.noise_snr_db = record.noise_snr_db;
  ex.meta.seed = record.seed;
  ex.meta.target_id = record.speaker_id;
  ex.meta.interferer_id = record.interferer_id;
  out.speaker_id = record.speaker_id;
  if (record.enroll_path) out.enrollment = dsp::read_wav(resolve(manifest_path, *record.enroll_path));
  return out;
}

std::vector<LoadedExample> load_manifest(const fs::path& manifest_path) {
  std::vector<LoadedExample> out;
  for (const auto& r : read_manifest(manifest_path)) out.push_back(load_example(manifest_path, r));
  return out;
}

void write_sources(const fs::path& path, const std::vector<SourceRecord>& records) {
  std::vector<json> lines;
  for (const auto& r : records) {
    json j;
    j["wav_path"] = r.wav_path;
    j["intervals_path"] = r.intervals_path;
    j["speaker_id"] = r.speaker_id;
    if (r.enroll_path) j["enroll_path"] = *r.enroll_path;
    lines.push_back(std::move(j));
  }
  write_lines(path, lines);
}

std::vector<SourceRecord> read_sources(const fs::path& path) {
  std::vector<SourceRecord> out;
  for (const auto& j : read_lines(path)) {
    SourceRecord r;
    r.wav_path = field<std::string>(j, "wav_path", path);
    r.intervals_path = field<std::string>(j, "intervals_path", path);
    r.speaker_id = field<std::string>(j, "speaker_id", path);
    if (j.contains("enroll_path")) r.enroll_path = field<std::string>(j, "enroll_path", path);
    out.push_back(std::move(r));
  }
  return out;
}

SourceUtterance load_source(const fs::path& listing_path, const SourceRecord& record) {
  SourceUtterance u;
  u.wave = dsp::read_wav(resolve(listing_path, record.wav_path));
  u.speaker_id = record.speaker_id;
  u.activity = dsp::read_intervals(resolve(listing_path, record.intervals_path), u.wave.sample_rate());
  for (const auto& iv : u.activity)
    if (iv.end > u.wave.size()) throw FormatError(record.intervals_path + ": interval beyond utterance end");
  return u;
}

}  // namespace tss::mix
