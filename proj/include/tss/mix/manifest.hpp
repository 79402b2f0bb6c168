#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tss/dsp/waveform.hpp"
#include "tss/mix/mixer.hpp"
#include "tss/mix/synth.hpp"

namespace tss::mix {

// One line of a mixture manifest. Paths are relative to the manifest file.
struct ManifestRecord {
  std::string mixture_path;
  std::string target_path;
  std::optional<std::string> enroll_path;
  std::string speaker_id;
  std::string interferer_id;
  std::string vad_path;
  double overlap_ratio = 0.0;
  std::string mode;
  double snr_db = 0.0;
  std::optional<double> noise_snr_db;
  std::uint64_t seed = 0;
  std::optional<double> requested_overlap;
  bool skipped = false;
  std::string skip_reason;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
// Skipped records are dropped unless keep_skipped is set.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path, bool keep_skipped = false);

// Writes <stem>_mix.wav, <stem>_target.wav and <stem>_vad.txt under `dir` and
// returns the record with paths relative to `dir`.
ManifestRecord save_example(const std::filesystem::path& dir, const std::string& stem, const MixtureExample& example,
                            const std::optional<std::string>& enroll_path);

struct LoadedExample {
  MixtureExample example;
  std::string speaker_id;
  std::optional<dsp::Waveform> enrollment;
};

LoadedExample load_example(const std::filesystem::path& manifest_path, const ManifestRecord& record);
std::vector<LoadedExample> load_manifest(const std::filesystem::path& manifest_path);

// Listing of source utterances produced by `synth`.
struct SourceRecord {
  std::string wav_path;
  std::string intervals_path;
  std::string speaker_id;
  std::optional<std::string> enroll_path;
};

void write_sources(const std::filesystem::path& path, const std::vector<SourceRecord>& records);
std::vector<SourceRecord> read_sources(const std::filesystem::path& path);
SourceUtterance load_source(const std::filesystem::path& listing_path, const SourceRecord& record);

}  // namespace tss::mix
