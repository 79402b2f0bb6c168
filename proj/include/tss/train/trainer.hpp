#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tss/ad/adam.hpp"
#include "tss/ad/tensor.hpp"
#include "tss/loss/graph.hpp"
#include "tss/mix/manifest.hpp"
#include "tss/model/config.hpp"
#include "tss/model/separator.hpp"

namespace tss::train {

enum class TrainMode {
  kBaseline,  // eps SI-SNR on the full signal, min-mode data
  kJoint,     // weighted SI-SNR + lambda * BCE, max-mode data
};

struct TrainConfig {
  double lr0 = 1e-3;
  int plateau_patience = 3;
  double lr_factor = 0.5;
  int max_epochs = 50;
  std::size_t batch_size = 4;  // our choice
  double clip_seconds = 3.0;
  double lambda = 5.0;
  TrainMode mode = TrainMode::kJoint;
  std::uint64_t seed = 0;
  double grad_clip = 5.0;      // global norm; 0 disables
  double val_fraction = 0.1;   // split used when no validation set is given
  double eps = loss::kDefaultEps;

  void validate() const;
  loss::JointLossConfig loss_config() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Combined experiment file: {"model": {...}, "train": {...}}; either part may
// be omitted to take defaults.
struct ExperimentConfig {
  model::ModelConfig model;
  TrainConfig train;
};
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& config);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // in effect during the epoch
  double seconds = 0.0;
  std::size_t skipped_batches = 0;
};

std::string stats_csv(std::span<const EpochStats> stats);

// Learning rate for the next epoch given every validation loss so far. The
// rate is multiplied by `factor` when each of the last `patience` epochs fails
// to go strictly below the best loss seen before it; only the last
// `epochs_at_current_lr` epochs are eligible, so a fresh rate always gets a
// full window.
double lr_schedule_step(std::span<const double> val_history, double current_lr, std::size_t epochs_at_current_lr,
                        int patience = 3, double factor = 0.5);

// A training or validation item with its speaker conditioning resolved.
struct Example {
  mix::MixtureExample data;
  std::string speaker_id;
  std::optional<std::vector<double>> enrollment_embedding;
};

std::vector<Example> prepare_examples(const model::SeparatorModel& model, std::vector<mix::LoadedExample> loaded);

ad::Tensor conditioning(const model::SeparatorModel& model, const Example& example);

// Loss of one item treated as a batch of one.
double item_loss(const model::SeparatorModel& model, const Example& example, const TrainConfig& config);

// Mean per-item loss, no parameter updates.
double validate(const model::SeparatorModel& model, std::span<const Example> examples, const TrainConfig& config);

struct FitResult {
  std::vector<EpochStats> stats;
  std::size_t skipped_batches = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

struct FitOptions {
  std::optional<std::filesystem::path> out_dir;  // best checkpoint + stats.csv
  std::function<void(const EpochStats&)> on_epoch;
};

// Trains in place and leaves the model holding the parameters of the best
// validation epoch.
FitResult fit(model::SeparatorModel& model, std::span<const Example> train, std::span<const Example> val,
              const TrainConfig& config, const FitOptions& options = {});

// One optimizer step on a fixed batch (no clipping to fixed length).
// Returns the batch loss before the step, or nullopt if the batch was skipped.
std::optional<double> train_step(model::SeparatorModel& model, std::span<const Example> batch,
                                 const TrainConfig& config, ad::AdamState& adam);

}  // namespace tss::train
