#include "tss/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "tss/ad/ops.hpp"
#include "tss/errors.hpp"
#include "tss/metrics/metrics.hpp"
#include "tss/mix/synth.hpp"

namespace tss::train {

using ad::Tensor;
using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw DomainError("TrainConfig: lr0 must be positive");
  if (plateau_patience < 1) throw DomainError("TrainConfig: plateau_patience must be >= 1");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw DomainError("TrainConfig: lr_factor must lie in (0, 1)");
  if (max_epochs < 1) throw DomainError("TrainConfig: max_epochs must be >= 1");
  if (batch_size < 1) throw DomainError("TrainConfig: batch_size must be >= 1");
  if (!(clip_seconds > 0.0)) throw DomainError("TrainConfig: clip_seconds must be positive");
  if (!(lambda >= 0.0)) throw DomainError("TrainConfig: lambda must be non-negative");
  if (!(grad_clip >= 0.0)) throw DomainError("TrainConfig: grad_clip must be non-negative");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw DomainError("TrainConfig: val_fraction must lie in (0, 1)");
  if (!(eps > 0.0)) throw DomainError("TrainConfig: eps must be positive");
}

loss::JointLossConfig TrainConfig::loss_config() const {
  loss::JointLossConfig c;
  c.lambda = lambda;
  c.eps = eps;
  return c;
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"lr0", c.lr0},
           {"plateau_patience", c.plateau_patience},
           {"lr_factor", c.lr_factor},
           {"max_epochs", c.max_epochs},
           {"batch_size", c.batch_size},
           {"clip_seconds", c.clip_seconds},
           {"lambda", c.lambda},
           {"mode", c.mode == TrainMode::kJoint ? "joint" : "baseline"},
           {"seed", c.seed},
           {"grad_clip", c.grad_clip},
           {"val_fraction", c.val_fraction},
           {"eps", c.eps}};
}

void from_json(const json& j, TrainConfig& c) {
  static const char* known[] = {"lr0",    "plateau_patience", "lr_factor", "max_epochs",   "batch_size", "clip_seconds",
                                "lambda", "mode",             "seed",      "grad_clip", "val_fraction", "eps"};
  for (const auto& [key, value] : j.items())
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
      throw FormatError("train config: unknown field '" + key + "'");
  TrainConfig d;
  c.lr0 = j.value("lr0", d.lr0);
  c.plateau_patience = j.value("plateau_patience", d.plateau_patience);
  c.lr_factor = j.value("lr_factor", d.lr_factor);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.clip_seconds = j.value("clip_seconds", d.clip_seconds);
  c.lambda = j.value("lambda", d.lambda);
  const std::string mode = j.value("mode", std::string("joint"));
  if (mode == "joint")
    c.mode = TrainMode::kJoint;
  else if (mode == "baseline")
    c.mode = TrainMode::kBaseline;
  else
    throw FormatError("train config: mode must be 'joint' or 'baseline'");
  c.seed = j.value("seed", d.seed);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.val_fraction = j.value("val_fraction", d.val_fraction);
  c.eps = j.value("eps", d.eps);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
    for (const auto& [key, value] : j.items())
      if (key != "model" && key != "train") throw FormatError(path.string() + ": unknown section '" + key + "'");
    ExperimentConfig c;
    if (j.contains("model")) c.model = j["model"].get<model::ModelConfig>();
    if (j.contains("train")) c.train = j["train"].get<TrainConfig>();
    c.model.validate();
    c.train.validate();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << json{{"model", config.model}, {"train", config.train}}.dump(2) << '\n';
}

std::string stats_csv(std::span<const EpochStats> stats) {
  std::string out = "epoch,train_loss,val_loss,lr,seconds\n";
  char buf[160];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.3f\n", s.epoch, s.train_loss, s.val_loss, s.lr, s.seconds);
    out += buf;
  }
  return out;
}

double lr_schedule_step(std::span<const double> val_history, double current_lr, std::size_t epochs_at_current_lr,
                        int patience, double factor) {
  if (val_history.empty()) throw DomainError("lr_schedule_step: empty history");
  const auto p = static_cast<std::size_t>(patience);
  const std::size_t n = val_history.size();
  if (epochs_at_current_lr < p || n <= p) return current_lr;
  const double best_before = *std::min_element(val_history.begin(), val_history.end() - static_cast<std::ptrdiff_t>(p));
  for (std::size_t i = n - p; i < n; ++i)
    if (val_history[i] < best_before) return current_lr;
  return current_lr * factor;
}

std::vector<Example> prepare_examples(const model::SeparatorModel& model, std::vector<mix::LoadedExample> loaded) {
  std::vector<Example> out;
  out.reserve(loaded.size());
  const bool enrollment = model.config().provider == model::EmbeddingProvider::kEnrollment;
  for (auto& l : loaded) {
    Example e;
    e.speaker_id = l.speaker_id;
    if (enrollment) {
      if (!l.enrollment) throw DomainError("example for speaker '" + l.speaker_id + "' has no enrollment audio");
      e.enrollment_embedding = model.enrollment_embedding(*l.enrollment);
    }
    e.data = std::move(l.example);
    out.push_back(std::move(e));
  }
  return out;
}

Tensor conditioning(const model::SeparatorModel& model, const Example& example) {
  if (example.enrollment_embedding) return model.embedding_tensor(*example.enrollment_embedding);
  return model.embedding_for({example.speaker_id, std::nullopt});
}

namespace {

Tensor example_loss(const model::SeparatorModel& model, const mix::MixtureExample& data, const Tensor& embedding,
                    double weight_sum, std::size_t batch_size, const TrainConfig& config) {
  const model::JointOutput out = model.forward_joint(data.mixture, embedding);
  if (config.mode == TrainMode::kBaseline) {
    return loss::baseline_item_loss(out.estimate, data.target.samples(), batch_size, config.eps);
  }
  if (!out.vad_probability.defined()) throw StateError("joint training needs a model with a VAD branch");
  const loss::JointItem item{out.estimate, out.vad_probability, data.target.samples(), &data.z};
  return loss::joint_item_loss(item, weight_sum, batch_size, config.loss_config());
}

void require_finite(double value, const std::string& where) {
  if (!std::isfinite(value)) throw NumericError("non-finite loss " + std::to_string(value) + " at " + where);
}

std::optional<double> step_on(model::SeparatorModel& model, std::span<const Example> batch,
                              std::span<const mix::MixtureExample> data, const TrainConfig& config,
                              ad::AdamState& adam, const std::string& where) {
  double weight_sum = 0.0;
  for (const auto& d : data) {
    const double w = loss::duration_weight(d.z);
    if (config.mode == TrainMode::kBaseline && w == 0.0)
      throw StateError("baseline training met an item without target activity at " + where);
    weight_sum += w;
  }
  if (config.mode == TrainMode::kJoint && weight_sum == 0.0) return std::nullopt;

  auto& params = model.parameters();
  ad::zero_grads(params);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tensor l = example_loss(model, data[i], conditioning(model, batch[i]), weight_sum, batch.size(), config);
    require_finite(l.item(), where);
    total += l.item();
    l.backward();
  }
  if (config.grad_clip > 0.0) ad::clip_grad_norm(params, config.grad_clip);
  try {
    ad::adam_step(params, adam);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at " + where);
  }
  return total;
}

}  // namespace

double item_loss(const model::SeparatorModel& model, const Example& example, const TrainConfig& config) {
  ad::NoGradGuard no_grad;
  return example_loss(model, example.data, conditioning(model, example), loss::duration_weight(example.data.z), 1,
                      config)
      .item();
}

double validate(const model::SeparatorModel& model, std::span<const Example> examples, const TrainConfig& config) {
  if (examples.empty()) throw DomainError("validate: empty validation set");
  double total = 0.0;
  for (const auto& e : examples) total += item_loss(model, e, config);
  return total / static_cast<double>(examples.size());
}

std::optional<double> train_step(model::SeparatorModel& model, std::span<const Example> batch,
                                 const TrainConfig& config, ad::AdamState& adam) {
  std::vector<mix::MixtureExample> data;
  for (const auto& e : batch) data.push_back(e.data);
  return step_on(model, batch, data, config, adam, "train_step");
}

FitResult fit(model::SeparatorModel& model, std::span<const Example> train, std::span<const Example> val,
              const TrainConfig& config, const FitOptions& options) {
  config.validate();
  if (train.empty()) throw DomainError("fit: empty training set");
  if (val.empty()) throw DomainError("fit: empty validation set");
  if (config.mode == TrainMode::kJoint && !model.config().with_vad)
    throw StateError("fit: joint mode needs a model with a VAD branch");

  ad::AdamState adam;
  adam.lr = config.lr0;
  FitResult result;
  std::vector<double> history;
  std::vector<ad::NamedArray> best_state = model.state();
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_at_lr = 0;
  const auto clip_length =
      static_cast<std::size_t>(std::llround(config.clip_seconds * model.config().sample_rate));

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t epoch_seed = mix::derive_seed(config.seed, static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = adam.lr;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Example> batch;
      std::vector<mix::MixtureExample> data;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train[order[i]]);
        data.push_back(mix::clip_example(train[order[i]].data, clip_length, mix::derive_seed(epoch_seed, order[i])));
      }
      const std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(start / config.batch_size);
      const auto value = step_on(model, batch, data, config, adam, where);
      if (!value) {
        ++stats.skipped_batches;
        continue;
      }
      loss_sum += *value;
      ++batches;
    }
    stats.train_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : std::nan("");
    stats.val_loss = validate(model, val, config);
    require_finite(stats.val_loss, "validation after epoch " + std::to_string(epoch));
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.skipped_batches += stats.skipped_batches;
    result.stats.push_back(stats);
    history.push_back(stats.val_loss);

    if (stats.val_loss < result.best_val_loss) {
      result.best_val_loss = stats.val_loss;
      result.best_epoch = epoch;
      best_state = model.state();
      if (options.out_dir) model.save(*options.out_dir);
    }
    if (options.out_dir) metrics::write_text(*options.out_dir / "stats.csv", stats_csv(result.stats));
    if (options.on_epoch) options.on_epoch(stats);

    ++epochs_at_lr;
    const double next = lr_schedule_step(history, adam.lr, epochs_at_lr, config.plateau_patience, config.lr_factor);
    if (next != adam.lr) {
      adam.lr = next;
      epochs_at_lr = 0;
    }
  }
  model.load_state(best_state);
  model.mark_trained();
  if (options.out_dir) model.save(*options.out_dir);
  return result;
}

}  // namespace tss::train
