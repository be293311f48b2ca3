#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "agdc/model.hpp"
#include "agdc/objective.hpp"

namespace agdc {

struct TrainConfig {
  double lambda_cont = 100.0;
  double lambda_len = 0.1;
  double alpha = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 10;
  /// Stop after this many optimizer steps; 0 means run all epochs.
  long max_steps = 0;
  int diffusion_draws = 4;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  LossWeights weights() const { return {lambda_cont, lambda_len, alpha, diffusion_draws}; }
};

/// First-order adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam(double learning_rate, double beta1, double beta2, double eps);
  void step(ParameterStore& params);
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

struct EpochMetrics {
  int epoch = 0;
  long step = 0;
  double ce = 0.0;
  double cont = 0.0;
  double length = 0.0;
  double length_error = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  long steps = 0;
  bool diverged = false;
  std::string message;
};

/// Teacher-forced training with Adam and global-norm clipping. Every batch
/// draws from RNG streams derived from `config.seed`, so a run is
/// reproducible on one worker. On a non-finite loss or gradient the
/// parameters are restored to the last completed epoch and the run stops
/// with `diverged` set.
TrainResult train(Model& model, const std::vector<UnitSequence>& data, const TrainConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics);

// Key-value config files: one `key = value` per line, `#` starts a comment.

std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> load_key_values(const std::string& path);

/// Applies recognized keys and erases them from `kv`.
void apply_config(TrainConfig& config, std::map<std::string, std::string>& kv);
void apply_config(ModelConfig& config, std::map<std::string, std::string>& kv);
void apply_config(DiffusionConfig& config, std::map<std::string, std::string>& kv);

std::string to_config_text(const TrainConfig& train, const ModelConfig& model,
                           const DiffusionConfig& diffusion);

}  // namespace agdc
