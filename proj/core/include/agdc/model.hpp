#pragma once

#include <functional>
#include <string>
#include <vector>

#include "agdc/backbone.hpp"
#include "agdc/diffusion.hpp"
#include "agdc/heads.hpp"
#include "agdc/parameters.hpp"
#include "agdc/schema.hpp"

namespace agdc {

/// Backbone, heads, denoiser and noise schedule sharing one ParameterStore.
/// Parameters are drawn deterministically from `ModelConfig::seed`.
class Model {
 public:
  Model(SchemaSpec schema, ModelConfig model_config, DiffusionConfig diffusion_config);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const SchemaSpec& schema() const { return schema_; }
  const ModelConfig& model_config() const { return backbone_.config(); }
  const DiffusionConfig& diffusion_config() const { return denoiser_.config(); }
  const Backbone& backbone() const { return backbone_; }
  const Heads& heads() const { return heads_; }
  const Denoiser& denoiser() const { return denoiser_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  /// Scale of the EOS logit adjustment used when sampling.
  double eos_alpha() const { return eos_alpha_; }
  void set_eos_alpha(double alpha);

 private:
  SchemaSpec schema_;
  Backbone backbone_;
  Heads heads_;
  Denoiser denoiser_;
  NoiseSchedule schedule_;
  ParameterStore params_;
  double eos_alpha_ = 0.1;
};

struct GradientCheckConfig {
  ModelConfig model{.d_model = 8, .layers = 2, .heads = 2, .max_len = 16, .seed = 7, .init_std = 0.5,
                    .dropout = 0.0};
  DiffusionConfig diffusion{.steps = 10, .kind = ScheduleKind::cosine, .blocks = 2, .width = 8};
  double lambda_cont = 100.0;
  double lambda_len = 0.1;
  double alpha = 0.1;
  int diffusion_draws = 2;
  int sequences = 3;
  std::size_t samples_per_group = 200;
  double step = 1e-5;
  std::uint64_t seed = 11;
};

struct GroupGradientError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradientCheckReport {
  std::vector<GroupGradientError> groups;
  double max_rel_error = 0.0;
  bool passed = false;
  /// First failing group, or the group holding a non-finite gradient.
  std::string failed_group;
  std::string message;
};

/// |a - n| / max(|a|, |n|, floor): the floor keeps entries whose true
/// gradient is at round-off level from dominating the report.
double gradient_rel_error(double analytic, double numeric, double floor);

/// Compares analytic total-loss gradients of a freshly initialized tiny
/// model with central finite differences on up to `samples_per_group`
/// coordinates per group. `corrupt` runs on the analytic gradients before
/// comparison (fault injection).
GradientCheckReport gradient_check(const GradientCheckConfig& config, double tolerance,
                                   const std::function<void(ParameterStore&)>& corrupt = {});

}  // namespace agdc
