#pragma once

#include <span>

#include <Eigen/Dense>

#include "agdc/backbone.hpp"
#include "agdc/parameters.hpp"
#include "agdc/schema.hpp"

namespace agdc {

/// Categorical head and EOS logit adjustment, both two-layer GELU MLPs with
/// hidden width 2D. The EOS head's output layer starts at zero.
class Heads {
 public:
  Heads(int d_model, SchemaSpec schema, double dropout);

  void register_parameters(ParameterStore& store, Rng& rng, double init_std) const;

  /// N x (K+3) logits.
  ad::Var discrete_logits(const Bind& bind, ad::Var z) const;
  /// N x 1 adjustment term, before scaling by alpha.
  ad::Var eos_term(const Bind& bind, ad::Var z) const;
  /// Logits with alpha * eos_term added to the EOS column.
  ad::Var adjusted_logits(const Bind& bind, ad::Var z, double alpha) const;

  const SchemaSpec& schema() const { return schema_; }
  int d_model() const { return d_model_; }

 private:
  int d_model_;
  SchemaSpec schema_;
  double dropout_;
};

struct StepOutputs {
  Eigen::VectorXd logits;
  Eigen::VectorXd adjusted_logits;
  double p_eos = 0.0;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Head outputs for one latent, no adjustment applied yet.
StepOutputs discrete_logits(const LatentState& z, const Heads& heads, const ParameterStore& params);

/// Adds alpha * MLP_EOS(z) to the EOS logit; all other logits unchanged.
StepOutputs eos_adjust(StepOutputs outputs, const LatentState& z, const Heads& heads,
                       const ParameterStore& params, double alpha);
/// Same update with a precomputed adjustment term.
StepOutputs eos_adjust(StepOutputs outputs, double eos_term, double alpha, const SchemaSpec& schema);

/// -log p(target) under the adjusted distribution. Throws on PAD targets.
double ce_loss(int target, const StepOutputs& outputs, const SchemaSpec& schema);

/// sum_t t * p_t * prod_{i<t} (1 - p_i), t = 1..T, no tail correction.
double expected_length(std::span<const double> p_eos);

double length_loss(double expected, double target);

}  // namespace agdc
