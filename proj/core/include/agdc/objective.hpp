#pragma once

#include <cstddef>
#include <vector>

#include "agdc/model.hpp"

namespace agdc {

struct LossWeights {
  double lambda_cont = 100.0;
  double lambda_len = 0.1;
  double alpha = 0.1;
  int diffusion_draws = 4;
};

/// Teacher-forced batch. Each sequence is trained as [BOS, units..., EOS];
/// specials already present are ignored. `masks[s][i]` switches off target
/// position i (0..n, the last being EOS); an empty mask keeps everything.
struct Batch {
  std::vector<UnitSequence> sequences;
  std::vector<std::vector<bool>> masks;
};

struct LossTerms {
  ad::Var total;
  double total_value = 0.0;
  double ce = 0.0;
  double cont = 0.0;
  double length = 0.0;
  /// Mean |E[length] - L_target| over sequences with unmasked positions.
  double length_error = 0.0;
  std::size_t positions = 0;
};

/// L_d + lambda_cont * L_c + lambda_len * L_len on the tape behind `bind`.
///
/// L_d averages cross-entropy over unmasked targets using EOS-adjusted
/// logits. L_c averages the denoising loss over unmasked content targets.
/// L_len averages (E - n)^2 over sequences, where E is the expected stop
/// step computed from the adjusted EOS probabilities at the latents that
/// have seen 1..n content units and n is the sequence's content length.
LossTerms total_loss(const Bind& bind, const Model& model, const Batch& batch,
                     const LossWeights& weights, Rng& rng);

/// Loss without gradients or dropout.
LossTerms evaluate_loss(const Model& model, const std::vector<UnitSequence>& data,
                        const LossWeights& weights, std::uint64_t seed);

}  // namespace agdc
