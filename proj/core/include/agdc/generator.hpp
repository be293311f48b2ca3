#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agdc/model.hpp"

namespace agdc {

struct GenConfig {
  /// Maximum number of content units in an output.
  int max_len = 64;
  double temperature = 1.0;
  SamplerMode sampler = SamplerMode::ancestral;
  int stride = 1;
  std::uint64_t seed = 0;
  /// Units to reproduce at the head of the output, with or without a
  /// leading BOS. Must not contain EOS.
  std::optional<UnitSequence> prefix;

  void validate(const Model& model) const;
};

struct Generated {
  UnitSequence sequence;
  /// Set when max_len was reached before EOS was sampled; such sequences
  /// end without EOS.
  bool truncated = false;
};

/// Autoregressive sampling. Each step runs the backbone over the current
/// units, draws the next id from the EOS-adjusted categorical at the given
/// temperature (BOS and PAD masked), stops on EOS, and otherwise draws the
/// continuous vector by reverse diffusion conditioned on the latent.
Generated generate(const Model& model, const GenConfig& config);

struct Completion {
  std::optional<Generated> result;
  std::string error;
};

/// One generation per prefix with seed derive_seed(config.seed, index), so
/// any partition of the list gives the same outputs. Invalid prefixes yield
/// an error entry and do not stop the batch.
std::vector<Completion> complete_batch(const Model& model, const std::vector<UnitSequence>& prefixes,
                                       const GenConfig& config);

/// `count` unconditional samples seeded like complete_batch.
std::vector<Generated> generate_many(const Model& model, int count, const GenConfig& config);

/// index,length,truncated
void write_generation_csv(std::ostream& out, const std::vector<Generated>& samples,
                          const SchemaSpec& spec);

}  // namespace agdc
