#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agdc/parameters.hpp"
#include "agdc/schema.hpp"

namespace agdc {

struct ModelConfig {
  int d_model = 64;
  int layers = 4;
  int heads = 4;
  int max_len = 128;
  std::uint64_t seed = 0;
  /// Standard deviation of the normal initializer for weight matrices.
  double init_std = 0.02;
  /// Dropout on the hidden layer of the discrete and EOS heads.
  double dropout = 0.1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Per-step conditioning vector; `position` is the 1-based index of the unit
/// it predicts, so it summarizes units 0..position-1 (BOS first).
struct LatentState {
  Eigen::VectorXd z;
  int position = 0;
};

/// Rows of several sequences packed for one batched forward pass.
struct PackedInput {
  std::vector<int> ids;
  Matrix cont;
  std::vector<ad::Index> positions;
  std::vector<ad::Segment> segments;

  ad::Index rows() const { return static_cast<ad::Index>(ids.size()); }
};

PackedInput pack_units(std::span<const std::span<const AtomicUnit>> sequences, int cont_dim);
PackedInput pack_units(std::span<const AtomicUnit> sequence, int cont_dim);

/// Causal pre-norm transformer decoder over fused unit embeddings.
///
/// Embedding: the discrete id selects a row of a (K+3) x D/2 table, the
/// continuous vector is projected by an m x D/2 matrix, and the
/// concatenation passes through a learned D x D fusion map. Learned
/// positional embeddings are added afterwards.
class Backbone {
 public:
  Backbone(ModelConfig config, SchemaSpec schema);

  void register_parameters(ParameterStore& store, Rng& rng) const;

  /// Fused embeddings, N x D, before positional terms.
  ad::Var embed(const Bind& bind, const PackedInput& input) const;
  /// Latents, N x D. Row r attends to rows of its own segment up to r.
  ad::Var forward(const Bind& bind, const PackedInput& input) const;

  const ModelConfig& config() const { return config_; }
  const SchemaSpec& schema() const { return schema_; }

 private:
  ad::Var layer(const Bind& bind, ad::Var x, int l, std::span<const ad::Segment> segments) const;
  static std::string name(int layer, const char* part);

  ModelConfig config_;
  SchemaSpec schema_;
};

/// Fused embedding of a single unit (length D).
Eigen::VectorXd embed_unit(const AtomicUnit& unit, const Backbone& backbone,
                           const ParameterStore& params);

/// Latents for a prefix beginning with BOS. Entry j summarizes units 0..j.
std::vector<LatentState> forward(std::span<const AtomicUnit> prefix, const Backbone& backbone,
                                 const ParameterStore& params);

}  // namespace agdc
