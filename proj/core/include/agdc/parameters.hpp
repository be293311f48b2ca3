#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agdc/autodiff.hpp"
#include "agdc/rng.hpp"

namespace agdc {

using ad::Matrix;
using ad::Parameter;

/// Named parameter groups, each with a gradient buffer of the same shape.
/// Entries have stable addresses; iteration order is by name.
class ParameterStore {
 public:
  /// Register a zero-initialized group. Throws ConfigError on duplicate names.
  Parameter& add(const std::string& name, ad::Index rows, ad::Index cols);
  /// Register a group drawn from normal(0, stddev).
  Parameter& add_normal(const std::string& name, ad::Index rows, ad::Index cols, double stddev,
                        Rng& rng);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return groups_.contains(name); }

  std::vector<std::string> names() const;
  std::size_t size() const { return groups_.size(); }
  std::size_t total_entries() const;

  void zero_grad();
  /// Name of the first group with a non-finite value, empty when all finite.
  std::string first_nonfinite_value() const;
  std::string first_nonfinite_grad() const;

  /// Global L2 norm over all gradient buffers.
  double grad_norm() const;

  auto begin() { return groups_.begin(); }
  auto end() { return groups_.end(); }
  auto begin() const { return groups_.begin(); }
  auto end() const { return groups_.end(); }

 private:
  std::map<std::string, Parameter> groups_;
};

/// Resolves parameter names to tape leaves. A mutable store yields leaves
/// that receive gradients; a const store yields frozen views.
class Bind {
 public:
  Bind(ad::Tape& tape, ParameterStore& store) : tape_(&tape), mutable_(&store), store_(&store) {}
  Bind(ad::Tape& tape, const ParameterStore& store) : tape_(&tape), store_(&store) {}

  ad::Var operator()(const std::string& name) const;
  ad::Tape& tape() const { return *tape_; }
  bool tracks_gradients() const { return mutable_ != nullptr; }

 private:
  ad::Tape* tape_;
  ParameterStore* mutable_ = nullptr;
  const ParameterStore* store_;
  mutable std::map<std::string, ad::Var> cache_;
};

}  // namespace agdc
