#include "agdc/parameters.hpp"

#include <cmath>

#include "agdc/error.hpp"

namespace agdc {

Parameter& ParameterStore::add(const std::string& name, ad::Index rows, ad::Index cols) {
  if (groups_.contains(name)) throw ConfigError("parameter group registered twice: " + name);
  Parameter p{name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)};
  return groups_.emplace(name, std::move(p)).first->second;
}

Parameter& ParameterStore::add_normal(const std::string& name, ad::Index rows, ad::Index cols,
                                      double stddev, Rng& rng) {
  Parameter& p = add(name, rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (ad::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
  return p;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = groups_.find(name);
  if (it == groups_.end()) throw ConfigError("unknown parameter group: " + name);
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = groups_.find(name);
  if (it == groups_.end()) throw ConfigError("unknown parameter group: " + name);
  return it->second;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(groups_.size());
  for (const auto& [name, _] : groups_) out.push_back(name);
  return out;
}

std::size_t ParameterStore::total_entries() const {
  std::size_t n = 0;
  for (const auto& [_, p] : groups_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : groups_) {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    } else {
      p.grad.setZero();
    }
  }
}

std::string ParameterStore::first_nonfinite_value() const {
  for (const auto& [name, p] : groups_) {
    if (!p.value.allFinite()) return name;
  }
  return {};
}

std::string ParameterStore::first_nonfinite_grad() const {
  for (const auto& [name, p] : groups_) {
    if (!p.grad.allFinite()) return name;
  }
  return {};
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [_, p] : groups_) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

ad::Var Bind::operator()(const std::string& name) const {
  if (auto it = cache_.find(name); it != cache_.end()) return it->second;
  ad::Var v = mutable_ ? tape_->param(mutable_->at(name)) : tape_->frozen(store_->at(name));
  cache_.emplace(name, v);
  return v;
}

}  // namespace agdc
