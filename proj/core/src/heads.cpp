#include "agdc/heads.hpp"

#include <cmath>

#include "agdc/error.hpp"

namespace agdc {

using ad::Index;
using ad::Var;

Heads::Heads(int d_model, SchemaSpec schema, double dropout)
    : d_model_(d_model), schema_(std::move(schema)), dropout_(dropout) {
  if (d_model < 1) throw ConfigError("heads: d_model must be positive");
}

void Heads::register_parameters(ParameterStore& store, Rng& rng, double init_std) const {
  const Index d = d_model_;
  store.add_normal("heads.disc.w1", d, 2 * d, init_std, rng);
  store.add("heads.disc.b1", 1, 2 * d);
  store.add_normal("heads.disc.w2", 2 * d, schema_.vocab_size(), init_std, rng);
  store.add("heads.disc.b2", 1, schema_.vocab_size());
  store.add_normal("heads.eos.w1", d, 2 * d, init_std, rng);
  store.add("heads.eos.b1", 1, 2 * d);
  store.add("heads.eos.w2", 2 * d, 1);
  store.add("heads.eos.b2", 1, 1);
}

Var Heads::discrete_logits(const Bind& bind, Var z) const {
  Var h = ad::gelu(ad::linear(z, bind("heads.disc.w1"), bind("heads.disc.b1")));
  h = ad::dropout(h, dropout_);
  return ad::linear(h, bind("heads.disc.w2"), bind("heads.disc.b2"));
}

Var Heads::eos_term(const Bind& bind, Var z) const {
  Var h = ad::gelu(ad::linear(z, bind("heads.eos.w1"), bind("heads.eos.b1")));
  h = ad::dropout(h, dropout_);
  return ad::linear(h, bind("heads.eos.w2"), bind("heads.eos.b2"));
}

Var Heads::adjusted_logits(const Bind& bind, Var z, double alpha) const {
  Var logits = discrete_logits(bind, z);
  if (alpha == 0.0) return logits;
  return ad::add_to_column(logits, schema_.eos(), ad::scale(eos_term(bind, z), alpha));
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - mx).exp();
  return e / e.sum();
}

StepOutputs discrete_logits(const LatentState& z, const Heads& heads, const ParameterStore& params) {
  if (!z.z.allFinite()) throw NumericError("discrete_logits: non-finite latent");
  ad::Tape tape;
  Bind bind(tape, params);
  Var logits = heads.discrete_logits(bind, tape.constant(z.z.transpose()));
  StepOutputs out;
  out.logits = logits.value().row(0).transpose();
  if (!out.logits.allFinite()) throw NumericError("discrete_logits: non-finite logits");
  out.adjusted_logits = out.logits;
  out.p_eos = softmax(out.logits)(heads.schema().eos());
  return out;
}

StepOutputs eos_adjust(StepOutputs outputs, double eos_term, double alpha, const SchemaSpec& schema) {
  if (alpha < 0.0) throw ConfigError("eos_adjust: alpha must be >= 0");
  outputs.adjusted_logits = outputs.logits;
  outputs.adjusted_logits(schema.eos()) += alpha * eos_term;
  if (!outputs.adjusted_logits.allFinite()) throw NumericError("eos_adjust: non-finite logits");
  outputs.p_eos = softmax(outputs.adjusted_logits)(schema.eos());
  return outputs;
}

StepOutputs eos_adjust(StepOutputs outputs, const LatentState& z, const Heads& heads,
                       const ParameterStore& params, double alpha) {
  ad::Tape tape;
  Bind bind(tape, params);
  const double term = heads.eos_term(bind, tape.constant(z.z.transpose())).value()(0, 0);
  return eos_adjust(std::move(outputs), term, alpha, heads.schema());
}

double ce_loss(int target, const StepOutputs& outputs, const SchemaSpec& schema) {
  if (target == schema.pad()) throw ConfigError("ce_loss: PAD target must be masked out");
  if (target < 0 || target >= schema.vocab_size()) throw IndexError("ce_loss: target id out of range");
  const Eigen::VectorXd& l = outputs.adjusted_logits;
  const double mx = l.maxCoeff();
  const double lse = mx + std::log((l.array() - mx).exp().sum());
  return lse - l(target);
}

double expected_length(std::span<const double> p_eos) {
  double survive = 1.0;
  double e = 0.0;
  for (std::size_t t = 0; t < p_eos.size(); ++t) {
    e += static_cast<double>(t + 1) * p_eos[t] * survive;
    survive *= 1.0 - p_eos[t];
  }
  return e;
}

double length_loss(double expected, double target) {
  const double d = expected - target;
  return d * d;
}

}  // namespace agdc
