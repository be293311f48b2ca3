#include "agdc/generator.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "agdc/error.hpp"

namespace agdc {

void GenConfig::validate(const Model& model) const {
  if (max_len < 1) throw ConfigError("generate: max_len must be >= 1");
  if (max_len > model.model_config().max_len) {
    throw ConfigError("generate: max_len " + std::to_string(max_len) + " exceeds model capacity " +
                      std::to_string(model.model_config().max_len));
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("generate: temperature must be > 0");
  }
  if (stride < 1) throw ConfigError("generate: stride must be >= 1");
}

namespace {

std::vector<AtomicUnit> prefix_units(const GenConfig& config, const SchemaSpec& spec) {
  UnitSequence seq;
  seq.units.push_back(special_unit(spec, spec.bos()));
  if (!config.prefix) return seq.units;
  const auto& given = config.prefix->units;
  for (std::size_t i = 0; i < given.size(); ++i) {
    if (i == 0 && given[i].d == spec.bos()) continue;
    if (given[i].d == spec.eos()) throw ConfigError("generate: prefix contains EOS");
    seq.units.push_back(given[i]);
  }
  if (auto v = validate_sequence(seq, spec); !v) {
    throw ConfigError("generate: invalid prefix at unit " + std::to_string(v.position) + ": " + v.message);
  }
  const int n = static_cast<int>(seq.units.size()) - 1;
  if (n >= config.max_len) {
    throw ConfigError("generate: prefix length " + std::to_string(n) + " must be below max_len " +
                      std::to_string(config.max_len));
  }
  return seq.units;
}

}  // namespace

Generated generate(const Model& model, const GenConfig& config) {
  config.validate(model);
  const SchemaSpec& spec = model.schema();
  const ParameterStore& params = model.params();
  std::vector<AtomicUnit> units = prefix_units(config, spec);
  const std::vector<int> steps = stride_steps(model.schedule().steps(), config.stride);
  Rng rng(config.seed);

  Generated out;
  while (true) {
    if (static_cast<int>(units.size()) - 1 >= config.max_len) {
      out.truncated = true;
      break;
    }
    const std::vector<LatentState> latents = forward(units, model.backbone(), params);
    const LatentState& z = latents.back();
    StepOutputs step = eos_adjust(discrete_logits(z, model.heads(), params), z, model.heads(), params,
                                  model.eos_alpha());
    Eigen::VectorXd scaled = step.adjusted_logits / config.temperature;
    scaled(spec.bos()) = -std::numeric_limits<double>::infinity();
    scaled(spec.pad()) = -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd probs = softmax(scaled);
    std::discrete_distribution<int> pick(probs.data(), probs.data() + probs.size());
    const int d = pick(rng);
    if (d == spec.eos()) {
      units.push_back(special_unit(spec, spec.eos()));
      break;
    }
    const Eigen::VectorXd c =
        sample_reverse(model.denoiser(), params, z.z, model.schedule(), steps, config.sampler, rng);
    units.push_back(AtomicUnit{d, std::vector<double>(c.data(), c.data() + c.size())});
  }
  out.sequence.units = std::move(units);
  return out;
}

std::vector<Completion> complete_batch(const Model& model, const std::vector<UnitSequence>& prefixes,
                                       const GenConfig& config) {
  std::vector<Completion> out;
  out.reserve(prefixes.size());
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    GenConfig item = config;
    item.prefix = prefixes[i];
    item.seed = derive_seed(config.seed, i);
    try {
      out.push_back({generate(model, item), {}});
    } catch (const Error& e) {
      out.push_back({std::nullopt, e.what()});
    }
  }
  return out;
}

std::vector<Generated> generate_many(const Model& model, int count, const GenConfig& config) {
  if (count < 0) throw ConfigError("generate: count must be >= 0");
  std::vector<Generated> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    GenConfig item = config;
    item.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    out.push_back(generate(model, item));
  }
  return out;
}

void write_generation_csv(std::ostream& out, const std::vector<Generated>& samples,
                          const SchemaSpec& spec) {
  out << "index,length,truncated\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << i << ',' << samples[i].sequence.length(spec) << ',' << (samples[i].truncated ? 1 : 0) << '\n';
  }
}

}  // namespace agdc
