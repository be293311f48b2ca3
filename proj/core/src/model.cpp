#include "agdc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "agdc/error.hpp"
#include "agdc/objective.hpp"

namespace agdc {

Model::Model(SchemaSpec schema, ModelConfig model_config, DiffusionConfig diffusion_config)
    : schema_(schema),
      backbone_(model_config, schema),
      heads_(model_config.d_model, schema, model_config.dropout),
      denoiser_(diffusion_config, schema.cont_dim(), model_config.d_model),
      schedule_(NoiseSchedule::build(diffusion_config.steps, diffusion_config.kind)) {
  Rng rng(model_config.seed);
  backbone_.register_parameters(params_, rng);
  heads_.register_parameters(params_, rng, model_config.init_std);
  denoiser_.register_parameters(params_, rng, model_config.init_std);
}

void Model::set_eos_alpha(double alpha) {
  if (alpha < 0.0) throw ConfigError("eos alpha must be >= 0");
  eos_alpha_ = alpha;
}

double gradient_rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<UnitSequence> random_sequences(const SchemaSpec& spec, int count, int max_units, Rng& rng) {
  std::uniform_int_distribution<int> len(1, max_units);
  std::uniform_int_distribution<int> cls(0, spec.num_classes() - 1);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::vector<UnitSequence> out;
  for (int s = 0; s < count; ++s) {
    std::vector<AtomicUnit> content(static_cast<std::size_t>(len(rng)));
    for (auto& u : content) {
      u.d = cls(rng);
      u.c.resize(static_cast<std::size_t>(spec.cont_dim()));
      for (double& v : u.c) v = coord(rng);
    }
    out.push_back(make_sequence(spec, content));
  }
  return out;
}

}  // namespace

GradientCheckReport gradient_check(const GradientCheckConfig& config, double tolerance,
                                   const std::function<void(ParameterStore&)>& corrupt) {
  if (config.model.d_model > 16 || config.model.layers > 2) {
    throw ConfigError("gradient_check: use a tiny model (d_model <= 16, layers <= 2)");
  }
  const SchemaSpec spec = SchemaSpec::layout();
  Model model(spec, config.model, config.diffusion);
  Rng data_rng(config.seed);
  Batch batch{random_sequences(spec, config.sequences, std::min(5, config.model.max_len - 1), data_rng), {}};
  const LossWeights weights{config.lambda_cont, config.lambda_len, config.alpha, config.diffusion_draws};
  const std::uint64_t loss_seed = derive_seed(config.seed, 1);

  const auto loss_value = [&]() {
    ad::Tape tape;
    Bind bind(tape, std::as_const(model.params()));
    Rng rng(loss_seed);
    return total_loss(bind, model, batch, weights, rng).total_value;
  };

  ParameterStore& params = model.params();
  params.zero_grad();
  double base = 0.0;
  {
    ad::Tape tape;
    Bind bind(tape, params);
    Rng rng(loss_seed);
    LossTerms terms = total_loss(bind, model, batch, weights, rng);
    base = terms.total_value;
    tape.backward(terms.total);
  }
  if (corrupt) corrupt(params);

  GradientCheckReport report;
  if (const std::string bad = params.first_nonfinite_grad(); !bad.empty()) {
    report.failed_group = bad;
    report.message = "non-finite gradient in group " + bad;
    return report;
  }

  // Finite differences carry round-off of order eps * |L| / h.
  const double floor = 1e-7 * std::max(1.0, std::abs(base));
  Rng pick_rng(derive_seed(config.seed, 2));
  report.passed = true;
  for (auto& [name, p] : params) {
    const auto n = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > config.samples_per_group) {
      std::shuffle(coords.begin(), coords.end(), pick_rng);
      coords.resize(config.samples_per_group);
    }
    GroupGradientError err{name, 0.0, coords.size()};
    for (std::size_t idx : coords) {
      double& x = p.value.data()[idx];
      const double saved = x;
      x = saved + config.step;
      const double up = loss_value();
      x = saved - config.step;
      const double down = loss_value();
      x = saved;
      const double numeric = (up - down) / (2.0 * config.step);
      const double analytic = p.grad.data()[idx];
      err.max_rel_error = std::max(err.max_rel_error, gradient_rel_error(analytic, numeric, floor));
    }
    report.max_rel_error = std::max(report.max_rel_error, err.max_rel_error);
    if (!(err.max_rel_error <= tolerance) && report.passed) {
      report.passed = false;
      report.failed_group = name;
    }
    report.groups.push_back(std::move(err));
  }
  std::ostringstream msg;
  msg << "max relative error " << report.max_rel_error << " over " << report.groups.size() << " groups";
  if (!report.passed) msg << "; first failing group " << report.failed_group;
  report.message = msg.str();
  return report;
}

}  // namespace agdc
