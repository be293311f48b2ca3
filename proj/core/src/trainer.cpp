#include "agdc/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "agdc/error.hpp"

namespace agdc {

void TrainConfig::validate() const {
  if (lambda_cont < 0 || lambda_len < 0 || alpha < 0) {
    throw ConfigError("train: lambda_cont, lambda_len and alpha must be >= 0");
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
  if (diffusion_draws < 1) throw ConfigError("train: diffusion_draws must be >= 1");
  if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be > 0");
}

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(ParameterStore& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto [it, fresh] = moments_.try_emplace(name);
    auto& [m, v] = it->second;
    if (fresh) {
      m = Matrix::Zero(p.value.rows(), p.value.cols());
      v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    m = b1_ * m + (1.0 - b1_) * p.grad;
    v = b2_ * v + (1.0 - b2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

namespace {

struct Snapshot {
  std::map<std::string, Matrix> values;

  static Snapshot take(const ParameterStore& params) {
    Snapshot s;
    for (const auto& [name, p] : params) s.values.emplace(name, p.value);
    return s;
  }
  void restore(ParameterStore& params) const {
    for (auto& [name, p] : params) p.value = values.at(name);
  }
};

}  // namespace

TrainResult train(Model& model, const std::vector<UnitSequence>& data, const TrainConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  if (data.empty()) throw ConfigError("train: empty dataset");
  const SchemaSpec& spec = model.schema();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (auto v = validate_sequence(data[i], spec); !v) {
      throw ConfigError("train: sequence " + std::to_string(i) + " invalid at unit " +
                        std::to_string(v.position) + ": " + v.message);
    }
    if (static_cast<int>(data[i].length(spec)) + 1 > model.model_config().max_len) {
      throw CapacityError("train: sequence " + std::to_string(i) + " longer than max_len");
    }
  }
  model.set_eos_alpha(config.alpha);
  const LossWeights weights = config.weights();

  ParameterStore& params = model.params();
  Adam adam(config.learning_rate, config.beta1, config.beta2, config.adam_eps);
  Rng order_rng(derive_seed(config.seed, 0));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  Snapshot good = Snapshot::take(params);
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochMetrics em{epoch, 0, 0.0, 0.0, 0.0, 0.0};
    int batches = 0;
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(config.batch_size)) {
      if (config.max_steps > 0 && step >= config.max_steps) break;
      Batch batch;
      const std::size_t end = std::min(order.size(), off + static_cast<std::size_t>(config.batch_size));
      for (std::size_t i = off; i < end; ++i) batch.sequences.push_back(data[order[i]]);

      Rng loss_rng(derive_seed(config.seed, 2 * static_cast<std::uint64_t>(step) + 1));
      Rng dropout_rng(derive_seed(config.seed, 2 * static_cast<std::uint64_t>(step) + 2));
      params.zero_grad();
      LossTerms terms;
      bool finite = true;
      try {
        ad::Tape tape(&dropout_rng);
        Bind bind(tape, params);
        terms = total_loss(bind, model, batch, weights, loss_rng);
        tape.backward(terms.total);
      } catch (const NumericError&) {
        finite = false;
      }
      const std::string bad = finite ? params.first_nonfinite_grad() : std::string("loss");
      if (!finite || !bad.empty()) {
        good.restore(params);
        result.diverged = true;
        result.message = "non-finite " + (bad == "loss" ? std::string("loss") : "gradient in " + bad) +
                         " at step " + std::to_string(step) + "; restored parameters from epoch " +
                         std::to_string(epoch - 1);
        result.steps = step;
        return result;
      }
      const double norm = params.grad_norm();
      if (norm > config.grad_clip) {
        const double s = config.grad_clip / norm;
        for (auto& [_, p] : params) p.grad *= s;
      }
      adam.step(params);
      ++step;
      ++batches;
      em.ce += terms.ce;
      em.cont += terms.cont;
      em.length += terms.length;
      em.length_error += terms.length_error;
    }
    if (batches == 0) break;
    em.step = step;
    em.ce /= batches;
    em.cont /= batches;
    em.length /= batches;
    em.length_error /= batches;
    if (!params.first_nonfinite_value().empty()) {
      good.restore(params);
      result.diverged = true;
      result.message = "non-finite parameters after epoch " + std::to_string(epoch);
      result.steps = step;
      return result;
    }
    good = Snapshot::take(params);
    result.metrics.push_back(em);
    if (on_epoch) on_epoch(em);
    if (config.max_steps > 0 && step >= config.max_steps) break;
  }
  result.steps = step;
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics) {
  out << "epoch,step,L_d,L_c,L_len,length_error\n";
  out << std::setprecision(10);
  for (const auto& m : metrics) {
    out << m.epoch << ',' << m.step << ',' << m.ce << ',' << m.cont << ',' << m.length << ','
        << m.length_error << '\n';
  }
}

// --- key-value config ------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
void take(std::map<std::string, std::string>& kv, const std::string& key, T& dst) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  const std::string& text = it->second;
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config: bad value for " + key + ": '" + text + "'");
  }
  dst = value;
  kv.erase(it);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_key_values(in);
}

void apply_config(TrainConfig& c, std::map<std::string, std::string>& kv) {
  take(kv, "lambda_cont", c.lambda_cont);
  take(kv, "lambda_len", c.lambda_len);
  take(kv, "alpha", c.alpha);
  take(kv, "learning_rate", c.learning_rate);
  take(kv, "batch_size", c.batch_size);
  take(kv, "epochs", c.epochs);
  take(kv, "max_steps", c.max_steps);
  take(kv, "diffusion_draws", c.diffusion_draws);
  take(kv, "seed", c.seed);
  take(kv, "grad_clip", c.grad_clip);
  take(kv, "beta1", c.beta1);
  take(kv, "beta2", c.beta2);
  take(kv, "adam_eps", c.adam_eps);
}

void apply_config(ModelConfig& c, std::map<std::string, std::string>& kv) {
  take(kv, "d_model", c.d_model);
  take(kv, "layers", c.layers);
  take(kv, "heads", c.heads);
  take(kv, "max_len", c.max_len);
  take(kv, "model_seed", c.seed);
  take(kv, "init_std", c.init_std);
  take(kv, "dropout", c.dropout);
}

void apply_config(DiffusionConfig& c, std::map<std::string, std::string>& kv) {
  take(kv, "diffusion_steps", c.steps);
  take(kv, "diffusion_blocks", c.blocks);
  take(kv, "diffusion_width", c.width);
  if (auto it = kv.find("schedule"); it != kv.end()) {
    c.kind = parse_schedule_kind(it->second);
    kv.erase(it);
  }
}

std::string to_config_text(const TrainConfig& t, const ModelConfig& m, const DiffusionConfig& d) {
  std::ostringstream o;
  o << std::setprecision(17);
  o << "# model\n"
    << "d_model = " << m.d_model << "\nlayers = " << m.layers << "\nheads = " << m.heads
    << "\nmax_len = " << m.max_len << "\nmodel_seed = " << m.seed << "\ninit_std = " << m.init_std
    << "\ndropout = " << m.dropout << "\n# diffusion\n"
    << "diffusion_steps = " << d.steps << "\ndiffusion_blocks = " << d.blocks
    << "\ndiffusion_width = " << d.width << "\nschedule = " << to_string(d.kind) << "\n# training\n"
    << "lambda_cont = " << t.lambda_cont << "\nlambda_len = " << t.lambda_len << "\nalpha = " << t.alpha
    << "\nlearning_rate = " << t.learning_rate << "\nbatch_size = " << t.batch_size
    << "\nepochs = " << t.epochs << "\nmax_steps = " << t.max_steps
    << "\ndiffusion_draws = " << t.diffusion_draws << "\nseed = " << t.seed
    << "\ngrad_clip = " << t.grad_clip << "\nbeta1 = " << t.beta1 << "\nbeta2 = " << t.beta2
    << "\nadam_eps = " << t.adam_eps << "\n";
  return o.str();
}

}  // namespace agdc
