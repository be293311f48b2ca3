#include "agdc/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "agdc/error.hpp"

namespace agdc {

using ad::Index;
using ad::Var;

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "cosine") return ScheduleKind::cosine;
  if (s == "linear") return ScheduleKind::linear;
  throw ConfigError("unknown schedule kind: " + s);
}

SamplerMode parse_sampler_mode(const std::string& s) {
  if (s == "ancestral") return SamplerMode::ancestral;
  if (s == "ddim") return SamplerMode::ddim;
  throw ConfigError("unknown sampler: " + s + " (expected ancestral|ddim)");
}

std::string to_string(ScheduleKind k) { return k == ScheduleKind::cosine ? "cosine" : "linear"; }
std::string to_string(SamplerMode m) { return m == SamplerMode::ancestral ? "ancestral" : "ddim"; }

// --- schedule -------------------------------------------------------------

NoiseSchedule NoiseSchedule::build(int steps, ScheduleKind kind) {
  if (steps < 2) throw ConfigError("diffusion schedule needs at least 2 steps");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  if (kind == ScheduleKind::linear) {
    constexpr double lo = 1e-4, hi = 0.02;
    for (int t = 1; t <= steps; ++t) {
      betas[static_cast<std::size_t>(t - 1)] = lo + (hi - lo) * (t - 1) / (steps - 1);
    }
  } else {
    constexpr double s = 0.008;
    const auto f = [&](double t) {
      const double v = std::cos((t / steps + s) / (1.0 + s) * std::numbers::pi / 2.0);
      return v * v;
    };
    for (int t = 1; t <= steps; ++t) {
      betas[static_cast<std::size_t>(t - 1)] = std::min(1.0 - f(t) / f(t - 1), 0.999);
    }
  }
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ConfigError("diffusion schedule needs at least one step");
  NoiseSchedule sched;
  sched.beta_.assign(1, 0.0);
  sched.alpha_bar_.assign(1, 1.0);
  sched.sigma_.assign(1, 0.0);
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("diffusion schedule: beta must lie in (0, 1)");
    const double prev = sched.alpha_bar_.back();
    const double ab = prev * (1.0 - b);
    sched.beta_.push_back(b);
    sched.alpha_bar_.push_back(ab);
    sched.sigma_.push_back(std::sqrt(b * (1.0 - prev) / (1.0 - ab)));
  }
  return sched;
}

std::size_t NoiseSchedule::check(int t) const {
  if (t < 1 || t > steps()) {
    throw IndexError("timestep " + std::to_string(t) + " outside 1.." + std::to_string(steps()));
  }
  return static_cast<std::size_t>(t);
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  return alpha_bar_.at(check(t));
}

Eigen::VectorXd corrupt(const Eigen::VectorXd& c, int t, const Eigen::VectorXd& eps,
                        const NoiseSchedule& sched) {
  if (c.size() != eps.size()) throw ConfigError("corrupt: c and eps differ in length");
  const double ab = sched.alpha_bar(t);
  if (t == 0) throw IndexError("corrupt: timestep 0 is not a noising step");
  return std::sqrt(ab) * c + std::sqrt(1.0 - ab) * eps;
}

// --- denoiser -------------------------------------------------------------

void DiffusionConfig::validate() const {
  if (steps < 2) throw ConfigError("diffusion: steps must be >= 2");
  if (blocks < 1) throw ConfigError("diffusion: blocks must be >= 1");
  if (width < 2 || width % 2 != 0) throw ConfigError("diffusion: width must be even and >= 2");
}

Denoiser::Denoiser(DiffusionConfig config, int cont_dim, int cond_dim)
    : config_(config), cont_dim_(cont_dim), cond_dim_(cond_dim) {
  config_.validate();
  if (cont_dim < 1 || cond_dim < 1) throw ConfigError("denoiser: dimensions must be positive");
}

void Denoiser::register_parameters(ParameterStore& store, Rng& rng, double init_std) const {
  const Index w = config_.width;
  const auto dense = [&](const std::string& name, Index rows, Index cols) {
    store.add_normal(name, rows, cols, init_std, rng);
  };
  dense("diffusion.in.w", cont_dim_, w);
  store.add("diffusion.in.b", 1, w);
  dense("diffusion.time.w1", w, w);
  store.add("diffusion.time.b1", 1, w);
  dense("diffusion.time.w2", w, w);
  store.add("diffusion.time.b2", 1, w);
  dense("diffusion.cond.w", cond_dim_, w);
  store.add("diffusion.cond.b", 1, w);
  for (int b = 0; b < config_.blocks; ++b) {
    const std::string p = "diffusion.blk" + std::to_string(b) + ".";
    store.add_normal(p + "mod.w", w, 3 * w, init_std, rng);
    store.add(p + "mod.b", 1, 3 * w);
    dense(p + "fc1.w", w, w);
    store.add(p + "fc1.b", 1, w);
    dense(p + "fc2.w", w, w);
    store.add(p + "fc2.b", 1, w);
  }
  store.add_normal("diffusion.final.mod.w", w, 2 * w, init_std, rng);
  store.add("diffusion.final.mod.b", 1, 2 * w);
  dense("diffusion.final.out.w", w, cont_dim_);
  store.add("diffusion.final.out.b", 1, cont_dim_);
}

Matrix Denoiser::timestep_features(std::span<const int> t) const {
  const Index half = config_.width / 2;
  Matrix out(static_cast<Index>(t.size()), config_.width);
  for (std::size_t r = 0; r < t.size(); ++r) {
    for (Index k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
      const double arg = static_cast<double>(t[r]) * freq;
      out(static_cast<Index>(r), k) = std::cos(arg);
      out(static_cast<Index>(r), half + k) = std::sin(arg);
    }
  }
  return out;
}

Var Denoiser::forward(const Bind& bind, Var c_t, std::span<const int> t, Var z) const {
  if (c_t.cols() != cont_dim_ || z.cols() != cond_dim_ || c_t.rows() != z.rows() ||
      static_cast<Index>(t.size()) != c_t.rows()) {
    throw ConfigError("denoiser: input shapes disagree");
  }
  const Index w = config_.width;
  ad::Tape& tape = bind.tape();

  Var temb = ad::linear(tape.constant(timestep_features(t)), bind("diffusion.time.w1"),
                        bind("diffusion.time.b1"));
  temb = ad::linear(ad::silu(temb), bind("diffusion.time.w2"), bind("diffusion.time.b2"));
  Var cond = ad::add(temb, ad::linear(z, bind("diffusion.cond.w"), bind("diffusion.cond.b")));
  Var act = ad::silu(cond);

  Var x = ad::linear(c_t, bind("diffusion.in.w"), bind("diffusion.in.b"));
  for (int b = 0; b < config_.blocks; ++b) {
    const std::string p = "diffusion.blk" + std::to_string(b) + ".";
    Var mod = ad::linear(act, bind(p + "mod.w"), bind(p + "mod.b"));
    Var shift = ad::slice_cols(mod, 0, w);
    Var scale = ad::slice_cols(mod, w, w);
    Var gate = ad::slice_cols(mod, 2 * w, w);
    Var h = ad::layer_norm(x, 1e-6);
    h = ad::add(ad::mul(h, ad::add_scalar(scale, 1.0)), shift);
    h = ad::silu(ad::linear(h, bind(p + "fc1.w"), bind(p + "fc1.b")));
    h = ad::linear(h, bind(p + "fc2.w"), bind(p + "fc2.b"));
    x = ad::add(x, ad::mul(gate, h));
  }
  Var mod = ad::linear(act, bind("diffusion.final.mod.w"), bind("diffusion.final.mod.b"));
  Var h = ad::layer_norm(x, 1e-6);
  h = ad::add(ad::mul(h, ad::add_scalar(ad::slice_cols(mod, w, w), 1.0)), ad::slice_cols(mod, 0, w));
  return ad::linear(h, bind("diffusion.final.out.w"), bind("diffusion.final.out.b"));
}

Matrix Denoiser::predict(const ParameterStore& params, const Matrix& c_t, std::span<const int> t,
                         const Matrix& z) const {
  ad::Tape tape;
  Bind bind(tape, params);
  return forward(bind, tape.constant(c_t), t, tape.constant(z)).value();
}

// --- sampling -------------------------------------------------------------

std::vector<int> stride_steps(int total_steps, int stride) {
  if (total_steps < 1) throw ConfigError("stride_steps: total_steps must be >= 1");
  if (stride < 1) throw ConfigError("stride_steps: stride must be >= 1");
  std::vector<int> out;
  for (int t = total_steps; t >= 1; t -= stride) out.push_back(t);
  return out;
}

Matrix sample_reverse(const EpsilonModel& model, const NoiseSchedule& sched,
                      std::span<const int> steps, SamplerMode mode, Index rows, int dim, Rng& rng) {
  if (steps.empty()) throw ConfigError("sample_reverse: empty step set");
  std::vector<int> order(steps.begin(), steps.end());
  std::sort(order.begin(), order.end(), std::greater<>());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  if (order.front() != sched.steps()) {
    throw ConfigError("sample_reverse: step set must contain T = " + std::to_string(sched.steps()));
  }
  if (order.back() < 1) throw ConfigError("sample_reverse: steps must be >= 1");

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix c(rows, dim);
  for (Index i = 0; i < c.size(); ++i) c.data()[i] = normal(rng);

  for (std::size_t k = 0; k < order.size(); ++k) {
    const int t = order[k];
    const int prev = k + 1 < order.size() ? order[k + 1] : 0;
    const double ab = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(prev);
    const Matrix eps = model(c, t);
    if (eps.rows() != rows || eps.cols() != dim) throw ConfigError("sample_reverse: model output shape");
    if (!eps.allFinite()) throw NumericError("sample_reverse: non-finite noise prediction");
    if (mode == SamplerMode::ddim) {
      const Matrix x0 = (c - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
      c = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps;
    } else {
      // Respaced step: alpha = abar_t / abar_prev reduces to alpha_t at stride 1.
      const double alpha = ab / ab_prev;
      const double beta = 1.0 - alpha;
      c = (c - (beta / std::sqrt(1.0 - ab)) * eps) / std::sqrt(alpha);
      if (prev > 0) {
        const double sigma = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
        for (Index i = 0; i < c.size(); ++i) c.data()[i] += sigma * normal(rng);
      }
    }
  }
  return c.cwiseMax(-1.0 - 1e-6).cwiseMin(1.0 + 1e-6).cwiseMax(-1.0).cwiseMin(1.0);
}

Matrix sample_reverse(const Denoiser& denoiser, const ParameterStore& params, const Matrix& z,
                      const NoiseSchedule& sched, std::span<const int> steps, SamplerMode mode,
                      Rng& rng) {
  const EpsilonModel model = [&](const Matrix& c_t, int t) {
    const std::vector<int> ts(static_cast<std::size_t>(c_t.rows()), t);
    return denoiser.predict(params, c_t, ts, z);
  };
  return sample_reverse(model, sched, steps, mode, z.rows(), denoiser.cont_dim(), rng);
}

Eigen::VectorXd sample_reverse(const Denoiser& denoiser, const ParameterStore& params,
                               const Eigen::VectorXd& z, const NoiseSchedule& sched,
                               std::span<const int> steps, SamplerMode mode, Rng& rng) {
  const Matrix zr = z.transpose();
  return sample_reverse(denoiser, params, zr, sched, steps, mode, rng).row(0).transpose();
}

// --- loss -----------------------------------------------------------------

NoiseDraws draw_noise(Index rows, int dim, int draws, const NoiseSchedule& sched, Rng& rng) {
  if (draws < 1) throw ConfigError("denoise_loss: need at least one timestep draw");
  std::uniform_int_distribution<int> pick_t(1, sched.steps());
  std::normal_distribution<double> normal(0.0, 1.0);
  NoiseDraws d;
  d.t.resize(static_cast<std::size_t>(rows * draws));
  d.eps.resize(rows * draws, dim);
  for (Index r = 0; r < rows * draws; ++r) {
    d.t[static_cast<std::size_t>(r)] = pick_t(rng);
    for (int j = 0; j < dim; ++j) d.eps(r, j) = normal(rng);
  }
  return d;
}

namespace {

Matrix corrupted_rows(const Matrix& targets, const NoiseSchedule& sched, const NoiseDraws& noise) {
  const Index rows = targets.rows();
  if (rows == 0 || noise.eps.rows() % rows != 0 || noise.eps.cols() != targets.cols()) {
    throw ConfigError("denoise_loss: noise draws do not match targets");
  }
  Matrix c_t(noise.eps.rows(), targets.cols());
  for (Index r = 0; r < c_t.rows(); ++r) {
    const double ab = sched.alpha_bar(noise.t[static_cast<std::size_t>(r)]);
    c_t.row(r) = std::sqrt(ab) * targets.row(r % rows) + std::sqrt(1.0 - ab) * noise.eps.row(r);
  }
  return c_t;
}

}  // namespace

Var denoise_loss(const Bind& bind, const Denoiser& denoiser, const NoiseSchedule& sched,
                 const Matrix& targets, Var z, const NoiseDraws& noise) {
  ad::Tape& tape = bind.tape();
  const Matrix c_t = corrupted_rows(targets, sched, noise);
  std::vector<Index> rep(static_cast<std::size_t>(c_t.rows()));
  for (Index r = 0; r < c_t.rows(); ++r) rep[static_cast<std::size_t>(r)] = r % targets.rows();
  Var pred = denoiser.forward(bind, tape.constant(c_t), noise.t, ad::gather_rows(z, rep));
  if (!pred.value().allFinite()) throw NumericError("denoise_loss: non-finite denoiser output");
  const std::vector<double> w(static_cast<std::size_t>(c_t.rows()), 1.0 / static_cast<double>(c_t.rows()));
  return ad::weighted_sum_squares(ad::sub(tape.constant(noise.eps), pred), w);
}

double denoise_loss(const Matrix& targets, const EpsilonModel& model, const NoiseSchedule& sched,
                    const NoiseDraws& noise) {
  const Matrix c_t = corrupted_rows(targets, sched, noise);
  double total = 0.0;
  for (Index r = 0; r < c_t.rows(); ++r) {
    const Matrix pred = model(c_t.row(r), noise.t[static_cast<std::size_t>(r)]);
    if (!pred.allFinite()) throw NumericError("denoise_loss: non-finite denoiser output");
    total += (noise.eps.row(r) - pred.row(0)).squaredNorm();
  }
  return total / static_cast<double>(c_t.rows());
}

Var denoise_loss(const Bind& bind, const Denoiser& denoiser, const NoiseSchedule& sched,
                 const Matrix& targets, Var z, int draws, Rng& rng) {
  return denoise_loss(bind, denoiser, sched, targets, z,
                      draw_noise(targets.rows(), static_cast<int>(targets.cols()), draws, sched, rng));
}

double denoise_loss(const Matrix& targets, const EpsilonModel& model, const NoiseSchedule& sched,
                    int draws, Rng& rng) {
  return denoise_loss(targets, model, sched,
                      draw_noise(targets.rows(), static_cast<int>(targets.cols()), draws, sched, rng));
}

double denoise_loss(const Eigen::VectorXd& c, const Eigen::VectorXd& z, const Denoiser& denoiser,
                    ParameterStore& params, const NoiseSchedule& sched, int draws, Rng& rng) {
  ad::Tape tape;
  Bind bind(tape, params);
  const Matrix target = c.transpose();
  Var loss = denoise_loss(bind, denoiser, sched, target, tape.constant(z.transpose()), draws, rng);
  tape.backward(loss);
  return loss.scalar();
}

}  // namespace agdc
