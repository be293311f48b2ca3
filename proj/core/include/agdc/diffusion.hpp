#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agdc/parameters.hpp"

namespace agdc {

enum class ScheduleKind { cosine, linear };
enum class SamplerMode { ancestral, ddim };

ScheduleKind parse_schedule_kind(const std::string& s);
SamplerMode parse_sampler_mode(const std::string& s);
std::string to_string(ScheduleKind k);
std::string to_string(SamplerMode m);

/// Diffusion constants over timesteps 1..T; index 0 holds alpha_bar = 1.
class NoiseSchedule {
 public:
  static NoiseSchedule build(int steps, ScheduleKind kind = ScheduleKind::cosine);
  /// Schedule from explicit betas for t = 1..T.
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(beta_.size()) - 1; }
  double beta(int t) const { return beta_.at(check(t)); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const;
  /// Posterior standard deviation sqrt(beta_tilde_t); zero at t = 1.
  double sigma(int t) const { return sigma_.at(check(t)); }

 private:
  NoiseSchedule() = default;
  std::size_t check(int t) const;

  std::vector<double> beta_;       // [0] unused
  std::vector<double> alpha_bar_;  // [0] = 1
  std::vector<double> sigma_;      // [0] unused
};

/// sqrt(abar_t) c + sqrt(1 - abar_t) eps.
Eigen::VectorXd corrupt(const Eigen::VectorXd& c, int t, const Eigen::VectorXd& eps,
                        const NoiseSchedule& sched);

struct DiffusionConfig {
  int steps = 100;
  ScheduleKind kind = ScheduleKind::cosine;
  int blocks = 3;
  int width = 128;

  void validate() const;
  bool operator==(const DiffusionConfig&) const = default;
};

/// Residual MLP noise predictor eps(c_t | t, z).
///
/// Conditioning is an MLP over a sinusoidal embedding of t plus a linear map
/// of z. Each block layer-normalizes its input, modulates it with a shift
/// and scale produced from SiLU(cond), runs a two-layer MLP and adds the
/// result back through a learned gate. The output layer is modulated the
/// same way before projecting to m dimensions.
class Denoiser {
 public:
  Denoiser(DiffusionConfig config, int cont_dim, int cond_dim);

  /// Weights draw from normal(0, init_std); biases start at zero.
  void register_parameters(ParameterStore& store, Rng& rng, double init_std) const;

  /// c_t: R x m, z: R x D, one timestep per row. Returns R x m.
  ad::Var forward(const Bind& bind, ad::Var c_t, std::span<const int> t, ad::Var z) const;

  /// Gradient-free evaluation.
  Matrix predict(const ParameterStore& params, const Matrix& c_t, std::span<const int> t,
                 const Matrix& z) const;

  const DiffusionConfig& config() const { return config_; }
  int cont_dim() const { return cont_dim_; }
  int cond_dim() const { return cond_dim_; }

 private:
  Matrix timestep_features(std::span<const int> t) const;

  DiffusionConfig config_;
  int cont_dim_;
  int cond_dim_;
};

/// Noise prediction for a batch of rows at one timestep.
using EpsilonModel = std::function<Matrix(const Matrix& c_t, int t)>;

/// Descending uniform-stride subset {T, T - stride, ...} of 1..T.
std::vector<int> stride_steps(int total_steps, int stride);

/// Reverse process over `steps` (any order; must contain T). Starts from
/// standard normal noise, applies ancestral (posterior-variance) or
/// deterministic DDIM updates on the respaced schedule, clips to [-1, 1].
Matrix sample_reverse(const EpsilonModel& model, const NoiseSchedule& sched,
                      std::span<const int> steps, SamplerMode mode, ad::Index rows, int dim,
                      Rng& rng);

/// Samples one continuous vector per row of z.
Matrix sample_reverse(const Denoiser& denoiser, const ParameterStore& params, const Matrix& z,
                      const NoiseSchedule& sched, std::span<const int> steps, SamplerMode mode,
                      Rng& rng);

Eigen::VectorXd sample_reverse(const Denoiser& denoiser, const ParameterStore& params,
                               const Eigen::VectorXd& z, const NoiseSchedule& sched,
                               std::span<const int> steps, SamplerMode mode, Rng& rng);

/// Timesteps and noise for `draws` passes over R target rows; row
/// `draw * R + r` belongs to target r.
struct NoiseDraws {
  std::vector<int> t;
  Matrix eps;
};

NoiseDraws draw_noise(ad::Index rows, int dim, int draws, const NoiseSchedule& sched, Rng& rng);

/// Mean over the drawn rows of ||eps - eps_theta(c_t | t, z)||^2.
ad::Var denoise_loss(const Bind& bind, const Denoiser& denoiser, const NoiseSchedule& sched,
                     const Matrix& targets, ad::Var z, const NoiseDraws& noise);
double denoise_loss(const Matrix& targets, const EpsilonModel& model, const NoiseSchedule& sched,
                    const NoiseDraws& noise);

/// Mean over rows and `draws` independent (t, eps) pairs of
/// ||eps - eps_theta(c_t | t, z)||^2. `targets` is R x m, `z` is R x D.
ad::Var denoise_loss(const Bind& bind, const Denoiser& denoiser, const NoiseSchedule& sched,
                     const Matrix& targets, ad::Var z, int draws, Rng& rng);

/// Same objective against an arbitrary predictor; no gradients.
double denoise_loss(const Matrix& targets, const EpsilonModel& model, const NoiseSchedule& sched,
                    int draws, Rng& rng);

/// Single-vector loss; gradients are accumulated into `params`.
double denoise_loss(const Eigen::VectorXd& c, const Eigen::VectorXd& z, const Denoiser& denoiser,
                    ParameterStore& params, const NoiseSchedule& sched, int draws, Rng& rng);

}  // namespace agdc
