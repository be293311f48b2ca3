#include <doctest.h>

#include <cmath>

#include "agdc/error.hpp"
#include "agdc/model.hpp"
#include "agdc/objective.hpp"

using namespace agdc;
using ad::Index;

namespace {

const ModelConfig kModel{.d_model = 8, .layers = 1, .heads = 2, .max_len = 16, .seed = 4, .init_std = 0.3, .dropout = 0.0};
const DiffusionConfig kDiff{.steps = 10, .kind = ScheduleKind::cosine, .blocks = 1, .width = 8};

std::vector<UnitSequence> data(const SchemaSpec& s) {
  return {make_sequence(s, {AtomicUnit{0, {0.1, 0.2, -0.3, 0.4}}, AtomicUnit{2, {-0.5, 0.5, 0.0, 0.9}}}),
          make_sequence(s, {AtomicUnit{1, {0.7, -0.7, 0.2, -0.1}}}),
          make_sequence(s, {AtomicUnit{0, {0.0, 0.0, 0.0, 0.0}}, AtomicUnit{1, {1.0, -1.0, 0.5, 0.5}},
                            AtomicUnit{1, {-0.2, 0.3, -0.4, 0.6}}})};
}

LossTerms loss_with(Model& model, const Batch& batch, const LossWeights& w, std::uint64_t seed, bool grad) {
  ad::Tape tape;
  Rng rng(seed);
  if (grad) {
    model.params().zero_grad();
    Bind bind(tape, model.params());
    LossTerms t = total_loss(bind, model, batch, w, rng);
    tape.backward(t.total);
    return t;
  }
  Bind bind(tape, std::as_const(model.params()));
  return total_loss(bind, model, batch, w, rng);
}

}  // namespace

TEST_CASE("discrete and length terms match per-step evaluation") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  for (auto& [name, p] : model.params()) {
    if (name.starts_with("heads.eos")) p.value.setConstant(0.05);
  }
  const auto seqs = data(s);
  const double alpha = 0.4;
  double ce_sum = 0.0, len_sum = 0.0, err_sum = 0.0;
  std::size_t positions = 0;
  for (const auto& seq : seqs) {
    const auto content = seq.content(s);
    std::vector<AtomicUnit> in{special_unit(s, s.bos())};
    in.insert(in.end(), content.begin(), content.end());
    const auto z = forward(in, model.backbone(), model.params());
    std::vector<double> p_eos;
    for (std::size_t i = 0; i <= content.size(); ++i) {
      const StepOutputs o = eos_adjust(discrete_logits(z[i], model.heads(), model.params()), z[i], model.heads(),
                                       model.params(), alpha);
      ce_sum += ce_loss(i < content.size() ? content[i].d : s.eos(), o, s);
      ++positions;
      if (i >= 1) p_eos.push_back(o.p_eos);
    }
    const double e = expected_length(p_eos);
    len_sum += length_loss(e, static_cast<double>(content.size()));
    err_sum += std::abs(e - static_cast<double>(content.size()));
  }
  const LossTerms t = evaluate_loss(model, seqs, LossWeights{100.0, 0.1, alpha, 2}, 1);
  CHECK(t.positions == positions);
  CHECK(t.ce == doctest::Approx(ce_sum / positions).epsilon(1e-10));
  CHECK(t.length == doctest::Approx(len_sum / seqs.size()).epsilon(1e-10));
  CHECK(t.length_error == doctest::Approx(err_sum / seqs.size()).epsilon(1e-10));
  CHECK(t.total_value == doctest::Approx(t.ce + 100.0 * t.cont + 0.1 * t.length).epsilon(1e-12));
}

TEST_CASE("continuous term pairs each unit with the latent before it") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  const auto seqs = data(s);
  const int draws = 3;
  Matrix targets(6, 4), z(6, kModel.d_model);
  Index row = 0;
  for (const auto& seq : seqs) {
    const auto content = seq.content(s);
    std::vector<AtomicUnit> in{special_unit(s, s.bos())};
    in.insert(in.end(), content.begin(), content.end());
    const auto latents = forward(in, model.backbone(), model.params());
    for (std::size_t i = 0; i < content.size(); ++i, ++row) {
      targets.row(row) = Eigen::Map<const Eigen::RowVectorXd>(content[i].c.data(), 4);
      z.row(row) = latents[i].z.transpose();
    }
  }
  REQUIRE(row == 6);
  Rng rng(21);
  const NoiseDraws noise = draw_noise(6, 4, draws, model.schedule(), rng);
  Index call = 0;
  const EpsilonModel eps = [&](const Matrix& c_t, int t) {
    const std::vector<int> ts{t};
    return model.denoiser().predict(model.params(), c_t, ts, z.row(call++ % 6));
  };
  const double expect = denoise_loss(targets, eps, model.schedule(), noise);
  const LossTerms t = loss_with(model, Batch{seqs, {}}, LossWeights{100.0, 0.1, 0.1, draws}, 21, false);
  CHECK(t.cont == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("zero weights reduce the total to cross-entropy") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  const LossTerms t = loss_with(model, Batch{data(s), {}}, LossWeights{0.0, 0.0, 0.0, 2}, 3, false);
  CHECK(t.total_value == doctest::Approx(t.ce).epsilon(1e-14));
  CHECK(t.cont > 0.0);
}

TEST_CASE("fully masked batch has zero loss and zero gradients") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  const auto seqs = data(s);
  Batch batch{seqs, {}};
  for (const auto& q : seqs) batch.masks.emplace_back(q.length(s) + 1, false);
  const LossTerms t = loss_with(model, batch, LossWeights{}, 3, true);
  CHECK(t.total_value == 0.0);
  CHECK(t.positions == 0);
  CHECK(model.params().grad_norm() == 0.0);
}

TEST_CASE("masks select positions") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  const auto seqs = data(s);
  Batch batch{seqs, {{true, false, true}, {}, {false, false, false, true}}};
  const LossTerms t = loss_with(model, batch, LossWeights{}, 3, false);
  CHECK(t.positions == 2 + 2 + 1);
  CHECK_THROWS_AS(loss_with(model, Batch{seqs, {{true}}}, LossWeights{}, 3, false), ConfigError);
}

TEST_CASE("objective input errors") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  CHECK_THROWS_AS(loss_with(model, Batch{}, LossWeights{}, 1, false), ConfigError);
  CHECK_THROWS_AS(loss_with(model, Batch{data(s), {}}, LossWeights{-1.0, 0.1, 0.1, 2}, 1, false), ConfigError);
}

TEST_CASE("gradient check passes on a tiny model") {
  GradientCheckConfig cfg;
  cfg.samples_per_group = 12;
  const auto r = gradient_check(cfg, 1e-4);
  INFO(r.message);
  CHECK(r.passed);
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.groups.size() > 30);
}

TEST_CASE("gradient check reports failures") {
  GradientCheckConfig cfg;
  cfg.samples_per_group = 4;
  CHECK_FALSE(gradient_check(cfg, 0.0).passed);
  const auto corrupted = gradient_check(cfg, 1e-4, [](ParameterStore& p) { p.at("heads.disc.w1").grad *= 1.5; });
  CHECK_FALSE(corrupted.passed);
  CHECK(corrupted.failed_group == "heads.disc.w1");
  const auto nan = gradient_check(cfg, 1e-4, [](ParameterStore& p) { p.at("backbone.pos_emb").grad(0, 0) = NAN; });
  CHECK_FALSE(nan.passed);
  CHECK(nan.failed_group == "backbone.pos_emb");
  cfg.model.d_model = 32;
  CHECK_THROWS_AS(gradient_check(cfg, 1e-4), ConfigError);
}
