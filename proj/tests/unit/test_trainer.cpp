#include <doctest.h>

#include <cmath>
#include <sstream>

#include "agdc/error.hpp"
#include "agdc/trainer.hpp"

using namespace agdc;

namespace {

const ModelConfig kModel{.d_model = 8, .layers = 1, .heads = 2, .max_len = 8, .seed = 2, .init_std = 0.1, .dropout = 0.1};
const DiffusionConfig kDiff{.steps = 10, .kind = ScheduleKind::cosine, .blocks = 1, .width = 8};

std::vector<UnitSequence> data(const SchemaSpec& s) {
  std::vector<UnitSequence> out;
  for (int i = 0; i < 6; ++i) {
    std::vector<AtomicUnit> content;
    for (int j = 0; j <= i % 3; ++j) {
      const double v = 0.1 * (i - j);
      content.push_back(AtomicUnit{(i + j) % 3, {v, -v, 0.5 * v, 0.2}});
    }
    out.push_back(make_sequence(s, content));
  }
  return out;
}

std::map<std::string, Matrix> values(const ParameterStore& p) {
  std::map<std::string, Matrix> out;
  for (const auto& [name, g] : p) out.emplace(name, g.value);
  return out;
}

TrainConfig quick() {
  TrainConfig c;
  c.batch_size = 4;
  c.epochs = 3;
  c.diffusion_draws = 2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("Adam matches the bias-corrected update by hand") {
  ParameterStore p;
  p.add("w", 1, 2).value << 1.0, -2.0;
  Adam adam(0.1, 0.9, 0.999, 1e-8);
  const double g1[] = {0.5, -0.1}, g2[] = {-0.2, 0.3};
  p.at("w").grad << g1[0], g1[1];
  adam.step(p);
  CHECK(p.at("w").value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p.at("w").value(0, 1) == doctest::Approx(-2.0 + 0.1 * 0.1 / (0.1 + 1e-8)).epsilon(1e-14));
  const Matrix after1 = p.at("w").value;
  p.at("w").grad << g2[0], g2[1];
  adam.step(p);
  for (int j = 0; j < 2; ++j) {
    const double m = 0.9 * 0.1 * g1[j] + 0.1 * g2[j];
    const double v = 0.999 * 0.001 * g1[j] * g1[j] + 0.001 * g2[j] * g2[j];
    const double mh = m / (1.0 - 0.81), vh = v / (1.0 - 0.999 * 0.999);
    CHECK(p.at("w").value(0, j) == doctest::Approx(after1(0, j) - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
  }
  CHECK(adam.steps() == 2);
}

TEST_CASE("learning rate zero leaves parameters bitwise unchanged") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  const auto before = values(model.params());
  TrainConfig c = quick();
  c.learning_rate = 0.0;
  const TrainResult r = train(model, data(s), c);
  CHECK_FALSE(r.diverged);
  CHECK(r.steps == 6);
  CHECK(values(model.params()) == before);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const SchemaSpec s = SchemaSpec::layout();
  Model a(s, kModel, kDiff), b(s, kModel, kDiff);
  const TrainResult ra = train(a, data(s), quick());
  const TrainResult rb = train(b, data(s), quick());
  CHECK(values(a.params()) == values(b.params()));
  REQUIRE(ra.metrics.size() == 3);
  CHECK(ra.metrics.back().ce == rb.metrics.back().ce);
  Model c(s, kModel, kDiff);
  TrainConfig other = quick();
  other.seed = 6;
  train(c, data(s), other);
  CHECK(values(c.params()) != values(a.params()));
}

TEST_CASE("training reduces the loss and honours max_steps") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  TrainConfig c = quick();
  c.epochs = 80;
  c.learning_rate = 1e-2;
  c.lambda_cont = 1.0;
  const TrainResult r = train(model, data(s), c);
  CHECK(r.metrics.back().ce < 0.7 * r.metrics.front().ce);
  CHECK(model.eos_alpha() == c.alpha);

  Model m2(s, kModel, kDiff);
  c.max_steps = 5;
  const TrainResult r2 = train(m2, data(s), c);
  CHECK(r2.steps == 5);
  CHECK(r2.metrics.size() == 3);
}

TEST_CASE("non-finite loss restores the last completed epoch") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  std::map<std::string, Matrix> after_first;
  const auto hook = [&](const EpochMetrics& m) {
    if (m.epoch != 1) return;
    after_first = values(model.params());
    model.params().at("backbone.fuse.w").value(0, 0) = NAN;
  };
  const TrainResult r = train(model, data(s), quick(), hook);
  CHECK(r.diverged);
  CHECK(r.metrics.size() == 1);
  CHECK(r.message.find("restored parameters from epoch 1") != std::string::npos);
  CHECK(values(model.params()) == after_first);
  CHECK(model.params().first_nonfinite_value().empty());
}

TEST_CASE("training input errors") {
  const SchemaSpec s = SchemaSpec::layout();
  Model model(s, kModel, kDiff);
  CHECK_THROWS_AS(train(model, {}, quick()), ConfigError);
  std::vector<AtomicUnit> long_content(8, AtomicUnit{0, {0, 0, 0, 0}});
  CHECK_THROWS_AS(train(model, {make_sequence(s, long_content)}, quick()), CapacityError);
  UnitSequence bad = make_sequence(s, {AtomicUnit{0, {2.0, 0, 0, 0}}});
  CHECK_THROWS_AS(train(model, {bad}, quick()), ConfigError);
  TrainConfig c = quick();
  c.batch_size = 0;
  CHECK_THROWS_AS(train(model, data(s), c), ConfigError);
}

TEST_CASE("metrics CSV") {
  std::ostringstream out;
  write_metrics_csv(out, {EpochMetrics{1, 4, 1.5, 0.25, 2.0, 0.5}});
  CHECK(out.str() == "epoch,step,L_d,L_c,L_len,length_error\n1,4,1.5,0.25,2,0.5\n");
}

TEST_CASE("key-value configuration") {
  std::istringstream in("# comment\nlearning_rate = 0.003  # inline\n d_model=16\nschedule = linear\n\nepochs = 7\nmystery = 1\n");
  auto kv = parse_key_values(in);
  TrainConfig t;
  ModelConfig m;
  DiffusionConfig d;
  apply_config(t, kv);
  apply_config(m, kv);
  apply_config(d, kv);
  CHECK(t.learning_rate == 0.003);
  CHECK(t.epochs == 7);
  CHECK(m.d_model == 16);
  CHECK(d.kind == ScheduleKind::linear);
  CHECK(kv.size() == 1);
  CHECK(kv.count("mystery") == 1);

  std::istringstream bad_line("learning_rate 0.1\n");
  CHECK_THROWS_AS(parse_key_values(bad_line), ConfigError);
  std::map<std::string, std::string> bad_value{{"epochs", "ten"}};
  CHECK_THROWS_AS(apply_config(t, bad_value), ConfigError);

  std::istringstream round(to_config_text(t, m, d));
  auto kv2 = parse_key_values(round);
  TrainConfig t2;
  ModelConfig m2;
  DiffusionConfig d2;
  apply_config(t2, kv2);
  apply_config(m2, kv2);
  apply_config(d2, kv2);
  CHECK(kv2.empty());
  CHECK(t2.learning_rate == t.learning_rate);
  CHECK(m2 == m);
  CHECK(d2 == d);
}
