#include <doctest.h>

#include <cmath>

#include "agdc/backbone.hpp"
#include "agdc/error.hpp"
#include "helpers.hpp"

using namespace agdc;
using ad::Index;

namespace {

struct Fixture {
  SchemaSpec schema = SchemaSpec::layout();
  ModelConfig config;
  Backbone backbone;
  ParameterStore params;

  explicit Fixture(ModelConfig c) : config(c), backbone(c, SchemaSpec::layout()) {
    Rng rng(c.seed);
    backbone.register_parameters(params, rng);
  }
};

ModelConfig small_config() {
  return ModelConfig{.d_model = 8, .layers = 2, .heads = 2, .max_len = 16, .seed = 3, .init_std = 0.3, .dropout = 0.0};
}

std::vector<AtomicUnit> prefix(const SchemaSpec& s) {
  return {special_unit(s, s.bos()), AtomicUnit{0, {0.1, -0.4, 0.7, 0.2}}, AtomicUnit{2, {-0.9, 0.3, 0.0, 0.5}},
          AtomicUnit{1, {0.6, 0.6, -0.2, -0.8}}};
}

Eigen::RowVectorXd layer_norm_row(const Eigen::RowVectorXd& x) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  return (x.array() - mean) / std::sqrt(var + 1e-5);
}

double gelu(double v) { return 0.5 * v * std::erfc(-v / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  c.d_model = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("embedding with zero continuous part depends only on the id") {
  Fixture f(small_config());
  const auto& p = f.params;
  for (int id = 0; id < f.schema.vocab_size(); ++id) {
    const AtomicUnit u{id, std::vector<double>(4, 0.0)};
    const Eigen::VectorXd e = embed_unit(u, f.backbone, p);
    Eigen::RowVectorXd cat(8);
    cat << p.at("backbone.tok_emb").value.row(id), Eigen::RowVectorXd::Zero(4);
    const Eigen::RowVectorXd expect = cat * p.at("backbone.fuse.w").value + p.at("backbone.fuse.b").value;
    CHECK((e.transpose() - expect).norm() < 1e-12);
  }
}

TEST_CASE("embeddings of units differing only in d differ only through the table") {
  Fixture f(small_config());
  const std::vector<double> c{0.3, -0.2, 0.9, -1.0};
  const Eigen::VectorXd a = embed_unit({0, c}, f.backbone, f.params);
  const Eigen::VectorXd b = embed_unit({2, c}, f.backbone, f.params);
  const Matrix& table = f.params.at("backbone.tok_emb").value;
  Eigen::RowVectorXd diff(8);
  diff << table.row(0) - table.row(2), Eigen::RowVectorXd::Zero(4);
  const Eigen::RowVectorXd expect = diff * f.params.at("backbone.fuse.w").value;
  CHECK(((a - b).transpose() - expect).norm() < 1e-12);
}

TEST_CASE("forward gradients match finite differences") {
  ModelConfig c = small_config();
  c.d_model = 4;
  c.layers = 1;
  c.heads = 2;
  Fixture f(c);
  const PackedInput in = pack_units(std::span<const AtomicUnit>(prefix(f.schema)), 4);
  Matrix w = Matrix::Random(in.rows(), 4);
  const auto loss = [&](const Bind& b) {
    return ad::sum(ad::mul(f.backbone.forward(b, in), b.tape().constant(w)));
  };
  const auto r = testing::finite_difference_check(f.params, loss, 1e-6, 1e-7);
  INFO("worst group " << r.worst_group);
  CHECK(r.max_rel_error < 1e-5);
  CHECK_FALSE(f.params.contains("backbone.L0.attn.bk"));
}

TEST_CASE("latents are causal") {
  Fixture f(small_config());
  auto units = prefix(f.schema);
  const auto before = forward(units, f.backbone, f.params);
  units[3] = AtomicUnit{2, {1.0, 1.0, 1.0, 1.0}};
  const auto after = forward(units, f.backbone, f.params);
  REQUIRE(before.size() == 4);
  for (int j = 0; j < 3; ++j) CHECK((before[j].z - after[j].z).norm() == 0.0);
  CHECK((before[3].z - after[3].z).norm() > 1e-6);
  CHECK(before[0].position == 1);
  CHECK(before[3].position == 4);
}

TEST_CASE("forward is deterministic and seeded") {
  Fixture a(small_config()), b(small_config());
  const auto units = prefix(a.schema);
  const auto za = forward(units, a.backbone, a.params);
  const auto zb = forward(units, b.backbone, b.params);
  for (std::size_t j = 0; j < za.size(); ++j) CHECK(za[j].z == zb[j].z);
  ModelConfig other = small_config();
  other.seed = 4;
  Fixture c(other);
  CHECK((forward(units, c.backbone, c.params)[1].z - za[1].z).norm() > 1e-6);
}

TEST_CASE("single-layer single-head forward matches a direct computation") {
  const ModelConfig c{.d_model = 4, .layers = 1, .heads = 1, .max_len = 8, .seed = 9, .init_std = 0.5, .dropout = 0.0};
  Fixture f(c);
  // Perturb the zero-initialized biases and norms so every term is exercised.
  Rng rng(17);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& [name, p] : f.params) {
    for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += n(rng);
  }
  const auto& P = f.params;
  const auto W = [&](const char* name) -> const Matrix& { return P.at(name).value; };
  const std::vector<AtomicUnit> units{special_unit(f.schema, f.schema.bos()), AtomicUnit{1, {0.2, -0.6, 0.4, 0.9}}};

  Matrix x(2, 4);
  for (int r = 0; r < 2; ++r) {
    Eigen::RowVectorXd cat(4);
    Eigen::RowVectorXd cont = Eigen::Map<const Eigen::RowVectorXd>(units[r].c.data(), 4) * W("backbone.cont_proj");
    cat << W("backbone.tok_emb").row(units[r].d), cont;
    x.row(r) = cat * W("backbone.fuse.w") + W("backbone.fuse.b") + W("backbone.pos_emb").row(r);
  }
  const auto affine_ln = [&](const Eigen::RowVectorXd& v, const char* g, const char* b) {
    return Eigen::RowVectorXd(layer_norm_row(v).cwiseProduct(W(g)) + W(b));
  };
  Matrix h(2, 4), q(2, 4), k(2, 4), v(2, 4);
  for (int r = 0; r < 2; ++r) {
    h.row(r) = affine_ln(x.row(r), "backbone.L0.ln1.g", "backbone.L0.ln1.b");
    q.row(r) = h.row(r) * W("backbone.L0.attn.wq") + W("backbone.L0.attn.bq");
    k.row(r) = h.row(r) * W("backbone.L0.attn.wk");
    v.row(r) = h.row(r) * W("backbone.L0.attn.wv") + W("backbone.L0.attn.bv");
  }
  Matrix a(2, 4);
  a.row(0) = v.row(0);
  const double s00 = q.row(1).dot(k.row(0)) / 2.0;
  const double s01 = q.row(1).dot(k.row(1)) / 2.0;
  const double w0 = 1.0 / (1.0 + std::exp(s01 - s00));
  a.row(1) = w0 * v.row(0) + (1.0 - w0) * v.row(1);
  Matrix expect(2, 4);
  for (int r = 0; r < 2; ++r) {
    Eigen::RowVectorXd y = x.row(r) + a.row(r) * W("backbone.L0.attn.wo") + W("backbone.L0.attn.bo");
    Eigen::RowVectorXd hid = affine_ln(y, "backbone.L0.ln2.g", "backbone.L0.ln2.b") * W("backbone.L0.ffn.w1") +
                             W("backbone.L0.ffn.b1");
    hid = hid.unaryExpr([](double t) { return gelu(t); });
    y += hid * W("backbone.L0.ffn.w2") + W("backbone.L0.ffn.b2");
    expect.row(r) = affine_ln(y, "backbone.ln_f.g", "backbone.ln_f.b");
  }
  const auto z = forward(units, f.backbone, f.params);
  for (int r = 0; r < 2; ++r) CHECK((z[r].z.transpose() - expect.row(r)).norm() < 1e-12);
}

TEST_CASE("packed batch equals separate forwards") {
  Fixture f(small_config());
  const auto a = prefix(f.schema);
  const std::vector<AtomicUnit> b(a.begin(), a.begin() + 2);
  const std::span<const AtomicUnit> seqs[] = {a, b};
  ad::Tape tape;
  Bind bind(tape, std::as_const(f.params));
  const Matrix packed = f.backbone.forward(bind, pack_units(std::span<const std::span<const AtomicUnit>>(seqs), 4)).value();
  const auto za = forward(a, f.backbone, f.params);
  const auto zb = forward(b, f.backbone, f.params);
  for (Index r = 0; r < 4; ++r) CHECK((packed.row(r) - za[r].z.transpose()).norm() < 1e-12);
  for (Index r = 0; r < 2; ++r) CHECK((packed.row(4 + r) - zb[r].z.transpose()).norm() < 1e-12);
}

TEST_CASE("forward errors") {
  ModelConfig c = small_config();
  c.max_len = 3;
  Fixture f(c);
  const auto units = prefix(f.schema);
  CHECK_THROWS_AS(forward(units, f.backbone, f.params), CapacityError);
  std::vector<AtomicUnit> bad{special_unit(f.schema, f.schema.bos()), AtomicUnit{9, {0, 0, 0, 0}}};
  CHECK_THROWS_AS(forward(bad, f.backbone, f.params), IndexError);
  std::vector<AtomicUnit> no_bos{AtomicUnit{0, {0, 0, 0, 0}}};
  CHECK_THROWS_AS(forward(no_bos, f.backbone, f.params), ConfigError);
  CHECK_THROWS_AS(forward(std::span<const AtomicUnit>{}, f.backbone, f.params), ConfigError);
}
