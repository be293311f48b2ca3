#include "agdc/backbone.hpp"

#include <cmath>

#include "agdc/error.hpp"

namespace agdc {

using ad::Index;
using ad::Var;

void ModelConfig::validate() const {
  if (d_model < 2 || d_model % 2 != 0) throw ConfigError("model: d_model must be even and >= 2");
  if (heads < 1 || d_model % heads != 0) throw ConfigError("model: d_model must be divisible by heads");
  if (layers < 1) throw ConfigError("model: layers must be >= 1");
  if (max_len < 2) throw ConfigError("model: max_len must be >= 2");
  if (!(init_std > 0.0)) throw ConfigError("model: init_std must be > 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
}

PackedInput pack_units(std::span<const std::span<const AtomicUnit>> sequences, int cont_dim) {
  PackedInput in;
  Index total = 0;
  for (const auto& s : sequences) total += static_cast<Index>(s.size());
  in.cont = Matrix::Zero(total, cont_dim);
  in.ids.reserve(static_cast<std::size_t>(total));
  in.positions.reserve(static_cast<std::size_t>(total));
  Index row = 0;
  for (const auto& s : sequences) {
    in.segments.push_back({row, static_cast<Index>(s.size())});
    for (std::size_t i = 0; i < s.size(); ++i, ++row) {
      const AtomicUnit& u = s[i];
      if (u.c.size() != static_cast<std::size_t>(cont_dim)) {
        throw ConfigError("pack_units: continuous vector has wrong dimension");
      }
      in.ids.push_back(u.d);
      in.positions.push_back(static_cast<Index>(i));
      for (int j = 0; j < cont_dim; ++j) in.cont(row, j) = u.c[static_cast<std::size_t>(j)];
    }
  }
  return in;
}

PackedInput pack_units(std::span<const AtomicUnit> sequence, int cont_dim) {
  const std::span<const AtomicUnit> one[] = {sequence};
  return pack_units(std::span<const std::span<const AtomicUnit>>(one), cont_dim);
}

Backbone::Backbone(ModelConfig config, SchemaSpec schema)
    : config_(config), schema_(std::move(schema)) {
  config_.validate();
}

std::string Backbone::name(int layer, const char* part) {
  return "backbone.L" + std::to_string(layer) + "." + part;
}

void Backbone::register_parameters(ParameterStore& store, Rng& rng) const {
  const Index d = config_.d_model;
  const Index half = d / 2;
  const double sd = config_.init_std;
  store.add_normal("backbone.tok_emb", schema_.vocab_size(), half, sd, rng);
  store.add_normal("backbone.cont_proj", schema_.cont_dim(), half, sd, rng);
  store.add_normal("backbone.fuse.w", d, d, sd, rng);
  store.add("backbone.fuse.b", 1, d);
  store.add_normal("backbone.pos_emb", config_.max_len, d, sd, rng);
  for (int l = 0; l < config_.layers; ++l) {
    store.add(name(l, "ln1.g"), 1, d).value.setOnes();
    store.add(name(l, "ln1.b"), 1, d);
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      store.add_normal(name(l, w), d, d, sd, rng);
    }
    // No key bias: a shift shared by every key cancels in the softmax.
    for (const char* b : {"attn.bq", "attn.bv", "attn.bo"}) store.add(name(l, b), 1, d);
    store.add(name(l, "ln2.g"), 1, d).value.setOnes();
    store.add(name(l, "ln2.b"), 1, d);
    store.add_normal(name(l, "ffn.w1"), d, 4 * d, sd, rng);
    store.add(name(l, "ffn.b1"), 1, 4 * d);
    store.add_normal(name(l, "ffn.w2"), 4 * d, d, sd, rng);
    store.add(name(l, "ffn.b2"), 1, d);
  }
  store.add("backbone.ln_f.g", 1, d).value.setOnes();
  store.add("backbone.ln_f.b", 1, d);
}

Var Backbone::embed(const Bind& bind, const PackedInput& input) const {
  ad::Tape& tape = bind.tape();
  std::vector<Index> ids(input.ids.begin(), input.ids.end());
  for (Index id : ids) {
    if (id < 0 || id >= schema_.vocab_size()) {
      throw IndexError("embed: id " + std::to_string(id) + " outside embedding table of " +
                       std::to_string(schema_.vocab_size()));
    }
  }
  Var disc = ad::gather_rows(bind("backbone.tok_emb"), ids);
  Var cont = ad::matmul(tape.constant(input.cont), bind("backbone.cont_proj"));
  return ad::linear(ad::concat_cols(disc, cont), bind("backbone.fuse.w"), bind("backbone.fuse.b"));
}

Var Backbone::layer(const Bind& bind, Var x, int l, std::span<const ad::Segment> segments) const {
  auto ln = [&](Var v, const char* g, const char* b) {
    return ad::add_row(ad::mul_row(ad::layer_norm(v), bind(name(l, g))), bind(name(l, b)));
  };
  Var h = ln(x, "ln1.g", "ln1.b");
  Var q = ad::linear(h, bind(name(l, "attn.wq")), bind(name(l, "attn.bq")));
  Var k = ad::matmul(h, bind(name(l, "attn.wk")));
  Var v = ad::linear(h, bind(name(l, "attn.wv")), bind(name(l, "attn.bv")));
  Var a = ad::causal_attention(q, k, v, segments, config_.heads);
  x = ad::add(x, ad::linear(a, bind(name(l, "attn.wo")), bind(name(l, "attn.bo"))));

  h = ln(x, "ln2.g", "ln2.b");
  h = ad::gelu(ad::linear(h, bind(name(l, "ffn.w1")), bind(name(l, "ffn.b1"))));
  return ad::add(x, ad::linear(h, bind(name(l, "ffn.w2")), bind(name(l, "ffn.b2"))));
}

Var Backbone::forward(const Bind& bind, const PackedInput& input) const {
  for (const auto& s : input.segments) {
    if (s.length > config_.max_len) {
      throw CapacityError("forward: prefix of " + std::to_string(s.length) +
                          " units exceeds max_len " + std::to_string(config_.max_len));
    }
  }
  Var x = embed(bind, input);
  x = ad::add(x, ad::gather_rows(bind("backbone.pos_emb"), input.positions));
  for (int l = 0; l < config_.layers; ++l) x = layer(bind, x, l, input.segments);
  return ad::add_row(ad::mul_row(ad::layer_norm(x), bind("backbone.ln_f.g")), bind("backbone.ln_f.b"));
}

Eigen::VectorXd embed_unit(const AtomicUnit& unit, const Backbone& backbone,
                           const ParameterStore& params) {
  ad::Tape tape;
  Bind bind(tape, params);
  const AtomicUnit one[] = {unit};
  Var e = backbone.embed(bind, pack_units(std::span<const AtomicUnit>(one), backbone.schema().cont_dim()));
  return e.value().row(0).transpose();
}

std::vector<LatentState> forward(std::span<const AtomicUnit> prefix, const Backbone& backbone,
                                 const ParameterStore& params) {
  if (prefix.empty()) throw ConfigError("forward: empty prefix");
  if (prefix.front().d != backbone.schema().bos()) throw ConfigError("forward: prefix must begin with BOS");
  ad::Tape tape;
  Bind bind(tape, params);
  Var z = backbone.forward(bind, pack_units(prefix, backbone.schema().cont_dim()));
  std::vector<LatentState> out;
  out.reserve(prefix.size());
  for (Index r = 0; r < z.rows(); ++r) {
    out.push_back(LatentState{z.value().row(r).transpose(), static_cast<int>(r) + 1});
  }
  return out;
}

}  // namespace agdc
