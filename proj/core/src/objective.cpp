#include "agdc/objective.hpp"

#include <cmath>

#include "agdc/error.hpp"

namespace agdc {

using ad::Index;
using ad::Var;

LossTerms total_loss(const Bind& bind, const Model& model, const Batch& batch,
                     const LossWeights& weights, Rng& rng) {
  if (batch.sequences.empty()) throw ConfigError("total_loss: empty batch");
  if (!batch.masks.empty() && batch.masks.size() != batch.sequences.size()) {
    throw ConfigError("total_loss: one mask per sequence required");
  }
  if (weights.lambda_cont < 0 || weights.lambda_len < 0 || weights.alpha < 0) {
    throw ConfigError("total_loss: loss weights must be non-negative");
  }
  const SchemaSpec& spec = model.schema();
  const int m = spec.cont_dim();
  ad::Tape& tape = bind.tape();

  std::vector<std::vector<AtomicUnit>> inputs;
  std::vector<std::vector<AtomicUnit>> contents;
  inputs.reserve(batch.sequences.size());
  for (const auto& seq : batch.sequences) {
    contents.push_back(seq.content(spec));
    std::vector<AtomicUnit> in;
    in.reserve(contents.back().size() + 1);
    in.push_back(special_unit(spec, spec.bos()));
    in.insert(in.end(), contents.back().begin(), contents.back().end());
    inputs.push_back(std::move(in));
  }
  std::vector<std::span<const AtomicUnit>> views(inputs.begin(), inputs.end());
  const PackedInput packed = pack_units(views, m);

  std::vector<Index> ce_cols;
  std::vector<double> ce_w;
  std::vector<Index> cont_rows;
  std::vector<ad::Segment> len_segs;
  std::vector<double> len_targets;
  ce_cols.reserve(static_cast<std::size_t>(packed.rows()));
  std::size_t ce_count = 0;
  for (std::size_t s = 0; s < contents.size(); ++s) {
    const auto& content = contents[s];
    const Index start = packed.segments[s].start;
    const Index n = static_cast<Index>(content.size());
    const auto on = [&](Index i) {
      return batch.masks.empty() || batch.masks[s].empty() ||
             (static_cast<std::size_t>(i) < batch.masks[s].size() && batch.masks[s][static_cast<std::size_t>(i)]);
    };
    bool any = false;
    for (Index i = 0; i <= n; ++i) {
      const int target = i < n ? content[static_cast<std::size_t>(i)].d : spec.eos();
      ce_cols.push_back(target);
      if (on(i)) {
        ce_w.push_back(1.0);
        ++ce_count;
        any = true;
        if (i < n) cont_rows.push_back(start + i);
      } else {
        ce_w.push_back(0.0);
      }
    }
    if (any) {
      len_segs.push_back({start + 1, n});
      len_targets.push_back(static_cast<double>(n));
    }
  }

  LossTerms out;
  out.positions = ce_count;
  if (ce_count == 0) {
    out.total = tape.constant(Matrix::Zero(1, 1));
    return out;
  }
  for (double& w : ce_w) w = -w / static_cast<double>(ce_count);

  Var z = model.backbone().forward(bind, packed);
  Var logp = ad::log_softmax_rows(model.heads().adjusted_logits(bind, z, weights.alpha));
  Var ce = ad::pick_sum(logp, ce_cols, ce_w);

  Var total = ce;
  if (!cont_rows.empty()) {
    Matrix targets(static_cast<Index>(cont_rows.size()), m);
    // The latent at row i has seen units up to i and predicts the unit at row i + 1.
    for (std::size_t r = 0; r < cont_rows.size(); ++r) {
      targets.row(static_cast<Index>(r)) = packed.cont.row(cont_rows[r] + 1);
    }
    Var cont = denoise_loss(bind, model.denoiser(), model.schedule(), targets,
                            ad::gather_rows(z, cont_rows), weights.diffusion_draws, rng);
    out.cont = cont.scalar();
    total = ad::add(total, ad::scale(cont, weights.lambda_cont));
  }

  Var p_eos = ad::exp(ad::column(logp, spec.eos()));
  Var e = ad::expected_length(p_eos, len_segs);
  Matrix tgt(static_cast<Index>(len_targets.size()), 1);
  for (std::size_t i = 0; i < len_targets.size(); ++i) tgt(static_cast<Index>(i), 0) = len_targets[i];
  Var len = ad::scale(ad::sum(ad::square(ad::sub(e, tape.constant(tgt)))),
                      1.0 / static_cast<double>(len_targets.size()));
  out.length = len.scalar();
  out.length_error = (e.value() - tgt).cwiseAbs().mean();
  total = ad::add(total, ad::scale(len, weights.lambda_len));

  out.ce = ce.scalar();
  out.total = total;
  out.total_value = total.scalar();
  if (!std::isfinite(out.total_value)) throw NumericError("total_loss: non-finite loss");
  return out;
}

LossTerms evaluate_loss(const Model& model, const std::vector<UnitSequence>& data,
                        const LossWeights& weights, std::uint64_t seed) {
  ad::Tape tape;
  Bind bind(tape, model.params());
  Rng rng(seed);
  return total_loss(bind, model, Batch{data, {}}, weights, rng);
}

}  // namespace agdc
