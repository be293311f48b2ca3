#include "agdc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <tuple>

#include "agdc/error.hpp"
#include "agdc/rng.hpp"

namespace agdc {

void SynthConfig::validate() const {
  for (int l = 0; l < 3; ++l) {
    if (!(count_mean[l] > 0.0)) throw ConfigError("synth: count means must be > 0");
    if (!(count_std[l] >= 0.0)) throw ConfigError("synth: count stds must be >= 0");
  }
  if (!(shrink >= 1.0)) throw ConfigError("synth: shrink must be >= 1");
  if (min_devices < 1) throw ConfigError("synth: min_devices must be >= 1");
  if (max_units < 0) throw ConfigError("synth: max_units must be >= 0");
  if (max_units > 0 && max_units < min_devices + 2) {
    throw ConfigError("synth: max_units leaves no room for min_devices plus one power and one wiring rect");
  }
  if (count < 0) throw ConfigError("synth: count must be >= 0");
  if (grid < 4000) throw ConfigError("synth: grid must be >= 4000");
  if (placement_attempts < 1 || layout_attempts < 1) throw ConfigError("synth: attempts must be >= 1");
  rules.validate();
}

namespace {

using I64 = std::int64_t;

I64 uniform(Rng& rng, I64 lo, I64 hi) { return std::uniform_int_distribution<I64>(lo, hi)(rng); }

std::array<int, 3> draw_counts(const SynthConfig& c, Rng& rng) {
  const std::array<int, 3> floor{1, 1, c.min_devices};
  for (int tries = 0; tries < 10000; ++tries) {
    std::array<int, 3> n{};
    int total = 0;
    for (int l = 0; l < 3; ++l) {
      std::normal_distribution<double> dist(c.count_mean[l] / c.shrink, c.count_std[l] / c.shrink);
      n[l] = std::max(floor[l], static_cast<int>(std::lround(dist(rng))));
      total += n[l];
    }
    if (c.max_units == 0 || total <= c.max_units) return n;
  }
  throw CapacityError("synth: cannot draw counts within max_units");
}

bool spacing_ok(const Rect& a, const Rect& b, const DrcConfig& rules) {
  const auto anchor = [&](I64 pos, I64 size) { return rules.anchor == Anchor::center ? 2 * pos + size : 2 * pos; };
  const I64 dx = std::abs(anchor(a.x, a.w) - anchor(b.x, b.w));
  const I64 dy = std::abs(anchor(a.y, a.h) - anchor(b.y, b.h));
  if (dy < 2 * rules.eps && dx < 2 * rules.min_h_sep) return false;
  if (dx < 2 * rules.eps && dy < 2 * rules.min_v_sep) return false;
  return true;
}

bool overlaps(const Rect& a, const Rect& b) { return intersection_area(a, b) > 0; }

struct Gap {
  I64 y0, y1;
};

std::optional<LayoutSample> try_layout(const SynthConfig& c, const std::array<int, 3>& n, Rng& rng) {
  const I64 grid = c.grid;
  LayoutSample out;
  const I64 slot = grid / n[0];
  if (slot < 8) throw CapacityError("synth: too many power rails for the grid");

  std::vector<Rect> rails;
  for (int i = 0; i < n[0]; ++i) {
    const I64 x0 = uniform(rng, 0, grid / 4);
    const I64 x1 = uniform(rng, 3 * grid / 4, grid);
    rails.push_back(Rect{kPowerLayer, x0, i * slot + slot / 4, x1 - x0, slot / 2});
  }
  std::vector<Gap> gaps;
  I64 prev = 0;
  for (const Rect& r : rails) {
    if (r.y > prev) gaps.push_back({prev, r.y});
    prev = r.y1();
  }
  if (grid > prev) gaps.push_back({prev, grid});

  std::vector<Rect> wires;
  for (int i = 0; i < n[1]; ++i) {
    bool placed = false;
    for (int a = 0; a < c.placement_attempts && !placed; ++a) {
      const Gap& g = gaps[static_cast<std::size_t>(uniform(rng, 0, static_cast<I64>(gaps.size()) - 1))];
      const I64 gh = g.y1 - g.y0;
      const I64 h = uniform(rng, std::min<I64>(20, gh), std::min<I64>(800, gh));
      const I64 w = uniform(rng, 200, std::min<I64>(6000, grid));
      const Rect r{kWiringLayer, uniform(rng, 0, grid - w), uniform(rng, g.y0, g.y1 - h), w, h};
      if (std::none_of(wires.begin(), wires.end(), [&](const Rect& o) { return overlaps(r, o); })) {
        wires.push_back(r);
        placed = true;
      }
    }
    if (!placed) return std::nullopt;
  }

  std::vector<Rect> devices;
  for (int i = 0; i < n[2]; ++i) {
    bool placed = false;
    for (int a = 0; a < c.placement_attempts && !placed; ++a) {
      const Rect& rail = rails[static_cast<std::size_t>(uniform(rng, 0, static_cast<I64>(rails.size()) - 1))];
      const I64 w = uniform(rng, 100, std::min<I64>(600, rail.w));
      const I64 h = uniform(rng, std::min<I64>(100, rail.h), std::min<I64>(600, rail.h));
      const Rect r{kDeviceLayer, uniform(rng, rail.x, rail.x1() - w), uniform(rng, rail.y, rail.y1() - h), w, h};
      if (std::all_of(devices.begin(), devices.end(), [&](const Rect& o) { return spacing_ok(r, o, c.rules); })) {
        devices.push_back(r);
        placed = true;
      }
    }
    if (!placed) return std::nullopt;
  }

  out.rects = std::move(rails);
  out.rects.insert(out.rects.end(), wires.begin(), wires.end());
  out.rects.insert(out.rects.end(), devices.begin(), devices.end());
  return out;
}

}  // namespace

LayoutSample generate_layout(const SynthConfig& config, std::uint64_t index) {
  config.validate();
  Rng rng(derive_seed(config.seed, index));
  for (int attempt = 0; attempt < config.layout_attempts; ++attempt) {
    const auto counts = draw_counts(config, rng);
    if (auto layout = try_layout(config, counts, rng)) {
      sort_rects(*layout, UnitOrder::layer_then_raster);
      return *layout;
    }
  }
  throw CapacityError("synth: layout " + std::to_string(index) + " could not be placed after " +
                      std::to_string(config.layout_attempts) + " attempts");
}

std::vector<LayoutSample> generate_layouts(const SynthConfig& config) {
  config.validate();
  std::vector<LayoutSample> out;
  out.reserve(static_cast<std::size_t>(config.count));
  for (int i = 0; i < config.count; ++i) out.push_back(generate_layout(config, static_cast<std::uint64_t>(i)));
  return out;
}

UnitOrder parse_unit_order(const std::string& s) {
  if (s == "layer_then_raster" || s == "layer-then-raster") return UnitOrder::layer_then_raster;
  if (s == "raster") return UnitOrder::raster;
  throw ConfigError("unknown unit order '" + s + "' (expected layer-then-raster or raster)");
}

std::string to_string(UnitOrder order) {
  return order == UnitOrder::raster ? "raster" : "layer-then-raster";
}

int layer_class(int layer) {
  switch (layer) {
    case kPowerLayer: return 0;
    case kWiringLayer: return 1;
    case kDeviceLayer: return 2;
    default: throw RangeError("unknown layer " + std::to_string(layer));
  }
}

int class_layer(int cls) {
  static constexpr int layers[] = {kPowerLayer, kWiringLayer, kDeviceLayer};
  if (cls < 0 || cls > 2) throw RangeError("unknown layer class " + std::to_string(cls));
  return layers[cls];
}

SchemaSpec layout_schema(std::int64_t grid) { return SchemaSpec::layout(3, static_cast<double>(grid)); }

void sort_rects(LayoutSample& sample, UnitOrder order) {
  const auto key = [order](const Rect& r) {
    const int cls = layer_class(r.layer);
    return order == UnitOrder::layer_then_raster ? std::make_tuple(I64{cls}, r.y, r.x, r.w, r.h)
                                                 : std::make_tuple(r.y, r.x, I64{cls}, r.w, r.h);
  };
  std::stable_sort(sample.rects.begin(), sample.rects.end(),
                   [&](const Rect& a, const Rect& b) { return key(a) < key(b); });
}

UnitSequence layout_to_sequence(const LayoutSample& sample, const SchemaSpec& spec, UnitOrder order) {
  validate_layout(sample, static_cast<I64>(spec.coord_max()));
  LayoutSample sorted = sample;
  sort_rects(sorted, order);
  std::vector<AtomicUnit> content;
  content.reserve(sorted.rects.size());
  for (const Rect& r : sorted.rects) {
    content.push_back(AtomicUnit{layer_class(r.layer),
                                 normalize({static_cast<double>(r.x), static_cast<double>(r.y),
                                            static_cast<double>(r.w), static_cast<double>(r.h)},
                                           spec)});
  }
  return make_sequence(spec, content);
}

std::vector<UnitSequence> layouts_to_sequences(const std::vector<LayoutSample>& layouts, const SchemaSpec& spec,
                                               UnitOrder order) {
  std::vector<UnitSequence> out;
  out.reserve(layouts.size());
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    try {
      out.push_back(layout_to_sequence(layouts[i], spec, order));
    } catch (const RangeError& e) {
      throw RangeError("layout " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

LayoutSample sequence_to_layout(const UnitSequence& seq, const SchemaSpec& spec, bool repair) {
  if (spec.cont_dim() != 4) throw ConfigError("sequence_to_layout: schema must have 4 coordinates");
  const I64 grid = static_cast<I64>(spec.coord_max());
  LayoutSample out;
  for (const AtomicUnit& u : seq.content(spec)) {
    const std::vector<double> raw = denormalize(u.c, spec);
    Rect r{class_layer(u.d), std::llround(raw[0]), std::llround(raw[1]), std::llround(raw[2]),
           std::llround(raw[3])};
    if (repair) {
      r.x = std::clamp<I64>(r.x, 0, grid - 1);
      r.y = std::clamp<I64>(r.y, 0, grid - 1);
      r.w = std::clamp<I64>(r.w, 1, grid - r.x);
      r.h = std::clamp<I64>(r.h, 1, grid - r.y);
    }
    out.rects.push_back(r);
  }
  validate_layout(out, grid);
  return out;
}

std::vector<LayoutSample> sequences_to_layouts(const std::vector<UnitSequence>& seqs, const SchemaSpec& spec,
                                               bool repair) {
  std::vector<LayoutSample> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(sequence_to_layout(s, spec, repair));
  return out;
}

LengthStats length_stats(const std::vector<double>& differences) {
  if (differences.empty()) throw ConfigError("length_stats: empty input");
  LengthStats s;
  s.count = differences.size();
  const double n = static_cast<double>(differences.size());
  for (double d : differences) s.mu += d;
  s.mu /= n;
  double var = 0.0;
  for (double d : differences) var += (d - s.mu) * (d - s.mu);
  s.sigma = std::sqrt(var / n);
  return s;
}

LengthStats length_stats(const std::vector<UnitSequence>& generated, const std::vector<UnitSequence>& references,
                         const SchemaSpec& spec) {
  if (generated.size() != references.size()) {
    throw ConfigError("length_stats: generated and reference lists differ in size");
  }
  std::vector<double> diffs;
  diffs.reserve(generated.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    diffs.push_back(static_cast<double>(generated[i].length(spec)) - static_cast<double>(references[i].length(spec)));
  }
  return length_stats(diffs);
}

}  // namespace agdc
