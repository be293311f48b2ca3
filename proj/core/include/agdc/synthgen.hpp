#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "agdc/drc.hpp"
#include "agdc/schema.hpp"

namespace agdc {

struct SynthConfig {
  /// Per-layer count statistics in the order power, wiring, device.
  std::array<double, 3> count_mean{30.0, 116.0, 178.0};
  std::array<double, 3> count_std{10.0, 92.0, 75.0};
  /// Divides means and standard deviations.
  double shrink = 1.0;
  /// Rounded normal draws are clipped below at 1 for power and wiring and at
  /// this value for devices, so the default layouts clear the device-count
  /// penalty of DrcConfig.
  int min_devices = 20;
  /// Redraw counts whose total exceeds this; 0 disables the limit.
  int max_units = 0;
  int count = 100;
  std::uint64_t seed = 0;
  std::int64_t grid = kGridSize;
  /// Rules the placed devices must satisfy.
  DrcConfig rules;
  /// Placement attempts per element before the layout is restarted.
  int placement_attempts = 2000;
  int layout_attempts = 20;

  void validate() const;
};

/// Rule-satisfying layouts: power rails as horizontal bands, wiring in the
/// gaps between rails without overlapping any power or wiring rect, and
/// devices inside rails placed by rejection against the spacing rules.
/// Layout i depends only on (seed, i). Rects are sorted by (layer, y, x).
/// Throws CapacityError when placement keeps failing.
std::vector<LayoutSample> generate_layouts(const SynthConfig& config);
LayoutSample generate_layout(const SynthConfig& config, std::uint64_t index);

enum class UnitOrder { layer_then_raster, raster };

UnitOrder parse_unit_order(const std::string& s);
std::string to_string(UnitOrder order);

/// Class of a layer: 515 -> 0, 644 -> 1, 1457 -> 2.
int layer_class(int layer);
int class_layer(int cls);

/// Layout schema with three classes on the given grid.
SchemaSpec layout_schema(std::int64_t grid = kGridSize);

void sort_rects(LayoutSample& sample, UnitOrder order);

/// One unit per rect with normalized (x, y, w, h), in the given order,
/// wrapped in BOS/EOS. Throws RangeError on rects outside the grid.
UnitSequence layout_to_sequence(const LayoutSample& sample, const SchemaSpec& spec,
                                UnitOrder order = UnitOrder::layer_then_raster);
std::vector<UnitSequence> layouts_to_sequences(const std::vector<LayoutSample>& layouts,
                                               const SchemaSpec& spec,
                                               UnitOrder order = UnitOrder::layer_then_raster);

/// Inverse mapping with coordinates rounded to integers. Generated
/// sequences may hold degenerate boxes; with `repair` sizes are raised to 1
/// and boxes clipped to the grid, otherwise such units throw RangeError.
LayoutSample sequence_to_layout(const UnitSequence& seq, const SchemaSpec& spec, bool repair = false);
std::vector<LayoutSample> sequences_to_layouts(const std::vector<UnitSequence>& seqs,
                                               const SchemaSpec& spec, bool repair = false);

struct LengthStats {
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t count = 0;
};

/// Gaussian fit (mean, population standard deviation) of content-length
/// differences generated[i] - references[i].
LengthStats length_stats(const std::vector<UnitSequence>& generated,
                         const std::vector<UnitSequence>& references, const SchemaSpec& spec);
LengthStats length_stats(const std::vector<double>& differences);

}  // namespace agdc
