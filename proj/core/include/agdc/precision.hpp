#pragma once

#include <cstdint>
#include <vector>

#include "agdc/drc.hpp"

namespace agdc {

/// log2(x_max / dx): bits needed to resolve spacing dx over [0, x_max].
double precision_bits(double x_max, double dx);

/// ceil(2^bits), the token count a per-value vocabulary needs. Values within
/// 1e-9 relative of an integer are not rounded up.
std::uint64_t required_vocab(double bits);

/// Integer positions of the 2^bits + 1 uniform levels over [0, grid],
/// each rounded half up.
std::vector<std::int64_t> quantization_levels(int bits, std::int64_t grid = kGridSize);

/// Nearest level, ties to the upper one.
std::int64_t snap(std::int64_t value, const std::vector<std::int64_t>& levels);

/// Snaps x, y, w and h of every rect to the nearest level independently.
/// Sizes that snap to zero become one step; rects are then clipped to the
/// grid. A level spacing of at most one unit leaves integer data unchanged.
/// Idempotent at fixed `bits`.
LayoutSample quantize(const LayoutSample& sample, int bits, std::int64_t grid = kGridSize);
std::vector<LayoutSample> quantize_dataset(const std::vector<LayoutSample>& layouts, int bits,
                                           std::int64_t grid = kGridSize);

}  // namespace agdc
