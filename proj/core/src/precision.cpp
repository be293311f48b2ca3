#include "agdc/precision.hpp"

#include <algorithm>
#include <cmath>

#include "agdc/error.hpp"

namespace agdc {

double precision_bits(double x_max, double dx) {
  if (!(dx > 0.0) || !std::isfinite(dx)) throw DomainError("precision_bits: dx must be > 0");
  if (!(x_max > 0.0) || !std::isfinite(x_max)) throw DomainError("precision_bits: x_max must be > 0");
  if (dx > x_max) throw DomainError("precision_bits: dx must not exceed x_max");
  return std::log2(x_max / dx);
}

std::uint64_t required_vocab(double bits) {
  if (!(bits >= 0.0) || bits > 63.0) throw DomainError("required_vocab: bits must be in [0, 63]");
  const double v = std::exp2(bits);
  const double nearest = std::round(v);
  if (std::abs(v - nearest) <= 1e-9 * nearest) return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::ceil(v));
}

std::vector<std::int64_t> quantization_levels(int bits, std::int64_t grid) {
  if (bits < 1 || bits > 30) throw ConfigError("quantize: bits must be in [1, 30]");
  if (grid < 1) throw ConfigError("quantize: grid must be positive");
  const std::int64_t n = std::int64_t{1} << bits;
  std::vector<std::int64_t> levels(static_cast<std::size_t>(n + 1));
  for (std::int64_t k = 0; k <= n; ++k) {
    // floor(k * grid / n + 1/2) in integers.
    levels[static_cast<std::size_t>(k)] = (2 * k * grid + n) / (2 * n);
  }
  return levels;
}

std::int64_t snap(std::int64_t value, const std::vector<std::int64_t>& levels) {
  auto hi = std::lower_bound(levels.begin(), levels.end(), value);
  if (hi == levels.end()) return levels.back();
  if (hi == levels.begin()) return *hi;
  const std::int64_t up = *hi;
  const std::int64_t down = *(hi - 1);
  return value - down < up - value ? down : up;
}

LayoutSample quantize(const LayoutSample& sample, int bits, std::int64_t grid) {
  const std::vector<std::int64_t> levels = quantization_levels(bits, grid);
  const std::int64_t n = static_cast<std::int64_t>(levels.size()) - 1;
  if (grid <= n) return sample;
  const std::int64_t last = levels[static_cast<std::size_t>(n - 1)];
  LayoutSample out = sample;
  for (Rect& r : out.rects) {
    r.x = std::min(snap(r.x, levels), last);
    r.y = std::min(snap(r.y, levels), last);
    r.w = std::max(snap(r.w, levels), levels[1]);
    r.h = std::max(snap(r.h, levels), levels[1]);
    r.w = std::min(r.w, grid - r.x);
    r.h = std::min(r.h, grid - r.y);
  }
  return out;
}

std::vector<LayoutSample> quantize_dataset(const std::vector<LayoutSample>& layouts, int bits,
                                           std::int64_t grid) {
  std::vector<LayoutSample> out;
  out.reserve(layouts.size());
  for (const auto& l : layouts) out.push_back(quantize(l, bits, grid));
  return out;
}

}  // namespace agdc
