#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "agdc/drc.hpp"

namespace agdc::testing {

struct RasterAreas {
  std::int64_t once = 0;
  std::int64_t twice = 0;
};

/// Cell-by-cell coverage count over a small grid.
inline RasterAreas raster_areas(const std::vector<Rect>& rects, int grid) {
  std::vector<int> count(static_cast<std::size_t>(grid * grid), 0);
  for (const Rect& r : rects) {
    for (std::int64_t y = r.y; y < r.y1(); ++y) {
      for (std::int64_t x = r.x; x < r.x1(); ++x) ++count[static_cast<std::size_t>(y * grid + x)];
    }
  }
  RasterAreas a;
  for (int c : count) {
    a.once += c >= 1;
    a.twice += c >= 2;
  }
  return a;
}

inline double raster_clc(const LayoutSample& s, int grid) {
  std::vector<Rect> conductors;
  for (const Rect& r : s.rects) {
    if (r.layer == kPowerLayer || r.layer == kWiringLayer) conductors.push_back(r);
  }
  const RasterAreas a = raster_areas(conductors, grid);
  return a.once > 0 ? static_cast<double>(a.twice) / static_cast<double>(a.once) : 0.0;
}

inline double raster_pdc(const LayoutSample& s) {
  int devices = 0, bad = 0;
  for (const Rect& d : s.rects) {
    if (d.layer != kDeviceLayer) continue;
    ++devices;
    bool powered = false;
    for (const Rect& p : s.rects) {
      if (p.layer != kPowerLayer) continue;
      const auto ox = std::min(d.x1(), p.x1()) - std::max(d.x, p.x);
      const auto oy = std::min(d.y1(), p.y1()) - std::max(d.y, p.y);
      powered |= ox > 0 && oy > 0;
    }
    bad += !powered;
  }
  return devices > 0 ? static_cast<double>(bad) / devices : 0.0;
}

/// Spacing score from floating-point anchors, all device pairs.
inline double pairwise_spacing(const LayoutSample& s, const DrcConfig& c, bool horizontal) {
  std::vector<std::pair<double, double>> anchors;
  for (const Rect& r : s.rects) {
    if (r.layer != kDeviceLayer) continue;
    const double half = c.anchor == Anchor::center ? 0.5 : 0.0;
    anchors.emplace_back(static_cast<double>(r.x) + half * static_cast<double>(r.w),
                         static_cast<double>(r.y) + half * static_cast<double>(r.h));
  }
  int aligned = 0, bad = 0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (std::size_t j = i + 1; j < anchors.size(); ++j) {
      const double dx = std::abs(anchors[i].first - anchors[j].first);
      const double dy = std::abs(anchors[i].second - anchors[j].second);
      const double gate = horizontal ? dy : dx;
      const double dist = horizontal ? dx : dy;
      if (gate >= static_cast<double>(c.eps)) continue;
      ++aligned;
      bad += dist < static_cast<double>(horizontal ? c.min_h_sep : c.min_v_sep);
    }
  }
  const double score = aligned > 0 ? static_cast<double>(bad) / aligned : 0.0;
  const auto n = static_cast<int>(anchors.size());
  if (n < c.device_threshold) {
    return std::max(score, static_cast<double>(c.device_threshold - n) / c.device_threshold);
  }
  return score;
}

/// Random layout on a small grid with all three layers.
inline LayoutSample random_small_layout(std::mt19937_64& rng, int grid, int max_rects) {
  std::uniform_int_distribution<int> count(0, max_rects);
  std::uniform_int_distribution<int> layer(0, 2);
  const int layers[] = {kPowerLayer, kWiringLayer, kDeviceLayer};
  LayoutSample s;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pos(0, grid - 1);
    Rect r;
    r.layer = layers[layer(rng)];
    r.x = pos(rng);
    r.y = pos(rng);
    r.w = std::uniform_int_distribution<int>(1, static_cast<int>(grid - r.x))(rng);
    r.h = std::uniform_int_distribution<int>(1, static_cast<int>(grid - r.y))(rng);
    s.rects.push_back(r);
  }
  return s;
}

}  // namespace agdc::testing
