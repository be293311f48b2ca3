#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace agdc {

inline constexpr int kPowerLayer = 515;
inline constexpr int kWiringLayer = 644;
inline constexpr int kDeviceLayer = 1457;
inline constexpr std::int64_t kGridSize = 40000;

/// Axis-aligned rectangle [x, x + w) x [y, y + h) on the integer grid.
struct Rect {
  int layer = kPowerLayer;
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t w = 1;
  std::int64_t h = 1;

  std::int64_t x1() const { return x + w; }
  std::int64_t y1() const { return y + h; }
  std::int64_t area() const { return w * h; }
  bool operator==(const Rect&) const = default;
};

struct LayoutSample {
  std::vector<Rect> rects;
  bool operator==(const LayoutSample&) const = default;
};

/// Throws RangeError naming the first rect with an unknown layer, non-positive
/// size or extent outside [0, grid].
void validate_layout(const LayoutSample& sample, std::int64_t grid = kGridSize);

enum class Anchor { lower_left, center };

struct DrcConfig {
  std::int64_t eps = 240;
  std::int64_t min_h_sep = 1200;
  std::int64_t min_v_sep = 1000;
  /// HSC/VSC scores of samples with fewer devices are raised to at least
  /// (threshold - count) / threshold.
  int device_threshold = 20;
  Anchor anchor = Anchor::lower_left;

  void validate() const;
};

/// Pair of device indices (into the sample's rect list) with their measured
/// separation along the checked axis.
struct PairViolation {
  std::size_t i = 0;
  std::size_t j = 0;
  double separation = 0.0;
};

/// Two power/wiring rects sharing positive area.
struct OverlapViolation {
  std::size_t i = 0;
  std::size_t j = 0;
  std::int64_t area = 0;
};

struct DrcReport {
  double clc = 0.0;
  double pdc = 0.0;
  double hsc = 0.0;
  double vsc = 0.0;
  /// Area covered by at least two power/wiring rects.
  std::int64_t overlap_area = 0;
  /// Area covered by any power/wiring rect.
  std::int64_t conductor_area = 0;
  std::vector<OverlapViolation> clc_violations;
  /// Indices of devices with no positive-area power overlap.
  std::vector<std::size_t> pdc_violations;
  std::vector<PairViolation> hsc_violations;
  std::vector<PairViolation> vsc_violations;
  std::int64_t devices = 0;
  std::int64_t h_aligned_pairs = 0;
  std::int64_t v_aligned_pairs = 0;

  double total() const { return clc + pdc + hsc + vsc; }
};

/// Union area of rectangles by a sweep over compressed x events.
std::int64_t union_area(const std::vector<Rect>& rects);
/// Area covered by at least two of the rectangles.
std::int64_t multi_cover_area(const std::vector<Rect>& rects);
std::int64_t intersection_area(const Rect& a, const Rect& b);

DrcReport clc(const LayoutSample& sample, const DrcConfig& config = {});
DrcReport pdc(const LayoutSample& sample, const DrcConfig& config = {});
DrcReport hsc(const LayoutSample& sample, const DrcConfig& config = {});
DrcReport vsc(const LayoutSample& sample, const DrcConfig& config = {});
/// All four rules.
DrcReport check(const LayoutSample& sample, const DrcConfig& config = {});

struct DrcSummary {
  std::vector<DrcReport> samples;
  double clc = 0.0;
  double pdc = 0.0;
  double hsc = 0.0;
  double vsc = 0.0;
};

/// Per-sample reports and their means. Throws ConfigError on an empty list.
DrcSummary evaluate(const std::vector<LayoutSample>& samples, const DrcConfig& config = {});

// Layout JSONL: {"rects":[{"layer":515,"x":0,"y":0,"w":10,"h":10}, ...]}

LayoutSample layout_from_json_line(const std::string& line);
std::string layout_to_json_line(const LayoutSample& sample);
std::vector<LayoutSample> read_layouts(std::istream& in);
void write_layouts(std::ostream& out, const std::vector<LayoutSample>& layouts);
std::vector<LayoutSample> load_layouts(const std::string& path);
void save_layouts(const std::string& path, const std::vector<LayoutSample>& layouts);

void write_report_json(std::ostream& out, const DrcSummary& summary);
/// Columns sample,CLC,PDC,HSC,VSC; one row per sample, then a `mean` row.
void write_report_csv(std::ostream& out, const DrcSummary& summary);

}  // namespace agdc
