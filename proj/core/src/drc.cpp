#include "agdc/drc.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "agdc/error.hpp"

namespace agdc {

using nlohmann::json;

void validate_layout(const LayoutSample& sample, std::int64_t grid) {
  for (std::size_t i = 0; i < sample.rects.size(); ++i) {
    const Rect& r = sample.rects[i];
    const std::string at = "rect " + std::to_string(i) + ": ";
    if (r.layer != kPowerLayer && r.layer != kWiringLayer && r.layer != kDeviceLayer) {
      throw RangeError(at + "unknown layer " + std::to_string(r.layer));
    }
    if (r.w <= 0 || r.h <= 0) throw RangeError(at + "width and height must be positive");
    if (r.x < 0 || r.y < 0 || r.x1() > grid || r.y1() > grid) {
      throw RangeError(at + "outside the " + std::to_string(grid) + " grid");
    }
  }
}

void DrcConfig::validate() const {
  if (eps <= 0 || min_h_sep <= 0 || min_v_sep <= 0) {
    throw ConfigError("drc: eps, W and H must be positive");
  }
  if (device_threshold < 0) throw ConfigError("drc: device_threshold must be >= 0");
}

namespace {

/// Segment tree over compressed y intervals tracking length covered once
/// and at least twice.
class CoverTree {
 public:
  explicit CoverTree(std::vector<std::int64_t> ys) : ys_(std::move(ys)) {
    const std::size_t n = ys_.size() > 1 ? ys_.size() - 1 : 1;
    cnt_.assign(4 * n, 0);
    len1_.assign(4 * n, 0);
    len2_.assign(4 * n, 0);
  }

  void update(std::int64_t y0, std::int64_t y1, int delta) {
    const auto lo = static_cast<std::size_t>(std::lower_bound(ys_.begin(), ys_.end(), y0) - ys_.begin());
    const auto hi = static_cast<std::size_t>(std::lower_bound(ys_.begin(), ys_.end(), y1) - ys_.begin());
    if (lo < hi) update(1, 0, ys_.size() - 1, lo, hi, delta);
  }

  std::int64_t covered_once() const { return len1_[1]; }
  std::int64_t covered_twice() const { return len2_[1]; }

 private:
  // Node covers elementary intervals [l, r).
  void update(std::size_t node, std::size_t l, std::size_t r, std::size_t a, std::size_t b, int delta) {
    if (b <= l || r <= a) return;
    if (a <= l && r <= b) {
      cnt_[node] += delta;
    } else {
      const std::size_t mid = (l + r) / 2;
      update(2 * node, l, mid, a, b, delta);
      update(2 * node + 1, mid, r, a, b, delta);
    }
    pull(node, l, r);
  }

  void pull(std::size_t node, std::size_t l, std::size_t r) {
    const std::int64_t full = ys_[r] - ys_[l];
    const bool leaf = r - l == 1;
    const std::int64_t child1 = leaf ? 0 : len1_[2 * node] + len1_[2 * node + 1];
    const std::int64_t child2 = leaf ? 0 : len2_[2 * node] + len2_[2 * node + 1];
    if (cnt_[node] >= 2) {
      len1_[node] = full;
      len2_[node] = full;
    } else if (cnt_[node] == 1) {
      len1_[node] = full;
      len2_[node] = child1;
    } else {
      len1_[node] = child1;
      len2_[node] = child2;
    }
  }

  std::vector<std::int64_t> ys_;
  std::vector<int> cnt_;
  std::vector<std::int64_t> len1_;
  std::vector<std::int64_t> len2_;
};

struct SweepAreas {
  std::int64_t once = 0;
  std::int64_t twice = 0;
};

SweepAreas sweep(const std::vector<Rect>& rects) {
  struct Event {
    std::int64_t x;
    int delta;
    std::int64_t y0, y1;
  };
  std::vector<Event> events;
  std::vector<std::int64_t> ys;
  events.reserve(2 * rects.size());
  ys.reserve(2 * rects.size());
  for (const Rect& r : rects) {
    if (r.w <= 0 || r.h <= 0) continue;
    events.push_back({r.x, +1, r.y, r.y1()});
    events.push_back({r.x1(), -1, r.y, r.y1()});
    ys.push_back(r.y);
    ys.push_back(r.y1());
  }
  if (events.empty()) return {};
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.x < b.x; });
  CoverTree tree(ys);
  SweepAreas out;
  std::int64_t prev = events.front().x;
  for (const Event& e : events) {
    const std::int64_t dx = e.x - prev;
    out.once += dx * tree.covered_once();
    out.twice += dx * tree.covered_twice();
    prev = e.x;
    tree.update(e.y0, e.y1, e.delta);
  }
  return out;
}

std::vector<std::size_t> indices_of(const LayoutSample& sample, int layer) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample.rects.size(); ++i) {
    if (sample.rects[i].layer == layer) out.push_back(i);
  }
  return out;
}

// Anchor coordinates doubled so that center anchors stay integral.
std::int64_t anchor2(std::int64_t pos, std::int64_t size, Anchor a) {
  return a == Anchor::center ? 2 * pos + size : 2 * pos;
}

std::int64_t abs64(std::int64_t v) { return v < 0 ? -v : v; }

double penalize(double score, std::int64_t devices, int threshold) {
  if (devices >= threshold) return score;
  const double p = static_cast<double>(threshold - devices) / static_cast<double>(threshold);
  return std::max(score, p);
}

void spacing(const LayoutSample& sample, const DrcConfig& config, bool horizontal, DrcReport& out) {
  const auto devices = indices_of(sample, kDeviceLayer);
  out.devices = static_cast<std::int64_t>(devices.size());
  std::int64_t aligned = 0;
  std::vector<PairViolation> violations;
  const std::int64_t eps2 = 2 * config.eps;
  const std::int64_t sep2 = 2 * (horizontal ? config.min_h_sep : config.min_v_sep);
  for (std::size_t a = 0; a < devices.size(); ++a) {
    const Rect& ra = sample.rects[devices[a]];
    for (std::size_t b = a + 1; b < devices.size(); ++b) {
      const Rect& rb = sample.rects[devices[b]];
      const std::int64_t dx = abs64(anchor2(ra.x, ra.w, config.anchor) - anchor2(rb.x, rb.w, config.anchor));
      const std::int64_t dy = abs64(anchor2(ra.y, ra.h, config.anchor) - anchor2(rb.y, rb.h, config.anchor));
      const std::int64_t gate = horizontal ? dy : dx;
      const std::int64_t dist = horizontal ? dx : dy;
      if (gate >= eps2) continue;
      ++aligned;
      if (dist < sep2) violations.push_back({devices[a], devices[b], static_cast<double>(dist) / 2.0});
    }
  }
  const double raw = aligned > 0 ? static_cast<double>(violations.size()) / static_cast<double>(aligned) : 0.0;
  const double score = penalize(raw, out.devices, config.device_threshold);
  if (horizontal) {
    out.h_aligned_pairs = aligned;
    out.hsc_violations = std::move(violations);
    out.hsc = score;
  } else {
    out.v_aligned_pairs = aligned;
    out.vsc_violations = std::move(violations);
    out.vsc = score;
  }
}

}  // namespace

std::int64_t union_area(const std::vector<Rect>& rects) { return sweep(rects).once; }

std::int64_t multi_cover_area(const std::vector<Rect>& rects) { return sweep(rects).twice; }

std::int64_t intersection_area(const Rect& a, const Rect& b) {
  const std::int64_t w = std::min(a.x1(), b.x1()) - std::max(a.x, b.x);
  const std::int64_t h = std::min(a.y1(), b.y1()) - std::max(a.y, b.y);
  return w > 0 && h > 0 ? w * h : 0;
}

DrcReport clc(const LayoutSample& sample, const DrcConfig& config) {
  config.validate();
  DrcReport out;
  std::vector<std::size_t> idx;
  std::vector<Rect> conductors;
  for (std::size_t i = 0; i < sample.rects.size(); ++i) {
    const int layer = sample.rects[i].layer;
    if (layer == kPowerLayer || layer == kWiringLayer) {
      idx.push_back(i);
      conductors.push_back(sample.rects[i]);
    }
  }
  const SweepAreas areas = sweep(conductors);
  out.overlap_area = areas.twice;
  out.conductor_area = areas.once;
  out.clc = areas.once > 0 ? static_cast<double>(areas.twice) / static_cast<double>(areas.once) : 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const std::int64_t area = intersection_area(conductors[a], conductors[b]);
      if (area > 0) out.clc_violations.push_back({idx[a], idx[b], area});
    }
  }
  return out;
}

DrcReport pdc(const LayoutSample& sample, const DrcConfig& config) {
  config.validate();
  DrcReport out;
  const auto power = indices_of(sample, kPowerLayer);
  const auto devices = indices_of(sample, kDeviceLayer);
  out.devices = static_cast<std::int64_t>(devices.size());
  for (std::size_t d : devices) {
    const bool powered = std::any_of(power.begin(), power.end(), [&](std::size_t p) {
      return intersection_area(sample.rects[d], sample.rects[p]) > 0;
    });
    if (!powered) out.pdc_violations.push_back(d);
  }
  out.pdc = devices.empty() ? 0.0
                            : static_cast<double>(out.pdc_violations.size()) / static_cast<double>(devices.size());
  return out;
}

DrcReport hsc(const LayoutSample& sample, const DrcConfig& config) {
  config.validate();
  DrcReport out;
  spacing(sample, config, true, out);
  return out;
}

DrcReport vsc(const LayoutSample& sample, const DrcConfig& config) {
  config.validate();
  DrcReport out;
  spacing(sample, config, false, out);
  return out;
}

DrcReport check(const LayoutSample& sample, const DrcConfig& config) {
  DrcReport out = clc(sample, config);
  DrcReport p = pdc(sample, config);
  out.pdc = p.pdc;
  out.pdc_violations = std::move(p.pdc_violations);
  spacing(sample, config, true, out);
  spacing(sample, config, false, out);
  return out;
}

DrcSummary evaluate(const std::vector<LayoutSample>& samples, const DrcConfig& config) {
  if (samples.empty()) throw ConfigError("drc evaluate: empty sample list");
  DrcSummary s;
  s.samples.reserve(samples.size());
  for (const auto& sample : samples) {
    s.samples.push_back(check(sample, config));
    s.clc += s.samples.back().clc;
    s.pdc += s.samples.back().pdc;
    s.hsc += s.samples.back().hsc;
    s.vsc += s.samples.back().vsc;
  }
  const double n = static_cast<double>(samples.size());
  s.clc /= n;
  s.pdc /= n;
  s.hsc /= n;
  s.vsc /= n;
  return s;
}

// --- files -----------------------------------------------------------------

LayoutSample layout_from_json_line(const std::string& line) {
  LayoutSample out;
  try {
    const json j = json::parse(line);
    for (const auto& r : j.at("rects")) {
      out.rects.push_back(Rect{r.at("layer").get<int>(), r.at("x").get<std::int64_t>(),
                               r.at("y").get<std::int64_t>(), r.at("w").get<std::int64_t>(),
                               r.at("h").get<std::int64_t>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("layout: ") + e.what());
  }
  validate_layout(out);
  return out;
}

std::string layout_to_json_line(const LayoutSample& sample) {
  json rects = json::array();
  for (const Rect& r : sample.rects) {
    rects.push_back({{"layer", r.layer}, {"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}});
  }
  return json{{"rects", rects}}.dump();
}

std::vector<LayoutSample> read_layouts(std::istream& in) {
  std::vector<LayoutSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(layout_from_json_line(line));
    } catch (const Error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_layouts(std::ostream& out, const std::vector<LayoutSample>& layouts) {
  for (const auto& l : layouts) out << layout_to_json_line(l) << '\n';
}

std::vector<LayoutSample> load_layouts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_layouts(in);
}

void save_layouts(const std::string& path, const std::vector<LayoutSample>& layouts) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  write_layouts(out, layouts);
}

void write_report_json(std::ostream& out, const DrcSummary& summary) {
  json samples = json::array();
  for (const auto& r : summary.samples) {
    json clc_v = json::array();
    for (const auto& v : r.clc_violations) clc_v.push_back({{"i", v.i}, {"j", v.j}, {"area", v.area}});
    json hsc_v = json::array();
    for (const auto& v : r.hsc_violations) hsc_v.push_back({{"i", v.i}, {"j", v.j}, {"dx", v.separation}});
    json vsc_v = json::array();
    for (const auto& v : r.vsc_violations) vsc_v.push_back({{"i", v.i}, {"j", v.j}, {"dy", v.separation}});
    samples.push_back({{"clc", r.clc},
                       {"pdc", r.pdc},
                       {"hsc", r.hsc},
                       {"vsc", r.vsc},
                       {"overlap_area", r.overlap_area},
                       {"conductor_area", r.conductor_area},
                       {"devices", r.devices},
                       {"clc_violations", clc_v},
                       {"pdc_violations", r.pdc_violations},
                       {"hsc_violations", hsc_v},
                       {"vsc_violations", vsc_v}});
  }
  const json j{{"mean", {{"clc", summary.clc}, {"pdc", summary.pdc}, {"hsc", summary.hsc}, {"vsc", summary.vsc}}},
               {"count", summary.samples.size()},
               {"samples", samples}};
  out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const DrcSummary& summary) {
  out << "sample,CLC,PDC,HSC,VSC\n" << std::setprecision(10);
  for (std::size_t i = 0; i < summary.samples.size(); ++i) {
    const auto& r = summary.samples[i];
    out << i << ',' << r.clc << ',' << r.pdc << ',' << r.hsc << ',' << r.vsc << '\n';
  }
  out << "mean," << summary.clc << ',' << summary.pdc << ',' << summary.hsc << ',' << summary.vsc << '\n';
}

}  // namespace agdc
