#include "agdc/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "agdc/error.hpp"

namespace agdc {

namespace {

constexpr double kUnitTolerance = 1e-9;
constexpr double kClampTolerance = 1e-6;

}  // namespace

SchemaSpec::SchemaSpec(int num_classes, int cont_dim, double coord_min, double coord_max)
    : num_classes_(num_classes), cont_dim_(cont_dim), coord_min_(coord_min), coord_max_(coord_max) {
  if (num_classes < 1) throw ConfigError("schema: num_classes must be >= 1");
  if (cont_dim < 1) throw ConfigError("schema: cont_dim must be >= 1");
  if (!(coord_min < coord_max)) throw ConfigError("schema: coord_min must be < coord_max");
}

SchemaSpec SchemaSpec::layout(int num_classes, double coord_max) {
  return SchemaSpec(num_classes, 4, 0.0, coord_max);
}

SchemaSpec SchemaSpec::svg(int num_commands, double coord_max) {
  return SchemaSpec(num_commands, 8, 0.0, coord_max);
}

std::size_t UnitSequence::length(const SchemaSpec& spec) const {
  std::size_t n = 0;
  for (const auto& u : units) {
    if (spec.is_content(u.d)) ++n;
  }
  return n;
}

std::vector<AtomicUnit> UnitSequence::content(const SchemaSpec& spec) const {
  std::vector<AtomicUnit> out;
  for (const auto& u : units) {
    if (spec.is_content(u.d)) out.push_back(u);
  }
  return out;
}

std::vector<int> UnitSequence::ids() const {
  std::vector<int> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(u.d);
  return out;
}

AtomicUnit special_unit(const SchemaSpec& spec, int id) {
  return AtomicUnit{id, std::vector<double>(static_cast<std::size_t>(spec.cont_dim()), 0.0)};
}

UnitSequence make_sequence(const SchemaSpec& spec, const std::vector<AtomicUnit>& content,
                           bool with_eos) {
  UnitSequence seq;
  seq.units.reserve(content.size() + 2);
  seq.units.push_back(special_unit(spec, spec.bos()));
  for (const auto& u : content) seq.units.push_back(u);
  if (with_eos) seq.units.push_back(special_unit(spec, spec.eos()));
  return seq;
}

std::vector<double> normalize(const std::vector<double>& raw, const SchemaSpec& spec) {
  const double lo = spec.coord_min();
  const double span = spec.coord_max() - lo;
  std::vector<double> out(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    if (!(raw[j] >= lo && raw[j] <= spec.coord_max())) {
      std::ostringstream msg;
      msg << "normalize: raw value " << raw[j] << " at index " << j << " outside ["
          << lo << ", " << spec.coord_max() << "]";
      throw RangeError(msg.str());
    }
    out[j] = 2.0 * (raw[j] - lo) / span - 1.0;
  }
  return out;
}

std::vector<double> denormalize(const std::vector<double>& norm, const SchemaSpec& spec) {
  const double lo = spec.coord_min();
  const double span = spec.coord_max() - lo;
  std::vector<double> out(norm.size());
  for (std::size_t j = 0; j < norm.size(); ++j) {
    double v = norm[j];
    if (!(std::abs(v) <= 1.0 + kClampTolerance)) {
      std::ostringstream msg;
      msg << "denormalize: value " << v << " at index " << j << " outside [-1, 1]";
      throw RangeError(msg.str());
    }
    v = std::clamp(v, -1.0, 1.0);
    out[j] = std::clamp(lo + (v + 1.0) * 0.5 * span, lo, spec.coord_max());
  }
  return out;
}

ValidationResult validate_sequence(const UnitSequence& seq, const SchemaSpec& spec) {
  const auto fail = [](std::size_t pos, std::string msg) {
    return ValidationResult{false, pos, std::move(msg)};
  };
  bool seen_eos = false;
  for (std::size_t i = 0; i < seq.units.size(); ++i) {
    const auto& u = seq.units[i];
    if (u.d < 0 || u.d >= spec.vocab_size()) return fail(i, "unknown id");
    if (u.c.size() != static_cast<std::size_t>(spec.cont_dim())) {
      return fail(i, "continuous vector has wrong dimension");
    }
    if (u.d == spec.bos() && i != 0) return fail(i, "BOS not at position 0");
    if (seen_eos && u.d != spec.pad()) return fail(i, "unit after EOS");
    if (u.d == spec.eos()) seen_eos = true;
    if (spec.is_special(u.d)) {
      for (double v : u.c) {
        if (v != 0.0) return fail(i, "special unit with nonzero continuous vector");
      }
    } else {
      for (double v : u.c) {
        if (!std::isfinite(v) || std::abs(v) > 1.0 + kUnitTolerance) {
          return fail(i, "continuous value outside [-1, 1]");
        }
      }
    }
  }
  return {};
}

UnitSequence sequence_from_json_line(const std::string& line, const SchemaSpec& spec) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("sequence JSONL: ") + e.what());
  }
  if (!j.is_object() || !j.contains("units") || !j["units"].is_array()) {
    throw FormatError("sequence JSONL: expected object with \"units\" array");
  }
  UnitSequence seq;
  for (const auto& ju : j["units"]) {
    if (!ju.contains("d") || !ju.contains("c")) {
      throw FormatError("sequence JSONL: unit needs \"d\" and \"c\"");
    }
    AtomicUnit u;
    u.d = ju["d"].get<int>();
    auto raw = ju["c"].get<std::vector<double>>();
    if (raw.size() != static_cast<std::size_t>(spec.cont_dim())) {
      throw FormatError("sequence JSONL: unit has " + std::to_string(raw.size()) +
                        " coordinates, schema expects " + std::to_string(spec.cont_dim()));
    }
    if (spec.is_special(u.d)) {
      u.c.assign(raw.size(), 0.0);
    } else {
      u.c = normalize(raw, spec);
    }
    seq.units.push_back(std::move(u));
  }
  return seq;
}

namespace {

// Drops normalization round-off on integer-valued coordinates.
double tidy(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v)) ? r : v;
}

}  // namespace

std::string sequence_to_json_line(const UnitSequence& seq, const SchemaSpec& spec) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : seq.units) {
    nlohmann::json ju;
    ju["d"] = u.d;
    std::vector<double> raw(u.c.size(), 0.0);
    if (!spec.is_special(u.d)) raw = denormalize(u.c, spec);
    for (double& v : raw) v = tidy(v);
    ju["c"] = raw;
    units.push_back(std::move(ju));
  }
  nlohmann::json j;
  j["units"] = std::move(units);
  return j.dump();
}

std::vector<UnitSequence> read_sequences(std::istream& in, const SchemaSpec& spec) {
  std::vector<UnitSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sequence_from_json_line(line, spec));
    } catch (const Error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_sequences(std::ostream& out, const std::vector<UnitSequence>& seqs,
                     const SchemaSpec& spec) {
  for (const auto& s : seqs) out << sequence_to_json_line(s, spec) << '\n';
}

std::vector<UnitSequence> load_sequences(const std::string& path, const SchemaSpec& spec) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_sequences(in, spec);
}

void save_sequences(const std::string& path, const std::vector<UnitSequence>& seqs,
                    const SchemaSpec& spec) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  write_sequences(out, seqs, spec);
}

}  // namespace agdc
