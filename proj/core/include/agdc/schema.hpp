#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace agdc {

/// Shape of a hybrid discrete-continuous vocabulary.
///
/// Ids 0..K-1 are content classes; BOS, EOS and PAD follow at K, K+1, K+2.
/// Continuous coordinates are stored normalized to [-1, 1]; raw units only
/// appear at file boundaries.
class SchemaSpec {
 public:
  SchemaSpec(int num_classes, int cont_dim, double coord_min, double coord_max);

  /// Layout schema: K classes over (x, y, w, h) on the [0, 40000] grid.
  static SchemaSpec layout(int num_classes = 3, double coord_max = 40000.0);
  /// Vector-graphics schema: K commands over four (x, y) control points.
  static SchemaSpec svg(int num_commands = 3, double coord_max = 200.0);

  int num_classes() const { return num_classes_; }
  int cont_dim() const { return cont_dim_; }
  double coord_min() const { return coord_min_; }
  double coord_max() const { return coord_max_; }

  int bos() const { return num_classes_; }
  int eos() const { return num_classes_ + 1; }
  int pad() const { return num_classes_ + 2; }
  /// Size of the full id table, specials included.
  int vocab_size() const { return num_classes_ + 3; }

  bool is_special(int d) const { return d >= num_classes_ && d < vocab_size(); }
  bool is_content(int d) const { return d >= 0 && d < num_classes_; }

  bool operator==(const SchemaSpec&) const = default;

 private:
  int num_classes_;
  int cont_dim_;
  double coord_min_;
  double coord_max_;
};

struct AtomicUnit {
  int d = 0;
  std::vector<double> c;

  bool operator==(const AtomicUnit&) const = default;
};

/// Ordered units, specials included. `length()` counts content units only.
struct UnitSequence {
  std::vector<AtomicUnit> units;

  std::size_t length(const SchemaSpec& spec) const;
  /// Units with BOS/EOS/PAD removed, in order.
  std::vector<AtomicUnit> content(const SchemaSpec& spec) const;
  /// Discrete ids of all units.
  std::vector<int> ids() const;

  bool operator==(const UnitSequence&) const = default;
};

/// Special unit (zero continuous vector).
AtomicUnit special_unit(const SchemaSpec& spec, int id);

/// [BOS, content..., EOS].
UnitSequence make_sequence(const SchemaSpec& spec, const std::vector<AtomicUnit>& content,
                           bool with_eos = true);

std::vector<double> normalize(const std::vector<double>& raw, const SchemaSpec& spec);
std::vector<double> denormalize(const std::vector<double>& norm, const SchemaSpec& spec);

struct ValidationResult {
  bool ok = true;
  std::size_t position = 0;
  std::string message;

  explicit operator bool() const { return ok; }
};

ValidationResult validate_sequence(const UnitSequence& seq, const SchemaSpec& spec);

// JSONL: one {"units":[{"d":int,"c":[...]}]} object per line, raw coordinates.
// Special units are written with an all-zero `c` and are not normalized.

UnitSequence sequence_from_json_line(const std::string& line, const SchemaSpec& spec);
std::string sequence_to_json_line(const UnitSequence& seq, const SchemaSpec& spec);

std::vector<UnitSequence> read_sequences(std::istream& in, const SchemaSpec& spec);
void write_sequences(std::ostream& out, const std::vector<UnitSequence>& seqs,
                     const SchemaSpec& spec);
std::vector<UnitSequence> load_sequences(const std::string& path, const SchemaSpec& spec);
void save_sequences(const std::string& path, const std::vector<UnitSequence>& seqs,
                    const SchemaSpec& spec);

}  // namespace agdc
