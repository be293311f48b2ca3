#include <doctest.h>

#include <random>
#include <sstream>

#include "agdc/error.hpp"
#include "agdc/schema.hpp"

using namespace agdc;

TEST_CASE("schema spec ids and invariants") {
  const SchemaSpec s = SchemaSpec::layout();
  CHECK(s.num_classes() == 3);
  CHECK(s.cont_dim() == 4);
  CHECK(s.bos() == 3);
  CHECK(s.eos() == 4);
  CHECK(s.pad() == 5);
  CHECK(s.vocab_size() == 6);
  CHECK(s.is_special(4));
  CHECK_FALSE(s.is_special(2));
  CHECK(SchemaSpec::svg().cont_dim() == 8);
  CHECK_THROWS_AS(SchemaSpec(0, 4, 0, 1), ConfigError);
  CHECK_THROWS_AS(SchemaSpec(3, 0, 0, 1), ConfigError);
  CHECK_THROWS_AS(SchemaSpec(3, 4, 1, 1), ConfigError);
}

TEST_CASE("normalize maps the raw range affinely onto [-1, 1]") {
  const SchemaSpec s(3, 1, 0.0, 40000.0);
  CHECK(normalize({0.0}, s)[0] == -1.0);
  CHECK(normalize({20000.0}, s)[0] == doctest::Approx(0.0));
  CHECK(normalize({30000.0}, s)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(denormalize({0.0}, s)[0] == doctest::Approx(20000.0));
  CHECK(denormalize({-1.0}, s)[0] == doctest::Approx(0.0));
  CHECK(denormalize({0.5}, s)[0] == doctest::Approx(30000.0).epsilon(1e-15));
}

TEST_CASE("normalize rejects out-of-range values naming the index") {
  const SchemaSpec s = SchemaSpec::layout();
  try {
    normalize({0.0, 10.0, 40001.0, 5.0}, s);
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
}

TEST_CASE("denormalize clamps tiny overshoot and rejects larger") {
  const SchemaSpec s = SchemaSpec::layout();
  CHECK(denormalize({1.0 + 5e-7}, s)[0] == 40000.0);
  CHECK(denormalize({-1.0 - 5e-7}, s)[0] == 0.0);
  CHECK_THROWS_AS(denormalize({1.0 + 1e-5}, s), RangeError);
}

TEST_CASE("denormalize inverts normalize to 1e-12 relative") {
  const SchemaSpec s(3, 1, -250.0, 40000.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-250.0, 40000.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    const double back = denormalize(normalize({x}, s), s)[0];
    worst = std::max(worst, std::abs(back - x) / std::max(1.0, std::abs(x)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("validate_sequence") {
  const SchemaSpec s = SchemaSpec::layout();
  const AtomicUnit unit{0, {0.1, -0.2, 0.3, 0.4}};
  CHECK(validate_sequence(make_sequence(s, {unit}), s).ok);

  UnitSequence after_eos{{special_unit(s, s.bos()), special_unit(s, s.eos()), unit}};
  auto r = validate_sequence(after_eos, s);
  CHECK_FALSE(r.ok);
  CHECK(r.position == 2);
  CHECK(r.message == "unit after EOS");

  UnitSequence unknown{{special_unit(s, s.bos()), AtomicUnit{s.num_classes() + 5, {0, 0, 0, 0}}}};
  r = validate_sequence(unknown, s);
  CHECK_FALSE(r.ok);
  CHECK(r.message == "unknown id");

  UnitSequence late_bos{{unit, special_unit(s, s.bos())}};
  CHECK_FALSE(validate_sequence(late_bos, s).ok);

  AtomicUnit noisy_eos = special_unit(s, s.eos());
  noisy_eos.c[0] = 0.5;
  CHECK_FALSE(validate_sequence(UnitSequence{{special_unit(s, s.bos()), noisy_eos}}, s).ok);

  CHECK_FALSE(validate_sequence(make_sequence(s, {AtomicUnit{0, {1.1, 0, 0, 0}}}), s).ok);
  CHECK(validate_sequence(make_sequence(s, {AtomicUnit{0, {1.0 + 1e-10, 0, 0, 0}}}), s).ok);

  UnitSequence padded = make_sequence(s, {unit});
  padded.units.push_back(special_unit(s, s.pad()));
  CHECK(validate_sequence(padded, s).ok);
  CHECK(padded.length(s) == 1);
}

TEST_CASE("sequence JSONL round trip keeps raw coordinates") {
  const SchemaSpec s = SchemaSpec::layout();
  const UnitSequence seq =
      make_sequence(s, {AtomicUnit{0, normalize({100, 200, 300, 400}, s)}, AtomicUnit{2, normalize({0, 40000, 1, 7}, s)}});
  const std::string line = sequence_to_json_line(seq, s);
  CHECK(line.find("[100.0,200.0,300.0,400.0]") != std::string::npos);
  const UnitSequence back = sequence_from_json_line(line, s);
  REQUIRE(back.units.size() == seq.units.size());
  for (std::size_t i = 0; i < seq.units.size(); ++i) {
    CHECK(back.units[i].d == seq.units[i].d);
    for (std::size_t j = 0; j < 4; ++j) CHECK(back.units[i].c[j] == doctest::Approx(seq.units[i].c[j]).epsilon(1e-12));
  }
  std::stringstream io;
  write_sequences(io, {seq, seq}, s);
  CHECK(read_sequences(io, s).size() == 2);
  CHECK_THROWS_AS(sequence_from_json_line("{\"units\":[{\"d\":0,\"c\":[1,2,3]}]}", s), Error);
  CHECK_THROWS_AS(sequence_from_json_line("not json", s), Error);
}
