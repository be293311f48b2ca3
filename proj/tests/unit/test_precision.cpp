#include <doctest.h>

#include <cmath>
#include <random>

#include "agdc/error.hpp"
#include "agdc/precision.hpp"

using namespace agdc;

TEST_CASE("precision bits") {
  CHECK(precision_bits(40000.0, 200.0) == doctest::Approx(7.6439).epsilon(1e-4 / 7.6439));
  CHECK(precision_bits(40000.0, 1.0) == doctest::Approx(15.2877).epsilon(1e-4 / 15.2877));
  CHECK(precision_bits(40000.0, 200.0) == doctest::Approx(std::log(200.0) / std::log(2.0)).epsilon(1e-14));
  CHECK(precision_bits(1024.0, 1.0) == 10.0);
  CHECK(precision_bits(5.0, 5.0) == 0.0);
  double prev = precision_bits(40000.0, 0.5);
  for (double dx = 1.0; dx <= 40000.0; dx *= 1.7) {
    const double b = precision_bits(40000.0, dx);
    CHECK(b < prev);
    prev = b;
  }
  CHECK_THROWS_AS(precision_bits(40000.0, 0.0), DomainError);
  CHECK_THROWS_AS(precision_bits(40000.0, -1.0), DomainError);
  CHECK_THROWS_AS(precision_bits(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(precision_bits(10.0, 20.0), DomainError);
}

TEST_CASE("required vocabulary") {
  CHECK(required_vocab(10.0) == 1024);
  CHECK(required_vocab(0.0) == 1);
  CHECK(required_vocab(precision_bits(40000.0, 1.0)) == 40000);
  CHECK(required_vocab(precision_bits(40000.0, 200.0)) == 200);
  CHECK(required_vocab(15.2877) == 40000);
  CHECK(required_vocab(7.6439) == static_cast<std::uint64_t>(std::ceil(std::exp2(7.6439))));
  CHECK(required_vocab(7.6439) == 201);
  CHECK(required_vocab(1.5) == 3);
  CHECK_THROWS_AS(required_vocab(-0.5), DomainError);
  CHECK_THROWS_AS(required_vocab(64.0), DomainError);
}

TEST_CASE("quantization levels") {
  CHECK(quantization_levels(1) == std::vector<std::int64_t>{0, 20000, 40000});
  const auto l7 = quantization_levels(7);
  REQUIRE(l7.size() == 129);
  for (std::size_t k = 0; k < l7.size(); ++k) {
    CHECK(l7[k] == static_cast<std::int64_t>(std::floor(static_cast<double>(k) * 40000.0 / 128.0 + 0.5)));
  }
  CHECK(l7[1] == 313);
  CHECK_THROWS_AS(quantization_levels(0), ConfigError);
  CHECK_THROWS_AS(quantization_levels(31), ConfigError);
}

TEST_CASE("snap picks the nearest level with ties going up") {
  const std::vector<std::int64_t> levels{0, 10, 20};
  CHECK(snap(4, levels) == 0);
  CHECK(snap(5, levels) == 10);
  CHECK(snap(6, levels) == 10);
  CHECK(snap(25, levels) == 20);
  CHECK(snap(-3, levels) == 0);
}

TEST_CASE("quantization error is at most half a step") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> v(0, 40000);
  for (int bits : {3, 7, 12}) {
    const auto levels = quantization_levels(bits);
    const double half = 40000.0 / std::exp2(bits) / 2.0;
    for (int i = 0; i < 5000; ++i) {
      const std::int64_t x = v(rng);
      CHECK(static_cast<double>(std::abs(snap(x, levels) - x)) <= half + 0.5);
    }
  }
}

TEST_CASE("quantize keeps rects valid and is idempotent") {
  std::mt19937_64 rng(5);
  LayoutSample s;
  std::uniform_int_distribution<std::int64_t> pos(0, 39000), size(1, 1000);
  for (int i = 0; i < 300; ++i) s.rects.push_back(Rect{kDeviceLayer, pos(rng), pos(rng), size(rng), size(rng)});
  s.rects.push_back(Rect{kPowerLayer, 39990, 39990, 10, 10});
  for (int bits : {1, 4, 7, 10}) {
    const LayoutSample q = quantize(s, bits);
    CHECK_NOTHROW(validate_layout(q));
    CHECK(quantize(q, bits) == q);
    const auto levels = quantization_levels(bits);
    for (const Rect& r : q.rects) CHECK(std::binary_search(levels.begin(), levels.end(), r.x));
  }
}

TEST_CASE("fine levels leave integer layouts unchanged") {
  const LayoutSample s{{Rect{kPowerLayer, 3, 17, 1001, 999}, Rect{kDeviceLayer, 39999, 0, 1, 40000}}};
  CHECK(quantize(s, 16) == s);
  CHECK(quantize(LayoutSample{{Rect{kPowerLayer, 3, 1, 5, 2}}}, 6, 64) == LayoutSample{{Rect{kPowerLayer, 3, 1, 5, 2}}});
}

TEST_CASE("coarse quantization can create spacing violations") {
  DrcConfig c;
  c.device_threshold = 0;
  const LayoutSample s{{Rect{kDeviceLayer, 200, 0, 100, 100}, Rect{kDeviceLayer, 1400, 0, 100, 100}}};
  CHECK(hsc(s, c).hsc == 0.0);
  const LayoutSample q = quantize(s, 7);
  CHECK(q.rects[0].x == 313);
  CHECK(q.rects[1].x == 1250);
  CHECK(q.rects[0].w == 313);
  CHECK(hsc(q, c).hsc == 1.0);
}
