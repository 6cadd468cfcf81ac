#include <catch2/catch_amalgamated.hpp>

#include "flame/ring.hpp"

using namespace flame;

static const RingParams kSmall = RingParams::checked(8, 4);
static const RingParams kFull = RingParams::checked(64, 64);

TEST_CASE("ring parameters are validated", "[ring]") {
  REQUIRE_NOTHROW(RingParams::checked(2, 1));
  REQUIRE_NOTHROW(RingParams::checked(64, 64));
  REQUIRE_THROWS_AS(RingParams::checked(1, 4), ConfigError);
  REQUIRE_THROWS_AS(RingParams::checked(8, 0), ConfigError);
  REQUIRE_THROWS_AS(RingParams::checked(100, 29), ConfigError);
}

TEST_CASE("addition wraps modulo 2^(l+s)", "[ring]") {
  REQUIRE(add(RingElement(4000, kSmall), RingElement(200, kSmall)).value == 104);
  REQUIRE(add(RingElement(2047, kSmall), RingElement(2049, kSmall)).value == 0);
  SeededRng rng = SeededRng::from_string("ring-add");
  for (int i = 0; i < 100; i++) {
    RingElement x = rng.sample_uniform(kSmall);
    REQUIRE(add(x, RingElement(0, kSmall)) == x);
  }
}

TEST_CASE("multiplication wraps modulo 2^(l+s)", "[ring]") {
  REQUIRE(mul(RingElement(100, kSmall), RingElement(50, kSmall)).value == 904);
  REQUIRE(mul(RingElement(u128{1} << 127, kFull), RingElement(2, kFull)).value == 0);
  SeededRng rng = SeededRng::from_string("ring-mul");
  for (int i = 0; i < 100; i++) {
    RingElement x = rng.sample_uniform(kFull);
    REQUIRE(mul(x, RingElement(1, kFull)) == x);
  }
}

TEST_CASE("mixed ring parameters are rejected", "[ring]") {
  REQUIRE_THROWS_AS(add(RingElement(1, kSmall), RingElement(1, kFull)), ConfigError);
  REQUIRE_THROWS_AS(mul(RingElement(1, kSmall), RingElement(1, kFull)), ConfigError);
}

TEST_CASE("add and mul are associative and commutative on a 6-bit ring", "[ring]") {
  const RingParams p = RingParams::checked(3, 3);
  for (u128 a = 0; a < 64; a++)
    for (u128 b = 0; b < 64; b++) {
      RingElement ra(a, p), rb(b, p);
      REQUIRE(add(ra, rb) == add(rb, ra));
      REQUIRE(mul(ra, rb) == mul(rb, ra));
      for (u128 c = 0; c < 64; c++) {
        RingElement rc(c, p);
        REQUIRE(add(add(ra, rb), rc) == add(ra, add(rb, rc)));
        REQUIRE(mul(mul(ra, rb), rc) == mul(ra, mul(rb, rc)));
      }
    }
}

TEST_CASE("signed interpretation reduces modulo 2^l first", "[ring]") {
  REQUIRE(to_signed_l(RingElement(255, kSmall)) == -1);
  REQUIRE(to_signed_l(RingElement(4095, kSmall)) == -1);
  REQUIRE(to_signed_l(RingElement(5, kSmall)) == 5);
}

TEST_CASE("signed encode/decode roundtrips exhaustively at l=8", "[ring]") {
  for (i128 x = -128; x < 128; x++) REQUIRE(to_signed_l(encode_signed(x, kSmall)) == x);
}

TEST_CASE("fixed-point roundtrip error stays below half a step", "[ring]") {
  FixedCodec codec{7};
  const double step = std::ldexp(1.0, -7);
  SeededRng rng = SeededRng::from_string("codec");
  for (int i = 0; i < 10000; i++) {
    double q = double(int64_t(rng.sample_bits(24))) / double(1 << 23) - 1.0;
    double back = codec.decode(codec.encode(q, kFull));
    REQUIRE(std::abs(back - q) <= step / 2 + 1e-12);
  }
}

TEST_CASE("ring element serialization is 16 bytes little-endian", "[ring]") {
  RingElement x((u128{0x0123456789abcdefull} << 64) | 0xfedcba9876543210ull,
                RingParams::checked(64, 64));
  uint8_t buf[16];
  store_le(x, buf);
  REQUIRE(buf[0] == 0x10);
  REQUIRE(buf[15] == 0x01);
  REQUIRE(load_le(buf, x.params) == x);
}

TEST_CASE("seeded rng is deterministic and forkable", "[ring]") {
  SeededRng a = SeededRng::from_string("vector");
  SeededRng b = SeededRng::from_string("vector");
  for (int i = 0; i < 64; i++) REQUIRE(a.next_u128() == b.next_u128());

  SeededRng c = SeededRng::from_string("vector").fork("child");
  SeededRng d = SeededRng::from_string("vector").fork("child");
  SeededRng e = SeededRng::from_string("vector").fork("other");
  u128 vc = c.next_u128();
  REQUIRE(vc == d.next_u128());
  REQUIRE(vc != e.next_u128());
}

TEST_CASE("seeded rng regression vector", "[ring]") {
  // First draw of the stream seeded from "flame-rng-regression". Frozen once;
  // a change here means every recorded tape in the wild is invalidated.
  SeededRng rng = SeededRng::from_string("flame-rng-regression");
  u128 v = rng.next_u128();
  REQUIRE(uint64_t(v >> 64) == UINT64_C(0x2cfc093f67aaa198));
  REQUIRE(uint64_t(v) == UINT64_C(0x77378fd48cf2db02));
}

TEST_CASE("uniform draws have the expected mean", "[ring]") {
  SeededRng rng = SeededRng::from_string("mean");
  double acc = 0;
  const double denom = std::ldexp(1.0, 128);
  for (int i = 0; i < 100000; i++) {
    u128 v = rng.sample_uniform(kFull).value;
    acc += (double(uint64_t(v >> 64)) * std::ldexp(1.0, 64) + double(uint64_t(v))) / denom;
  }
  REQUIRE(acc / 100000 == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("sample_bits stays inside its range", "[ring]") {
  SeededRng rng = SeededRng::from_string("bits");
  for (int i = 0; i < 1000; i++) {
    REQUIRE(rng.sample_bits(4) < 16);
    REQUIRE(rng.sample_bits(1) < 2);
  }
}
