#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "mvri/rng.hpp"

using mvri::Philox4x32;
using mvri::PathStream;
using mvri::StreamId;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) ==
        C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          {0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          {0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams depend only on (seed, path, stream)") {
  PathStream a(42, 7, StreamId::Brownian), b(42, 7, StreamId::Brownian);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());
  PathStream c(42, 8, StreamId::Brownian), d(42, 7, StreamId::Claims), e(43, 7, StreamId::Brownian);
  PathStream ref(42, 7, StreamId::Brownian);
  const auto first = ref.next_u32();
  CHECK(c.next_u32() != first);
  CHECK(d.next_u32() != first);
  CHECK(e.next_u32() != first);
}

TEST_CASE("uniform draws are in the open unit interval with the right moments") {
  PathStream s(1, 0, StreamId::Auxiliary);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sum2 / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal and exponential variates") {
  PathStream s(5, 3, StreamId::Brownian);
  const int n = 100000;
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n, m2 /= n, m4 /= n;
  CHECK(std::abs(m1) < 3.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m4 - 3.0) < 0.15);

  PathStream e(5, 4, StreamId::Claims);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += e.exponential(2.0);
  CHECK(std::abs(sum / n - 0.5) < 3.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("distinct paths give distinct leading words") {
  std::set<std::uint32_t> seen;
  for (std::uint64_t p = 0; p < 5000; ++p) seen.insert(PathStream(42, p, StreamId::Claims).next_u32());
  CHECK(seen.size() > 4990);
}
