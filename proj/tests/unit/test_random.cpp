// Copyright 2026 The e2nas Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "e2nas/random.hpp"

namespace e2nas {
namespace {

TEST(HashWords, IsAPureFunctionOfItsArguments) {
  EXPECT_EQ(hash_words(7, {1, 2, 3}), hash_words(7, {1, 2, 3}));
  EXPECT_NE(hash_words(7, {1, 2, 3}), hash_words(7, {1, 3, 2}));
  EXPECT_NE(hash_words(7, {1, 2, 3}), hash_words(8, {1, 2, 3}));
  EXPECT_NE(hash_words(7, {}), hash_words(7, {0}));
}

TEST(HashWords, UnitValuesAreSpreadOverTheInterval) {
  std::vector<int> bins(10, 0);
  for (std::uint64_t i = 0; i < 100000; ++i) {
    const double u = unit_hash(3, {i});
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++bins[static_cast<int>(u * 10)];
  }
  for (int b : bins) EXPECT_NEAR(b, 10000, 400);
}

TEST(Fnv1a, MatchesPublishedVectors) {
  EXPECT_EQ(fnv1a64("", 0), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a", 1), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar", 6), 0x85944171f73967e8ULL);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, StateRoundTripResumesTheStream) {
  Rng a(5);
  for (int i = 0; i < 17; ++i) a.normal();
  Rng b = Rng::from_state(a.state());
  EXPECT_EQ(a, b);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, UniformBelowStaysInRangeAndCoversIt) {
  Rng r(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.uniform_below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalHasUnitMoments) {
  Rng r(9);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.015);
}

}  // namespace
}  // namespace e2nas
