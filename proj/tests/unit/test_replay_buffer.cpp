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

#include <fstream>

#include "test_util.hpp"

namespace e2nas {
namespace {

// Transitions tagged by their reward so ring order is easy to read.
Transition tagged(double tag, int psr_dim = 2) {
  Transition t;
  t.state = SearchState{1, 5.0 + tag, 40.0 - tag, std::vector<double>(static_cast<std::size_t>(psr_dim), tag / 100)};
  t.action.fill(tag / 1000);
  t.reward = tag;
  t.next_state = SearchState{2, 6.0, 30.0, std::vector<double>(static_cast<std::size_t>(psr_dim), -0.5)};
  t.done = static_cast<int>(tag) % 2 == 0;
  return t;
}

TEST(ReplayBuffer, PushGrowsUntilCapacity) {
  ReplayBuffer b(1000);
  EXPECT_EQ(b.len(), 0u);
  b.push(tagged(1));
  EXPECT_EQ(b.len(), 1u);
  for (int k = 2; k <= 700; ++k) b.push(tagged(k));
  EXPECT_EQ(b.len(), 700u);
  for (int k = 0; k < 100000; ++k) b.push(tagged(k));
  EXPECT_EQ(b.len(), 1000u);
}

TEST(ReplayBuffer, RingOverwritesTheOldest) {
  ReplayBuffer b(2);
  b.push(tagged(1));
  b.push(tagged(2));
  b.push(tagged(3));
  ASSERT_EQ(b.len(), 2u);
  std::vector<double> rewards;
  for (const auto& t : b.contents()) rewards.push_back(t.reward);
  std::sort(rewards.begin(), rewards.end());
  EXPECT_EQ(rewards, (std::vector<double>{2, 3}));
}

TEST(ReplayBuffer, SingleItemSample) {
  ReplayBuffer b(4);
  b.push(tagged(7));
  Rng rng(1);
  const auto s = b.sample(1, rng);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], tagged(7));
}

TEST(ReplayBuffer, SamplingIsUniform) {
  ReplayBuffer b(10);
  for (int k = 0; k < 10; ++k) b.push(tagged(k));
  Rng rng(2);
  std::vector<int> counts(10, 0);
  const int n = 1'000'000;
  for (int i = 0; i < n / 10; ++i) {
    for (const auto& t : b.sample(10, rng)) ++counts[static_cast<int>(t.reward)];
  }
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.1, 0.001);
}

TEST(ReplayBuffer, SameSeedSameBatches) {
  ReplayBuffer b(50);
  for (int k = 0; k < 50; ++k) b.push(tagged(k));
  Rng r1(3), r2(3);
  EXPECT_EQ(b.sample(20, r1), b.sample(20, r2));
}

TEST(ReplayBuffer, TooFewTransitionsIsInsufficientData) {
  ReplayBuffer b(10);
  b.push(tagged(1));
  Rng rng(4);
  EXPECT_THROW(b.sample(2, rng), InsufficientData);
  EXPECT_THROW(ReplayBuffer(0), InvalidArgument);
}

TEST(ReplayBuffer, SaveLoadRoundTrip) {
  testing::TempDir dir("replay");
  ReplayBuffer b(5);
  for (int k = 0; k < 8; ++k) b.push(tagged(k));
  b.save(dir / "buffer.ckpt");
  const ReplayBuffer loaded = ReplayBuffer::load(dir / "buffer.ckpt");
  EXPECT_EQ(loaded, b);
  EXPECT_EQ(loaded.cursor(), 3u);

  ReplayBuffer empty(3);
  empty.save(dir / "empty.ckpt");
  EXPECT_EQ(ReplayBuffer::load(dir / "empty.ckpt"), empty);
}

TEST(ReplayBuffer, TruncatedFileIsAFormatError) {
  testing::TempDir dir("replay_trunc");
  ReplayBuffer b(5);
  for (int k = 0; k < 4; ++k) b.push(tagged(k));
  b.save(dir / "buffer.ckpt");
  const auto size = std::filesystem::file_size(dir / "buffer.ckpt");
  for (auto cut : {size - 1, size / 2, std::uintmax_t{12}, std::uintmax_t{3}}) {
    std::filesystem::resize_file(dir / "buffer.ckpt", cut);
    EXPECT_THROW(ReplayBuffer::load(dir / "buffer.ckpt"), FormatError) << "cut at " << cut;
  }
}

TEST(BinaryContainer, EncodesLittleEndianWithMagicAndVersion) {
  Container c;
  c.sections.push_back(Section{"a", {{"k", 1}}, {1.0, -2.5}});
  c.sections.push_back(Section{"b", nlohmann::json::object(), {}});
  const std::string bytes = encode_container(c);
  EXPECT_EQ(bytes.substr(0, 8), "E2NASBIN");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);
  EXPECT_EQ(bytes[9], 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2u);
  const Container back = decode_container(bytes);
  ASSERT_EQ(back.sections.size(), 2u);
  EXPECT_EQ(back.at("a").data, (std::vector<double>{1.0, -2.5}));
  EXPECT_EQ(back.at("a").header["k"], 1);
  EXPECT_TRUE(back.contains("b"));
  EXPECT_FALSE(back.contains("c"));
}

TEST(BinaryContainer, RejectsCorruptInput) {
  Container c;
  c.sections.push_back(Section{"a", {}, {1.0}});
  std::string bytes = encode_container(c);
  EXPECT_THROW(decode_container(bytes + "x"), FormatError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_container(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(decode_container(bad_version), FormatError);
  EXPECT_THROW(read_container("/nonexistent/e2nas.ckpt"), IoError);
}

}  // namespace
}  // namespace e2nas
