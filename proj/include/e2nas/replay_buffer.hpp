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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "e2nas/binary_io.hpp"
#include "e2nas/errors.hpp"
#include "e2nas/mdp_env.hpp"
#include "e2nas/random.hpp"

namespace e2nas {

// Fixed-capacity ring of transitions; once full, each push overwrites the
// oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100'000) : capacity_(capacity) {
    if (capacity_ == 0) throw InvalidArgument("replay capacity must be positive");
    storage_.reserve(std::min<std::size_t>(capacity_, 4096));
  }

  void push(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  // n uniform draws with replacement.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const {
    if (n < 1) throw InvalidArgument("sample size must be >= 1");
    if (storage_.size() < n) {
      throw InsufficientData("replay buffer holds " + std::to_string(storage_.size()) +
                             " transitions, " + std::to_string(n) + " requested");
    }
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(storage_[rng.uniform_below(storage_.size())]);
    return out;
  }

  std::size_t len() const noexcept { return storage_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t cursor() const noexcept { return cursor_; }
  // Storage order, not insertion order, once the ring has wrapped.
  const std::vector<Transition>& contents() const noexcept { return storage_; }

  friend bool operator==(const ReplayBuffer&, const ReplayBuffer&) = default;

  Container to_container() const {
    const std::size_t psr = storage_.empty() ? 0 : storage_.front().state.psr.size();
    Section s;
    s.name = "replay";
    s.header = {{"capacity", capacity_}, {"cursor", cursor_}, {"size", storage_.size()},
                {"psr_dim", psr}};
    s.data.reserve(storage_.size() * record_width(psr));
    for (const auto& t : storage_) {
      if (t.state.psr.size() != psr || t.next_state.psr.size() != psr) {
        throw ShapeError("replay transitions disagree on psr dimension");
      }
      put_state(s.data, t.state);
      s.data.insert(s.data.end(), t.action.begin(), t.action.end());
      s.data.push_back(t.reward);
      put_state(s.data, t.next_state);
      s.data.push_back(t.done ? 1.0 : 0.0);
    }
    return Container{kContainerVersion, {std::move(s)}};
  }

  static ReplayBuffer from_container(const Container& c) {
    const Section& s = c.at("replay");
    std::size_t capacity = 0, cursor = 0, size = 0, psr = 0;
    try {
      capacity = s.header.at("capacity").get<std::size_t>();
      cursor = s.header.at("cursor").get<std::size_t>();
      size = s.header.at("size").get<std::size_t>();
      psr = s.header.at("psr_dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("replay header: ") + e.what());
    }
    if (capacity == 0 || size > capacity || cursor >= capacity ||
        (size < capacity && cursor != size % capacity)) {
      throw FormatError("replay header is inconsistent");
    }
    if (s.data.size() != size * record_width(psr)) throw FormatError("replay payload size mismatch");
    ReplayBuffer b(capacity);
    b.storage_.reserve(size);
    std::size_t at = 0;
    for (std::size_t i = 0; i < size; ++i) {
      Transition t;
      t.state = get_state(s.data, at, psr);
      for (auto& a : t.action) a = s.data[at++];
      t.reward = s.data[at++];
      t.next_state = get_state(s.data, at, psr);
      t.done = s.data[at++] != 0.0;
      b.storage_.push_back(std::move(t));
    }
    b.cursor_ = cursor;
    return b;
  }

  void save(const std::filesystem::path& path) const { write_container(path, to_container()); }
  static ReplayBuffer load(const std::filesystem::path& path) {
    return from_container(read_container(path));
  }

 private:
  static std::size_t record_width(std::size_t psr) { return 2 * (3 + psr) + kActionDim + 2; }

  static void put_state(std::vector<double>& out, const SearchState& s) {
    out.push_back(static_cast<double>(s.depth));
    out.push_back(s.is_score);
    out.push_back(s.fid_score);
    out.insert(out.end(), s.psr.begin(), s.psr.end());
  }
  static SearchState get_state(const std::vector<double>& in, std::size_t& at, std::size_t psr) {
    SearchState s;
    s.depth = static_cast<int>(in[at++]);
    s.is_score = in[at++];
    s.fid_score = in[at++];
    s.psr.assign(in.begin() + static_cast<std::ptrdiff_t>(at),
                 in.begin() + static_cast<std::ptrdiff_t>(at + psr));
    at += psr;
    return s;
  }

  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
};

}  // namespace e2nas
