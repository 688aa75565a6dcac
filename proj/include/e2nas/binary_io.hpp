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

// Versioned binary container shared by agent checkpoints and replay-buffer
// snapshots. Layout (all integers and floats little-endian):
//
//   "E2NASBIN"  u32 format_version  u32 section_count
//   per section:
//     u32 name_len, name bytes
//     u32 header_len, header bytes (JSON object)
//     u64 value_count, value_count x f64

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "e2nas/errors.hpp"

namespace e2nas {

inline constexpr std::uint32_t kContainerVersion = 1;

struct Section {
  std::string name;
  nlohmann::json header = nlohmann::json::object();
  std::vector<double> data;
};

struct Container {
  std::uint32_t version = kContainerVersion;
  std::vector<Section> sections;

  const Section& at(const std::string& name) const {
    for (const auto& s : sections) {
      if (s.name == name) return s;
    }
    throw FormatError("missing section '" + name + "'");
  }
  bool contains(const std::string& name) const {
    for (const auto& s : sections) {
      if (s.name == name) return true;
    }
    return false;
  }
};

namespace detail {

inline constexpr char kMagic[8] = {'E', '2', 'N', 'A', 'S', 'B', 'I', 'N'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bits.begin(), bits.end());
  }
  out.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& buf) : buf_(buf) {}

  template <typename T>
  T get() {
    std::array<unsigned char, sizeof(T)> bits;
    need(sizeof(T));
    std::memcpy(bits.data(), buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bits.begin(), bits.end());
    }
    return std::bit_cast<T>(bits);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError("container is truncated");
  }
  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_container(const Container& c) {
  std::string out(detail::kMagic, sizeof detail::kMagic);
  detail::put_le<std::uint32_t>(out, c.version);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.sections.size()));
  for (const auto& s : c.sections) {
    const std::string header = s.header.dump();
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
    out += s.name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    detail::put_le<std::uint64_t>(out, s.data.size());
    for (double v : s.data) detail::put_le<double>(out, v);
  }
  return out;
}

inline Container decode_container(const std::string& bytes) {
  detail::ByteReader in(bytes);
  if (in.bytes(sizeof detail::kMagic) != std::string(detail::kMagic, sizeof detail::kMagic)) {
    throw FormatError("bad magic");
  }
  Container c;
  c.version = in.get<std::uint32_t>();
  if (c.version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(c.version));
  }
  const auto n_sections = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    Section s;
    s.name = in.bytes(in.get<std::uint32_t>());
    const std::string header = in.bytes(in.get<std::uint32_t>());
    try {
      s.header = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("section '" + s.name + "' has a malformed header: " + e.what());
    }
    const auto count = in.get<std::uint64_t>();
    if (count > bytes.size() / sizeof(double)) throw FormatError("container is truncated");
    s.data.resize(count);
    for (auto& v : s.data) v = in.get<double>();
    c.sections.push_back(std::move(s));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after last section");
  return c;
}

// Written to a sibling temp file and renamed into place.
inline void write_container(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = encode_container(c);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline Container read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace e2nas
