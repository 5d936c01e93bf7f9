// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace flamed {

/// Number of code streams: prosody, two content levels, three acoustic levels.
inline constexpr std::size_t kCodeLevels = 6;

/// 6 x L grid of discrete codes stored level-major (level, then frame).
class CodeGrid {
 public:
  CodeGrid() = default;
  explicit CodeGrid(std::size_t frames, std::int32_t fill = 0)
      : frames_(frames), data_(kCodeLevels * frames, fill) {}

  std::size_t frames() const { return frames_; }
  std::int32_t& at(std::size_t level, std::size_t frame) { return data_[level * frames_ + frame]; }
  std::int32_t at(std::size_t level, std::size_t frame) const { return data_[level * frames_ + frame]; }

  std::array<std::int32_t, kCodeLevels> column(std::size_t frame) const {
    std::array<std::int32_t, kCodeLevels> c{};
    for (std::size_t l = 0; l < kCodeLevels; ++l) c[l] = at(l, frame);
    return c;
  }
  void set_column(std::size_t frame, const std::array<std::int32_t, kCodeLevels>& c) {
    for (std::size_t l = 0; l < kCodeLevels; ++l) at(l, frame) = c[l];
  }
  std::vector<std::size_t> level(std::size_t l) const {
    return {data_.begin() + static_cast<std::ptrdiff_t>(l * frames_),
            data_.begin() + static_cast<std::ptrdiff_t>((l + 1) * frames_)};
  }
  /// Copies frames [begin, begin+count).
  CodeGrid slice(std::size_t begin, std::size_t count) const;

  /// True when every entry lies in [0, vocab).
  bool valid(std::int32_t vocab) const;

  const std::vector<std::int32_t>& raw() const { return data_; }
  std::vector<std::int32_t>& raw() { return data_; }

  bool operator==(const CodeGrid&) const = default;

 private:
  std::size_t frames_ = 0;
  std::vector<std::int32_t> data_;
};

inline CodeGrid CodeGrid::slice(std::size_t begin, std::size_t count) const {
  CodeGrid out(count);
  for (std::size_t l = 0; l < kCodeLevels; ++l)
    for (std::size_t f = 0; f < count; ++f) out.at(l, f) = at(l, begin + f);
  return out;
}

inline bool CodeGrid::valid(std::int32_t vocab) const {
  for (auto c : data_)
    if (c < 0 || c >= vocab) return false;
  return true;
}

}  // namespace flamed
