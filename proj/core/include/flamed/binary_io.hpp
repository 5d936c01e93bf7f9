// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Little-endian encoding helpers shared by the dataset, frame-feature and
// checkpoint containers. Values are composed byte by byte, so files are
// identical regardless of host byte order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flamed::io {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  /// u32 length followed by the raw bytes.
  void str(std::string_view s);
  void append(const ByteWriter& other) { buf_.insert(buf_.end(), other.buf_.begin(), other.buf_.end()); }

  std::size_t size() const { return buf_.size(); }
  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Reads from an in-memory file image; every failure names the byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> data, std::string source = {})
      : data_(std::move(data)), source_(std::move(source)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32();
  double f64();
  std::string bytes(std::size_t n);
  std::string str();

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  /// Throws DataError("<source>: <what> at byte offset N").
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(std::size_t n);

  std::vector<std::uint8_t> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes atomically via a temporary sibling file.
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& data);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace flamed::io
