#pragma once

// LMF1 array container.
//
//   "LMF1" | u32 record count | records
//   record: u16 name length | name | u8 rank | u32 dims[rank] | u8 dtype | payload
//
// All integers little-endian. dtype 0 is little-endian binary64, dtype 1 is
// u8. Payloads are row-major with prod(dims) elements.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lamod::io {

enum class DType : std::uint8_t { F64 = 0, U8 = 1 };

struct Record {
  std::string name;
  std::vector<std::uint32_t> dims;
  DType dtype = DType::F64;
  std::vector<double> f64;
  std::vector<std::uint8_t> u8;

  static Record doubles(std::string name, std::vector<std::uint32_t> dims, std::vector<double> values);
  static Record bytes(std::string name, std::vector<std::uint32_t> dims, std::vector<std::uint8_t> values);
  static Record text(std::string name, std::string_view s);

  std::size_t element_count() const;
  std::string as_text() const;
};

struct Container {
  std::vector<Record> records;

  void add(Record r);
  bool contains(std::string_view name) const;
  // Throws FormatError (offset 0) naming the missing record.
  const Record& get(std::string_view name) const;
};

std::vector<std::uint8_t> encode(const Container& c);
// Throws FormatError with the byte offset of the first malformed field.
Container decode(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

}  // namespace lamod::io
