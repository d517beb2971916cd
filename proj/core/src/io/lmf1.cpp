#include "lamod/io/lmf1.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "lamod/error.hpp"
#include "lamod/io/files.hpp"

namespace lamod::io {

Record Record::doubles(std::string name, std::vector<std::uint32_t> dims, std::vector<double> values) {
  Record r;
  r.name = std::move(name);
  r.dims = std::move(dims);
  r.dtype = DType::F64;
  r.f64 = std::move(values);
  if (r.f64.size() != r.element_count()) throw UsageError("record " + r.name + ": value count does not match dims");
  return r;
}

Record Record::bytes(std::string name, std::vector<std::uint32_t> dims, std::vector<std::uint8_t> values) {
  Record r;
  r.name = std::move(name);
  r.dims = std::move(dims);
  r.dtype = DType::U8;
  r.u8 = std::move(values);
  if (r.u8.size() != r.element_count()) throw UsageError("record " + r.name + ": value count does not match dims");
  return r;
}

Record Record::text(std::string name, std::string_view s) {
  return bytes(std::move(name), {static_cast<std::uint32_t>(s.size())}, std::vector<std::uint8_t>(s.begin(), s.end()));
}

std::size_t Record::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string Record::as_text() const {
  if (dtype != DType::U8) throw FormatError("record " + name + " is not a byte record", 0);
  return std::string(u8.begin(), u8.end());
}

void Container::add(Record r) {
  if (contains(r.name)) throw UsageError("duplicate record name: " + r.name);
  records.push_back(std::move(r));
}

bool Container::contains(std::string_view name) const {
  for (const auto& r : records) {
    if (r.name == name) return true;
  }
  return false;
}

const Record& Container::get(std::string_view name) const {
  for (const auto& r : records) {
    if (r.name == name) return r;
  }
  throw FormatError("missing record '" + std::string(name) + "'", 0);
}

namespace {

constexpr char kMagic[4] = {'L', 'M', 'F', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int k = 0; k < n; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint64_t offset() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(le(1, what)); }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  double f64(const char* what) { return std::bit_cast<double>(le(8, what)); }
  std::span<const std::uint8_t> raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) {
      throw FormatError(std::string("truncated container: expected ") + std::to_string(n) + " byte(s) of " + what +
                            ", " + std::to_string(b_.size() - pos_) + " available",
                        pos_);
    }
  }
  std::uint64_t le(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(b_[pos_ + static_cast<std::size_t>(k)]) << (8 * k);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const Container& c) {
  Writer w;
  w.raw(kMagic, 4);
  if (c.records.size() > std::numeric_limits<std::uint32_t>::max()) throw UsageError("too many records");
  w.u32(static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    if (r.name.size() > std::numeric_limits<std::uint16_t>::max()) throw UsageError("record name too long: " + r.name);
    if (r.dims.size() > std::numeric_limits<std::uint8_t>::max()) throw UsageError("record rank too large: " + r.name);
    const std::size_t n = r.element_count();
    if ((r.dtype == DType::F64 ? r.f64.size() : r.u8.size()) != n) {
      throw UsageError("record " + r.name + ": payload size does not match dims");
    }
    w.u16(static_cast<std::uint16_t>(r.name.size()));
    w.raw(r.name.data(), r.name.size());
    w.u8(static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) w.u32(d);
    w.u8(static_cast<std::uint8_t>(r.dtype));
    if (r.dtype == DType::F64) {
      for (double v : r.f64) w.f64(v);
    } else {
      w.raw(r.u8.data(), r.u8.size());
    }
  }
  return w.take();
}

Container decode(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes);
  const auto magic = rd.raw(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad magic (not an LMF1 container)", 0);
  const std::uint32_t count = rd.u32("record count");
  Container c;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint64_t start = rd.offset();
    Record r;
    const std::uint16_t len = rd.u16("name length");
    const auto name = rd.raw(len, "record name");
    r.name.assign(name.begin(), name.end());
    const std::uint8_t rank = rd.u8("rank");
    const std::uint64_t dims_at = rd.offset();
    std::uint64_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      r.dims.push_back(rd.u32("dimension"));
      n *= r.dims.back();
      if (n > bytes.size()) throw FormatError("record '" + r.name + "': dimensions exceed the container size", dims_at);
    }
    const std::uint64_t dtype_at = rd.offset();
    const std::uint8_t dt = rd.u8("dtype");
    if (dt > 1) throw FormatError("record '" + r.name + "': unknown dtype " + std::to_string(dt), dtype_at);
    r.dtype = static_cast<DType>(dt);
    if (r.dtype == DType::F64) {
      if ((bytes.size() - rd.offset()) / 8 < n) {
        throw FormatError("truncated container: record '" + r.name + "' needs " + std::to_string(n * 8) +
                              " payload bytes",
                          rd.offset());
      }
      r.f64.resize(n);
      for (auto& v : r.f64) v = rd.f64("payload");
    } else {
      const auto p = rd.raw(n, "payload");
      r.u8.assign(p.begin(), p.end());
    }
    if (c.contains(r.name)) throw FormatError("duplicate record name '" + r.name + "'", start);
    c.records.push_back(std::move(r));
  }
  if (!rd.done()) throw FormatError("trailing bytes after the last record", rd.offset());
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) { write_atomic(path, encode(c)); }

Container read_container(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return decode(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace lamod::io
