#pragma once

// Single-file experiment container.
//
// Layout (all integers little-endian):
//
//   0   magic  "SPTS"
//   4   u16    version (currently 1)
//   6   u16    endianness marker 0x1234 (bytes 0x34 0x12 on disk)
//   8   u32    section count
//   12  32-byte table entries:
//         char[8]  name, NUL-padded
//         u64      payload offset from file start
//         u64      payload length in bytes
//         u32      CRC-32 of the payload
//         u32      reserved (zero)
//   ...  payloads, in table order
//
// Known section names: PARAMS, STACKED, CBCSC, BANKS, CONFIG, TRACE,
// REPORT. Unknown sections are preserved verbatim on load/save so future
// writers can extend the file without breaking old readers.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spartus {

// Standard CRC-32 (reflected, polynomial 0xEDB88320).
inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

inline std::uint32_t crc32(const std::vector<std::uint8_t>& data) {
  return crc32(data.data(), data.size());
}

// Little-endian byte stream helpers.
class ByteWriter {
 public:
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) { append(v, 2); }
  void u32(std::uint32_t v) { append(v, 4); }
  void u64(std::uint64_t v) { append(v, 8); }
  void i8(std::int8_t v) { bytes.push_back(static_cast<std::uint8_t>(v)); }
  void i16(std::int16_t v) { append(static_cast<std::uint16_t>(v), 2); }
  void i32(std::int32_t v) { append(static_cast<std::uint32_t>(v), 4); }
  void i64(std::int64_t v) { append(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }

 private:
  void append(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return bytes_.at(pos_++); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(read(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }
  std::uint64_t u64() { return read(8); }
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void raw(void* p, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::out_of_range("ByteReader: truncated data");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t read(int n) {
    if (pos_ + n > bytes_.size()) throw std::out_of_range("ByteReader: truncated data");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

class Container {
 public:
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::uint16_t kEndianMarker = 0x1234;

  struct Section {
    std::string name;
    std::vector<std::uint8_t> payload;
  };

  bool has(const std::string& name) const { return find(name) != nullptr; }

  const std::vector<std::uint8_t>& get(const std::string& name) const {
    const Section* s = find(name);
    if (!s)
      throw std::runtime_error("container: missing required section " + name);
    return s->payload;
  }

  // Insert or replace; replacing rewrites the payload in place so repeated
  // identical stage runs produce byte-identical files.
  void put(const std::string& name, std::vector<std::uint8_t> payload) {
    if (name.empty() || name.size() > 8)
      throw std::invalid_argument("container: section name must be 1..8 bytes");
    for (auto& s : sections_) {
      if (s.name == name) {
        s.payload = std::move(payload);
        return;
      }
    }
    sections_.push_back({name, std::move(payload)});
  }

  void remove(const std::string& name) {
    std::erase_if(sections_, [&](const Section& s) { return s.name == name; });
  }

  const std::vector<Section>& sections() const { return sections_; }

  void save(const std::string& path) const {
    ByteWriter w;
    w.raw("SPTS", 4);
    w.u16(kVersion);
    w.u16(kEndianMarker);
    w.u32(static_cast<std::uint32_t>(sections_.size()));
    std::uint64_t offset = 12 + 32ull * sections_.size();
    for (const auto& s : sections_) {
      char name[8] = {};
      std::memcpy(name, s.name.data(), s.name.size());
      w.raw(name, 8);
      w.u64(offset);
      w.u64(s.payload.size());
      w.u32(crc32(s.payload));
      w.u32(0);
      offset += s.payload.size();
    }
    for (const auto& s : sections_) w.raw(s.payload.data(), s.payload.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("container: cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    if (!out) throw std::runtime_error("container: write failed: " + path);
  }

  static Container load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("container: cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "SPTS", 4) != 0)
      throw std::runtime_error("container: bad magic in " + path);
    ByteReader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    const std::uint16_t version = r.u16();
    if (version > kVersion)
      throw std::runtime_error("container: unsupported version");
    if (r.u16() != kEndianMarker)
      throw std::runtime_error("container: endianness marker mismatch");
    const std::uint32_t count = r.u32();

    Container c;
    struct Entry {
      std::string name;
      std::uint64_t offset, length;
      std::uint32_t crc;
    };
    std::vector<Entry> entries;
    std::uint64_t prev_end = 12 + 32ull * count;
    for (std::uint32_t i = 0; i < count; ++i) {
      char name[8];
      r.raw(name, 8);
      Entry e;
      e.name = std::string(name, strnlen(name, 8));
      e.offset = r.u64();
      e.length = r.u64();
      e.crc = r.u32();
      r.u32();
      if (e.offset < prev_end || e.offset + e.length > bytes.size())
        throw std::runtime_error("container: overlapping or truncated section " + e.name);
      prev_end = e.offset + e.length;
      entries.push_back(std::move(e));
    }
    for (const auto& e : entries) {
      std::vector<std::uint8_t> payload(bytes.begin() + static_cast<std::ptrdiff_t>(e.offset),
                                        bytes.begin() + static_cast<std::ptrdiff_t>(e.offset + e.length));
      if (crc32(payload) != e.crc)
        throw std::runtime_error("container: CRC mismatch in section " + e.name);
      c.sections_.push_back({e.name, std::move(payload)});
    }
    return c;
  }

 private:
  const Section* find(const std::string& name) const {
    for (const auto& s : sections_)
      if (s.name == name) return &s;
    return nullptr;
  }

  std::vector<Section> sections_;
};

}  // namespace spartus
