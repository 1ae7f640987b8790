#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "pointvig/numerics/tensor.hpp"

// PVTN container.
//
// Single tensor (version 1), all integers little-endian:
//   "PVTN" | u8 version=1 | u32 rank | u64 extent[rank] | f32 data[prod(extent)]
//
// Archive (version 2), used for checkpoints and dataset caches:
//   "PVTN" | u8 version=2 | u32 header_len | header bytes (key=value lines)
//   | u32 entry_count | { u16 name_len | name | version-1 tensor record }*
namespace pointvig::pvtn {

inline constexpr std::array<char, 4> kMagic{'P', 'V', 'T', 'N'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::uint8_t kArchiveVersion = 2;

namespace detail {

template <class U>
void put_le(std::ostream& os, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  os.write(bytes.data(), bytes.size());
}

template <class U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes;
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  require(static_cast<std::size_t>(is.gcount()) == sizeof(U), ErrorKind::io, "truncated PVTN stream");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline std::uint8_t read_header(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  require(is.gcount() == 4 && magic == kMagic, ErrorKind::bad_magic, "expected 'PVTN'");
  return get_le<std::uint8_t>(is);
}

inline void write_body(std::ostream& os, const Shape& shape, std::span<const float> data) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (auto e : shape) put_le<std::uint64_t>(os, e);
  for (float v : data) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

inline Tensor<float> read_body(std::istream& is) {
  const auto rank = get_le<std::uint32_t>(is);
  require(rank <= 16, ErrorKind::parse, "implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& e : shape) e = static_cast<std::size_t>(get_le<std::uint64_t>(is));
  std::vector<float> data(shape_numel(shape));
  for (auto& v : data) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
  return Tensor<float>(std::move(shape), std::move(data));
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor<float>& t) {
  os.write(kMagic.data(), kMagic.size());
  detail::put_le<std::uint8_t>(os, kTensorVersion);
  detail::write_body(os, t.shape(), t.data());
}

inline Tensor<float> read_tensor(std::istream& is) {
  const auto version = detail::read_header(is);
  require(version == kTensorVersion, ErrorKind::parse,
          "expected tensor record version 1, got " + std::to_string(version));
  return detail::read_body(is);
}

struct Archive {
  std::string header;
  std::map<std::string, Tensor<float>> entries;
};

inline void write_archive(std::ostream& os, const Archive& archive) {
  os.write(kMagic.data(), kMagic.size());
  detail::put_le<std::uint8_t>(os, kArchiveVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(archive.header.size()));
  os.write(archive.header.data(), static_cast<std::streamsize>(archive.header.size()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(archive.entries.size()));
  for (const auto& [name, tensor] : archive.entries) {
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, tensor);
  }
}

inline Archive read_archive(std::istream& is) {
  const auto version = detail::read_header(is);
  require(version == kArchiveVersion, ErrorKind::parse,
          "expected archive version 2, got " + std::to_string(version));
  Archive archive;
  const auto header_len = detail::get_le<std::uint32_t>(is);
  archive.header.resize(header_len);
  is.read(archive.header.data(), header_len);
  require(static_cast<std::uint32_t>(is.gcount()) == header_len, ErrorKind::io, "truncated archive header");
  const auto count = detail::get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::get_le<std::uint16_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    require(static_cast<std::uint16_t>(is.gcount()) == len, ErrorKind::io, "truncated entry name");
    archive.entries.emplace(std::move(name), read_tensor(is));
  }
  return archive;
}

inline void save_tensor(const std::string& path, const Tensor<float>& t) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open '" + path + "' for writing");
  write_tensor(os, t);
}

inline Tensor<float> load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open '" + path + "'");
  return read_tensor(is);
}

inline void save_archive(const std::string& path, const Archive& archive) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open '" + path + "' for writing");
  write_archive(os, archive);
}

inline Archive load_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open '" + path + "'");
  return read_archive(is);
}

}  // namespace pointvig::pvtn
