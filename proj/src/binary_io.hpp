#ifndef LSTMVIZ_SRC_BINARY_IO_HPP
#define LSTMVIZ_SRC_BINARY_IO_HPP

// Little-endian scalar I/O shared by the model and dataset containers.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "lstmviz/format_error.hpp"

namespace lstmviz::detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) {
    throw FormatError(FormatError::Kind::truncated,
                      std::string("truncated container while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline void expect_magic(std::istream& in, const std::string& magic) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw FormatError(FormatError::Kind::bad_magic, "bad magic: expected \"" + magic + "\"");
  }
}

}  // namespace lstmviz::detail

#endif  // LSTMVIZ_SRC_BINARY_IO_HPP
