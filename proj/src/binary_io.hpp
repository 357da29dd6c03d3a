#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>

#include "popdyn/error.hpp"

namespace popdyn::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; add byte swapping for this host");

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
void write_array(std::ostream& out, std::span<const T> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("unexpected end of file");
  return value;
}

template <class T>
void read_array(std::istream& in, std::span<T> values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size_bytes()));
  if (!in) throw Error("unexpected end of file");
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  char buf[16] = {};
  in.read(buf, static_cast<std::streamsize>(magic.size()));
  if (!in || std::string_view(buf, magic.size()) != magic) {
    throw Error("bad magic: expected " + std::string(magic));
  }
}

}  // namespace popdyn::detail
