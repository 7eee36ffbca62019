#pragma once

#include "pic/error.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>
#include <type_traits>

namespace pic::le {

template <typename T> void put(std::string &out, T value)
{
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.append(reinterpret_cast<char const *>(bytes), sizeof(T));
}

template <typename T> T get(std::string const &in, std::size_t &pos)
{
  if (pos + sizeof(T) > in.size()) {
    throw IoError("truncated data at byte " + std::to_string(pos));
  }
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

} // namespace pic::le
