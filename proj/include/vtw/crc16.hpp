#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace vtw {

// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
// Check value: crc16("123456789") == 0x29B1.

namespace detail {

constexpr std::array<std::uint16_t, 256> make_crc16_table() {
  std::array<std::uint16_t, 256> table{};
  for (int b = 0; b < 256; ++b) {
    std::uint16_t crc = static_cast<std::uint16_t>(b << 8);
    for (int i = 0; i < 8; ++i) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<std::uint16_t>(crc << 1);
    }
    table[static_cast<std::size_t>(b)] = crc;
  }
  return table;
}

inline constexpr std::array<std::uint16_t, 256> kCrc16Table = make_crc16_table();

}  // namespace detail

inline std::uint16_t crc16_update(std::uint16_t crc, std::span<const std::uint8_t> data) {
  for (std::uint8_t byte : data) {
    crc = static_cast<std::uint16_t>((crc << 8) ^
                                     detail::kCrc16Table[((crc >> 8) ^ byte) & 0xFF]);
  }
  return crc;
}

inline std::uint16_t crc16(std::span<const std::uint8_t> data) {
  return crc16_update(0xFFFF, data);
}

}  // namespace vtw
