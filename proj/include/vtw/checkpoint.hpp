#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vtw {

// Weight checkpoint container.
//
// File layout (little-endian):
//   magic "VTWT", version u16, entry count u32, then per entry:
//   name length u16, name bytes (UTF-8), rank u8, dims u32 each,
//   prod(dims) float32 values.
//
// Tensors are held in double in memory; the file stores float32, so a
// read/write round trip is byte-identical.

inline constexpr char kCheckpointMagic[4] = {'V', 'T', 'W', 'T'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<double> data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : shape) n *= d;
    return n;
  }
};

struct TensorTable {
  std::vector<Tensor> entries;

  const Tensor& require(std::string_view name) const;
  const Tensor* find(std::string_view name) const;
  Tensor& add(std::string name, std::vector<std::uint32_t> shape);
};

void write_checkpoint(const std::filesystem::path& path, const TensorTable& table);
TensorTable read_checkpoint(const std::filesystem::path& path);

// target' = decay * target + (1 - decay) * online, elementwise over every
// tensor. Throws ShapeMismatch when the tables disagree in names or shapes.
TensorTable ema_update(const TensorTable& target, const TensorTable& online,
                       double decay = 0.9995);

}  // namespace vtw
