#include "vtw/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vtw/errors.hpp"

namespace vtw {

namespace {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

void write_bytes(std::ofstream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoFailure("checkpoint write failed");
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
  write_bytes(out, &value, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoFailure("cannot open " + path.string());
  }

  void read_bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) {
      throw TruncatedFile(offset_ + static_cast<std::uint64_t>(in_.gcount()),
                          "checkpoint truncated");
    }
    offset_ += size;
  }

  template <typename T>
  T read_pod() {
    T value;
    read_bytes(&value, sizeof(T));
    return value;
  }

  std::uint64_t offset() const { return offset_; }
  bool at_eof() { return in_.peek() == std::ifstream::traits_type::eof(); }

 private:
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

const Tensor* TensorTable::find(std::string_view name) const {
  for (const Tensor& t : entries) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const Tensor& TensorTable::require(std::string_view name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw ShapeMismatch("checkpoint missing tensor '" + std::string(name) + "'");
  return *t;
}

Tensor& TensorTable::add(std::string name, std::vector<std::uint32_t> shape) {
  Tensor tensor;
  tensor.name = std::move(name);
  tensor.shape = std::move(shape);
  tensor.data.assign(tensor.element_count(), 0.0);
  entries.push_back(std::move(tensor));
  return entries.back();
}

void write_checkpoint(const std::filesystem::path& path, const TensorTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  write_bytes(out, kCheckpointMagic, 4);
  write_pod<std::uint16_t>(out, kCheckpointVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(table.entries.size()));
  for (const Tensor& tensor : table.entries) {
    if (tensor.data.size() != tensor.element_count()) {
      throw ShapeMismatch("tensor '" + tensor.name + "' data does not match its shape");
    }
    write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(tensor.name.size()));
    write_bytes(out, tensor.name.data(), tensor.name.size());
    write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.shape.size()));
    for (std::uint32_t dim : tensor.shape) write_pod<std::uint32_t>(out, dim);
    for (double value : tensor.data) write_pod<float>(out, static_cast<float>(value));
  }
}

TensorTable read_checkpoint(const std::filesystem::path& path) {
  Reader reader(path);
  char magic[4];
  reader.read_bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw BadMagic("not a checkpoint file: " + path.string());
  }
  const auto version = reader.read_pod<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw BadFileVersion("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = reader.read_pod<std::uint32_t>();
  TensorTable table;
  table.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor tensor;
    const auto name_len = reader.read_pod<std::uint16_t>();
    tensor.name.resize(name_len);
    reader.read_bytes(tensor.name.data(), name_len);
    const auto rank = reader.read_pod<std::uint8_t>();
    tensor.shape.resize(rank);
    for (auto& dim : tensor.shape) dim = reader.read_pod<std::uint32_t>();
    tensor.data.resize(tensor.element_count());
    for (auto& value : tensor.data) value = reader.read_pod<float>();
    table.entries.push_back(std::move(tensor));
  }
  if (!reader.at_eof()) {
    throw CountMismatch("checkpoint has trailing bytes past the declared entries");
  }
  return table;
}

TensorTable ema_update(const TensorTable& target, const TensorTable& online, double decay) {
  if (target.entries.size() != online.entries.size()) {
    throw ShapeMismatch("parameter sets have different tensor counts");
  }
  TensorTable out = target;
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    Tensor& t = out.entries[i];
    const Tensor& o = online.entries[i];
    if (t.name != o.name || t.shape != o.shape) {
      throw ShapeMismatch("parameter sets disagree on tensor '" + t.name + "'");
    }
    for (std::size_t j = 0; j < t.data.size(); ++j) {
      t.data[j] = decay * t.data[j] + (1.0 - decay) * o.data[j];
    }
  }
  return out;
}

}  // namespace vtw
