#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "vtw/errors.hpp"
#include "vtw/fiducial.hpp"

namespace vtw::detail {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out_) throw IoFailure("write failed");
  }
  template <typename T>
  void pod(T value) {
    bytes(&value, sizeof(T));
  }
  void string32(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  void bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) {
      throw TruncatedFile(offset_ + static_cast<std::uint64_t>(in_.gcount()),
                          name_ + " truncated");
    }
    offset_ += size;
  }
  template <typename T>
  T pod() {
    T value;
    bytes(&value, sizeof(T));
    return value;
  }
  std::string string32() {
    const auto len = pod<std::uint32_t>();
    std::string s(len, '\0');
    bytes(s.data(), len);
    return s;
  }
  bool at_eof() { return in_.peek() == std::istream::traits_type::eof(); }
  std::uint64_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::string name_;
  std::uint64_t offset_ = 0;
};

inline constexpr std::uint8_t kVideoFlagFiducial = 0x01;
inline constexpr std::uint8_t kVideoFlagDecodedTs = 0x02;

inline void write_video_record(BinaryWriter& w, const VideoFrameRecord& video) {
  w.pod<std::uint64_t>(video.frame_index);
  std::uint8_t flags = 0;
  if (video.fiducial.has_value()) flags |= kVideoFlagFiducial;
  if (video.decoded_host_ts_us.has_value()) flags |= kVideoFlagDecodedTs;
  w.pod<std::uint8_t>(flags);
  if (video.fiducial.has_value()) w.bytes(video.fiducial->bytes.data(), kFiducialBytes);
  if (video.decoded_host_ts_us.has_value()) w.pod<std::uint64_t>(*video.decoded_host_ts_us);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(video.image_payload.size()));
  w.bytes(video.image_payload.data(), video.image_payload.size());
}

inline VideoFrameRecord read_video_record(BinaryReader& r) {
  VideoFrameRecord video;
  video.frame_index = r.pod<std::uint64_t>();
  const auto flags = r.pod<std::uint8_t>();
  if (flags & kVideoFlagFiducial) {
    FiducialMatrix m;
    r.bytes(m.bytes.data(), kFiducialBytes);
    video.fiducial = m;
  }
  if (flags & kVideoFlagDecodedTs) video.decoded_host_ts_us = r.pod<std::uint64_t>();
  const auto payload_len = r.pod<std::uint32_t>();
  video.image_payload.resize(payload_len);
  r.bytes(video.image_payload.data(), payload_len);
  return video;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace vtw::detail
