#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vtw {

// Host-time fiducial embedded in video frames: a 16x16 binary matrix standing
// in for the timestamp QR code filmed by the camera.
//
// Bit layout (bits indexed row-major; bit 0 is the MSB of serialized byte 0):
//   [0,16)    sync pattern 0xA5C3
//   [16,80)   host_ts_us, 8 bytes little-endian
//   [80,96)   code_seq, 2 bytes little-endian
//   [96,112)  CRC-16/CCITT-FALSE over the 10 payload bytes above, big-endian
//   [112,176) redundant copy of host_ts_us
//   [176,256) zero padding
//
// Acceptance rule (deterministic, in priority order):
//   1. CRC verifies over (primary timestamp, code_seq)   -> primary code
//   2. CRC verifies over (redundant timestamp, code_seq) -> redundant code
//   3. otherwise Unrecoverable
// Timestamp-copy agreement alone is not sufficient: it cannot authenticate
// code_seq, so accepting on it could return a code with a corrupted sequence
// number. Under this rule every single-bit corruption either decodes to the
// original code or is rejected.

inline constexpr int kFiducialSide = 16;
inline constexpr int kFiducialBits = 256;
inline constexpr int kFiducialBytes = 32;
inline constexpr std::uint16_t kFiducialSyncPattern = 0xA5C3;

struct FiducialCode {
  std::uint64_t host_ts_us = 0;
  std::uint16_t code_seq = 0;
  bool operator==(const FiducialCode&) const = default;
};

struct FiducialMatrix {
  // Row-major bits, MSB-first within each byte; identical to the serialized form.
  std::array<std::uint8_t, kFiducialBytes> bytes{};

  bool bit(int index) const {
    return (bytes[static_cast<std::size_t>(index >> 3)] >> (7 - (index & 7))) & 1;
  }
  void set_bit(int index, bool value) {
    const std::uint8_t mask = static_cast<std::uint8_t>(1u << (7 - (index & 7)));
    auto& byte = bytes[static_cast<std::size_t>(index >> 3)];
    byte = value ? static_cast<std::uint8_t>(byte | mask) : static_cast<std::uint8_t>(byte & ~mask);
  }
  void flip_bit(int index) { set_bit(index, !bit(index)); }
  bool bit_at(int row, int col) const { return bit(row * kFiducialSide + col); }

  bool operator==(const FiducialMatrix&) const = default;
};

enum class FiducialError : std::uint8_t { Ok = 0, BadSyncPattern, Unrecoverable };

FiducialMatrix encode_fiducial(const FiducialCode& code);
FiducialError decode_fiducial(const FiducialMatrix& matrix, FiducialCode& out);

// One camera frame. The image payload is an opaque blob; this module only
// looks at the embedded fiducial.
struct VideoFrameRecord {
  std::uint64_t frame_index = 0;
  std::optional<FiducialMatrix> fiducial;
  std::vector<std::uint8_t> image_payload;
  std::optional<std::uint64_t> decoded_host_ts_us;

  bool operator==(const VideoFrameRecord&) const = default;
};

struct CodeSample {
  std::uint64_t frame_index = 0;
  FiducialCode code;
  bool operator==(const CodeSample&) const = default;
};

struct ExtractTally {
  std::uint64_t frames_total = 0;
  std::uint64_t frames_without_fiducial = 0;
  std::uint64_t frames_undecodable = 0;
  std::uint64_t duplicate_codes = 0;
  std::uint64_t samples = 0;
};

// Walks a recording (frame indices strictly increasing) and emits one sample
// per distinct code_seq at its first appearance; a 30 Hz code filmed at 60 Hz
// shows up in ~2 consecutive frames and the first one carries the least stale
// time. Undecodable or missing fiducials are skipped and tallied.
std::vector<CodeSample> extract_code_samples(std::span<const VideoFrameRecord> frames,
                                             ExtractTally* tally = nullptr);

}  // namespace vtw
