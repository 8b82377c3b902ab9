#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace vtw {

// Tactile sensor wire protocol.
//
// Frame layout (784 bytes, all multi-byte fields little-endian unless noted):
//   [0,2)     sync word        AA 55
//   [2,3)     version          0x01
//   [3,4)     pad id           0 = Left, 1 = Right
//   [4,6)     seq              u16
//   [6,14)    device_ts_us     u64
//   [14,782)  384 taxel values u16 each, row-major (row 0 col 0 first)
//   [782,784) CRC-16/CCITT-FALSE over bytes [2,782), stored big-endian
//
// Decode check order is sync, length, CRC, version: flipping any single bit
// of a valid frame yields BadSync or BadCrc, never a silently wrong frame.

inline constexpr int kPadRows = 12;
inline constexpr int kPadCols = 32;
inline constexpr int kTaxelCount = kPadRows * kPadCols;
inline constexpr std::uint16_t kTaxelMax = 4095;

inline constexpr std::size_t kWireFrameSize = 784;
inline constexpr std::uint8_t kWireSync0 = 0xAA;
inline constexpr std::uint8_t kWireSync1 = 0x55;
inline constexpr std::uint8_t kWireVersion = 0x01;

enum class PadId : std::uint8_t { Left = 0, Right = 1 };

inline const char* pad_name(PadId pad) { return pad == PadId::Left ? "left" : "right"; }

// One pad reading. host_ts_us is stamped by the receiving layer at receipt
// and never travels on the wire.
struct TaxelFrame {
  PadId pad_id = PadId::Left;
  std::uint16_t seq = 0;
  std::uint64_t device_ts_us = 0;
  std::array<std::uint16_t, kTaxelCount> taxels{};
  std::optional<std::uint64_t> host_ts_us;

  std::uint16_t& at(int row, int col) { return taxels[static_cast<std::size_t>(row * kPadCols + col)]; }
  std::uint16_t at(int row, int col) const { return taxels[static_cast<std::size_t>(row * kPadCols + col)]; }

  bool operator==(const TaxelFrame&) const = default;
};

// Field-for-field equality excluding the host stamp (the wire round-trip contract).
inline bool payload_equal(const TaxelFrame& a, const TaxelFrame& b) {
  return a.pad_id == b.pad_id && a.seq == b.seq && a.device_ts_us == b.device_ts_us &&
         a.taxels == b.taxels;
}

using WireFrame = std::array<std::uint8_t, kWireFrameSize>;

enum class WireError : std::uint8_t { Ok = 0, BadLength, BadSync, BadCrc, BadVersion };

const char* wire_error_name(WireError err);

// Serializes a frame. Throws TaxelOutOfRange if any taxel value exceeds 4095.
WireFrame encode_frame(const TaxelFrame& frame);

// Appends the encoded frame to a byte stream.
void append_frame(std::vector<std::uint8_t>& stream, const TaxelFrame& frame);

// Decodes exactly one frame. On success fills `out` (host_ts_us left empty,
// taxel values masked to 12 bits) and returns Ok.
WireError decode_frame(std::span<const std::uint8_t> buf, TaxelFrame& out);

struct SeqGap {
  PadId pad_id;
  std::uint16_t expected;
  std::uint16_t got;
  bool operator==(const SeqGap&) const = default;
};

struct DecodeDiagnostics {
  std::uint64_t frames_ok = 0;
  std::uint64_t frames_crc_fail = 0;
  std::uint64_t bytes_skipped_resync = 0;
  std::uint64_t trailing_bytes = 0;  // partial frame candidate left at end of input
  std::vector<SeqGap> seq_gaps;
};

// Incremental stream decoder with byte-granular resynchronization: on any
// frame failure the scan advances one byte and hunts for the next sync word.
// Keeps only a private buffer, safe to drive from a single reader thread.
//
// Byte accounting invariant, after finish():
//   frames_ok * 784 + bytes_skipped_resync + trailing_bytes == total bytes fed
class StreamDecoder {
 public:
  // Consumes bytes and appends any completed frames to `out`.
  void feed(std::span<const std::uint8_t> bytes, std::vector<TaxelFrame>& out);

  // Declares end of input: resolves the held-back tail into skipped bytes
  // and a trailing partial-frame candidate.
  void finish();

  const DecodeDiagnostics& diagnostics() const { return diag_; }

 private:
  void note_seq(const TaxelFrame& frame);

  std::vector<std::uint8_t> buf_;
  DecodeDiagnostics diag_;
  std::optional<std::uint16_t> last_seq_[2];
  bool finished_ = false;
};

// One-shot decode of a complete byte stream. Never fails; corruption is
// reported through the diagnostics.
std::pair<std::vector<TaxelFrame>, DecodeDiagnostics> decode_stream(
    std::span<const std::uint8_t> bytes);

}  // namespace vtw
