#include "vtw/fiducial.hpp"

#include "vtw/crc16.hpp"
#include "vtw/errors.hpp"

namespace vtw {

namespace {

// Byte offsets within the 32-byte serialized matrix.
constexpr int kOffSync = 0;       // 2 bytes
constexpr int kOffTs = 2;         // 8 bytes LE
constexpr int kOffSeq = 10;       // 2 bytes LE
constexpr int kOffCrc = 12;       // 2 bytes BE
constexpr int kOffTsCopy = 14;    // 8 bytes LE
constexpr int kPayloadBytes = 10; // ts + seq

void put_ts(std::uint8_t* p, std::uint64_t ts) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(ts >> (8 * i));
}

std::uint64_t get_ts(const std::uint8_t* p) {
  std::uint64_t ts = 0;
  for (int i = 7; i >= 0; --i) ts = (ts << 8) | p[i];
  return ts;
}

std::uint16_t payload_crc(std::uint64_t ts, std::uint16_t seq) {
  std::array<std::uint8_t, kPayloadBytes> payload{};
  put_ts(payload.data(), ts);
  payload[8] = static_cast<std::uint8_t>(seq & 0xFF);
  payload[9] = static_cast<std::uint8_t>(seq >> 8);
  return crc16(payload);
}

}  // namespace

FiducialMatrix encode_fiducial(const FiducialCode& code) {
  FiducialMatrix m;
  m.bytes[kOffSync] = static_cast<std::uint8_t>(kFiducialSyncPattern >> 8);
  m.bytes[kOffSync + 1] = static_cast<std::uint8_t>(kFiducialSyncPattern & 0xFF);
  put_ts(&m.bytes[kOffTs], code.host_ts_us);
  m.bytes[kOffSeq] = static_cast<std::uint8_t>(code.code_seq & 0xFF);
  m.bytes[kOffSeq + 1] = static_cast<std::uint8_t>(code.code_seq >> 8);
  const std::uint16_t crc = payload_crc(code.host_ts_us, code.code_seq);
  m.bytes[kOffCrc] = static_cast<std::uint8_t>(crc >> 8);
  m.bytes[kOffCrc + 1] = static_cast<std::uint8_t>(crc & 0xFF);
  put_ts(&m.bytes[kOffTsCopy], code.host_ts_us);
  return m;
}

FiducialError decode_fiducial(const FiducialMatrix& m, FiducialCode& out) {
  const std::uint16_t sync =
      static_cast<std::uint16_t>((m.bytes[kOffSync] << 8) | m.bytes[kOffSync + 1]);
  if (sync != kFiducialSyncPattern) return FiducialError::BadSyncPattern;

  const std::uint64_t ts_primary = get_ts(&m.bytes[kOffTs]);
  const std::uint64_t ts_copy = get_ts(&m.bytes[kOffTsCopy]);
  const std::uint16_t seq =
      static_cast<std::uint16_t>(m.bytes[kOffSeq] | (m.bytes[kOffSeq + 1] << 8));
  const std::uint16_t stored =
      static_cast<std::uint16_t>((m.bytes[kOffCrc] << 8) | m.bytes[kOffCrc + 1]);

  if (payload_crc(ts_primary, seq) == stored) {
    out = {ts_primary, seq};
    return FiducialError::Ok;
  }
  if (payload_crc(ts_copy, seq) == stored) {
    out = {ts_copy, seq};
    return FiducialError::Ok;
  }
  return FiducialError::Unrecoverable;
}

std::vector<CodeSample> extract_code_samples(std::span<const VideoFrameRecord> frames,
                                             ExtractTally* tally) {
  ExtractTally local;
  std::vector<CodeSample> samples;
  std::optional<std::uint16_t> last_seq;
  std::optional<std::uint64_t> last_index;
  for (const VideoFrameRecord& frame : frames) {
    if (last_index.has_value() && frame.frame_index <= *last_index) {
      throw UnsortedInput("video frame indices must be strictly increasing");
    }
    last_index = frame.frame_index;
    ++local.frames_total;
    if (!frame.fiducial.has_value()) {
      ++local.frames_without_fiducial;
      continue;
    }
    FiducialCode code;
    if (decode_fiducial(*frame.fiducial, code) != FiducialError::Ok) {
      ++local.frames_undecodable;
      continue;
    }
    if (last_seq.has_value() && code.code_seq == *last_seq) {
      ++local.duplicate_codes;  // later appearance of the same code, stale
      continue;
    }
    last_seq = code.code_seq;
    samples.push_back({frame.frame_index, code});
  }
  local.samples = samples.size();
  if (tally != nullptr) *tally = local;
  return samples;
}

}  // namespace vtw
