#include "vtw/wire.hpp"

#include <algorithm>
#include <cstring>

#include "vtw/crc16.hpp"
#include "vtw/errors.hpp"

namespace vtw {

namespace {

inline void put_u16le(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFF);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

inline void put_u64le(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint16_t get_u16le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint64_t get_u64le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

const char* wire_error_name(WireError err) {
  switch (err) {
    case WireError::Ok: return "ok";
    case WireError::BadLength: return "bad_length";
    case WireError::BadSync: return "bad_sync";
    case WireError::BadCrc: return "bad_crc";
    case WireError::BadVersion: return "bad_version";
  }
  return "unknown";
}

WireFrame encode_frame(const TaxelFrame& frame) {
  for (std::uint16_t v : frame.taxels) {
    if (v > kTaxelMax) {
      throw TaxelOutOfRange("taxel value " + std::to_string(v) + " exceeds " +
                            std::to_string(kTaxelMax));
    }
  }
  WireFrame out{};
  out[0] = kWireSync0;
  out[1] = kWireSync1;
  out[2] = kWireVersion;
  out[3] = static_cast<std::uint8_t>(frame.pad_id);
  put_u16le(&out[4], frame.seq);
  put_u64le(&out[6], frame.device_ts_us);
  for (int i = 0; i < kTaxelCount; ++i) {
    put_u16le(&out[14 + 2 * i], frame.taxels[static_cast<std::size_t>(i)]);
  }
  const std::uint16_t crc = crc16({out.data() + 2, 780});
  out[782] = static_cast<std::uint8_t>(crc >> 8);  // CRC big-endian
  out[783] = static_cast<std::uint8_t>(crc & 0xFF);
  return out;
}

void append_frame(std::vector<std::uint8_t>& stream, const TaxelFrame& frame) {
  const WireFrame encoded = encode_frame(frame);
  stream.insert(stream.end(), encoded.begin(), encoded.end());
}

WireError decode_frame(std::span<const std::uint8_t> buf, TaxelFrame& out) {
  if (buf.size() != kWireFrameSize) return WireError::BadLength;
  if (buf[0] != kWireSync0 || buf[1] != kWireSync1) return WireError::BadSync;
  const std::uint16_t stored = static_cast<std::uint16_t>((buf[782] << 8) | buf[783]);
  if (crc16(buf.subspan(2, 780)) != stored) return WireError::BadCrc;
  if (buf[2] != kWireVersion) return WireError::BadVersion;
  out.pad_id = buf[3] == 0 ? PadId::Left : PadId::Right;
  out.seq = get_u16le(&buf[4]);
  out.device_ts_us = get_u64le(&buf[6]);
  for (int i = 0; i < kTaxelCount; ++i) {
    out.taxels[static_cast<std::size_t>(i)] =
        static_cast<std::uint16_t>(get_u16le(&buf[14 + 2 * i]) & 0x0FFF);
  }
  out.host_ts_us.reset();
  return WireError::Ok;
}

void StreamDecoder::note_seq(const TaxelFrame& frame) {
  auto& last = last_seq_[static_cast<int>(frame.pad_id)];
  if (last.has_value()) {
    const std::uint16_t expected = static_cast<std::uint16_t>(*last + 1);
    if (frame.seq != expected) {
      diag_.seq_gaps.push_back({frame.pad_id, expected, frame.seq});
    }
  }
  last = frame.seq;
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes, std::vector<TaxelFrame>& out) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  std::size_t cursor = 0;
  TaxelFrame frame;
  while (true) {
    const std::size_t avail = buf_.size() - cursor;
    if (avail == 0) break;
    // A position can only start a frame if the sync prefix matches as far as
    // the buffered bytes go; anything else is skippable immediately.
    if (buf_[cursor] != kWireSync0) {
      ++cursor;
      ++diag_.bytes_skipped_resync;
      continue;
    }
    if (avail >= 2 && buf_[cursor + 1] != kWireSync1) {
      ++cursor;
      ++diag_.bytes_skipped_resync;
      continue;
    }
    if (avail < kWireFrameSize) break;  // plausible partial frame, wait for more bytes
    const WireError err = decode_frame({buf_.data() + cursor, kWireFrameSize}, frame);
    if (err == WireError::Ok) {
      note_seq(frame);
      out.push_back(frame);
      ++diag_.frames_ok;
      cursor += kWireFrameSize;
    } else {
      if (err == WireError::BadCrc) ++diag_.frames_crc_fail;
      ++cursor;
      ++diag_.bytes_skipped_resync;
    }
  }
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(cursor));
}

void StreamDecoder::finish() {
  if (finished_) return;
  finished_ = true;
  // The retained tail starts at a sync candidate (or is empty); it is a
  // genuine partial frame, not resync garbage.
  diag_.trailing_bytes = buf_.size();
}

std::pair<std::vector<TaxelFrame>, DecodeDiagnostics> decode_stream(
    std::span<const std::uint8_t> bytes) {
  StreamDecoder decoder;
  std::vector<TaxelFrame> frames;
  decoder.feed(bytes, frames);
  decoder.finish();
  return {std::move(frames), decoder.diagnostics()};
}

}  // namespace vtw
