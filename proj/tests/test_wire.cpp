#include <doctest.h>

#include <cstdint>
#include <vector>

#include "vtw/errors.hpp"
#include "vtw/rng.hpp"
#include "vtw/wire.hpp"

using namespace vtw;

namespace {

// Independent bitwise CRC-16/CCITT-FALSE reference; the production codec uses
// a table, this one must not.
std::uint16_t crc16_reference(std::span<const std::uint8_t> data) {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t byte : data) {
    crc ^= static_cast<std::uint16_t>(byte << 8);
    for (int i = 0; i < 8; ++i) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<std::uint16_t>(crc << 1);
    }
  }
  return crc;
}

TaxelFrame random_frame(Rng& rng, PadId pad) {
  TaxelFrame frame;
  frame.pad_id = pad;
  frame.seq = static_cast<std::uint16_t>(rng.next_u64());
  frame.device_ts_us = rng.next_u64() >> 16;
  for (auto& taxel : frame.taxels) {
    taxel = static_cast<std::uint16_t>(rng.next_u64() & 0x0FFF);
  }
  return frame;
}

}  // namespace

TEST_CASE("crc16 check value") {
  const std::uint8_t digits[] = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
  CHECK(crc16_reference(digits) == 0x29B1);
}

TEST_CASE("encode_frame zero frame layout") {
  TaxelFrame frame;
  const WireFrame bytes = encode_frame(frame);
  CHECK(bytes.size() == 784);
  CHECK(bytes[0] == 0xAA);
  CHECK(bytes[1] == 0x55);
  CHECK(bytes[2] == 0x01);
  CHECK(bytes[3] == 0);  // Left
  const std::uint16_t crc = crc16_reference({bytes.data() + 2, 780});
  CHECK(bytes[782] == static_cast<std::uint8_t>(crc >> 8));
  CHECK(bytes[783] == static_cast<std::uint8_t>(crc & 0xFF));
}

TEST_CASE("encode_frame places taxel[0][0] little-endian at offset 14") {
  TaxelFrame frame;
  frame.at(0, 0) = 4095;
  const WireFrame bytes = encode_frame(frame);
  CHECK(bytes[14] == 0xFF);
  CHECK(bytes[15] == 0x0F);
}

TEST_CASE("taxels serialize row-major") {
  TaxelFrame frame;
  frame.at(0, 1) = 0x0123;
  frame.at(1, 0) = 0x0456;
  frame.at(11, 31) = 0x0789;
  const WireFrame bytes = encode_frame(frame);
  CHECK(bytes[16] == 0x23);  // (0,1) -> taxel index 1
  CHECK(bytes[17] == 0x01);
  CHECK(bytes[14 + 2 * 32] == 0x56);  // (1,0) -> taxel index 32
  CHECK(bytes[14 + 2 * 32 + 1] == 0x04);
  CHECK(bytes[14 + 2 * 383] == 0x89);  // (11,31) -> last taxel
  CHECK(bytes[14 + 2 * 383 + 1] == 0x07);
}

TEST_CASE("decode masks taxel values to 12 bits") {
  WireFrame bytes = encode_frame(TaxelFrame{});
  bytes[15] = 0xF0;  // set high nibble of taxel 0, then repair the CRC
  std::uint16_t crc = 0xFFFF;
  for (int i = 2; i < 782; ++i) {
    crc ^= static_cast<std::uint16_t>(bytes[static_cast<std::size_t>(i)] << 8);
    for (int b = 0; b < 8; ++b) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<std::uint16_t>(crc << 1);
    }
  }
  bytes[782] = static_cast<std::uint8_t>(crc >> 8);
  bytes[783] = static_cast<std::uint8_t>(crc & 0xFF);
  TaxelFrame out;
  REQUIRE(decode_frame(bytes, out) == WireError::Ok);
  CHECK(out.at(0, 0) == 0);  // 0xF000 masked to 12 bits
}

TEST_CASE("encode_frame rejects out-of-range taxels") {
  TaxelFrame frame;
  frame.at(3, 7) = 4096;
  CHECK_THROWS_AS(encode_frame(frame), TaxelOutOfRange);
}

TEST_CASE("random frames round-trip byte-identically") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const TaxelFrame frame = random_frame(rng, i % 2 == 0 ? PadId::Left : PadId::Right);
    const WireFrame bytes = encode_frame(frame);
    // Cross-check the embedded CRC against the independent reference.
    const std::uint16_t expected = crc16_reference({bytes.data() + 2, 780});
    CHECK(bytes[782] == static_cast<std::uint8_t>(expected >> 8));
    CHECK(bytes[783] == static_cast<std::uint8_t>(expected & 0xFF));

    TaxelFrame decoded;
    REQUIRE(decode_frame(bytes, decoded) == WireError::Ok);
    CHECK(payload_equal(decoded, frame));
    CHECK(encode_frame(decoded) == bytes);
  }
}

TEST_CASE("decode_frame error paths") {
  Rng rng(7);
  const TaxelFrame frame = random_frame(rng, PadId::Right);
  WireFrame bytes = encode_frame(frame);
  TaxelFrame out;

  SUBCASE("flipped payload byte fails the CRC") {
    bytes[100] ^= 0x10;
    CHECK(decode_frame(bytes, out) == WireError::BadCrc);
  }
  SUBCASE("wrong sync word") {
    bytes[0] = 0xAB;
    CHECK(decode_frame(bytes, out) == WireError::BadSync);
  }
  SUBCASE("unknown version with a recomputed CRC") {
    bytes[2] = 0x02;
    const std::uint16_t crc = crc16_reference({bytes.data() + 2, 780});
    bytes[782] = static_cast<std::uint8_t>(crc >> 8);
    bytes[783] = static_cast<std::uint8_t>(crc & 0xFF);
    CHECK(decode_frame(bytes, out) == WireError::BadVersion);
  }
  SUBCASE("wrong length") {
    CHECK(decode_frame({bytes.data(), 783}, out) == WireError::BadLength);
  }
}

TEST_CASE("single-bit flips never decode silently wrong") {
  Rng rng(99);
  const TaxelFrame frame = random_frame(rng, PadId::Left);
  const WireFrame reference = encode_frame(frame);
  for (int bit = 0; bit < static_cast<int>(kWireFrameSize) * 8; ++bit) {
    WireFrame mutated = reference;
    mutated[static_cast<std::size_t>(bit / 8)] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    TaxelFrame out;
    const WireError err = decode_frame(mutated, out);
    CHECK((err == WireError::BadSync || err == WireError::BadCrc));
  }
}

TEST_CASE("decode_stream over clean concatenation") {
  Rng rng(5);
  std::vector<std::uint8_t> stream;
  std::vector<TaxelFrame> originals;
  for (int i = 0; i < 100; ++i) {
    TaxelFrame frame = random_frame(rng, PadId::Left);
    frame.seq = static_cast<std::uint16_t>(i);
    originals.push_back(frame);
    append_frame(stream, frame);
  }
  const auto [frames, diag] = decode_stream(stream);
  REQUIRE(frames.size() == 100);
  CHECK(diag.frames_ok == 100);
  CHECK(diag.bytes_skipped_resync == 0);
  CHECK(diag.trailing_bytes == 0);
  CHECK(diag.seq_gaps.empty());
  for (std::size_t i = 0; i < frames.size(); ++i) CHECK(payload_equal(frames[i], originals[i]));
}

TEST_CASE("decode_stream resynchronizes after injected garbage") {
  Rng rng(6);
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 100; ++i) {
    TaxelFrame frame = random_frame(rng, PadId::Right);
    frame.seq = static_cast<std::uint16_t>(i);
    append_frame(stream, frame);
    if (i == 49) {
      // 7 garbage bytes between frames 50 and 51; none resemble a sync word.
      const std::uint8_t garbage[7] = {0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66};
      stream.insert(stream.end(), garbage, garbage + 7);
    }
  }
  const auto [frames, diag] = decode_stream(stream);
  CHECK(frames.size() == 100);
  CHECK(diag.frames_ok == 100);
  CHECK(diag.bytes_skipped_resync == 7);
  CHECK(diag.trailing_bytes == 0);
  CHECK(diag.frames_ok * kWireFrameSize + diag.bytes_skipped_resync + diag.trailing_bytes ==
        stream.size());
}

TEST_CASE("decode_stream empty input") {
  const auto [frames, diag] = decode_stream({});
  CHECK(frames.empty());
  CHECK(diag.frames_ok == 0);
  CHECK(diag.bytes_skipped_resync == 0);
  CHECK(diag.trailing_bytes == 0);
}

TEST_CASE("decode_stream byte accounting holds under fuzzing") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint8_t> stream;
    const int n_frames = static_cast<int>(rng.below(6));
    for (int i = 0; i < n_frames; ++i) append_frame(stream, random_frame(rng, PadId::Left));
    // Mutate, inject and truncate arbitrarily.
    const int mutations = static_cast<int>(rng.below(8));
    for (int m = 0; m < mutations && !stream.empty(); ++m) {
      stream[rng.below(static_cast<std::uint32_t>(stream.size()))] ^=
          static_cast<std::uint8_t>(1u << rng.below(8));
    }
    const int injections = static_cast<int>(rng.below(20));
    for (int k = 0; k < injections; ++k) {
      const std::size_t pos = stream.empty() ? 0 : rng.below(static_cast<std::uint32_t>(stream.size() + 1));
      stream.insert(stream.begin() + static_cast<std::ptrdiff_t>(pos),
                    static_cast<std::uint8_t>(rng.next_u64()));
    }
    if (!stream.empty() && rng.below(2) == 0) {
      stream.resize(rng.below(static_cast<std::uint32_t>(stream.size() + 1)));
    }
    const auto [frames, diag] = decode_stream(stream);
    CHECK(diag.frames_ok == frames.size());
    CHECK(diag.frames_ok * kWireFrameSize + diag.bytes_skipped_resync + diag.trailing_bytes ==
          stream.size());
  }
}

TEST_CASE("a single corruption burst loses at most the frames it touches") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const int n_frames = 20;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < n_frames; ++i) {
      TaxelFrame frame = random_frame(rng, PadId::Left);
      frame.seq = static_cast<std::uint16_t>(i);
      append_frame(stream, frame);
    }
    const std::size_t burst_start = rng.below(static_cast<std::uint32_t>(stream.size() - 40));
    const std::size_t burst_len = 1 + rng.below(40);
    for (std::size_t i = burst_start; i < burst_start + burst_len; ++i) stream[i] ^= 0xFF;
    const std::size_t first_touched = burst_start / kWireFrameSize;
    const std::size_t last_touched = (burst_start + burst_len - 1) / kWireFrameSize;
    const std::size_t touched = last_touched - first_touched + 1;
    const auto [frames, diag] = decode_stream(stream);
    CHECK(frames.size() >= n_frames - touched);
  }
}

TEST_CASE("seq gaps are recorded per pad") {
  Rng rng(8);
  std::vector<std::uint8_t> stream;
  for (int i : {0, 1, 2, 5, 6}) {
    TaxelFrame frame = random_frame(rng, PadId::Left);
    frame.seq = static_cast<std::uint16_t>(i);
    append_frame(stream, frame);
  }
  const auto [frames, diag] = decode_stream(stream);
  CHECK(frames.size() == 5);
  REQUIRE(diag.seq_gaps.size() == 1);
  CHECK(diag.seq_gaps[0] == SeqGap{PadId::Left, 3, 5});
}

TEST_CASE("incremental feeding matches one-shot decoding") {
  Rng rng(31);
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 25; ++i) append_frame(stream, random_frame(rng, PadId::Right));
  stream.insert(stream.begin() + 1000, {0xAA, 0x00, 0xAA});

  const auto [oneshot_frames, oneshot_diag] = decode_stream(stream);

  StreamDecoder decoder;
  std::vector<TaxelFrame> incremental;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t chunk = std::min<std::size_t>(1 + rng.below(700), stream.size() - pos);
    decoder.feed({stream.data() + pos, chunk}, incremental);
    pos += chunk;
  }
  decoder.finish();
  CHECK(incremental.size() == oneshot_frames.size());
  CHECK(decoder.diagnostics().frames_ok == oneshot_diag.frames_ok);
  CHECK(decoder.diagnostics().bytes_skipped_resync == oneshot_diag.bytes_skipped_resync);
  CHECK(decoder.diagnostics().trailing_bytes == oneshot_diag.trailing_bytes);
}
