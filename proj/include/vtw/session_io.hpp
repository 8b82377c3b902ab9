#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vtw/sim.hpp"

namespace vtw {

// Capture session directory, written by `simulate` and consumed by `decode`
// and `sync`:
//   session.cfg    config echo (key = value document)
//   left.pad       raw tactile wire bytes, one stream per pad
//   right.pad
//   left.stamps    host receipt stamps (magic "VTWS"): one u64 per frame,
//   right.stamps   paired with decoded frames by stream order
//   video.vfr      video frame records (magic "VTWV")
//   truth.json     hidden ground truth, consumed only by oracles

inline constexpr char kStampsMagic[4] = {'V', 'T', 'W', 'S'};
inline constexpr char kVideoMagic[4] = {'V', 'T', 'W', 'V'};
inline constexpr std::uint16_t kSessionFileVersion = 1;

void write_session_dir(const std::filesystem::path& dir, const SimulatedSession& session,
                       const SessionSpec& spec);

std::vector<std::uint8_t> read_pad_bytes(const std::filesystem::path& dir, PadId pad);
std::vector<std::uint64_t> read_stamps(const std::filesystem::path& dir, PadId pad);
std::vector<VideoFrameRecord> read_video_records(const std::filesystem::path& path);
void write_video_records(const std::filesystem::path& path,
                         const std::vector<VideoFrameRecord>& records);
GroundTruth read_truth(const std::filesystem::path& dir);

}  // namespace vtw
