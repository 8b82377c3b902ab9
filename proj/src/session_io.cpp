#include "vtw/session_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vtw/config.hpp"
#include "vtw/io_util.hpp"

namespace vtw {

namespace {

using nlohmann::json;

std::filesystem::path pad_file(const std::filesystem::path& dir, PadId pad) {
  return dir / (std::string(pad_name(pad)) + ".pad");
}

std::filesystem::path stamps_file(const std::filesystem::path& dir, PadId pad) {
  return dir / (std::string(pad_name(pad)) + ".stamps");
}

void write_stamps(const std::filesystem::path& path, const std::vector<std::uint64_t>& stamps) {
  auto out = detail::open_output(path);
  detail::BinaryWriter w(out);
  w.bytes(kStampsMagic, 4);
  w.pod<std::uint16_t>(kSessionFileVersion);
  w.pod<std::uint64_t>(stamps.size());
  for (std::uint64_t stamp : stamps) w.pod<std::uint64_t>(stamp);
}

json clock_to_json(const ClockSpec& clock) {
  return {{"offset_us", clock.offset_us},
          {"drift_ppm", clock.drift_ppm},
          {"jitter_std_us", clock.jitter_std_us}};
}

ClockSpec clock_from_json(const json& j) {
  ClockSpec clock;
  clock.offset_us = j.at("offset_us").get<std::int64_t>();
  clock.drift_ppm = j.at("drift_ppm").get<double>();
  clock.jitter_std_us = j.at("jitter_std_us").get<double>();
  return clock;
}

}  // namespace

void write_session_dir(const std::filesystem::path& dir, const SimulatedSession& session,
                       const SessionSpec& spec) {
  std::filesystem::create_directories(dir);

  {
    auto out = detail::open_output(dir / "session.cfg");
    const std::string config = session_spec_to_config(spec);
    out.write(config.data(), static_cast<std::streamsize>(config.size()));
    if (!out) throw IoFailure("cannot write session.cfg");
  }
  {
    auto out = detail::open_output(pad_file(dir, PadId::Left));
    out.write(reinterpret_cast<const char*>(session.left_bytes.data()),
              static_cast<std::streamsize>(session.left_bytes.size()));
    auto out_r = detail::open_output(pad_file(dir, PadId::Right));
    out_r.write(reinterpret_cast<const char*>(session.right_bytes.data()),
                static_cast<std::streamsize>(session.right_bytes.size()));
    if (!out || !out_r) throw IoFailure("cannot write pad byte streams");
  }
  write_stamps(stamps_file(dir, PadId::Left), session.left_host_stamps);
  write_stamps(stamps_file(dir, PadId::Right), session.right_host_stamps);
  write_video_records(dir / "video.vfr", session.video);

  json truth;
  truth["tactile_emit_host_us"] = session.truth.tactile_emit_host_us;
  truth["video_capture_host_us"] = session.truth.video_capture_host_us;
  truth["device_clock"] = clock_to_json(session.truth.device_clock);
  truth["video_clock"] = clock_to_json(session.truth.video_clock);
  truth["distinct_code_count"] = session.truth.distinct_code_count;
  auto out = detail::open_output(dir / "truth.json");
  const std::string text = truth.dump(2);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoFailure("cannot write truth.json");
}

std::vector<std::uint8_t> read_pad_bytes(const std::filesystem::path& dir, PadId pad) {
  auto in = detail::open_input(pad_file(dir, pad));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<std::uint64_t> read_stamps(const std::filesystem::path& dir, PadId pad) {
  const auto path = stamps_file(dir, pad);
  auto in = detail::open_input(path);
  detail::BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kStampsMagic, 4) != 0) {
    throw BadMagic("not a stamps file: " + path.string());
  }
  const auto version = r.pod<std::uint16_t>();
  if (version != kSessionFileVersion) {
    throw BadFileVersion("unsupported stamps version " + std::to_string(version));
  }
  const auto count = r.pod<std::uint64_t>();
  std::vector<std::uint64_t> stamps(count);
  for (auto& stamp : stamps) stamp = r.pod<std::uint64_t>();
  return stamps;
}

void write_video_records(const std::filesystem::path& path,
                         const std::vector<VideoFrameRecord>& records) {
  auto out = detail::open_output(path);
  detail::BinaryWriter w(out);
  w.bytes(kVideoMagic, 4);
  w.pod<std::uint16_t>(kSessionFileVersion);
  w.pod<std::uint64_t>(records.size());
  for (const VideoFrameRecord& record : records) detail::write_video_record(w, record);
}

std::vector<VideoFrameRecord> read_video_records(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  detail::BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kVideoMagic, 4) != 0) {
    throw BadMagic("not a video record file: " + path.string());
  }
  const auto version = r.pod<std::uint16_t>();
  if (version != kSessionFileVersion) {
    throw BadFileVersion("unsupported video record version " + std::to_string(version));
  }
  const auto count = r.pod<std::uint64_t>();
  std::vector<VideoFrameRecord> records;
  records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) records.push_back(detail::read_video_record(r));
  if (!r.at_eof()) throw CountMismatch("video record file has trailing bytes");
  return records;
}

GroundTruth read_truth(const std::filesystem::path& dir) {
  auto in = detail::open_input(dir / "truth.json");
  json j = json::parse(in);
  GroundTruth truth;
  truth.tactile_emit_host_us = j.at("tactile_emit_host_us").get<std::vector<double>>();
  truth.video_capture_host_us = j.at("video_capture_host_us").get<std::vector<double>>();
  truth.device_clock = clock_from_json(j.at("device_clock"));
  truth.video_clock = clock_from_json(j.at("video_clock"));
  truth.distinct_code_count = j.at("distinct_code_count").get<std::uint64_t>();
  return truth;
}

}  // namespace vtw
