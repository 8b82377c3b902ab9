#include "vtw/episode.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "vtw/errors.hpp"
#include "vtw/io_util.hpp"

namespace vtw {

namespace {

constexpr std::uint8_t kFlagProprio = 0x01;
constexpr std::uint8_t kFlagTactileImage = 0x02;
constexpr std::uint8_t kFlagMask = 0x04;

constexpr std::uint8_t kMaskFlagRatioDrawn = 0x01;

void write_taxel_frame(detail::BinaryWriter& w, const TaxelFrame& frame) {
  w.pod<std::uint8_t>(static_cast<std::uint8_t>(frame.pad_id));
  w.pod<std::uint16_t>(frame.seq);
  w.pod<std::uint64_t>(frame.device_ts_us);
  w.pod<std::uint64_t>(frame.host_ts_us.value_or(0));
  w.bytes(frame.taxels.data(), sizeof(frame.taxels));
}

TaxelFrame read_taxel_frame(detail::BinaryReader& r, PadId expected) {
  TaxelFrame frame;
  const auto pad = r.pod<std::uint8_t>();
  if (pad != static_cast<std::uint8_t>(expected)) {
    throw PadMismatch("episode record stores a frame under the wrong pad slot");
  }
  frame.pad_id = expected;
  frame.seq = r.pod<std::uint16_t>();
  frame.device_ts_us = r.pod<std::uint64_t>();
  frame.host_ts_us = r.pod<std::uint64_t>();
  r.bytes(frame.taxels.data(), sizeof(frame.taxels));
  return frame;
}

void write_record(detail::BinaryWriter& w, const EpisodeRecord& record) {
  std::uint8_t flags = 0;
  if (record.proprio.has_value()) flags |= kFlagProprio;
  if (record.tactile_image.has_value()) flags |= kFlagTactileImage;
  if (record.mask.has_value()) flags |= kFlagMask;
  w.pod<std::uint8_t>(flags);
  w.pod<std::uint64_t>(record.pair.host_ts_us);
  w.pod<std::int32_t>(static_cast<std::int32_t>(record.pair.skew_left_us));
  w.pod<std::int32_t>(static_cast<std::int32_t>(record.pair.skew_right_us));
  write_taxel_frame(w, record.pair.left);
  write_taxel_frame(w, record.pair.right);
  detail::write_video_record(w, record.pair.video);

  if (record.proprio.has_value()) {
    w.pod<std::uint16_t>(static_cast<std::uint16_t>(record.proprio->size()));
    w.bytes(record.proprio->data(), record.proprio->size() * sizeof(float));
  }
  if (record.tactile_image.has_value()) {
    // RowMajor fixed-size matrix: the raw storage is already the serialized
    // row-major float32 block.
    w.bytes(record.tactile_image->data(), sizeof(float) * kImageRows * kImageCols);
  }
  if (record.mask.has_value()) {
    const PatchMask& mask = *record.mask;
    w.pod<std::uint8_t>(mask.ratio_drawn.has_value() ? kMaskFlagRatioDrawn : 0);
    w.pod<double>(mask.ratio_drawn.value_or(0.0));
    std::uint8_t packed[6] = {};
    for (int i = 0; i < kPatchCount; ++i) {
      if (mask.visible[static_cast<std::size_t>(i)]) {
        packed[i >> 3] |= static_cast<std::uint8_t>(0x80u >> (i & 7));
      }
    }
    w.bytes(packed, sizeof(packed));
  }
}

EpisodeRecord read_record(detail::BinaryReader& r) {
  EpisodeRecord record;
  const auto flags = r.pod<std::uint8_t>();
  record.pair.host_ts_us = r.pod<std::uint64_t>();
  record.pair.skew_left_us = r.pod<std::int32_t>();
  record.pair.skew_right_us = r.pod<std::int32_t>();
  record.pair.left = read_taxel_frame(r, PadId::Left);
  record.pair.right = read_taxel_frame(r, PadId::Right);
  record.pair.video = detail::read_video_record(r);

  if (flags & kFlagProprio) {
    const auto dim = r.pod<std::uint16_t>();
    std::vector<float> proprio(dim);
    r.bytes(proprio.data(), proprio.size() * sizeof(float));
    record.proprio = std::move(proprio);
  }
  if (flags & kFlagTactileImage) {
    TactileImage<float> image;
    r.bytes(image.data(), sizeof(float) * kImageRows * kImageCols);
    record.tactile_image = image;
  }
  if (flags & kFlagMask) {
    PatchMask mask;
    const auto mflags = r.pod<std::uint8_t>();
    const auto ratio = r.pod<double>();
    if (mflags & kMaskFlagRatioDrawn) mask.ratio_drawn = ratio;
    std::uint8_t packed[6];
    r.bytes(packed, sizeof(packed));
    for (int i = 0; i < kPatchCount; ++i) {
      mask.visible[static_cast<std::size_t>(i)] = (packed[i >> 3] >> (7 - (i & 7))) & 1;
    }
    record.mask = mask;
  }
  return record;
}

}  // namespace

EpisodeWriter::EpisodeWriter(const std::filesystem::path& path, const std::string& meta,
                             const std::string& config_echo)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoFailure("cannot open " + path.string() + " for writing");
  detail::BinaryWriter w(out_);
  w.bytes(kEpisodeMagic, 4);
  w.pod<std::uint16_t>(kEpisodeVersion);
  w.string32(meta);
  w.string32(config_echo);
  count_pos_ = out_.tellp();
  w.pod<std::uint64_t>(0);  // patched by close()
}

EpisodeWriter::~EpisodeWriter() {
  try {
    close();
  } catch (...) {
    // Destructor must not throw; call close() explicitly to observe failures.
  }
}

void EpisodeWriter::append(const EpisodeRecord& record) {
  if (closed_) throw IoFailure("append after close");
  if (count_ > 0 && record.pair.host_ts_us <= last_host_ts_us_) {
    throw UnsortedInput("episode host timestamps must be strictly increasing");
  }
  last_host_ts_us_ = record.pair.host_ts_us;
  detail::BinaryWriter w(out_);
  write_record(w, record);
  ++count_;
}

void EpisodeWriter::close() {
  if (closed_) return;
  closed_ = true;
  out_.seekp(count_pos_);
  detail::BinaryWriter w(out_);
  w.pod<std::uint64_t>(count_);
  out_.flush();
  if (!out_) throw IoFailure("episode close failed");
}

void write_episode(const std::filesystem::path& path, const Episode& episode) {
  EpisodeWriter writer(path, episode.meta, episode.config_echo);
  for (const EpisodeRecord& record : episode.records) writer.append(record);
  writer.close();
}

Episode read_episode(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  detail::BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kEpisodeMagic, 4) != 0) {
    throw BadMagic("not an episode file: " + path.string());
  }
  const auto version = r.pod<std::uint16_t>();
  if (version != kEpisodeVersion) {
    throw BadFileVersion("unsupported episode version " + std::to_string(version));
  }
  Episode episode;
  episode.meta = r.string32();
  episode.config_echo = r.string32();
  const auto count = r.pod<std::uint64_t>();
  episode.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) episode.records.push_back(read_record(r));
  if (!r.at_eof()) {
    throw CountMismatch("episode has trailing bytes past the declared record count");
  }
  return episode;
}

std::string DatasetStats::to_kv() const {
  std::ostringstream out;
  out << "episode_count = " << episode_count << '\n'
      << "pair_count = " << pair_count << '\n'
      << "frames_left = " << frames_left << '\n'
      << "frames_right = " << frames_right << '\n'
      << "max_abs_skew_us = " << max_abs_skew_us << '\n';
  out << "skew_histogram_1ms =";
  for (auto bucket : skew_histogram) out << ' ' << bucket;
  out << '\n';
  out << "masks_stored = " << masks_stored << '\n'
      << "masks_unmasked = " << masks_unmasked << '\n';
  out << "mask_ratio_histogram =";
  for (auto bucket : mask_ratio_histogram) out << ' ' << bucket;
  out << '\n';
  out << "failed_files = " << failures.size() << '\n';
  for (const auto& [path, reason] : failures) {
    out << "failure." << path << " = " << reason << '\n';
  }
  return out.str();
}

DatasetStats compute_stats(const std::vector<std::filesystem::path>& paths) {
  DatasetStats stats;
  for (const auto& path : paths) {
    Episode episode;
    try {
      episode = read_episode(path);
    } catch (const std::exception& e) {
      stats.failures.emplace_back(path.string(), e.what());
      continue;
    }
    ++stats.episode_count;
    stats.pair_count += episode.records.size();
    stats.frames_left += episode.records.size();
    stats.frames_right += episode.records.size();
    for (const EpisodeRecord& record : episode.records) {
      for (std::int64_t skew : {record.pair.skew_left_us, record.pair.skew_right_us}) {
        const std::int64_t mag = std::abs(skew);
        stats.max_abs_skew_us = std::max(stats.max_abs_skew_us, mag);
        const auto bucket = std::min<std::int64_t>(mag / 1000, kSkewHistogramBuckets - 1);
        ++stats.skew_histogram[bucket];
      }
      if (record.mask.has_value()) {
        ++stats.masks_stored;
        if (record.mask->ratio_drawn.has_value()) {
          const double ratio = *record.mask->ratio_drawn;
          int bucket = static_cast<int>(std::floor((ratio - 0.6) / 0.02));
          if (bucket < 0) bucket = 0;
          if (bucket >= kMaskRatioHistogramBuckets) bucket = kMaskRatioHistogramBuckets - 1;
          ++stats.mask_ratio_histogram[bucket];
        } else {
          ++stats.masks_unmasked;
        }
      }
    }
  }
  return stats;
}

}  // namespace vtw
