#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vtw/preprocess.hpp"
#include "vtw/sync.hpp"

namespace vtw {

// On-disk container for synchronized episodes.
//
// File layout (magic "VTWD", all integers little-endian):
//   magic 4B, version u16, meta u32-len + bytes, config echo u32-len + bytes,
//   record count u64, then the records. The count is patched on close so the
//   record section can stream without buffering the session.
//
// Record layout is documented in docs/FORMATS.md; each record carries one
// SyncedPair optionally extended with a proprioception vector, a precomputed
// tactile image and a patch mask.

inline constexpr char kEpisodeMagic[4] = {'V', 'T', 'W', 'D'};
inline constexpr std::uint16_t kEpisodeVersion = 1;

struct EpisodeRecord {
  SyncedPair pair;
  std::optional<std::vector<float>> proprio;
  std::optional<TactileImage<float>> tactile_image;
  std::optional<PatchMask> mask;
};

struct Episode {
  std::string meta;
  std::string config_echo;
  std::vector<EpisodeRecord> records;
};

// Streaming writer; append() never buffers more than one record.
class EpisodeWriter {
 public:
  EpisodeWriter(const std::filesystem::path& path, const std::string& meta,
                const std::string& config_echo);
  ~EpisodeWriter();

  EpisodeWriter(const EpisodeWriter&) = delete;
  EpisodeWriter& operator=(const EpisodeWriter&) = delete;

  void append(const EpisodeRecord& record);
  // Patches the header record count; called by the destructor if omitted.
  void close();

  std::uint64_t records_written() const { return count_; }

 private:
  std::ofstream out_;
  std::streampos count_pos_;
  std::uint64_t count_ = 0;
  std::uint64_t last_host_ts_us_ = 0;
  bool closed_ = false;
};

void write_episode(const std::filesystem::path& path, const Episode& episode);
Episode read_episode(const std::filesystem::path& path);

inline constexpr int kSkewHistogramBuckets = 32;      // 1 ms wide, last is overflow
inline constexpr int kMaskRatioHistogramBuckets = 10; // 0.02 wide over [0.6, 0.8]

struct DatasetStats {
  std::uint64_t episode_count = 0;
  std::uint64_t pair_count = 0;
  std::uint64_t frames_left = 0;
  std::uint64_t frames_right = 0;
  std::int64_t max_abs_skew_us = 0;
  std::uint64_t skew_histogram[kSkewHistogramBuckets] = {};
  std::uint64_t masks_stored = 0;
  std::uint64_t masks_unmasked = 0;
  std::uint64_t mask_ratio_histogram[kMaskRatioHistogramBuckets] = {};
  std::vector<std::pair<std::string, std::string>> failures;  // (path, reason)

  std::string to_kv() const;
};

// Aggregates stats over episode files. A bad file never aborts the batch; it
// is reported in `failures` and the rest are still counted.
DatasetStats compute_stats(const std::vector<std::filesystem::path>& paths);

}  // namespace vtw
