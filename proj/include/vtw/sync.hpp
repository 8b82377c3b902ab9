#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vtw/fiducial.hpp"
#include "vtw/wire.hpp"

namespace vtw {

// Recovers a host-time model for the video stream from fiducial samples and
// aligns tactile and video streams into synchronized pairs.

// Affine map from video frame index to host time, with fit diagnostics.
struct ClockModel {
  double slope_us_per_frame = 0.0;
  double intercept_us = 0.0;
  double residual_rms_us = 0.0;
  std::uint64_t inlier_count = 0;
  std::uint64_t outlier_count = 0;

  double predict_us(std::uint64_t frame_index) const {
    return slope_us_per_frame * static_cast<double>(frame_index) + intercept_us;
  }
};

struct ClockSamplePoint {
  std::uint64_t frame_index = 0;
  std::uint64_t host_ts_us = 0;
};

inline std::vector<ClockSamplePoint> to_clock_samples(std::span<const CodeSample> samples) {
  std::vector<ClockSamplePoint> points;
  points.reserve(samples.size());
  for (const CodeSample& s : samples) points.push_back({s.frame_index, s.code.host_ts_us});
  return points;
}

// Robust fit of host_ts ~ slope * frame_index + intercept:
// Theil-Sen slope (median of pairwise slopes) and median intercept, then one
// least-squares refinement over the inliers within 3x the median absolute
// residual (floored at 1 ms). Deterministic; when more than kTheilSenCap
// samples arrive, the pairwise-slope stage runs on an evenly strided subset
// to bound the O(n^2) pair count (median intercept, inlier selection and the
// refinement still use every sample).
//
// Throws TooFewSamples (< 2 samples), UnsortedInput (frame indices not
// strictly increasing), DegenerateFit (non-finite or non-positive slope, or
// fewer than 2 inliers).
inline constexpr std::size_t kTheilSenCap = 1501;
ClockModel fit_clock_model(std::span<const ClockSamplePoint> samples);

// Fills decoded_host_ts_us = round(slope * frame_index + intercept) for every
// frame; negative predictions clamp to 0.
void apply_clock_model(const ClockModel& model, std::span<VideoFrameRecord> frames);

// One video frame matched with one frame from each pad on the shared clock.
struct SyncedPair {
  std::uint64_t host_ts_us = 0;  // the video frame's recovered host time
  TaxelFrame left;
  TaxelFrame right;
  VideoFrameRecord video;
  std::int64_t skew_left_us = 0;   // tactile host stamp minus video host time
  std::int64_t skew_right_us = 0;
};

struct AlignmentReport {
  std::uint64_t pairs_emitted = 0;
  std::uint64_t video_unmatched = 0;
  std::uint64_t tactile_unused_left = 0;
  std::uint64_t tactile_unused_right = 0;
  std::int64_t max_abs_skew_us = 0;

  // UTF-8 `key = value` document, one key per line.
  std::string to_kv() const;
};

// Half the 23 Hz tactile period: the nearest tactile frame is always within
// this bound when no frames dropped.
inline constexpr std::int64_t kDefaultToleranceUs = 21'739;

// One-to-one matching per pad: candidate (video, tactile) pairs within
// tolerance are accepted greedily in ascending |skew| order (ties: lower video
// frame index, then earlier tactile frame); a pair is emitted only when both
// pads matched the same video frame. Inputs must be sorted by timestamp and
// video frames must carry decoded_host_ts_us; tactile frames must carry
// host_ts_us. Throws UnsortedInput.
std::pair<std::vector<SyncedPair>, AlignmentReport> align_streams(
    std::span<const VideoFrameRecord> video, std::span<const TaxelFrame> left,
    std::span<const TaxelFrame> right, std::int64_t tolerance_us = kDefaultToleranceUs);

}  // namespace vtw
