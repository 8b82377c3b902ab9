#include "vtw/sync.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "vtw/errors.hpp"

namespace vtw {

namespace {

constexpr double kResidualFloorUs = 1000.0;

double median_inplace(std::vector<double>& values) {
  const std::size_t n = values.size();
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  double upper = *mid;
  if (n % 2 == 1) return upper;
  double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

ClockModel fit_clock_model(std::span<const ClockSamplePoint> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw TooFewSamples("clock fit needs at least 2 samples, got " + std::to_string(n));
  for (std::size_t i = 1; i < n; ++i) {
    if (samples[i].frame_index <= samples[i - 1].frame_index) {
      throw UnsortedInput("clock samples must have strictly increasing frame indices");
    }
  }

  // Pairwise-slope stage, on a strided subset when n exceeds the cap.
  const std::size_t stride = (n + kTheilSenCap - 1) / kTheilSenCap;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n; i += stride) {
    xs.push_back(static_cast<double>(samples[i].frame_index));
    ys.push_back(static_cast<double>(samples[i].host_ts_us));
  }
  const std::size_t m = xs.size();
  std::vector<double> slopes;
  slopes.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      slopes.push_back((ys[j] - ys[i]) / (xs[j] - xs[i]));
    }
  }
  double slope = median_inplace(slopes);

  std::vector<double> intercepts;
  intercepts.reserve(n);
  for (const ClockSamplePoint& s : samples) {
    intercepts.push_back(static_cast<double>(s.host_ts_us) -
                         slope * static_cast<double>(s.frame_index));
  }
  double intercept = median_inplace(intercepts);

  // Inlier selection against the Theil-Sen line.
  std::vector<double> abs_residuals;
  abs_residuals.reserve(n);
  for (const ClockSamplePoint& s : samples) {
    abs_residuals.push_back(std::abs(static_cast<double>(s.host_ts_us) -
                                     (slope * static_cast<double>(s.frame_index) + intercept)));
  }
  std::vector<double> scratch = abs_residuals;
  const double threshold = std::max(3.0 * median_inplace(scratch), kResidualFloorUs);

  // Least-squares refinement over the inliers, centered for conditioning.
  double sum_x = 0.0, sum_y = 0.0;
  std::uint64_t inliers = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (abs_residuals[i] > threshold) continue;
    sum_x += static_cast<double>(samples[i].frame_index);
    sum_y += static_cast<double>(samples[i].host_ts_us);
    ++inliers;
  }
  if (inliers < 2) throw DegenerateFit("fewer than 2 inliers");
  const double mean_x = sum_x / static_cast<double>(inliers);
  const double mean_y = sum_y / static_cast<double>(inliers);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (abs_residuals[i] > threshold) continue;
    const double dx = static_cast<double>(samples[i].frame_index) - mean_x;
    const double dy = static_cast<double>(samples[i].host_ts_us) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw DegenerateFit("all inlier frame indices identical");
  slope = sxy / sxx;
  intercept = mean_y - slope * mean_x;
  if (!std::isfinite(slope) || !std::isfinite(intercept) || slope <= 0.0) {
    throw DegenerateFit("refined fit has non-finite or non-positive slope");
  }

  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (abs_residuals[i] > threshold) continue;
    const double r = static_cast<double>(samples[i].host_ts_us) -
                     (slope * static_cast<double>(samples[i].frame_index) + intercept);
    rss += r * r;
  }

  ClockModel model;
  model.slope_us_per_frame = slope;
  model.intercept_us = intercept;
  model.residual_rms_us = std::sqrt(rss / static_cast<double>(inliers));
  model.inlier_count = inliers;
  model.outlier_count = n - inliers;
  return model;
}

void apply_clock_model(const ClockModel& model, std::span<VideoFrameRecord> frames) {
  for (VideoFrameRecord& frame : frames) {
    const double predicted = model.predict_us(frame.frame_index);
    frame.decoded_host_ts_us =
        predicted <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(predicted));
  }
}

std::string AlignmentReport::to_kv() const {
  std::ostringstream out;
  out << "pairs_emitted = " << pairs_emitted << '\n'
      << "video_unmatched = " << video_unmatched << '\n'
      << "tactile_unused_left = " << tactile_unused_left << '\n'
      << "tactile_unused_right = " << tactile_unused_right << '\n'
      << "max_abs_skew_us = " << max_abs_skew_us << '\n';
  return out.str();
}

namespace {

struct Candidate {
  std::int64_t abs_skew;
  std::size_t video_idx;
  std::size_t tactile_idx;
  std::int64_t skew;
};

// Skew of tactile stamp t against video time v as a signed difference.
std::int64_t skew_us(std::uint64_t t, std::uint64_t v) {
  return t >= v ? static_cast<std::int64_t>(t - v) : -static_cast<std::int64_t>(v - t);
}

// Greedy one-to-one matching for one pad. Returns per-video tactile index (or
// npos) for accepted matches.
std::vector<std::size_t> match_pad(std::span<const VideoFrameRecord> video,
                                   std::span<const TaxelFrame> tactile,
                                   std::int64_t tolerance_us) {
  std::uint64_t prev_ts = 0;
  bool first = true;
  for (const TaxelFrame& frame : tactile) {
    if (!frame.host_ts_us.has_value()) {
      throw Error("tactile frame missing host_ts_us");
    }
    if (!first && *frame.host_ts_us < prev_ts) {
      throw UnsortedInput("tactile frames must be sorted by host_ts_us");
    }
    prev_ts = *frame.host_ts_us;
    first = false;
  }

  std::vector<Candidate> candidates;
  std::size_t lo = 0;
  for (std::size_t vi = 0; vi < video.size(); ++vi) {
    if (!video[vi].decoded_host_ts_us.has_value()) continue;
    const std::uint64_t vts = *video[vi].decoded_host_ts_us;
    const std::uint64_t window_lo =
        vts > static_cast<std::uint64_t>(tolerance_us) ? vts - static_cast<std::uint64_t>(tolerance_us) : 0;
    while (lo < tactile.size() && *tactile[lo].host_ts_us < window_lo) ++lo;
    for (std::size_t ti = lo; ti < tactile.size(); ++ti) {
      const std::int64_t skew = skew_us(*tactile[ti].host_ts_us, vts);
      if (skew > tolerance_us) break;
      candidates.push_back({std::abs(skew), vi, ti, skew});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.abs_skew != b.abs_skew) return a.abs_skew < b.abs_skew;
    if (a.video_idx != b.video_idx) return a.video_idx < b.video_idx;
    return a.tactile_idx < b.tactile_idx;
  });

  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> video_match(video.size(), npos);
  std::vector<bool> tactile_used(tactile.size(), false);
  for (const Candidate& c : candidates) {
    if (video_match[c.video_idx] != npos || tactile_used[c.tactile_idx]) continue;
    video_match[c.video_idx] = c.tactile_idx;
    tactile_used[c.tactile_idx] = true;
  }
  return video_match;
}

}  // namespace

std::pair<std::vector<SyncedPair>, AlignmentReport> align_streams(
    std::span<const VideoFrameRecord> video, std::span<const TaxelFrame> left,
    std::span<const TaxelFrame> right, std::int64_t tolerance_us) {
  for (std::size_t i = 1; i < video.size(); ++i) {
    if (video[i].decoded_host_ts_us.has_value() && video[i - 1].decoded_host_ts_us.has_value() &&
        *video[i].decoded_host_ts_us < *video[i - 1].decoded_host_ts_us) {
      throw UnsortedInput("video frames must be sorted by decoded_host_ts_us");
    }
  }
  for (const TaxelFrame& f : left) {
    if (f.pad_id != PadId::Left) throw PadMismatch("left stream contains a right-pad frame");
  }
  for (const TaxelFrame& f : right) {
    if (f.pad_id != PadId::Right) throw PadMismatch("right stream contains a left-pad frame");
  }

  const auto left_match = match_pad(video, left, tolerance_us);
  const auto right_match = match_pad(video, right, tolerance_us);

  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<SyncedPair> pairs;
  AlignmentReport report;
  for (std::size_t vi = 0; vi < video.size(); ++vi) {
    if (left_match[vi] == npos || right_match[vi] == npos) continue;
    SyncedPair pair;
    pair.host_ts_us = *video[vi].decoded_host_ts_us;
    pair.left = left[left_match[vi]];
    pair.right = right[right_match[vi]];
    pair.video = video[vi];
    pair.skew_left_us = skew_us(*pair.left.host_ts_us, pair.host_ts_us);
    pair.skew_right_us = skew_us(*pair.right.host_ts_us, pair.host_ts_us);
    report.max_abs_skew_us = std::max({report.max_abs_skew_us, std::abs(pair.skew_left_us),
                                       std::abs(pair.skew_right_us)});
    pairs.push_back(std::move(pair));
  }
  report.pairs_emitted = pairs.size();
  report.video_unmatched = video.size() - pairs.size();
  report.tactile_unused_left = left.size() - pairs.size();
  report.tactile_unused_right = right.size() - pairs.size();
  return {std::move(pairs), report};
}

}  // namespace vtw
