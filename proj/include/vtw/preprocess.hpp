#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>

#include "vtw/errors.hpp"
#include "vtw/rng.hpp"
#include "vtw/wire.hpp"

namespace vtw {

// Tactile image construction and patch masking: stack the two pads into a
// 24x32 map, colormap to RGB, tile into 4x4 patches (6x8 grid) and mask.

inline constexpr int kImageRows = 2 * kPadRows;  // 24
inline constexpr int kImageCols = kPadCols;      // 32
inline constexpr int kPatchSize = 4;
inline constexpr int kPatchRows = kImageRows / kPatchSize;  // 6
inline constexpr int kPatchCols = kImageCols / kPatchSize;  // 8
inline constexpr int kPatchCount = kPatchRows * kPatchCols; // 48

template <typename Scalar>
using TactileImage = Eigen::Matrix<Scalar, kImageRows, kImageCols, Eigen::RowMajor>;

template <typename Scalar>
using MaskTokenTemplate = Eigen::Matrix<Scalar, kPatchSize, kPatchSize, Eigen::RowMajor>;

template <typename Scalar>
struct RgbTactileImage {
  TactileImage<Scalar> r = TactileImage<Scalar>::Zero();
  TactileImage<Scalar> g = TactileImage<Scalar>::Zero();
  TactileImage<Scalar> b = TactileImage<Scalar>::Zero();

  bool operator==(const RgbTactileImage& other) const {
    return r == other.r && g == other.g && b == other.b;
  }
};

// Left pad fills rows 0-11, right pad rows 12-23; raw counts normalize by 4095.
template <typename Scalar>
TactileImage<Scalar> stack_pads(const TaxelFrame& left, const TaxelFrame& right) {
  if (left.pad_id != PadId::Left || right.pad_id != PadId::Right) {
    throw PadMismatch("stack_pads expects (left, right) pad identities");
  }
  TactileImage<Scalar> image;
  const Scalar scale = Scalar(1) / Scalar(kTaxelMax);
  for (int row = 0; row < kPadRows; ++row) {
    for (int col = 0; col < kPadCols; ++col) {
      image(row, col) = Scalar(left.at(row, col)) * scale;
      image(kPadRows + row, col) = Scalar(right.at(row, col)) * scale;
    }
  }
  return image;
}

// The fixed colormap, a jet-like piecewise-linear map on [0,1]:
//   R = clip(1.5 - |4v - 3|), G = clip(1.5 - |4v - 2|), B = clip(1.5 - |4v - 1|)
template <typename Scalar>
Scalar colormap_channel(Scalar v, int shift) {
  const Scalar x = Scalar(1.5) - std::abs(Scalar(4) * v - Scalar(shift));
  return x < Scalar(0) ? Scalar(0) : (x > Scalar(1) ? Scalar(1) : x);
}

template <typename Scalar>
RgbTactileImage<Scalar> colormap(const TactileImage<Scalar>& image) {
  RgbTactileImage<Scalar> rgb;
  for (int row = 0; row < kImageRows; ++row) {
    for (int col = 0; col < kImageCols; ++col) {
      const Scalar v = image(row, col);
      rgb.r(row, col) = colormap_channel(v, 3);
      rgb.g(row, col) = colormap_channel(v, 2);
      rgb.b(row, col) = colormap_channel(v, 1);
    }
  }
  return rgb;
}

// 6x8 binary patch mask; bit set means the patch stays visible.
struct PatchMask {
  std::array<bool, kPatchCount> visible{};
  // Ratio drawn on the masked branch; empty marks the all-visible 5% branch.
  std::optional<double> ratio_drawn;

  bool visible_at(int patch_row, int patch_col) const {
    return visible[static_cast<std::size_t>(patch_row * kPatchCols + patch_col)];
  }
  int masked_count() const {
    int count = 0;
    for (bool v : visible) count += v ? 0 : 1;
    return count;
  }

  static PatchMask all_visible() {
    PatchMask mask;
    mask.visible.fill(true);
    return mask;
  }

  bool operator==(const PatchMask&) const = default;
};

struct MaskPolicy {
  double mask_prob = 0.95;
  double ratio_min = 0.6;
  double ratio_max = 0.8;
};

inline int masked_count_for_ratio(double ratio) {
  return static_cast<int>(std::lround(ratio * kPatchCount));
}

// Masks round(ratio * 48) distinct patches chosen uniformly (partial
// Fisher-Yates over the 48 patch indices).
inline PatchMask mask_with_ratio(Rng& rng, double ratio) {
  PatchMask mask = PatchMask::all_visible();
  mask.ratio_drawn = ratio;
  const int count = masked_count_for_ratio(ratio);
  std::array<int, kPatchCount> order;
  for (int i = 0; i < kPatchCount; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint32_t>(kPatchCount - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    mask.visible[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = false;
  }
  return mask;
}

// With probability mask_prob draws a masking ratio uniform in
// [ratio_min, ratio_max]; otherwise the sample is shown in full.
inline PatchMask draw_mask(Rng& rng, const MaskPolicy& policy = {}) {
  if (rng.uniform01() >= policy.mask_prob) return PatchMask::all_visible();
  return mask_with_ratio(rng, rng.uniform(policy.ratio_min, policy.ratio_max));
}

template <typename Scalar>
struct MaskToken {
  MaskTokenTemplate<Scalar> values = MaskTokenTemplate<Scalar>::Constant(Scalar(0.5));
};

// T_visible = M (.) T + (1 - M) (.) T_mask: visible patches copied verbatim,
// masked patches replaced by the token template on all three channels.
template <typename Scalar>
RgbTactileImage<Scalar> apply_mask(const RgbTactileImage<Scalar>& image, const PatchMask& mask,
                                   const MaskToken<Scalar>& token) {
  RgbTactileImage<Scalar> out = image;
  for (int pr = 0; pr < kPatchRows; ++pr) {
    for (int pc = 0; pc < kPatchCols; ++pc) {
      if (mask.visible_at(pr, pc)) continue;
      const int row0 = pr * kPatchSize;
      const int col0 = pc * kPatchSize;
      out.r.template block<kPatchSize, kPatchSize>(row0, col0) = token.values;
      out.g.template block<kPatchSize, kPatchSize>(row0, col0) = token.values;
      out.b.template block<kPatchSize, kPatchSize>(row0, col0) = token.values;
    }
  }
  return out;
}

}  // namespace vtw
