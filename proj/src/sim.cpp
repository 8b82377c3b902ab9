#include "vtw/sim.hpp"

#include <cmath>
#include <string>

#include "vtw/errors.hpp"
#include "vtw/rng.hpp"

namespace vtw {

namespace {

constexpr double kUsPerSecond = 1e6;

void check(bool cond, const std::string& message) {
  if (!cond) throw InvalidSpec(message);
}

// Number of events on the nominal grid i/rate in [0, duration). Multiplying
// the integer index first keeps exact-multiple boundaries exact in double.
std::uint64_t nominal_count(double duration_s, double rate_hz) {
  const double duration_us = duration_s * kUsPerSecond;
  std::uint64_t n = static_cast<std::uint64_t>(std::floor(duration_s * rate_hz)) + 2;
  while (n > 0 && (static_cast<double>(n - 1) * kUsPerSecond) / rate_hz >= duration_us) --n;
  return n;
}

std::int64_t clock_reading_us(const ClockSpec& clock, double host_us, Rng& rng) {
  const double jitter =
      clock.jitter_std_us > 0.0 ? rng.normal_clamped(clock.jitter_std_us) : 0.0;
  return std::llround(host_us * (1.0 + clock.drift_ppm * 1e-6) +
                      static_cast<double>(clock.offset_us) + jitter);
}

std::uint64_t to_u64_us(std::int64_t value) {
  return value < 0 ? 0 : static_cast<std::uint64_t>(value);
}

}  // namespace

void SessionSpec::validate() const {
  check(duration_s >= 0.0 && std::isfinite(duration_s), "duration_s must be non-negative");
  check(tactile_rate_hz > 0.0, "tactile_rate_hz must be > 0");
  check(video_rate_hz > 0.0, "video_rate_hz must be > 0");
  check(fiducial_rate_hz > 0.0, "fiducial_rate_hz must be > 0");
  check(fiducial_rate_hz <= video_rate_hz, "fiducial_rate_hz must be <= video_rate_hz");
  for (const ClockSpec& clock : {device_clock, video_clock}) {
    check(clock.jitter_std_us >= 0.0, "jitter_std_us must be >= 0");
    check(std::abs(clock.drift_ppm) < 10000.0, "|drift_ppm| must be < 10000");
  }
  for (const ContactEvent& event : contact_script) {
    check(event.t_start_s < event.t_end_s, "contact event needs t_start_s < t_end_s");
    check(event.center_row >= 0.0 && event.center_row < kPadRows &&
              event.center_col >= 0.0 && event.center_col < kPadCols,
          "contact center outside the 12x32 grid");
    check(event.radius_taxels > 0.0, "radius_taxels must be > 0");
    check(event.peak_value >= 0 && event.peak_value <= kTaxelMax,
          "peak_value must be in [0, 4095]");
  }
}

std::array<std::uint16_t, kTaxelCount> render_contact(const ContactEvent& event, double t_s) {
  std::array<std::uint16_t, kTaxelCount> grid{};
  if (t_s < event.t_start_s || t_s >= event.t_end_s) return grid;
  const double r2 = event.radius_taxels * event.radius_taxels;
  const double cutoff = 3.0 * event.radius_taxels;
  for (int row = 0; row < kPadRows; ++row) {
    for (int col = 0; col < kPadCols; ++col) {
      const double dr = row - event.center_row;
      const double dc = col - event.center_col;
      const double dist = std::sqrt(dr * dr + dc * dc);
      double value = 0.0;
      if (event.profile == ContactProfile::Gaussian) {
        if (dist <= cutoff) value = event.peak_value * std::exp(-(dist * dist) / (2.0 * r2));
      } else {
        if (dist <= event.radius_taxels) value = event.peak_value;
      }
      long quantized = std::lround(value);
      if (quantized < 0) quantized = 0;
      if (quantized > kTaxelMax) quantized = kTaxelMax;
      grid[static_cast<std::size_t>(row * kPadCols + col)] =
          static_cast<std::uint16_t>(quantized);
    }
  }
  return grid;
}

std::array<std::uint16_t, kTaxelCount> render_pad(std::span<const ContactEvent> script,
                                                  PadId pad, double t_s) {
  std::array<std::uint32_t, kTaxelCount> acc{};
  for (const ContactEvent& event : script) {
    if (event.pad_id != pad) continue;
    const auto grid = render_contact(event, t_s);
    for (int i = 0; i < kTaxelCount; ++i) acc[static_cast<std::size_t>(i)] += grid[static_cast<std::size_t>(i)];
  }
  std::array<std::uint16_t, kTaxelCount> out{};
  for (int i = 0; i < kTaxelCount; ++i) {
    const auto v = acc[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(v > kTaxelMax ? kTaxelMax : v);
  }
  return out;
}

SimulatedSession simulate_session(const SessionSpec& spec) {
  spec.validate();
  SimulatedSession session;
  session.truth.device_clock = spec.device_clock;
  session.truth.video_clock = spec.video_clock;

  // Independent per-stream generators so draw counts in one stream never
  // shift another. Order within a stream: one draw per frame, frame order.
  Rng rng_left(Rng::mix(spec.rng_seed, 0));
  Rng rng_right(Rng::mix(spec.rng_seed, 1));
  Rng rng_video(Rng::mix(spec.rng_seed, 2));
  Rng rng_payload(Rng::mix(spec.rng_seed, 3));

  const std::uint64_t n_tactile = nominal_count(spec.duration_s, spec.tactile_rate_hz);
  session.truth.tactile_emit_host_us.reserve(n_tactile);
  session.left_bytes.reserve(n_tactile * kWireFrameSize);
  session.right_bytes.reserve(n_tactile * kWireFrameSize);

  for (std::uint64_t i = 0; i < n_tactile; ++i) {
    const double host_us = (static_cast<double>(i) * kUsPerSecond) / spec.tactile_rate_hz;
    session.truth.tactile_emit_host_us.push_back(host_us);
    const std::uint64_t receipt = to_u64_us(std::llround(host_us));

    TaxelFrame frame;
    frame.seq = static_cast<std::uint16_t>(i);
    frame.pad_id = PadId::Left;
    frame.device_ts_us = to_u64_us(clock_reading_us(spec.device_clock, host_us, rng_left));
    frame.taxels = render_pad(spec.contact_script, PadId::Left, host_us / kUsPerSecond);
    append_frame(session.left_bytes, frame);
    session.left_host_stamps.push_back(receipt);

    frame.pad_id = PadId::Right;
    frame.device_ts_us = to_u64_us(clock_reading_us(spec.device_clock, host_us, rng_right));
    frame.taxels = render_pad(spec.contact_script, PadId::Right, host_us / kUsPerSecond);
    append_frame(session.right_bytes, frame);
    session.right_host_stamps.push_back(receipt);
  }

  const std::uint64_t n_video = nominal_count(spec.duration_s, spec.video_rate_hz);
  session.video.reserve(n_video);
  session.truth.video_capture_host_us.reserve(n_video);

  FiducialMatrix current_fiducial{};
  std::int64_t last_refresh = -1;
  for (std::uint64_t i = 0; i < n_video; ++i) {
    const double nominal_us = (static_cast<double>(i) * kUsPerSecond) / spec.video_rate_hz;
    const double jitter = spec.video_clock.jitter_std_us > 0.0
                              ? rng_video.normal_clamped(spec.video_clock.jitter_std_us)
                              : 0.0;
    const double capture_us = nominal_us / (1.0 + spec.video_clock.drift_ppm * 1e-6) + jitter;
    session.truth.video_capture_host_us.push_back(capture_us);

    // Refresh index on the frame grid; the epsilon keeps exact integer
    // boundaries (e.g. 60/30) from landing on the wrong side of floor.
    const auto refresh = static_cast<std::int64_t>(std::floor(
        static_cast<double>(i) * spec.fiducial_rate_hz / spec.video_rate_hz + 1e-9));
    if (refresh > last_refresh) {
      last_refresh = refresh;
      FiducialCode code;
      code.host_ts_us = to_u64_us(std::llround(capture_us));
      code.code_seq = static_cast<std::uint16_t>(refresh);
      current_fiducial = encode_fiducial(code);
      ++session.truth.distinct_code_count;
    }

    VideoFrameRecord record;
    record.frame_index = i;
    record.fiducial = current_fiducial;
    record.image_payload.resize(spec.image_payload_bytes);
    for (auto& byte : record.image_payload) {
      byte = static_cast<std::uint8_t>(rng_payload.next_u64() & 0xFF);
    }
    session.video.push_back(std::move(record));
  }

  return session;
}

}  // namespace vtw
