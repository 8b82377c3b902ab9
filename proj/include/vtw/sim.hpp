#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vtw/fiducial.hpp"
#include "vtw/wire.hpp"

namespace vtw {

// Ground-truth capture session simulator: two tactile pads stamped by a
// drifting device clock, a camera pacing itself on its own drifting clock,
// and a host-driven fiducial overlay. Produces the exact byte/record streams
// the decoding pipeline consumes plus the hidden truth oracles test against.

// Affine clock error model: a clock reading taken at true host time h is
//   reading = h * (1 + drift_ppm * 1e-6) + offset_us + jitter,
// jitter ~ N(0, jitter_std_us) clamped at +/-4 sigma.
struct ClockSpec {
  std::int64_t offset_us = 0;
  double drift_ppm = 0.0;
  double jitter_std_us = 0.0;
};

enum class ContactProfile : std::uint8_t { Gaussian, Plateau };

struct ContactEvent {
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  PadId pad_id = PadId::Left;
  double center_row = 0.0;
  double center_col = 0.0;
  double radius_taxels = 1.0;
  int peak_value = 0;
  ContactProfile profile = ContactProfile::Gaussian;
};

struct SessionSpec {
  double duration_s = 10.0;
  double tactile_rate_hz = 23.0;
  double video_rate_hz = 60.0;
  double fiducial_rate_hz = 30.0;
  ClockSpec device_clock;
  ClockSpec video_clock;
  std::vector<ContactEvent> contact_script;
  std::uint64_t rng_seed = 0;
  std::uint32_t image_payload_bytes = 64;

  // Throws InvalidSpec on violation.
  void validate() const;
};

// Hidden truth, consumed only by oracles and acceptance tests.
struct GroundTruth {
  std::vector<double> tactile_emit_host_us;   // per frame index, shared by both pads
  std::vector<double> video_capture_host_us;  // per video frame, includes drift + jitter
  ClockSpec device_clock;
  ClockSpec video_clock;
  std::uint64_t distinct_code_count = 0;
};

struct SimulatedSession {
  std::vector<std::uint8_t> left_bytes;
  std::vector<std::uint8_t> right_bytes;
  // Host receipt stamps, one per emitted frame in stream order. These are the
  // pipeline-visible host stamps attached at receipt; they are inputs to
  // alignment, not ground truth.
  std::vector<std::uint64_t> left_host_stamps;
  std::vector<std::uint64_t> right_host_stamps;
  std::vector<VideoFrameRecord> video;
  GroundTruth truth;
};

// Runs a full session. Deterministic: identical specs (including seed) give
// byte-identical output.
//
// Timing model:
//  - Tactile frames are emitted on the host timeline at exact multiples of the
//    tactile period (first at t=0, half-open [0, duration)); the device clock
//    only corrupts the on-wire device_ts_us stamps.
//  - Video frame i is captured at (i * period) / (1 + drift*1e-6) + jitter:
//    the camera paces itself on its own clock. Counts follow the nominal grid.
//  - The fiducial refreshes every video_rate/fiducial_rate frames (a new code
//    whenever floor(i * fiducial_rate / video_rate) increments), carrying the
//    current host time at the refresh instant, i.e. that frame's capture time.
SimulatedSession simulate_session(const SessionSpec& spec);

// Taxel grid of one event at time t (zeros when the event is inactive).
std::array<std::uint16_t, kTaxelCount> render_contact(const ContactEvent& event, double t_s);

// Sum of all active events on one pad, saturating at 4095.
std::array<std::uint16_t, kTaxelCount> render_pad(std::span<const ContactEvent> script,
                                                  PadId pad, double t_s);

}  // namespace vtw
