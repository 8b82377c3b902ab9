#include <doctest.h>

#include <cmath>
#include <set>

#include "vtw/errors.hpp"
#include "vtw/fiducial.hpp"
#include "vtw/sim.hpp"
#include "vtw/wire.hpp"

using namespace vtw;

namespace {

SessionSpec default_spec(double duration_s, std::uint64_t seed = 1) {
  SessionSpec spec;
  spec.duration_s = duration_s;
  spec.rng_seed = seed;
  return spec;
}

std::uint64_t count_distinct_codes(const std::vector<VideoFrameRecord>& video) {
  std::set<std::uint16_t> seqs;
  FiducialCode code;
  for (const VideoFrameRecord& record : video) {
    REQUIRE(record.fiducial.has_value());
    REQUIRE(decode_fiducial(*record.fiducial, code) == FiducialError::Ok);
    seqs.insert(code.code_seq);
  }
  return seqs.size();
}

}  // namespace

TEST_CASE("default 1 s session hits the nominal counts") {
  const SimulatedSession session = simulate_session(default_spec(1.0));
  CHECK(session.truth.tactile_emit_host_us.size() == 23);
  CHECK(session.left_bytes.size() == 23 * kWireFrameSize);
  CHECK(session.right_bytes.size() == 23 * kWireFrameSize);
  CHECK(session.video.size() == 60);
  CHECK(session.truth.distinct_code_count == 30);
  CHECK(count_distinct_codes(session.video) == 30);
}

TEST_CASE("identity device clock stamps true host time") {
  const SimulatedSession session = simulate_session(default_spec(2.0));
  const auto [frames, diag] = decode_stream(session.left_bytes);
  REQUIRE(diag.frames_ok == session.truth.tactile_emit_host_us.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto expected =
        static_cast<std::uint64_t>(std::llround(session.truth.tactile_emit_host_us[i]));
    CHECK(frames[i].device_ts_us == expected);
  }
}

TEST_CASE("drift accumulates linearly: 50 ppm over 600 s is 30 ms") {
  SessionSpec spec = default_spec(600.0);
  spec.device_clock.drift_ppm = 50.0;
  const SimulatedSession session = simulate_session(spec);
  const auto [frames, diag] = decode_stream(session.right_bytes);
  REQUIRE(diag.frames_ok > 0);
  const std::size_t last = frames.size() - 1;
  const double truth = session.truth.tactile_emit_host_us[last];
  const double error = static_cast<double>(frames[last].device_ts_us) - truth;
  CHECK(error == doctest::Approx(30000.0).epsilon(0.01));  // 50e-6 * 600 s
}

TEST_CASE("same seed reproduces byte-identical sessions") {
  SessionSpec spec = default_spec(3.0, 99);
  spec.device_clock.jitter_std_us = 500.0;
  spec.video_clock.jitter_std_us = 2000.0;
  spec.contact_script.push_back({0.5, 2.5, PadId::Left, 6.0, 16.0, 3.0, 3000,
                                 ContactProfile::Gaussian});
  const SimulatedSession a = simulate_session(spec);
  const SimulatedSession b = simulate_session(spec);
  CHECK(a.left_bytes == b.left_bytes);
  CHECK(a.right_bytes == b.right_bytes);
  CHECK(a.left_host_stamps == b.left_host_stamps);
  CHECK(a.video == b.video);

  SessionSpec other = spec;
  other.rng_seed = 100;
  const SimulatedSession c = simulate_session(other);
  CHECK(a.left_bytes != c.left_bytes);
}

TEST_CASE("decoding closure: simulated bytes decode cleanly") {
  SessionSpec spec = default_spec(5.0, 3);
  spec.device_clock.jitter_std_us = 200.0;
  const SimulatedSession session = simulate_session(spec);
  for (const auto* bytes : {&session.left_bytes, &session.right_bytes}) {
    const auto [frames, diag] = decode_stream(*bytes);
    CHECK(diag.frames_ok == session.truth.tactile_emit_host_us.size());
    CHECK(diag.bytes_skipped_resync == 0);
    CHECK(diag.frames_crc_fail == 0);
    CHECK(diag.seq_gaps.empty());
  }
}

TEST_CASE("clock consistency: inverting the model recovers host time within 4 sigma") {
  SessionSpec spec = default_spec(60.0, 17);
  spec.device_clock = {2500, 80.0, 1500.0};
  const SimulatedSession session = simulate_session(spec);
  const auto [frames, diag] = decode_stream(session.left_bytes);
  REQUIRE(diag.frames_ok == session.truth.tactile_emit_host_us.size());
  std::size_t within = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double recovered =
        (static_cast<double>(frames[i].device_ts_us) - static_cast<double>(spec.device_clock.offset_us)) /
        (1.0 + spec.device_clock.drift_ppm * 1e-6);
    const double err = std::abs(recovered - session.truth.tactile_emit_host_us[i]);
    if (err <= 4.0 * spec.device_clock.jitter_std_us + 1.0) ++within;
  }
  CHECK(static_cast<double>(within) >= 0.9999 * static_cast<double>(frames.size()));
}

TEST_CASE("render_contact basics") {
  const ContactEvent event{1.0, 2.0, PadId::Left, 6.0, 16.0, 2.0, 3000, ContactProfile::Gaussian};

  SUBCASE("inactive time renders zeros") {
    const auto grid = render_contact(event, 0.5);
    for (std::uint16_t v : grid) CHECK(v == 0);
  }
  SUBCASE("center taxel reads the peak") {
    const auto grid = render_contact(event, 1.5);
    CHECK(grid[6 * kPadCols + 16] == 3000);
  }
  SUBCASE("gaussian profile matches the formula") {
    const auto grid = render_contact(event, 1.5);
    const double expected = 3000.0 * std::exp(-(2.0 * 2.0) / (2.0 * 2.0 * 2.0));
    CHECK(grid[6 * kPadCols + 18] == static_cast<std::uint16_t>(std::lround(expected)));
  }
  SUBCASE("zero outside three radii") {
    const auto grid = render_contact(event, 1.5);
    CHECK(grid[6 * kPadCols + 16 + 7] == 0);
  }
}

TEST_CASE("overlapping plateau events saturate at 4095") {
  std::vector<ContactEvent> script;
  script.push_back({0.0, 1.0, PadId::Left, 6.0, 10.0, 4.0, 3000, ContactProfile::Plateau});
  script.push_back({0.0, 1.0, PadId::Left, 6.0, 13.0, 4.0, 2000, ContactProfile::Plateau});
  const auto grid = render_pad(script, PadId::Left, 0.5);
  CHECK(grid[6 * kPadCols + 11] == 4095);  // inside both disks
  CHECK(grid[6 * kPadCols + 7] == 3000);   // first disk only
  CHECK(grid[6 * kPadCols + 17] == 2000);  // second disk only
  const auto right = render_pad(script, PadId::Right, 0.5);
  for (std::uint16_t v : right) CHECK(v == 0);
}

TEST_CASE("invalid specs are rejected") {
  SessionSpec spec = default_spec(1.0);
  SUBCASE("zero rate") {
    spec.tactile_rate_hz = 0.0;
    CHECK_THROWS_AS(simulate_session(spec), InvalidSpec);
  }
  SUBCASE("fiducial faster than video") {
    spec.fiducial_rate_hz = 120.0;
    CHECK_THROWS_AS(simulate_session(spec), InvalidSpec);
  }
  SUBCASE("negative jitter") {
    spec.device_clock.jitter_std_us = -1.0;
    CHECK_THROWS_AS(simulate_session(spec), InvalidSpec);
  }
  SUBCASE("drift out of range") {
    spec.video_clock.drift_ppm = 20000.0;
    CHECK_THROWS_AS(simulate_session(spec), InvalidSpec);
  }
  SUBCASE("contact outside the grid") {
    spec.contact_script.push_back({0.0, 1.0, PadId::Left, 20.0, 5.0, 1.0, 100,
                                   ContactProfile::Gaussian});
    CHECK_THROWS_AS(simulate_session(spec), InvalidSpec);
  }
  SUBCASE("contact with inverted interval") {
    spec.contact_script.push_back({1.0, 0.5, PadId::Left, 5.0, 5.0, 1.0, 100,
                                   ContactProfile::Gaussian});
    CHECK_THROWS_AS(simulate_session(spec), InvalidSpec);
  }
}

TEST_CASE("extracted sample count equals the simulator's distinct code count") {
  SessionSpec spec = default_spec(10.0, 8);
  spec.video_clock.drift_ppm = 40.0;
  spec.video_clock.jitter_std_us = 1000.0;
  const SimulatedSession session = simulate_session(spec);
  ExtractTally tally;
  const auto samples = extract_code_samples(session.video, &tally);
  CHECK(samples.size() == session.truth.distinct_code_count);
  CHECK(tally.frames_undecodable == 0);
}

TEST_CASE("fiducial refresh is locked to the frame grid") {
  const SimulatedSession session = simulate_session(default_spec(1.0));
  FiducialCode code;
  for (const VideoFrameRecord& record : session.video) {
    REQUIRE(decode_fiducial(*record.fiducial, code) == FiducialError::Ok);
    CHECK(code.code_seq == record.frame_index / 2);  // 60 Hz video, 30 Hz refresh
    if (record.frame_index % 2 == 0) {
      const auto expected = static_cast<std::uint64_t>(
          std::llround(session.truth.video_capture_host_us[record.frame_index]));
      CHECK(code.host_ts_us == expected);
    }
  }
}
