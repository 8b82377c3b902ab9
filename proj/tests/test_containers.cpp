#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vtw/checkpoint.hpp"
#include "vtw/config.hpp"
#include "vtw/episode.hpp"
#include "vtw/errors.hpp"
#include "vtw/fusion.hpp"

using namespace vtw;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vtw_test_" + name);
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

EpisodeRecord sample_record(Rng& rng, std::uint64_t host_ts, bool extras) {
  EpisodeRecord record;
  record.pair.host_ts_us = host_ts;
  record.pair.skew_left_us = static_cast<std::int64_t>(rng.below(20000)) - 10000;
  record.pair.skew_right_us = static_cast<std::int64_t>(rng.below(20000)) - 10000;
  record.pair.left.pad_id = PadId::Left;
  record.pair.right.pad_id = PadId::Right;
  record.pair.left.seq = static_cast<std::uint16_t>(rng.next_u64());
  record.pair.right.seq = static_cast<std::uint16_t>(rng.next_u64());
  record.pair.left.host_ts_us = host_ts + 5;
  record.pair.right.host_ts_us = host_ts + 7;
  for (auto& t : record.pair.left.taxels) t = static_cast<std::uint16_t>(rng.below(4096));
  for (auto& t : record.pair.right.taxels) t = static_cast<std::uint16_t>(rng.below(4096));
  record.pair.video.frame_index = host_ts / 16000;
  record.pair.video.decoded_host_ts_us = host_ts;
  record.pair.video.fiducial = encode_fiducial({host_ts, static_cast<std::uint16_t>(host_ts / 33000)});
  record.pair.video.image_payload.resize(rng.below(40));
  for (auto& b : record.pair.video.image_payload) b = static_cast<std::uint8_t>(rng.next_u64());
  if (extras) {
    record.proprio = std::vector<float>{1.0f, -2.5f, 0.25f};
    record.tactile_image = stack_pads<float>(record.pair.left, record.pair.right);
    Rng mask_rng(host_ts);
    record.mask = draw_mask(mask_rng);
  }
  return record;
}

bool records_equal(const EpisodeRecord& a, const EpisodeRecord& b) {
  return a.pair.host_ts_us == b.pair.host_ts_us && a.pair.skew_left_us == b.pair.skew_left_us &&
         a.pair.skew_right_us == b.pair.skew_right_us && a.pair.left == b.pair.left &&
         a.pair.right == b.pair.right && a.pair.video == b.pair.video &&
         a.proprio == b.proprio &&
         a.tactile_image.has_value() == b.tactile_image.has_value() &&
         (!a.tactile_image.has_value() || *a.tactile_image == *b.tactile_image) &&
         a.mask == b.mask;
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  const FusionModel<double> model = FusionModel<double>::random(42, 16, 4);
  const TensorTable table = model.to_table();
  const auto path = temp_path("ckpt.vtwt");
  write_checkpoint(path, table);
  const TensorTable loaded = read_checkpoint(path);
  REQUIRE(loaded.entries.size() == table.entries.size());
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    CHECK(loaded.entries[i].name == table.entries[i].name);
    CHECK(loaded.entries[i].shape == table.entries[i].shape);
    // float32 storage: values must round-trip exactly once written.
    for (std::size_t j = 0; j < table.entries[i].data.size(); ++j) {
      CHECK(loaded.entries[i].data[j] ==
            static_cast<double>(static_cast<float>(table.entries[i].data[j])));
    }
  }
  // A write of the loaded table is byte-identical.
  const auto path2 = temp_path("ckpt2.vtwt");
  write_checkpoint(path2, loaded);
  CHECK(slurp(path) == slurp(path2));

  const FusionModel<double> reloaded = FusionModel<double>::from_table(loaded);
  CHECK(reloaded.embed_dim == 16);
  CHECK(reloaded.fusion.tactile_round.wq.rows() == 16);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("checkpoint error paths") {
  const auto path = temp_path("bad.vtwt");
  spit(path, {'X', 'X', 'X', 'X', 0, 0});
  CHECK_THROWS_AS(read_checkpoint(path), BadMagic);

  spit(path, {'V', 'T', 'W', 'T', 9, 0, 0, 0, 0, 0});
  CHECK_THROWS_AS(read_checkpoint(path), BadFileVersion);

  TensorTable table;
  table.add("w", {8}).data.assign(8, 1.5);
  write_checkpoint(path, table);
  auto bytes = slurp(path);
  bytes.resize(bytes.size() - 3);
  spit(path, bytes);
  CHECK_THROWS_AS(read_checkpoint(path), TruncatedFile);
  std::filesystem::remove(path);
}

TEST_CASE("empty episode round trip") {
  const auto path = temp_path("empty.vtwd");
  Episode episode;
  episode.meta = "unit";
  episode.config_echo = "duration_s = 0\n";
  write_episode(path, episode);
  const Episode loaded = read_episode(path);
  CHECK(loaded.meta == "unit");
  CHECK(loaded.config_echo == episode.config_echo);
  CHECK(loaded.records.empty());
  const DatasetStats stats = compute_stats({path});
  CHECK(stats.episode_count == 1);
  CHECK(stats.pair_count == 0);
  std::filesystem::remove(path);
}

TEST_CASE("1000-record episode round trip, byte-identical rewrite") {
  const auto path = temp_path("big.vtwd");
  Rng rng(2025);
  Episode episode;
  episode.meta = "big";
  for (int i = 0; i < 1000; ++i) {
    episode.records.push_back(
        sample_record(rng, 10'000 + static_cast<std::uint64_t>(i) * 43'478, i % 3 == 0));
  }
  write_episode(path, episode);
  const Episode loaded = read_episode(path);
  REQUIRE(loaded.records.size() == episode.records.size());
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    CHECK(records_equal(loaded.records[i], episode.records[i]));
  }
  const auto path2 = temp_path("big2.vtwd");
  write_episode(path2, loaded);
  CHECK(slurp(path) == slurp(path2));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("truncated episode names the failing offset") {
  const auto path = temp_path("trunc.vtwd");
  Rng rng(3);
  Episode episode;
  for (int i = 0; i < 3; ++i) {
    episode.records.push_back(sample_record(rng, 1000 + static_cast<std::uint64_t>(i) * 50'000, false));
  }
  write_episode(path, episode);
  auto bytes = slurp(path);
  bytes.resize(bytes.size() - 100);  // cut the last record mid-payload
  spit(path, bytes);
  try {
    read_episode(path);
    FAIL("expected TruncatedFile");
  } catch (const TruncatedFile& e) {
    CHECK(e.offset <= bytes.size());
    CHECK(e.offset > 0);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("episode magic, version and count checks") {
  const auto path = temp_path("hdr.vtwd");
  spit(path, {'N', 'O', 'P', 'E', 1, 0});
  CHECK_THROWS_AS(read_episode(path), BadMagic);

  spit(path, {'V', 'T', 'W', 'D', 7, 0});
  CHECK_THROWS_AS(read_episode(path), BadFileVersion);

  Episode episode;
  write_episode(path, episode);
  auto bytes = slurp(path);
  bytes.push_back(0xAB);  // trailing garbage
  spit(path, bytes);
  CHECK_THROWS_AS(read_episode(path), CountMismatch);
  std::filesystem::remove(path);
}

TEST_CASE("writer enforces strictly increasing host timestamps") {
  const auto path = temp_path("order.vtwd");
  Rng rng(6);
  EpisodeWriter writer(path, "", "");
  writer.append(sample_record(rng, 5000, false));
  CHECK_THROWS_AS(writer.append(sample_record(rng, 5000, false)), UnsortedInput);
  CHECK_THROWS_AS(writer.append(sample_record(rng, 4000, false)), UnsortedInput);
  writer.append(sample_record(rng, 5001, false));
  writer.close();
  CHECK(read_episode(path).records.size() == 2);
  std::filesystem::remove(path);
}

TEST_CASE("stats aggregate across files and isolate failures") {
  Rng rng(4);
  const auto a = temp_path("a.vtwd");
  const auto b = temp_path("b.vtwd");
  const auto missing = temp_path("missing.vtwd");
  Episode ea, eb;
  for (int i = 0; i < 10; ++i) {
    ea.records.push_back(sample_record(rng, 1000 + static_cast<std::uint64_t>(i) * 50'000, true));
  }
  for (int i = 0; i < 20; ++i) {
    eb.records.push_back(sample_record(rng, 2000 + static_cast<std::uint64_t>(i) * 50'000, false));
  }
  write_episode(a, ea);
  write_episode(b, eb);
  std::filesystem::remove(missing);
  const DatasetStats stats = compute_stats({a, b, missing});
  CHECK(stats.episode_count == 2);
  CHECK(stats.pair_count == 30);
  CHECK(stats.frames_left == 30);
  CHECK(stats.frames_right == 30);
  CHECK(stats.masks_stored == 10);
  REQUIRE(stats.failures.size() == 1);
  CHECK(stats.failures[0].first == missing.string());
  std::uint64_t histogram_total = 0;
  for (auto bucket : stats.skew_histogram) histogram_total += bucket;
  CHECK(histogram_total == 2 * stats.pair_count);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("session config parsing") {
  const std::string text =
      "# demo session\n"
      "duration_s = 12.5\n"
      "tactile_rate_hz = 23\n"
      "rng_seed = 99  # inline comment\n"
      "device_clock.drift_ppm = 50\n"
      "device_clock.jitter_std_us = 1500\n"
      "video_clock.offset_us = -250\n"
      "contact.0.pad = left\n"
      "contact.0.t_start_s = 1\n"
      "contact.0.t_end_s = 2\n"
      "contact.0.row = 6\n"
      "contact.0.col = 16\n"
      "contact.0.radius_taxels = 2.5\n"
      "contact.0.peak = 3000\n"
      "contact.0.profile = gaussian\n";
  const SessionSpec spec = parse_session_spec(text);
  CHECK(spec.duration_s == 12.5);
  CHECK(spec.rng_seed == 99);
  CHECK(spec.device_clock.drift_ppm == 50.0);
  CHECK(spec.video_clock.offset_us == -250);
  REQUIRE(spec.contact_script.size() == 1);
  CHECK(spec.contact_script[0].peak_value == 3000);

  // The canonical echo parses back to the same spec.
  const SessionSpec again = parse_session_spec(session_spec_to_config(spec));
  CHECK(again.duration_s == spec.duration_s);
  CHECK(again.contact_script.size() == 1);
  CHECK(again.contact_script[0].radius_taxels == 2.5);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(parse_session_spec("duration = 5\n"), InvalidSpec);
  CHECK_THROWS_AS(parse_session_spec("duration_s = fast\n"), InvalidSpec);
  CHECK_THROWS_AS(parse_session_spec("duration_s\n"), InvalidSpec);
  CHECK_THROWS_AS(parse_session_spec("contact.0.pad = middle\n"), InvalidSpec);
  CHECK_THROWS_AS(parse_session_spec("tactile_rate_hz = -23\n"), InvalidSpec);
}
