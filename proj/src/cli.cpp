#include "vtw/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtw/checkpoint.hpp"
#include "vtw/config.hpp"
#include "vtw/episode.hpp"
#include "vtw/errors.hpp"
#include "vtw/fusion.hpp"
#include "vtw/session_io.hpp"
#include "vtw/sync.hpp"

namespace vtw {

namespace {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct DecodedPad {
  std::vector<TaxelFrame> frames;  // host stamps attached
  DecodeDiagnostics diagnostics;
  std::uint64_t stamps_available = 0;
  std::uint64_t frames_unstamped = 0;
};

// Decodes one pad stream and attaches receipt stamps by stream order. Frames
// beyond the stamp list stay unstamped and are excluded from alignment.
DecodedPad decode_pad(const std::filesystem::path& dir, PadId pad) {
  DecodedPad out;
  const auto bytes = read_pad_bytes(dir, pad);
  auto [frames, diagnostics] = decode_stream(bytes);
  const auto stamps = read_stamps(dir, pad);
  out.stamps_available = stamps.size();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i < stamps.size()) {
      frames[i].host_ts_us = stamps[i];
    } else {
      ++out.frames_unstamped;
    }
  }
  std::erase_if(frames, [](const TaxelFrame& f) { return !f.host_ts_us.has_value(); });
  out.frames = std::move(frames);
  out.diagnostics = std::move(diagnostics);
  return out;
}

void print_diagnostics(const std::string& prefix, const DecodeDiagnostics& diag) {
  std::cout << prefix << ".frames_ok = " << diag.frames_ok << '\n'
            << prefix << ".frames_crc_fail = " << diag.frames_crc_fail << '\n'
            << prefix << ".bytes_skipped_resync = " << diag.bytes_skipped_resync << '\n'
            << prefix << ".trailing_bytes = " << diag.trailing_bytes << '\n'
            << prefix << ".seq_gaps = " << diag.seq_gaps.size() << '\n';
}

int cmd_simulate(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                 std::optional<std::uint64_t> seed) {
  SessionSpec spec = parse_session_spec(read_text_file(config_path));
  if (seed.has_value()) spec.rng_seed = *seed;
  const SimulatedSession session = simulate_session(spec);
  write_session_dir(out_dir, session, spec);
  std::cout << "frames_per_pad = " << session.truth.tactile_emit_host_us.size() << '\n'
            << "video_frames = " << session.video.size() << '\n'
            << "distinct_codes = " << session.truth.distinct_code_count << '\n'
            << "out_dir = " << out_dir.string() << '\n';
  return 0;
}

int cmd_decode(const std::filesystem::path& dir) {
  for (PadId pad : {PadId::Left, PadId::Right}) {
    const DecodedPad decoded = decode_pad(dir, pad);
    print_diagnostics(std::string("pad.") + pad_name(pad), decoded.diagnostics);
  }
  return 0;
}

int cmd_sync(const std::filesystem::path& dir, const std::filesystem::path& out_path,
             std::int64_t tolerance_us) {
  const DecodedPad left = decode_pad(dir, PadId::Left);
  const DecodedPad right = decode_pad(dir, PadId::Right);

  auto video = read_video_records(dir / "video.vfr");
  ExtractTally tally;
  const auto samples = extract_code_samples(video, &tally);
  const ClockModel model = fit_clock_model(to_clock_samples(samples));
  apply_clock_model(model, video);

  auto [pairs, report] = align_streams(video, left.frames, right.frames, tolerance_us);

  std::string config_echo;
  try {
    config_echo = read_text_file(dir / "session.cfg");
  } catch (const IoFailure&) {
    // Session directories from other tools may omit the config echo.
  }
  EpisodeWriter writer(out_path, "source = " + dir.string(), config_echo);
  for (const SyncedPair& pair : pairs) {
    EpisodeRecord record;
    record.pair = pair;
    writer.append(record);
  }
  writer.close();

  std::cout << "code_samples = " << samples.size() << '\n'
            << "clock_slope_us_per_frame = " << model.slope_us_per_frame << '\n'
            << "clock_intercept_us = " << model.intercept_us << '\n'
            << "clock_residual_rms_us = " << model.residual_rms_us << '\n'
            << "clock_inliers = " << model.inlier_count << '\n'
            << "clock_outliers = " << model.outlier_count << '\n'
            << report.to_kv() << "episode = " << out_path.string() << '\n';
  return 0;
}

int cmd_pack(const std::filesystem::path& in_path, const std::filesystem::path& out_path) {
  const Episode episode = read_episode(in_path);
  EpisodeWriter writer(out_path, episode.meta, episode.config_echo);
  for (EpisodeRecord record : episode.records) {
    record.tactile_image = stack_pads<float>(record.pair.left, record.pair.right);
    writer.append(record);
  }
  writer.close();
  std::cout << "pairs = " << writer.records_written() << '\n'
            << "episode = " << out_path.string() << '\n';
  return 0;
}

int cmd_mask(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
             std::uint64_t seed, const MaskPolicy& policy) {
  const Episode episode = read_episode(in_path);
  Rng rng(seed);
  EpisodeWriter writer(out_path, episode.meta, episode.config_echo);
  std::uint64_t unmasked = 0;
  for (EpisodeRecord record : episode.records) {
    record.mask = draw_mask(rng, policy);
    if (!record.mask->ratio_drawn.has_value()) ++unmasked;
    writer.append(record);
  }
  writer.close();
  std::cout << "pairs = " << writer.records_written() << '\n'
            << "masks_unmasked = " << unmasked << '\n'
            << "episode = " << out_path.string() << '\n';
  return 0;
}

int cmd_fuse_eval(const std::filesystem::path& in_path,
                  const std::optional<std::filesystem::path>& checkpoint_path,
                  std::uint64_t seed, const MaskPolicy& policy,
                  const std::optional<std::filesystem::path>& report_path) {
  const Episode episode = read_episode(in_path);
  FusionModel<double> model = checkpoint_path.has_value()
                                  ? FusionModel<double>::from_table(read_checkpoint(*checkpoint_path))
                                  : FusionModel<double>::random(seed);
  // One stream drives masks and the synthetic image embeddings; per record the
  // draw order is mask first, then the embedding.
  Rng rng(Rng::mix(seed, 0x66757365));
  double loss_sum = 0.0;
  std::uint64_t count = 0;
  for (const EpisodeRecord& record : episode.records) {
    TactileImage<double> target;
    if (record.tactile_image.has_value()) {
      target = record.tactile_image->cast<double>();
    } else {
      target = stack_pads<double>(record.pair.left, record.pair.right);
    }
    const PatchMask mask = draw_mask(rng, policy);
    const RgbTactileImage<double> masked =
        apply_mask(colormap(target), mask, model.mask_token);
    const VectorX<double> z_tac = tactile_encode(masked, model.cnn);
    VectorX<double> z_img(model.embed_dim);
    for (Eigen::Index i = 0; i < z_img.size(); ++i) z_img(i) = rng.normal();
    const VectorX<double> fused = fuse(z_tac, z_img, model.fusion);
    const TactileImage<double> predicted = reconstruct(fused, model.decoder);
    loss_sum += reconstruction_loss(target, predicted);
    ++count;
  }
  const double mean_loss = count > 0 ? loss_sum / static_cast<double>(count) : 0.0;
  char hex[64];
  std::snprintf(hex, sizeof(hex), "%a", mean_loss);
  std::cout << "pairs = " << count << '\n';
  std::cout << "mean_reconstruction_loss = " << std::setprecision(17) << mean_loss << '\n';
  std::cout << "mean_reconstruction_loss_hex = " << hex << '\n';
  if (report_path.has_value()) {
    json report{{"pairs", count},
                {"mean_reconstruction_loss", mean_loss},
                {"mean_reconstruction_loss_hex", hex},
                {"seed", seed}};
    std::ofstream out(*report_path);
    if (!out) throw IoFailure("cannot write " + report_path->string());
    out << report.dump(2) << '\n';
  }
  return 0;
}

int cmd_inspect(const std::vector<std::string>& paths) {
  std::vector<std::filesystem::path> fs_paths(paths.begin(), paths.end());
  const DatasetStats stats = compute_stats(fs_paths);
  std::cout << stats.to_kv();
  return stats.episode_count == 0 && !fs_paths.empty() ? 1 : 0;
}

// --- bench -----------------------------------------------------------------

struct BenchStreams {
  std::vector<std::uint8_t> left_bytes, right_bytes;
  std::vector<std::uint64_t> left_stamps, right_stamps;
  std::vector<VideoFrameRecord> video;
};

// Synthetic streams shaped like a default-rate session covering
// frames_per_pad tactile frames per pad.
BenchStreams make_bench_streams(std::uint64_t frames_per_pad, std::uint64_t seed) {
  BenchStreams streams;
  Rng rng(seed);
  TaxelFrame frame;
  for (std::uint64_t i = 0; i < frames_per_pad; ++i) {
    const double host_us = static_cast<double>(i) * 1e6 / 23.0;
    const std::uint64_t stamp = static_cast<std::uint64_t>(std::llround(host_us));
    frame.seq = static_cast<std::uint16_t>(i);
    frame.device_ts_us = stamp;
    for (auto& taxel : frame.taxels) {
      taxel = static_cast<std::uint16_t>(rng.next_u64() & 0x0FFF);
    }
    frame.pad_id = PadId::Left;
    append_frame(streams.left_bytes, frame);
    streams.left_stamps.push_back(stamp);
    frame.pad_id = PadId::Right;
    append_frame(streams.right_bytes, frame);
    streams.right_stamps.push_back(stamp);
  }
  const std::uint64_t n_video = frames_per_pad * 60 / 23;
  streams.video.reserve(n_video);
  for (std::uint64_t i = 0; i < n_video; ++i) {
    VideoFrameRecord record;
    record.frame_index = i;
    record.decoded_host_ts_us = static_cast<std::uint64_t>(std::llround(static_cast<double>(i) * 1e6 / 60.0));
    streams.video.push_back(std::move(record));
  }
  return streams;
}

int cmd_bench(const std::string& what, std::uint64_t frames, std::uint64_t seed,
              const std::optional<std::filesystem::path>& report_path) {
  using Clock = std::chrono::steady_clock;
  const std::uint64_t frames_per_pad = std::max<std::uint64_t>(frames / 2, 1);
  const BenchStreams streams = make_bench_streams(frames_per_pad, seed);

  double decode_seconds = 0.0;
  double align_seconds = 0.0;
  std::uint64_t decoded = 0;
  std::uint64_t pairs = 0;

  std::vector<TaxelFrame> left, right;
  if (what == "decode" || what == "pipeline") {
    const auto start = Clock::now();
    auto [l, dl] = decode_stream(streams.left_bytes);
    auto [r, dr] = decode_stream(streams.right_bytes);
    decode_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    decoded = dl.frames_ok + dr.frames_ok;
    left = std::move(l);
    right = std::move(r);
  }
  if (what == "align" || what == "pipeline") {
    if (left.empty()) {
      auto [l, dl] = decode_stream(streams.left_bytes);
      auto [r, dr] = decode_stream(streams.right_bytes);
      left = std::move(l);
      right = std::move(r);
      decoded = left.size() + right.size();
    }
    for (std::size_t i = 0; i < left.size(); ++i) left[i].host_ts_us = streams.left_stamps[i];
    for (std::size_t i = 0; i < right.size(); ++i) right[i].host_ts_us = streams.right_stamps[i];
    const auto start = Clock::now();
    auto [aligned, report] = align_streams(streams.video, left, right);
    align_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    pairs = report.pairs_emitted;
  }

  const double total_seconds = decode_seconds + align_seconds;
  const std::uint64_t total_frames = frames_per_pad * 2;
  const double frames_per_sec = total_seconds > 0.0
                                    ? static_cast<double>(total_frames) / total_seconds
                                    : 0.0;
  json report{{"bench", what},
              {"tactile_frames", total_frames},
              {"video_frames", streams.video.size()},
              {"decoded_frames", decoded},
              {"pairs_emitted", pairs},
              {"decode_seconds", decode_seconds},
              {"align_seconds", align_seconds},
              {"seconds", total_seconds},
              {"frames_per_sec", frames_per_sec}};
  std::cerr << "bench " << what << ": " << static_cast<std::uint64_t>(frames_per_sec)
            << " tactile frames/s" << '\n';
  std::cout << report.dump(2) << '\n';
  if (report_path.has_value()) {
    std::ofstream out(*report_path);
    if (!out) throw IoFailure("cannot write " + report_path->string());
    out << report.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"portable visuo-tactile capture pipeline"};
  app.require_subcommand(1);

  // simulate
  std::string config_path, out_dir;
  std::optional<std::uint64_t> sim_seed;
  auto* simulate = app.add_subcommand("simulate", "run a synthetic capture session");
  simulate->add_option("--config", config_path, "session config file")->required();
  simulate->add_option("--out", out_dir, "output session directory")->required();
  simulate->add_option("--seed", sim_seed, "override the config rng_seed");

  // decode
  std::string decode_dir;
  auto* decode = app.add_subcommand("decode", "decode pad byte streams and print diagnostics");
  decode->add_option("--in", decode_dir, "session directory")->required();

  // sync
  std::string sync_dir, sync_out;
  std::int64_t tolerance_us = kDefaultToleranceUs;
  auto* sync = app.add_subcommand("sync", "recover host clock and align streams into an episode");
  sync->add_option("--in", sync_dir, "session directory")->required();
  sync->add_option("--out", sync_out, "output episode file")->required();
  sync->add_option("--tolerance-us", tolerance_us, "pairing tolerance in microseconds");

  // pack
  std::string pack_in, pack_out;
  auto* pack = app.add_subcommand("pack", "precompute tactile images into an episode");
  pack->add_option("--in", pack_in, "input episode")->required();
  pack->add_option("--out", pack_out, "output episode")->required();

  // mask
  std::string mask_in, mask_out;
  std::uint64_t mask_seed = 0;
  MaskPolicy mask_policy;
  auto* mask = app.add_subcommand("mask", "draw and store patch masks per pair");
  mask->add_option("--in", mask_in, "input episode")->required();
  mask->add_option("--out", mask_out, "output episode")->required();
  mask->add_option("--seed", mask_seed, "mask RNG seed");
  mask->add_option("--mask-prob", mask_policy.mask_prob, "probability a sample is masked");
  mask->add_option("--ratio-min", mask_policy.ratio_min, "minimum masking ratio");
  mask->add_option("--ratio-max", mask_policy.ratio_max, "maximum masking ratio");

  // fuse-eval
  std::string fuse_in;
  std::optional<std::filesystem::path> fuse_checkpoint;
  std::optional<std::filesystem::path> fuse_report;
  std::uint64_t fuse_seed = 42;
  MaskPolicy fuse_policy;
  auto* fuse_eval =
      app.add_subcommand("fuse-eval", "run mask/fuse/reconstruct and report the loss");
  fuse_eval->add_option("--in", fuse_in, "input episode")->required();
  fuse_eval->add_option("--checkpoint", fuse_checkpoint, "weight checkpoint (seeded random if absent)");
  fuse_eval->add_option("--seed", fuse_seed, "seed for masks, embeddings and random weights");
  fuse_eval->add_option("--mask-prob", fuse_policy.mask_prob, "probability a sample is masked");
  fuse_eval->add_option("--ratio-min", fuse_policy.ratio_min, "minimum masking ratio");
  fuse_eval->add_option("--ratio-max", fuse_policy.ratio_max, "maximum masking ratio");
  fuse_eval->add_option("--out", fuse_report, "write a JSON report here");

  // inspect
  std::vector<std::string> inspect_paths;
  auto* inspect = app.add_subcommand("inspect", "aggregate stats over episode files");
  inspect->add_option("paths", inspect_paths, "episode files")->required();

  // bench
  std::string bench_what;
  std::uint64_t bench_frames = 100000;
  std::uint64_t bench_seed = 1;
  std::optional<std::filesystem::path> bench_report;
  auto* bench = app.add_subcommand("bench", "throughput benchmarks with a JSON report");
  bench->add_option("what", bench_what, "decode, align or pipeline")
      ->required()
      ->check(CLI::IsMember({"decode", "align", "pipeline"}));
  bench->add_option("--frames", bench_frames, "total tactile frames");
  bench->add_option("--seed", bench_seed, "stream generator seed");
  bench->add_option("--out", bench_report, "write the JSON report here");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("vtw");
  for (const std::string& arg : args) argv.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n' << app.help() << '\n';
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(config_path, out_dir, sim_seed);
    if (decode->parsed()) return cmd_decode(decode_dir);
    if (sync->parsed()) return cmd_sync(sync_dir, sync_out, tolerance_us);
    if (pack->parsed()) return cmd_pack(pack_in, pack_out);
    if (mask->parsed()) return cmd_mask(mask_in, mask_out, mask_seed, mask_policy);
    if (fuse_eval->parsed()) {
      return cmd_fuse_eval(fuse_in, fuse_checkpoint, fuse_seed, fuse_policy, fuse_report);
    }
    if (inspect->parsed()) return cmd_inspect(inspect_paths);
    if (bench->parsed()) return cmd_bench(bench_what, bench_frames, bench_seed, bench_report);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace vtw
