// navp: run, compare and serve adaptive-offload experiments.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "navp/codec.hpp"
#include "navp/error.hpp"
#include "navp/harness.hpp"
#include "navp/tcp.hpp"
#include "navp/wire.hpp"

namespace fs = std::filesystem;
using namespace navp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::vector<FrameRecord> load_records(const fs::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + csv.string());
  return read_csv(in);
}

// Summary numbers are recomputed from the CSV; scenario, mode and seed come
// from the sibling summary file.
RunSummary load_run(const fs::path& csv, std::vector<FrameRecord>& records) {
  records = load_records(csv);
  const fs::path js = summary_path_for(csv);
  std::ifstream in(js, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "missing summary " + js.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const RunSummary meta = summary_from_json(ss.str());
  RunSummary s = summarize(records);
  s.scenario = meta.scenario;
  s.mode = meta.mode;
  s.seed = meta.seed;
  s.errors = meta.errors;
  s.skipped_ticks = meta.skipped_ticks;
  s.duration_us = meta.duration_us;
  return s;
}

// One deterministic message of each type.
std::vector<std::pair<std::string, WireMessage>> golden_messages() {
  std::vector<std::pair<std::string, WireMessage>> out;
  out.emplace_back("probe_req", make_probe_request(7, 1'000'000));
  out.emplace_back("probe_resp", make_probe_response(make_probe_request(7, 1'000'000)));
  const Scene scene = generate_scene_with_truth(42, 32, 18, ScenePalette::standard(), 3);
  const Frame frame = scene.frame.with_index(3);
  out.emplace_back("frame_req_raw", make_frame_request(encode(frame, 100, CodecId::kRaw), 100,
                                                       2'500'000));
  out.emplace_back("frame_req_quant", make_frame_request(encode(frame, 70, CodecId::kQuant), 70,
                                                         2'500'000));
  out.emplace_back("frame_resp", make_frame_response(3, 2'500'000, scene.truth, 12'345));
  out.emplace_back("error", make_error(9, 3'000'000, WireErrorCode::kUndecodablePayload,
                                       "payload does not decode"));
  return out;
}

int cmd_scenarios() {
  std::printf("%-14s %14s %12s %14s %8s\n", "name", "downlink_mbps", "uplink_mbps",
              "base_rtt_ms", "loss");
  for (const auto& s : preset_scenarios())
    std::printf("%-14s %14g %12g %14g %7g%%\n", s.name.c_str(), s.downlink_mbps, s.uplink_mbps,
                s.base_rtt_ms, s.loss_prob * 100.0);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"navp: network-adaptive video offload experiments"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run one experiment");
  std::string scenario_arg, mode_arg, codec_arg, out_arg, config_arg, feed_arg, host_arg;
  std::uint64_t frames = 0, seed = 0;
  std::uint32_t width = 0, height = 0;
  double probe_ms = 0;
  std::uint16_t port = 0;
  bool realtime = false, quiet = false;
  run->add_option("--scenario", scenario_arg, "Preset name or scenario JSON file");
  run->add_option("--mode", mode_arg, "static | adaptive")
      ->check(CLI::IsMember({"static", "adaptive"}));
  run->add_option("--frames", frames, "Frames to send")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Run seed");
  run->add_option("--out", out_arg, "Per-frame CSV path (summary JSON written alongside)");
  run->add_option("--codec", codec_arg, "raw | jpeg | quant")
      ->check(CLI::IsMember({"raw", "jpeg", "quant"}));
  run->add_option("--config", config_arg, "JSON config file")->check(CLI::ExistingFile);
  run->add_option("--width", width, "Capture width");
  run->add_option("--height", height, "Capture height");
  run->add_option("--probe-interval-ms", probe_ms, "Probe period");
  run->add_option("--rtt-feed", feed_arg, "probe | frame | both")
      ->check(CLI::IsMember({"probe", "frame", "both"}));
  run->add_flag("--realtime", realtime, "Talk to a live server over TCP");
  run->add_option("--host", host_arg, "Server host for --realtime");
  run->add_option("--port", port, "Server port for --realtime");
  run->add_flag("-q,--quiet", quiet, "Print nothing on success");

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare two runs of the same scenario and seed");
  std::string a_arg, b_arg, cmp_out;
  cmp->add_option("--a", a_arg, "Baseline CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--b", b_arg, "Candidate CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--out", cmp_out, "Output prefix for plot data and comparison JSON");

  app.add_subcommand("scenarios", "List network presets");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve NAVP over TCP with the palette backend");
  std::uint16_t serve_port = kDefaultPort;
  bool modelled = false, serialize = false;
  serve->add_option("--port", serve_port, "Listen port (0 = ephemeral)");
  serve->add_flag("--modelled-cost", modelled, "Report and pace by the calibrated cost model");
  serve->add_flag("--serialize", serialize, "Process frames one at a time");

  // golden
  auto* golden = app.add_subcommand("golden", "Write one wire message of each type");
  std::string golden_dir = "tests/golden";
  golden->add_option("--dir", golden_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand("scenarios")) return cmd_scenarios();

    if (run->parsed()) {
      RunConfig cfg;
      cfg.session.codec = default_codec();
      if (!config_arg.empty()) cfg = load_config_file(cfg, config_arg);
      if (!scenario_arg.empty()) {
        try {
          cfg.scenario = load_scenario(scenario_arg);
        } catch (const Error& e) {
          std::fprintf(stderr, "navp: %s\n", e.what());
          return kExitUsage;
        }
      }
      if (!mode_arg.empty()) cfg.session.mode = parse_mode(mode_arg);
      if (run->count("--frames")) cfg.session.frames = frames;
      if (run->count("--seed")) cfg.session.seed = seed;
      if (!codec_arg.empty()) cfg.session.codec = parse_codec(codec_arg);
      if (run->count("--width")) cfg.session.width = width;
      if (run->count("--height")) cfg.session.height = height;
      if (run->count("--probe-interval-ms"))
        cfg.session.probe_interval_us = static_cast<Micros>(probe_ms * 1000.0);
      if (!feed_arg.empty()) cfg.session.rtt_feed = parse_rtt_feed(feed_arg);
      if (realtime) cfg.realtime = true;
      if (!host_arg.empty()) cfg.realtime_options.host = host_arg;
      if (run->count("--port")) cfg.realtime_options.port = port;
      if (!out_arg.empty()) cfg.output = out_arg;
      if (cfg.session.codec == CodecId::kJpeg && !jpeg_available())
        throw Error(ErrorCode::kUnknownCodec, "this build has no JPEG support");

      const ExperimentResult r = run_experiment(cfg);
      if (!quiet) std::cout << summary_to_json(r.summary);
      if (r.session.partial) {
        std::fprintf(stderr, "navp: run ended early; results are partial\n");
        return kExitRuntime;
      }
      return kExitOk;
    }

    if (cmp->parsed()) {
      std::vector<FrameRecord> ra, rb;
      const RunSummary sa = load_run(a_arg, ra);
      const RunSummary sb = load_run(b_arg, rb);
      const Comparison c = compare(sa, sb);
      std::cout << comparison_table(c);
      if (!cmp_out.empty()) {
        const fs::path prefix(cmp_out);
        if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
        std::ofstream js(prefix.string() + ".comparison.json");
        js << comparison_to_json(c);
        std::ofstream frames_csv(prefix.string() + ".frames.csv");
        write_plot_data(frames_csv, sa.mode, ra, sb.mode, rb);
        std::ofstream cdf(prefix.string() + ".rtt_cdf.csv");
        write_rtt_cdf(cdf, sa.mode, ra, sb.mode, rb);
        if (!js || !frames_csv || !cdf)
          throw Error(ErrorCode::kIo, "cannot write outputs under " + cmp_out);
      }
      return kExitOk;
    }

    if (serve->parsed()) {
      const ServerOptions opts{serialize};
      TcpServer server(
          serve_port,
          [modelled]() -> std::unique_ptr<SegmentationBackend> {
            if (modelled)
              return std::make_unique<PaletteBackend>(ScenePalette::standard(),
                                                      CostModel::calibrated());
            return std::make_unique<PaletteBackend>(ScenePalette::standard(), std::nullopt);
          },
          opts);
      server.start();
      std::fprintf(stderr, "navp: serving on port %u\n", static_cast<unsigned>(server.port()));
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      int sig = 0;
      sigwait(&set, &sig);
      server.stop();
      return kExitOk;
    }

    if (golden->parsed()) {
      fs::create_directories(golden_dir);
      for (const auto& [name, msg] : golden_messages()) {
        const auto bytes = encode_message(msg);
        const fs::path p = fs::path(golden_dir) / (name + ".bin");
        std::ofstream out(p, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
        std::printf("%s %zu bytes\n", p.c_str(), bytes.size());
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "navp: %s\n", e.what());
    return e.code() == ErrorCode::kUnknownScenario ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "navp: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
