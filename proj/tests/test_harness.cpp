#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "navp/harness.hpp"

using namespace navp;

namespace {

RunConfig small_run(const std::string& scenario, Mode mode, std::uint64_t frames) {
  RunConfig c;
  c.scenario = find_scenario(scenario);
  c.session.mode = mode;
  c.session.frames = frames;
  c.session.width = 640;
  c.session.height = 360;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  const auto b = navp::test::read_bytes(p);
  return {b.begin(), b.end()};
}

}  // namespace

TEST_CASE("config JSON overrides defaults") {
  const RunConfig c = apply_config_json(RunConfig{}, R"({
    "scenario": "congested-4g", "mode": "static", "frames": 12, "seed": 5,
    "width": 640, "height": 360, "shapes": 4, "codec": "quant",
    "probe_interval_ms": 100, "pipeline_cap": 2, "window": 3, "hysteresis_ms": 5,
    "rtt_feed": "both", "fidelity": false,
    "link": {"jitter_fraction": 0.2, "jitter": false, "rto_ms": 150},
    "cost_model": {"fixed_ms": 2, "per_pixel_us": 0.01},
    "serialize_inference": true,
    "realtime": {"enabled": true, "host": "10.0.0.1", "port": 5000, "timeout_s": 3},
    "output": "out/x.csv"
  })");
  CHECK(c.scenario == find_scenario("congested-4g"));
  CHECK(c.session.mode == Mode::kStatic);
  CHECK(c.session.frames == 12);
  CHECK(c.session.seed == 5);
  CHECK(c.session.width == 640);
  CHECK(c.session.num_shapes == 4);
  CHECK(c.session.codec == CodecId::kQuant);
  CHECK(c.session.probe_interval_us == 100'000);
  CHECK(c.session.pipeline_cap == 2);
  CHECK(c.session.window == 3);
  CHECK(c.session.hysteresis_ms == 5.0);
  CHECK(c.session.rtt_feed == RttFeed::kBoth);
  CHECK_FALSE(c.session.measure_fidelity);
  CHECK(c.virtual_options.link.jitter_fraction == 0.2);
  CHECK_FALSE(c.virtual_options.link.jitter_enabled);
  CHECK(c.virtual_options.link.rto_ms == 150.0);
  CHECK(c.virtual_options.cost.fixed_us == 2000.0);
  CHECK(c.virtual_options.cost.per_pixel_us == 0.01);
  CHECK(c.virtual_options.server.serialize_inference);
  CHECK(c.realtime);
  CHECK(c.realtime_options.host == "10.0.0.1");
  CHECK(c.realtime_options.port == 5000);
  CHECK(c.realtime_options.timeout == std::chrono::milliseconds(3000));
  REQUIRE(c.output);
  CHECK(*c.output == "out/x.csv");
}

TEST_CASE("config tiers override the table") {
  const RunConfig c = apply_config_json(RunConfig{}, R"({"tiers": [
    {"rtt_threshold_ms": 40, "quality": 85, "max_resolution": 1280, "send_interval_ms": 100},
    {"rtt_threshold_ms": null, "quality": 45, "max_resolution": 640, "send_interval_ms": 300}
  ]})");
  CHECK(c.session.tiers.size() == 2);
  CHECK(c.session.tiers.tier_for(40.0) == 0);
  CHECK(c.session.tiers.tier_for(40.5) == 1);
  CHECK(c.session.tiers.params(1) == EncodingParams{45, 640, 300, 1});
  // Violating table invariants is rejected.
  CHECK_NAVP_ERROR(apply_config_json(RunConfig{}, R"({"tiers": [
    {"rtt_threshold_ms": 40, "quality": 40, "max_resolution": 640, "send_interval_ms": 100},
    {"rtt_threshold_ms": null, "quality": 90, "max_resolution": 640, "send_interval_ms": 300}
  ]})"),
                   ErrorCode::kInvalidArgument);
}

TEST_CASE("config errors") {
  CHECK_NAVP_ERROR(apply_config_json(RunConfig{}, R"({"frams": 3})"), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(apply_config_json(RunConfig{}, R"({"link": {"rto": 3}})"),
                   ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(apply_config_json(RunConfig{}, "{not json"), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(apply_config_json(RunConfig{}, R"({"frames": "many"})"),
                   ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(apply_config_json(RunConfig{}, R"({"scenario": "nosuch"})"),
                   ErrorCode::kUnknownScenario);
  CHECK_NAVP_ERROR(apply_config_json(RunConfig{}, R"({"mode": "sometimes"})"),
                   ErrorCode::kInvalidArgument);
}

TEST_CASE("scenario loading") {
  CHECK(load_scenario("good-5g") == find_scenario("good-5g"));
  CHECK_NAVP_ERROR(load_scenario("nosuch"), ErrorCode::kUnknownScenario);

  const NetworkScenario inline_s =
      load_scenario(R"({"preset": "extreme-4g", "name": "lossy", "loss_prob": 0.2})");
  CHECK(inline_s.name == "lossy");
  CHECK(inline_s.loss_prob == 0.2);
  CHECK(inline_s.base_rtt_ms == find_scenario("extreme-4g").base_rtt_ms);

  navp::test::TempDir dir("scenario");
  const auto path = dir.path() / "sat.json";
  std::ofstream(path) << R"({"name": "sat", "downlink_mbps": 20, "uplink_mbps": 2,
                             "base_rtt_ms": 600, "loss_prob": 0.01})";
  const NetworkScenario s = load_scenario(path.string());
  CHECK(s == NetworkScenario{"sat", 20.0, 2.0, 600.0, 0.01});

  std::ofstream(dir.path() / "bad.json") << R"({"name": "x", "uplink_mbps": -1})";
  CHECK_NAVP_ERROR(load_scenario((dir.path() / "bad.json").string()),
                   ErrorCode::kInvalidArgument);
}

TEST_CASE("static run on ultra-5g writes one row per frame") {
  navp::test::TempDir dir("ultra");
  RunConfig c;
  c.scenario = find_scenario("ultra-5g");
  c.session.mode = Mode::kStatic;
  c.session.frames = 50;
  c.output = dir.path() / "ultra.csv";
  const ExperimentResult r = run_experiment(c);

  std::ifstream in(*c.output);
  std::string header;
  std::getline(in, header);
  CHECK(header == kCsvHeader);
  in.seekg(0);
  const auto rows = read_csv(in);
  REQUIRE(rows.size() == 50);
  for (const auto& row : rows) CHECK(row.tier == 0);
  CHECK(rows == r.session.records);

  const RunSummary s = summary_from_json(slurp(summary_path_for(*c.output)));
  CHECK(s.scenario == "ultra-5g");
  CHECK(s.mode == "static");
  CHECK(s.frames == 50);
  CHECK(s.rtt_median_ms == r.summary.rtt_median_ms);
}

TEST_CASE("adaptive lowers latency on extreme-4g") {
  const auto stat = run_experiment(small_run("extreme-4g", Mode::kStatic, 60));
  const auto adap = run_experiment(small_run("extreme-4g", Mode::kAdaptive, 60));
  CHECK(adap.summary.rtt_median_ms < stat.summary.rtt_median_ms);
  CHECK(adap.summary.inference_mean_ms < stat.summary.inference_mean_ms);
  CHECK(adap.summary.bytes_mean < stat.summary.bytes_mean);
}

TEST_CASE("identical configs write identical files") {
  navp::test::TempDir dir("repeat");
  RunConfig c = small_run("congested-4g", Mode::kAdaptive, 40);
  c.output = dir.path() / "a.csv";
  run_experiment(c);
  c.output = dir.path() / "b.csv";
  run_experiment(c);
  const auto a = navp::test::read_bytes(dir.path() / "a.csv");
  CHECK(!a.empty());
  CHECK(a == navp::test::read_bytes(dir.path() / "b.csv"));
}

TEST_CASE("summary path") {
  CHECK(summary_path_for("out/run.csv") == std::filesystem::path("out/run.summary.json"));
  CHECK(summary_path_for("run") == std::filesystem::path("run.summary.json"));
}

TEST_CASE("comparison arithmetic") {
  RunSummary a;
  a.scenario = "extreme-4g";
  a.mode = "static";
  a.seed = 1;
  a.rtt_median_ms = 400.0;
  a.inference_mean_ms = 100.0;
  a.ssim_mean = 0.80;
  a.bf_mean = 0.50;
  RunSummary b = a;
  b.mode = "adaptive";
  b.rtt_median_ms = 100.0;
  b.inference_mean_ms = 20.0;
  b.ssim_mean = 0.76;
  b.bf_mean = 0.40;

  const Comparison c = compare(a, b);
  CHECK(c.rtt_median_reduction_pct == doctest::Approx(75.0));
  CHECK(c.inference_mean_reduction_pct == doctest::Approx(80.0));
  CHECK(c.ssim_delta_pts == doctest::Approx(-4.0));
  CHECK(c.ssim_delta_rel_pct == doctest::Approx(-5.0));
  CHECK(c.bf_delta_pts == doctest::Approx(-10.0));
  CHECK(c.bf_delta_rel_pct == doctest::Approx(-20.0));

  const Comparison same = compare(a, a);
  CHECK(same.rtt_median_reduction_pct == 0.0);
  CHECK(same.ssim_delta_pts == 0.0);
  CHECK(same.bf_delta_rel_pct == 0.0);

  RunSummary other = b;
  other.scenario = "good-5g";
  CHECK_NAVP_ERROR(compare(a, other), ErrorCode::kMismatchedScenarios);
  other = b;
  other.seed = 2;
  CHECK_NAVP_ERROR(compare(a, other), ErrorCode::kMismatchedScenarios);

  const std::string table = comparison_table(c);
  CHECK(table.find("extreme-4g") != std::string::npos);
  CHECK(comparison_to_json(c).find("\"rtt_median_reduction_pct\": 75") != std::string::npos);
}

TEST_CASE("comparison is recomputable from the CSVs") {
  const auto stat = run_experiment(small_run("hybrid-4g5g", Mode::kStatic, 30));
  const auto adap = run_experiment(small_run("hybrid-4g5g", Mode::kAdaptive, 30));
  std::stringstream sa, sb;
  write_csv(sa, stat.session.records);
  write_csv(sb, adap.session.records);
  RunSummary ra = summarize(read_csv(sa));
  RunSummary rb = summarize(read_csv(sb));
  ra.scenario = rb.scenario = "hybrid-4g5g";
  ra.seed = rb.seed = 1;
  const Comparison from_csv = compare(ra, rb);
  const Comparison direct = compare(stat.summary, adap.summary);
  CHECK(from_csv.rtt_median_reduction_pct == doctest::Approx(direct.rtt_median_reduction_pct));
  CHECK(from_csv.inference_mean_reduction_pct ==
        doctest::Approx(direct.inference_mean_reduction_pct));
  CHECK(from_csv.ssim_delta_pts == doctest::Approx(direct.ssim_delta_pts).epsilon(1e-5));
  CHECK(from_csv.bf_delta_pts == doctest::Approx(direct.bf_delta_pts).epsilon(1e-5));
}

TEST_CASE("plot data and RTT CDF") {
  std::vector<FrameRecord> a = {{0, 0, 0, 300'000, 118'000, 100, 1.0, 1.0},
                                {1, 0, 80'000, 100'000, 118'000, 100, 1.0, 1.0}};
  std::vector<FrameRecord> b = {{0, 4, 0, 200'000, 12'000, 10, 0.9, 0.5}};
  std::ostringstream plot;
  write_plot_data(plot, "static", a, "adaptive", b);
  CHECK(plot.str() ==
        "frame_id,static_tier,static_rtt_ms,static_infer_ms,static_bytes,static_ssim,static_bf,"
        "adaptive_tier,adaptive_rtt_ms,adaptive_infer_ms,adaptive_bytes,adaptive_ssim,adaptive_bf\n"
        "0,0,300.000,118.000,100,1.000000,1.000000,4,200.000,12.000,10,0.900000,0.500000\n"
        "1,0,100.000,118.000,100,1.000000,1.000000,,,,,,\n");

  std::ostringstream cdf;
  write_rtt_cdf(cdf, "static", a, "adaptive", b);
  CHECK(cdf.str() ==
        "mode,rtt_ms,cdf\n"
        "static,100.000,0.500000\n"
        "static,300.000,1.000000\n"
        "adaptive,200.000,1.000000\n");
}

TEST_CASE("run config validation") {
  RunConfig c;
  c.session.frames = 0;
  CHECK_NAVP_ERROR(c.validate(), ErrorCode::kInvalidArgument);
  c = RunConfig{};
  c.scenario.loss_prob = 1.5;
  CHECK_NAVP_ERROR(c.validate(), ErrorCode::kInvalidArgument);
}
