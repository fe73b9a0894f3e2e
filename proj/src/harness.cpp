#include "navp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <json.hpp>

#include "navp/error.hpp"

namespace navp {

namespace {

using nlohmann::json;

// Frame buffers are megabytes each and short-lived. With glibc's defaults
// every one is a fresh mmap, and page faults dominate a run.
void keep_large_buffers_on_heap() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    mallopt(M_TOP_PAD, 64 << 20);
  });
#endif
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, what + ": " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw Error(ErrorCode::kInvalidArgument, "unknown key '" + key + "' in " + where);
  }
}

NetworkScenario scenario_from_json(const json& j) {
  if (j.is_string()) return load_scenario(j.get<std::string>());
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "scenario must be a name or object");
  reject_unknown(j, {"preset", "name", "downlink_mbps", "uplink_mbps", "base_rtt_ms", "loss_prob"},
                 "scenario");
  NetworkScenario s;
  if (j.contains("preset")) s = find_scenario(j["preset"].get<std::string>());
  s.name = j.value("name", s.name.empty() ? std::string("custom") : s.name);
  s.downlink_mbps = j.value("downlink_mbps", s.downlink_mbps);
  s.uplink_mbps = j.value("uplink_mbps", s.uplink_mbps);
  s.base_rtt_ms = j.value("base_rtt_ms", s.base_rtt_ms);
  s.loss_prob = j.value("loss_prob", s.loss_prob);
  s.validate();
  return s;
}

TierTable tiers_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kInvalidArgument, "tiers must be an array");
  std::vector<Tier> rows;
  for (const auto& row : j) {
    reject_unknown(row, {"rtt_threshold_ms", "quality", "max_resolution", "send_interval_ms"},
                   "tier");
    Tier t;
    const auto& th = row.at("rtt_threshold_ms");
    t.rtt_threshold_ms =
        th.is_null() ? std::numeric_limits<double>::infinity() : th.get<double>();
    t.quality = row.at("quality").get<int>();
    t.max_resolution = row.at("max_resolution").get<std::uint32_t>();
    t.send_interval_ms = row.at("send_interval_ms").get<std::uint32_t>();
    rows.push_back(t);
  }
  return TierTable(std::move(rows));
}

double reduction_pct(double base, double cand) {
  return base == 0.0 ? 0.0 : (base - cand) / base * 100.0;
}

double relative_pct(double base, double cand) {
  return base == 0.0 ? 0.0 : (cand - base) / base * 100.0;
}

}  // namespace

void RunConfig::validate() const {
  scenario.validate();
  session.validate();
  virtual_options.cost.validate();
}

CodecId default_codec() { return jpeg_available() ? CodecId::kJpeg : CodecId::kQuant; }

NetworkScenario load_scenario(const std::string& name_or_path) {
  const std::string trimmed = name_or_path;
  if (!trimmed.empty() && trimmed.front() == '{')
    return scenario_from_json(parse_json(trimmed, "scenario"));
  for (const auto& s : preset_scenarios())
    if (s.name == trimmed) return s;
  const std::filesystem::path path(trimmed);
  if (std::filesystem::is_regular_file(path))
    return scenario_from_json(parse_json(read_text(path), path.string()));
  return find_scenario(trimmed);  // throws kUnknownScenario
}

RunConfig apply_config_json(RunConfig c, const std::string& text) {
  const json j = parse_json(text, "config");
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  reject_unknown(j,
                 {"scenario", "mode", "frames", "seed", "width", "height", "shapes", "codec",
                  "probe_interval_ms", "pipeline_cap", "window", "hysteresis_ms", "rtt_feed",
                  "tiers", "fidelity", "link", "cost_model", "serialize_inference", "realtime",
                  "output"},
                 "config");
  try {
    if (j.contains("scenario")) c.scenario = scenario_from_json(j["scenario"]);
    auto& s = c.session;
    if (j.contains("mode")) s.mode = parse_mode(j["mode"].get<std::string>());
    s.frames = j.value("frames", s.frames);
    s.seed = j.value("seed", s.seed);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.num_shapes = j.value("shapes", s.num_shapes);
    if (j.contains("codec")) s.codec = parse_codec(j["codec"].get<std::string>());
    if (j.contains("probe_interval_ms"))
      s.probe_interval_us = std::llround(j["probe_interval_ms"].get<double>() * 1000.0);
    s.pipeline_cap = j.value("pipeline_cap", s.pipeline_cap);
    s.window = j.value("window", s.window);
    s.hysteresis_ms = j.value("hysteresis_ms", s.hysteresis_ms);
    if (j.contains("rtt_feed")) s.rtt_feed = parse_rtt_feed(j["rtt_feed"].get<std::string>());
    if (j.contains("tiers")) s.tiers = tiers_from_json(j["tiers"]);
    s.measure_fidelity = j.value("fidelity", s.measure_fidelity);
    if (j.contains("link")) {
      const auto& l = j["link"];
      reject_unknown(l, {"jitter_fraction", "jitter", "rto_ms"}, "link");
      auto& o = c.virtual_options.link;
      o.jitter_fraction = l.value("jitter_fraction", o.jitter_fraction);
      o.jitter_enabled = l.value("jitter", o.jitter_enabled);
      o.rto_ms = l.value("rto_ms", o.rto_ms);
      c.realtime_options.link = o;
    }
    if (j.contains("cost_model")) {
      const auto& m = j["cost_model"];
      reject_unknown(m, {"fixed_ms", "per_pixel_us"}, "cost_model");
      auto& cm = c.virtual_options.cost;
      if (m.contains("fixed_ms")) cm.fixed_us = m["fixed_ms"].get<double>() * 1000.0;
      cm.per_pixel_us = m.value("per_pixel_us", cm.per_pixel_us);
    }
    c.virtual_options.server.serialize_inference =
        j.value("serialize_inference", c.virtual_options.server.serialize_inference);
    if (j.contains("realtime")) {
      const auto& r = j["realtime"];
      reject_unknown(r, {"enabled", "host", "port", "emulate_network", "timeout_s"}, "realtime");
      c.realtime = r.value("enabled", c.realtime);
      auto& o = c.realtime_options;
      o.host = r.value("host", o.host);
      o.port = r.value("port", o.port);
      o.emulate_network = r.value("emulate_network", o.emulate_network);
      if (r.contains("timeout_s"))
        o.timeout = std::chrono::milliseconds(std::llround(r["timeout_s"].get<double>() * 1000));
    }
    if (j.contains("output")) c.output = j["output"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config_file(RunConfig base, const std::filesystem::path& path) {
  return apply_config_json(std::move(base), read_text(path));
}

std::filesystem::path summary_path_for(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension();
  p += ".summary.json";
  return p;
}

ExperimentResult run_experiment(const RunConfig& config) {
  config.validate();
  keep_large_buffers_on_heap();
  ExperimentResult out;
  if (config.realtime) {
    out.session = run_realtime_session(config.session, config.scenario, config.realtime_options);
  } else {
    out.session =
        run_virtual_session(config.session, config.scenario, config.virtual_options).result;
  }
  std::sort(out.session.records.begin(), out.session.records.end(),
            [](const FrameRecord& a, const FrameRecord& b) { return a.frame_id < b.frame_id; });
  out.summary = summarize(out.session.records);
  out.summary.scenario = config.scenario.name;
  out.summary.mode = std::string(to_string(config.session.mode));
  out.summary.seed = config.session.seed;
  out.summary.errors = out.session.errors + out.session.protocol_errors;
  out.summary.skipped_ticks = out.session.skipped_ticks;
  out.summary.duration_us = out.session.duration_us;

  if (config.output) {
    const auto& path = *config.output;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream csv(path, std::ios::binary);
    if (!csv) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    write_csv(csv, out.session.records);
    std::ofstream js(summary_path_for(path), std::ios::binary);
    if (!js) throw Error(ErrorCode::kIo, "cannot write " + summary_path_for(path).string());
    js << summary_to_json(out.summary);
    if (!csv || !js) throw Error(ErrorCode::kIo, "write failed for " + path.string());
  }
  return out;
}

Comparison compare(const RunSummary& a, const RunSummary& b) {
  if (a.scenario != b.scenario)
    throw Error(ErrorCode::kMismatchedScenarios,
                "scenarios differ: " + a.scenario + " vs " + b.scenario);
  if (a.seed != b.seed)
    throw Error(ErrorCode::kMismatchedScenarios, "seeds differ between runs");
  Comparison c;
  c.scenario = a.scenario;
  c.baseline_mode = a.mode;
  c.candidate_mode = b.mode;
  c.baseline_rtt_median_ms = a.rtt_median_ms;
  c.candidate_rtt_median_ms = b.rtt_median_ms;
  c.rtt_median_reduction_pct = reduction_pct(a.rtt_median_ms, b.rtt_median_ms);
  c.baseline_inference_mean_ms = a.inference_mean_ms;
  c.candidate_inference_mean_ms = b.inference_mean_ms;
  c.inference_mean_reduction_pct = reduction_pct(a.inference_mean_ms, b.inference_mean_ms);
  c.baseline_ssim = a.ssim_mean;
  c.candidate_ssim = b.ssim_mean;
  c.ssim_delta_pts = (b.ssim_mean - a.ssim_mean) * 100.0;
  c.ssim_delta_rel_pct = relative_pct(a.ssim_mean, b.ssim_mean);
  c.baseline_bf = a.bf_mean;
  c.candidate_bf = b.bf_mean;
  c.bf_delta_pts = (b.bf_mean - a.bf_mean) * 100.0;
  c.bf_delta_rel_pct = relative_pct(a.bf_mean, b.bf_mean);
  return c;
}

std::string comparison_table(const Comparison& c) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "scenario %s: %s -> %s\n"
                "%-22s %12s %12s %12s\n"
                "%-22s %12.2f %12.2f %11.1f%%\n"
                "%-22s %12.2f %12.2f %11.1f%%\n"
                "%-22s %12.4f %12.4f %+11.2f pts (%+.1f%%)\n"
                "%-22s %12.4f %12.4f %+11.2f pts (%+.1f%%)\n",
                c.scenario.c_str(), c.baseline_mode.c_str(), c.candidate_mode.c_str(), "metric",
                c.baseline_mode.c_str(), c.candidate_mode.c_str(), "change",
                "median RTT (ms)", c.baseline_rtt_median_ms, c.candidate_rtt_median_ms,
                -c.rtt_median_reduction_pct, "mean inference (ms)", c.baseline_inference_mean_ms,
                c.candidate_inference_mean_ms, -c.inference_mean_reduction_pct, "SSIM",
                c.baseline_ssim, c.candidate_ssim, c.ssim_delta_pts, c.ssim_delta_rel_pct,
                "boundary F1", c.baseline_bf, c.candidate_bf, c.bf_delta_pts, c.bf_delta_rel_pct);
  return buf;
}

std::string comparison_to_json(const Comparison& c) {
  nlohmann::ordered_json j;
  j["scenario"] = c.scenario;
  j["baseline_mode"] = c.baseline_mode;
  j["candidate_mode"] = c.candidate_mode;
  j["rtt_median_ms"] = {c.baseline_rtt_median_ms, c.candidate_rtt_median_ms};
  j["rtt_median_reduction_pct"] = c.rtt_median_reduction_pct;
  j["inference_mean_ms"] = {c.baseline_inference_mean_ms, c.candidate_inference_mean_ms};
  j["inference_mean_reduction_pct"] = c.inference_mean_reduction_pct;
  j["ssim"] = {c.baseline_ssim, c.candidate_ssim};
  j["ssim_delta_pts"] = c.ssim_delta_pts;
  j["ssim_delta_rel_pct"] = c.ssim_delta_rel_pct;
  j["bf"] = {c.baseline_bf, c.candidate_bf};
  j["bf_delta_pts"] = c.bf_delta_pts;
  j["bf_delta_rel_pct"] = c.bf_delta_rel_pct;
  return j.dump(2) + "\n";
}

void write_plot_data(std::ostream& out, const std::string& mode_a,
                     const std::vector<FrameRecord>& a, const std::string& mode_b,
                     const std::vector<FrameRecord>& b) {
  std::map<std::uint64_t, std::pair<const FrameRecord*, const FrameRecord*>> rows;
  for (const auto& r : a) rows[r.frame_id].first = &r;
  for (const auto& r : b) rows[r.frame_id].second = &r;
  out << "frame_id";
  for (const auto* mode : {&mode_a, &mode_b})
    for (const char* col : {"tier", "rtt_ms", "infer_ms", "bytes", "ssim", "bf"})
      out << ',' << *mode << '_' << col;
  out << '\n';
  char buf[160];
  for (const auto& [id, pair] : rows) {
    out << id;
    for (const FrameRecord* r : {pair.first, pair.second}) {
      if (r == nullptr) {
        out << ",,,,,,";
        continue;
      }
      std::snprintf(buf, sizeof buf, ",%d,%.3f,%.3f,%llu,%.6f,%.6f", r->tier, r->rtt_us / 1000.0,
                    r->infer_us / 1000.0, static_cast<unsigned long long>(r->bytes), r->ssim,
                    r->bf);
      out << buf;
    }
    out << '\n';
  }
}

void write_rtt_cdf(std::ostream& out, const std::string& mode_a,
                   const std::vector<FrameRecord>& a, const std::string& mode_b,
                   const std::vector<FrameRecord>& b) {
  out << "mode,rtt_ms,cdf\n";
  char buf[96];
  for (const auto& [mode, recs] : {std::pair{&mode_a, &a}, std::pair{&mode_b, &b}}) {
    std::vector<Micros> rtts;
    for (const auto& r : *recs) rtts.push_back(r.rtt_us);
    std::sort(rtts.begin(), rtts.end());
    for (std::size_t i = 0; i < rtts.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.3f,%.6f\n", rtts[i] / 1000.0,
                    static_cast<double>(i + 1) / rtts.size());
      out << *mode << buf;
    }
  }
}

}  // namespace navp
