#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "navp/channel.hpp"
#include "navp/metrics.hpp"
#include "navp/session.hpp"
#include "navp/tcp.hpp"

namespace navp {

struct RunConfig {
  NetworkScenario scenario = find_scenario("extreme-4g");
  SessionConfig session;
  VirtualRunOptions virtual_options;
  // Real-time runs talk to a live server instead of the in-process one.
  bool realtime = false;
  RealtimeOptions realtime_options;
  std::optional<std::filesystem::path> output;

  void validate() const;
};

// The codec used when neither flag nor config names one.
CodecId default_codec();

// Accepts a preset name, a path to a JSON scenario file, or a JSON object
// (optionally {"preset": name, ...overrides}).
NetworkScenario load_scenario(const std::string& name_or_path);

// Applies a JSON config document on top of `base`. Unknown keys are errors.
RunConfig apply_config_json(RunConfig base, const std::string& json_text);
RunConfig load_config_file(RunConfig base, const std::filesystem::path& path);

struct ExperimentResult {
  RunSummary summary;
  SessionResult session;
};

// Runs one experiment. When config.output is set, writes the per-frame CSV
// there and the summary JSON next to it as <stem>.summary.json.
ExperimentResult run_experiment(const RunConfig& config);

std::filesystem::path summary_path_for(const std::filesystem::path& csv_path);

struct Comparison {
  std::string scenario;
  std::string baseline_mode;
  std::string candidate_mode;
  double baseline_rtt_median_ms = 0.0;
  double candidate_rtt_median_ms = 0.0;
  double rtt_median_reduction_pct = 0.0;
  double baseline_inference_mean_ms = 0.0;
  double candidate_inference_mean_ms = 0.0;
  double inference_mean_reduction_pct = 0.0;
  double baseline_ssim = 0.0;
  double candidate_ssim = 0.0;
  double ssim_delta_pts = 0.0;    // candidate - baseline, x100
  double ssim_delta_rel_pct = 0.0;
  double baseline_bf = 0.0;
  double candidate_bf = 0.0;
  double bf_delta_pts = 0.0;
  double bf_delta_rel_pct = 0.0;
};

// Reductions are positive when the candidate is lower. Throws
// kMismatchedScenarios when the summaries disagree on scenario or seed.
Comparison compare(const RunSummary& baseline, const RunSummary& candidate);

std::string comparison_table(const Comparison& c);
std::string comparison_to_json(const Comparison& c);

// One row per frame index with a column set per mode; blank cells where a
// mode has no record for that frame.
void write_plot_data(std::ostream& out, const std::string& mode_a,
                     const std::vector<FrameRecord>& a, const std::string& mode_b,
                     const std::vector<FrameRecord>& b);

// RTT CDF: one row per record, sorted, with cumulative fraction.
void write_rtt_cdf(std::ostream& out, const std::string& mode_a,
                   const std::vector<FrameRecord>& a, const std::string& mode_b,
                   const std::vector<FrameRecord>& b);

}  // namespace navp
