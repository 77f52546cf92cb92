#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tokencom/config.hpp"
#include "tokencom/training.hpp"

namespace tokencom {

/// One CSV row: per-episode metrics of one run. `utility`, `freezing_pct`,
/// and `psnr_db` are greedy-evaluation metrics; `mean_reward` is the training
/// episode's mean reward; `violations` count training slots per flag.
struct MetricsRow {
  std::string preset;   // preset name, or "train" / "evaluate"
  double sweep_value = 0.0;
  std::string baseline;
  std::uint64_t seed = 0;
  int episode = 0;
  double mean_reward = 0.0;
  double utility = 0.0;
  double freezing_pct = 0.0;
  double psnr_db = 0.0;
  std::array<long long, 8> violations{};

  bool operator==(const MetricsRow&) const = default;
};

std::string metrics_csv_header();
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
void write_metrics_csv_file(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv_file(const std::string& path);

/// Converts a per-episode log into CSV rows under the given labels.
std::vector<MetricsRow> rows_from_log(const std::string& preset, double sweep_value,
                                      BaselineKind kind, std::uint64_t seed,
                                      const TrainingLog& log);

double mean_of(const std::vector<double>& v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_stddev(const std::vector<double>& v);

/// Mean of a column over the last `window` episodes of one (run) row span.
double final_window_mean(const std::vector<MetricsRow>& run_rows, int window,
                         double MetricsRow::*column);

/// Channel variance that makes a matched-filter link with `per_cell_power_w`
/// on one resource block reach `per_rb_rate_bps` at the mean channel gain.
double calibrate_sigma_h2(int antennas, double rb_bandwidth_hz, double noise_psd_w_per_hz,
                          double per_cell_power_w, double per_rb_rate_bps);

const std::vector<std::string>& preset_names_list();

/// Runs one preset end to end: trains every baseline the preset compares at
/// every sweep point and seed, writes <out_dir>/<preset>.csv and aggregated
/// curves under <out_dir>/series/, and returns the rows.
std::vector<MetricsRow> run_preset(const ExperimentConfig& cfg, const Catalog& catalog,
                                   const std::string& out_dir);

/// The per-point experiment configs a preset would run, exposed so tests can
/// inspect calibration and dimensions without training.
struct PresetPoint {
  double sweep_value = 0.0;
  ExperimentConfig cfg;
};
std::vector<PresetPoint> preset_points(const ExperimentConfig& cfg);
std::vector<BaselineKind> preset_baselines(const std::string& preset);

}  // namespace tokencom
