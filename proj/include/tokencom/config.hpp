#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tokencom/training.hpp"

namespace tokencom {

/// Flat key=value experiment description. Every field has a default, so an
/// empty file is a complete configuration; unknown or malformed keys are
/// rejected with their line number. Decibel quantities stay in decibels here
/// and only become linear when the runtime structures are built.
struct ExperimentConfig {
  // Radio front end.
  int num_antennas = 32;
  int num_rbs = 16;
  int num_users = 4;
  double rb_bandwidth_hz = 30e3;
  double bs_power_dbm = 30.0;
  double noise_psd_dbm_per_hz = -174.0;
  double channel_variance = 1.0;
  std::string fading = "per_slot";  // per_slot | per_episode
  int per_rb_user_cap = 2;
  int min_rbs_per_user = 0;
  int max_rbs_per_user = 8;

  // Service model.
  double rate_floor_bps = 1e6;
  double q_min = 18.0;
  double q_max = 36.0;
  double alpha = 2.0;
  double beta = 1.0;
  double lambda_pen = 2.0;
  std::string metric = "psnr";  // psnr | ssim | rfvd
  std::string quality_source = "tokenizer_catalog";  // tokenizer_catalog | h265_ladder
  int video_height = 1920;
  int video_width = 1080;
  double video_fps = 24.0;
  // Per-user declared detokenizer names: users split by ';', names by ','.
  // Empty means every user declares the whole catalog.
  std::string user_tags;

  // Learning.
  int episodes = 500;
  int slots_per_episode = 100;
  int batch_size = 256;
  int buffer_capacity = 100000;
  double gamma = 0.98;
  double tau = 0.005;
  double epsilon_start = 1.0;
  double epsilon_floor = 0.05;
  double epsilon_decay = 0.995;
  double noise_start = 0.2;
  double noise_floor = 0.02;
  double noise_decay = 0.995;
  std::string noise_kind = "gaussian";  // gaussian | ou
  double ou_theta = 0.15;
  std::string hidden = "256,256";
  double lr_q = 1e-3;
  double lr_critic = 1e-3;
  double lr_actor = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int eval_each_episode = 1;
  int eval_episodes = 10;

  // Run control.
  std::string baseline = "hybrid";
  std::string preset = "freezing-vs-episode";
  std::string seeds = "1,2,3,4,5";
  std::uint64_t seed = 1;
  int paper_scale = 0;  // presets default to desk-size dimensions unless set
  std::string catalog_path;  // empty = the bundled catalog file
  std::string out_dir = "out";

  // Reference-solver limits.
  int oracle_draws = 100;
  int oracle_grid_levels = 20;
  long long oracle_candidate_budget = 2000000;

  void validate() const;

  // Conversions into the runtime structures (decibels become linear here).
  ChannelConfig channel() const;
  EpisodeConfig episode(const Catalog& catalog) const;
  TrainerConfig trainer(const Catalog& catalog) const;
  BaselineKind baseline_kind() const { return baseline_from_string(baseline); }
  std::vector<std::uint64_t> seed_list() const;
  std::vector<int> hidden_list() const;
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

ExperimentConfig load_config(std::istream& in);
ExperimentConfig load_config_file(const std::string& path);
void save_config(std::ostream& out, const ExperimentConfig& cfg);
std::string config_to_string(const ExperimentConfig& cfg);

/// The bundled detokenizer catalog, or the configured override.
Catalog load_catalog_for(const ExperimentConfig& cfg);

}  // namespace tokencom
