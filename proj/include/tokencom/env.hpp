#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tokencom/catalog.hpp"
#include "tokencom/channel.hpp"
#include "tokencom/errors.hpp"
#include "tokencom/rng.hpp"

namespace tokencom {

// Whether the channel redraws every slot or stays fixed within an episode.
enum class FadingMode { per_slot, per_episode };

// Where per-user video quality comes from: the tokenizer catalog entry the
// transmitter selected, or a rate-adaptive H.265 encoding ladder.
enum class QualitySource { tokenizer_catalog, h265_ladder };

struct H265Level {
  double bpp = 0.0;
  double psnr_db = 0.0;
};

struct H265Ladder {
  std::vector<H265Level> levels;  // ascending bits-per-pixel

  static H265Ladder default_ladder();
  void validate() const;
  double required_bps(const VideoParams& video, int level) const;
  // Highest level whose required bitrate fits within rate_bps; -1 if even the
  // lowest level does not fit.
  int pick_level(double rate_bps, const VideoParams& video) const;
};

// Per-slot constraint checks, reported in a fixed order:
//  0 transmit power budget          4 per-user scheduled-block count range
//  1 per-block user cap             5 per-user rate floor
//  2 per-user stream bitrate met    6 tokenizer index validity
//  3 per-user quality floor         7 assignment entries binary
struct ViolationFlags {
  std::array<bool, 8> flag{};

  int count() const {
    int n = 0;
    for (bool f : flag) n += f ? 1 : 0;
    return n;
  }
  bool any() const { return count() > 0; }
};

struct EpisodeConfig {
  ChannelConfig channel;
  std::vector<VideoParams> video;            // one entry (shared) or one per user
  std::vector<std::vector<int>> user_pairs;  // per-user compatible catalog indices
  double alpha = 2.0;       // quality weight in the utility
  double beta = 1.0;        // power weight in the utility
  double lambda_pen = 2.0;  // penalty per violated constraint
  double q_min = 18.0;
  double q_max = 36.0;
  double rate_floor_bps = 1e6;
  RbCaps caps;
  int slots_per_episode = 100;
  QualityMetric metric = QualityMetric::psnr;
  FadingMode fading = FadingMode::per_slot;
  QualitySource source = QualitySource::tokenizer_catalog;
  H265Ladder ladder = H265Ladder::default_ladder();

  void validate(const Catalog& catalog) const;
  const VideoParams& video_for(int user) const;
};

struct SlotOutcome {
  int slot = 0;  // 1-based
  Grid sinr;
  RateResult rates;
  PowerResult powers;
  std::vector<double> quality;       // metric value actually delivered (0 when frozen)
  std::vector<double> quality_norm;  // normalized quality in [0, 1] (0 when frozen)
  std::vector<uint8_t> frozen;       // stream stalled: rate below the stream's requirement
  std::vector<int> ladder_level;     // chosen ladder level, -1 if frozen or not ladder-sourced
  double utility = 0.0;
  double reward = 0.0;
  ViolationFlags flags;
};

double normalize_quality(double q, double q_min, double q_max);

// Mean over users of (alpha * normalized quality - beta * power share).
double utility_value(const EpisodeConfig& cfg, const std::vector<double>& quality_norm,
                     const std::vector<double>& per_user_power_w);

// quality_intrinsic holds the metric value of each user's selected source
// (pre-freeze); invalid_index reports a latched out-of-range selection.
ViolationFlags check_constraints(const EpisodeConfig& cfg, const RbAssignment& kappa,
                                 const PowerResult& powers,
                                 const std::vector<double>& rates_bps,
                                 const std::vector<double>& required_bps,
                                 const std::vector<double>& quality_intrinsic,
                                 bool invalid_index = false);

class Env {
 public:
  Env(EpisodeConfig cfg, const Catalog& catalog);

  void reset(std::uint64_t seed);

  const std::vector<std::vector<int>>& pair_sets() const { return cfg_.user_pairs; }
  int options_for(int user) const;

  // local_idx[u] indexes into pair_sets()[u]. Strict mode throws on an
  // out-of-range index; lenient mode clamps it and raises the validity flag
  // on the next slot. May be called once per episode, before any step.
  void apply_tokenizer_selection(const std::vector<int>& local_idx, bool strict = true);
  bool selection_applied() const { return selection_applied_; }
  std::vector<int> selected() const { return selected_; }  // catalog indices, -1 unset

  int slot() const { return slot_; }  // 1-based index of the next slot to run
  bool done() const { return slot_ > cfg_.slots_per_episode; }

  SlotOutcome step(const RbAssignment& kappa, const BeamformingTensor& w);

  std::vector<double> state_vector() const;
  static int state_dim(int users, int rbs, int antennas);

  const ChannelRealization& channel() const { return h_; }
  const EpisodeConfig& config() const { return cfg_; }
  const Catalog& catalog() const { return *catalog_; }

  // Bitrate the user's stream needs this episode. Ladder-sourced streams
  // report the lowest level's requirement.
  double required_bps(int user) const;

 private:
  EpisodeConfig cfg_;
  const Catalog* catalog_;
  Rng rng_{0};
  ChannelRealization h_;
  std::vector<int> selected_;   // catalog index per user (-1 before selection)
  std::vector<double> required_;
  bool selection_applied_ = false;
  bool episode_live_ = false;
  bool latched_invalid_index_ = false;
  int slot_ = 1;
  Grid prev_powers_;
  std::vector<double> prev_rates_;
};

}  // namespace tokencom
