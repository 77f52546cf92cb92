#include "tokencom/env.hpp"

#include <algorithm>
#include <cmath>

namespace tokencom {

H265Ladder H265Ladder::default_ladder() {
  H265Ladder ladder;
  ladder.levels = {{0.021, 27.21}, {0.042, 30.21}, {0.084, 33.21}, {0.168, 36.21}};
  return ladder;
}

void H265Ladder::validate() const {
  if (levels.empty()) throw ConfigError("encoding ladder is empty");
  double prev = 0.0;
  for (const auto& lv : levels) {
    if (!(lv.bpp > prev)) throw ConfigError("ladder bits-per-pixel must be positive and ascending");
    prev = lv.bpp;
  }
}

double H265Ladder::required_bps(const VideoParams& video, int level) const {
  if (level < 0 || level >= static_cast<int>(levels.size()))
    throw ConfigError("ladder level out of range");
  return video.fps * levels[level].bpp * static_cast<double>(video.height) *
         static_cast<double>(video.width);
}

int H265Ladder::pick_level(double rate_bps, const VideoParams& video) const {
  for (int lv = static_cast<int>(levels.size()) - 1; lv >= 0; --lv)
    if (required_bps(video, lv) <= rate_bps) return lv;
  return -1;
}

void EpisodeConfig::validate(const Catalog& catalog) const {
  channel.validate();
  caps.validate(channel.num_users, channel.num_rbs);
  const int users = channel.num_users;
  if (video.empty() || (video.size() != 1 && static_cast<int>(video.size()) != users))
    throw ConfigError("video parameter list must have one entry or one per user");
  for (const auto& vp : video)
    if (vp.height < 1 || vp.width < 1 || !(vp.fps > 0.0))
      throw ConfigError("video parameters must be positive");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(lambda_pen >= 0.0))
    throw ConfigError("utility weights must be >= 0");
  if (!(q_max > q_min)) throw ConfigError("q_max must exceed q_min");
  if (!(rate_floor_bps >= 0.0)) throw ConfigError("rate floor must be >= 0");
  if (slots_per_episode < 1) throw ConfigError("slots_per_episode must be >= 1");
  if (source == QualitySource::tokenizer_catalog) {
    if (static_cast<int>(user_pairs.size()) != users)
      throw ConfigError("need one compatible-pair list per user");
    for (const auto& pairs : user_pairs) {
      if (pairs.empty()) throw AgreementImpossible("a user has an empty compatible-pair list");
      for (int idx : pairs)
        if (idx < 0 || idx >= static_cast<int>(catalog.specs.size()))
          throw ConfigError("compatible-pair index outside the catalog");
    }
  } else {
    ladder.validate();
  }
}

const VideoParams& EpisodeConfig::video_for(int user) const {
  return video.size() == 1 ? video[0] : video[static_cast<std::size_t>(user)];
}

double normalize_quality(double q, double q_min, double q_max) {
  const double t = (q - q_min) / (q_max - q_min);
  return std::clamp(t, 0.0, 1.0);
}

double utility_value(const EpisodeConfig& cfg, const std::vector<double>& quality_norm,
                     const std::vector<double>& per_user_power_w) {
  const int users = cfg.channel.num_users;
  double acc = 0.0;
  for (int i = 0; i < users; ++i)
    acc += cfg.alpha * quality_norm[i] -
           cfg.beta * per_user_power_w[i] / cfg.channel.bs_power_budget_w;
  return acc / users;
}

ViolationFlags check_constraints(const EpisodeConfig& cfg, const RbAssignment& kappa,
                                 const PowerResult& powers,
                                 const std::vector<double>& rates_bps,
                                 const std::vector<double>& required_bps,
                                 const std::vector<double>& quality_intrinsic,
                                 bool invalid_index) {
  const int users = cfg.channel.num_users;
  const int rbs = cfg.channel.num_rbs;
  ViolationFlags out;

  out.flag[0] = powers.total_w > cfg.channel.bs_power_budget_w * (1.0 + 1e-9);

  for (int l = 0; l < rbs && !out.flag[1]; ++l)
    out.flag[1] = kappa.col_count(l) > cfg.caps.per_rb_user_cap;

  for (int i = 0; i < users && !out.flag[2]; ++i)
    out.flag[2] = rates_bps[i] < required_bps[i];

  for (int i = 0; i < users && !out.flag[3]; ++i)
    out.flag[3] = quality_intrinsic[i] < cfg.q_min;

  for (int i = 0; i < users && !out.flag[4]; ++i) {
    const int k = kappa.row_count(i);
    out.flag[4] = k < cfg.caps.min_rbs_per_user || k > cfg.caps.max_rbs_per_user;
  }

  for (int i = 0; i < users && !out.flag[5]; ++i)
    out.flag[5] = rates_bps[i] < cfg.rate_floor_bps;

  out.flag[6] = invalid_index;

  for (std::uint8_t cell : kappa.on)
    if (cell > 1) {
      out.flag[7] = true;
      break;
    }

  return out;
}

Env::Env(EpisodeConfig cfg, const Catalog& catalog) : cfg_(std::move(cfg)), catalog_(&catalog) {
  catalog.validate();
  cfg_.validate(catalog);
}

void Env::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  h_ = sample_channels(cfg_.channel, rng_);
  const int users = cfg_.channel.num_users;
  selected_.assign(users, -1);
  required_.assign(users, 0.0);
  if (cfg_.source == QualitySource::h265_ladder)
    for (int i = 0; i < users; ++i) required_[i] = cfg_.ladder.required_bps(cfg_.video_for(i), 0);
  selection_applied_ = false;
  latched_invalid_index_ = false;
  episode_live_ = true;
  slot_ = 1;
  prev_powers_ = Grid(users, cfg_.channel.num_rbs);
  prev_rates_.assign(users, 0.0);
}

int Env::options_for(int user) const {
  if (cfg_.source != QualitySource::tokenizer_catalog) return 0;
  return static_cast<int>(cfg_.user_pairs[static_cast<std::size_t>(user)].size());
}

void Env::apply_tokenizer_selection(const std::vector<int>& local_idx, bool strict) {
  if (!episode_live_) throw ProtocolViolation("reset() must run before a selection");
  if (cfg_.source != QualitySource::tokenizer_catalog)
    throw ProtocolViolation("this episode's quality source takes no tokenizer selection");
  if (selection_applied_)
    throw ProtocolViolation("tokenizer selection already applied this episode");
  if (slot_ != 1) throw ProtocolViolation("tokenizer selection must precede the first slot");
  const int users = cfg_.channel.num_users;
  if (static_cast<int>(local_idx.size()) != users)
    throw ConfigError("need one tokenizer index per user");
  for (int i = 0; i < users; ++i) {
    int idx = local_idx[i];
    const int n = options_for(i);
    if (idx < 0 || idx >= n) {
      if (strict)
        throw ProtocolViolation("tokenizer index " + std::to_string(idx) + " out of range for user " +
                                std::to_string(i));
      idx = std::clamp(idx, 0, n - 1);
      latched_invalid_index_ = true;
    }
    selected_[i] = cfg_.user_pairs[i][static_cast<std::size_t>(idx)];
    required_[i] = required_bitrate_bps(catalog_->specs[selected_[i]], cfg_.video_for(i));
  }
  selection_applied_ = true;
}

double Env::required_bps(int user) const {
  if (cfg_.source == QualitySource::tokenizer_catalog && !selection_applied_)
    throw ProtocolViolation("tokenizer selection not applied");
  return required_[static_cast<std::size_t>(user)];
}

SlotOutcome Env::step(const RbAssignment& kappa, const BeamformingTensor& w) {
  if (!episode_live_) throw ProtocolViolation("reset() must run before stepping");
  if (done()) throw EpisodeFinished("episode already ran its final slot");
  if (cfg_.source == QualitySource::tokenizer_catalog && !selection_applied_)
    throw ProtocolViolation("tokenizer selection must precede the first slot");
  const int users = cfg_.channel.num_users;
  const int rbs = cfg_.channel.num_rbs;
  if (kappa.users != users || kappa.rbs != rbs)
    throw ConfigError("assignment shape does not match the configuration");
  if (w.users != users || w.rbs != rbs || w.antennas != cfg_.channel.num_antennas)
    throw ConfigError("beamforming shape does not match the configuration");

  SlotOutcome out;
  out.slot = slot_;
  out.sinr = compute_sinr(h_, kappa, w, cfg_.channel);
  out.rates = compute_rates(out.sinr, kappa, cfg_.channel.rb_bandwidth_hz);
  out.powers = compute_powers(w);

  out.frozen.assign(users, 0);
  out.quality.assign(users, 0.0);
  out.quality_norm.assign(users, 0.0);
  out.ladder_level.assign(users, -1);
  std::vector<double> intrinsic(users, 0.0);
  for (int i = 0; i < users; ++i) {
    const double rate = out.rates.per_user_bps[i];
    if (cfg_.source == QualitySource::tokenizer_catalog) {
      const TokenizerSpec& spec = catalog_->specs[static_cast<std::size_t>(selected_[i])];
      intrinsic[i] = quality_of(spec, cfg_.metric);
      out.frozen[i] = rate < required_[i] ? 1 : 0;
    } else {
      const int lv = cfg_.ladder.pick_level(rate, cfg_.video_for(i));
      out.frozen[i] = lv < 0 ? 1 : 0;
      out.ladder_level[i] = lv;
      intrinsic[i] = lv < 0 ? cfg_.ladder.levels.front().psnr_db : cfg_.ladder.levels[lv].psnr_db;
    }
    // A stalled stream delivers no quality this slot.
    out.quality[i] = out.frozen[i] ? 0.0 : intrinsic[i];
    out.quality_norm[i] =
        out.frozen[i] ? 0.0 : normalize_quality(intrinsic[i], cfg_.q_min, cfg_.q_max);
  }

  out.flags = check_constraints(cfg_, kappa, out.powers, out.rates.per_user_bps, required_,
                                intrinsic, latched_invalid_index_);
  latched_invalid_index_ = false;

  out.utility = utility_value(cfg_, out.quality_norm, out.powers.per_user_w);
  out.reward = out.utility - cfg_.lambda_pen * out.flags.count();

  prev_powers_ = out.powers.per_cell_w;
  prev_rates_ = out.rates.per_user_bps;
  ++slot_;
  if (!done() && cfg_.fading == FadingMode::per_slot) h_ = sample_channels(cfg_.channel, rng_);
  return out;
}

int Env::state_dim(int users, int rbs, int antennas) {
  return 2 * users * rbs * antennas + users * rbs + 2 * users;
}

std::vector<double> Env::state_vector() const {
  if (!episode_live_) throw ProtocolViolation("reset() must run before reading a state");
  const int users = cfg_.channel.num_users;
  const int rbs = cfg_.channel.num_rbs;
  const int ants = cfg_.channel.num_antennas;
  std::vector<double> s;
  s.reserve(static_cast<std::size_t>(state_dim(users, rbs, ants)));

  const double h_scale = 1.0 / std::sqrt(cfg_.channel.channel_variance);
  for (int i = 0; i < users; ++i)
    for (int l = 0; l < rbs; ++l)
      for (int n = 0; n < ants; ++n) {
        const cplx& c = h_.at(i, l, n);
        s.push_back(c.real() * h_scale);
        s.push_back(c.imag() * h_scale);
      }

  for (int i = 0; i < users; ++i)
    for (int l = 0; l < rbs; ++l)
      s.push_back(prev_powers_.at(i, l) / cfg_.channel.bs_power_budget_w);

  for (int i = 0; i < users; ++i) {
    const double denom = required_[i] > 0.0 ? required_[i] : 1.0;
    s.push_back(prev_rates_[i] / denom);
  }

  double eta_max = 0.0;
  if (cfg_.source == QualitySource::tokenizer_catalog) {
    eta_max = catalog_->max_compression_rate_bpp();
    for (int i = 0; i < users; ++i) {
      const double eta =
          selected_[i] < 0 ? 0.0 : compression_rate_bpp(catalog_->specs[selected_[i]]);
      s.push_back(eta / eta_max);
    }
  } else {
    eta_max = cfg_.ladder.levels.back().bpp;
    for (int i = 0; i < users; ++i) s.push_back(cfg_.ladder.levels.front().bpp / eta_max);
  }
  return s;
}

}  // namespace tokencom
