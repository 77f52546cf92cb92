#include "tokencom/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>

#include "tokencom/errors.hpp"

namespace tokencom {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::hybrid: return "hybrid";
    case BaselineKind::ddpg_ta: return "ddpg_ta";
    case BaselineKind::agnostic_ta: return "agnostic_ta";
    case BaselineKind::fixed_ta: return "fixed_ta";
    case BaselineKind::conventional_h265: return "conventional_h265";
  }
  throw ConfigError("unknown baseline kind");
}

BaselineKind baseline_from_string(const std::string& name) {
  if (name == "hybrid") return BaselineKind::hybrid;
  if (name == "ddpg_ta") return BaselineKind::ddpg_ta;
  if (name == "agnostic_ta") return BaselineKind::agnostic_ta;
  if (name == "fixed_ta") return BaselineKind::fixed_ta;
  if (name == "conventional_h265") return BaselineKind::conventional_h265;
  throw ConfigError("unknown baseline '" + name +
                    "' (expected hybrid, ddpg_ta, agnostic_ta, fixed_ta, or conventional_h265)");
}

void TrainerConfig::validate(const Catalog& catalog) const {
  env.validate(catalog);
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (buffer_capacity < batch_size) throw ConfigError("buffer_capacity must be >= batch_size");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must be in [0, 1]");
  if (!(lr_q > 0.0 && lr_critic > 0.0 && lr_actor > 0.0))
    throw ConfigError("learning rates must be > 0");
  auto check_sched = [](const DecaySchedule& s, const char* what) {
    if (!(s.value >= 0.0 && s.value <= 1.0) || !(s.floor >= 0.0) ||
        !(s.decay > 0.0 && s.decay <= 1.0))
      throw ConfigError(std::string(what) + " schedule out of range");
  };
  check_sched(epsilon, "epsilon");
  check_sched(noise, "noise");
  if (!(ou_theta >= 0.0 && ou_theta <= 1.0)) throw ConfigError("ou_theta must be in [0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  for (int hsz : hidden)
    if (hsz < 1) throw ConfigError("hidden layer sizes must be >= 1");
}

namespace {

Mat row1(const std::vector<double>& v) {
  Mat m(1, static_cast<int>(v.size()));
  m.a = v;
  return m;
}

void require_source_match(BaselineKind kind, const EpisodeConfig& env_cfg) {
  const bool wants_ladder = kind == BaselineKind::conventional_h265;
  const bool has_ladder = env_cfg.source == QualitySource::h265_ladder;
  if (wants_ladder != has_ladder)
    throw ConfigError(wants_ladder
                          ? "conventional_h265 requires the h265_ladder quality source"
                          : "this baseline requires the tokenizer_catalog quality source");
}

AgentBundle make_bundle(const TrainerConfig& cfg, BaselineKind kind, Rng& rng) {
  const ChannelConfig& cc = cfg.env.channel;
  const int users = cc.num_users, rbs = cc.num_rbs, antennas = cc.num_antennas;

  AgentBundle b;
  b.kind = kind;
  b.users = users;
  b.rbs = rbs;
  b.antennas = antennas;
  b.state_dim = Env::state_dim(users, rbs, antennas);

  std::vector<int> options(static_cast<std::size_t>(users), 0);
  if (cfg.env.source == QualitySource::tokenizer_catalog)
    for (int u = 0; u < users; ++u)
      options[static_cast<std::size_t>(u)] =
          static_cast<int>(cfg.env.user_pairs[static_cast<std::size_t>(u)].size());

  DqnLayout layout;
  layout.users = users;
  layout.rbs = rbs;
  layout.tok_options.assign(static_cast<std::size_t>(users), 0);

  const int beam_len = 2 * users * rbs * antennas;
  int action_dim = beam_len;
  b.w_offset = 0;

  switch (kind) {
    case BaselineKind::hybrid:
      b.has_dqn = true;
      layout.tok_options = options;
      b.tok_mode = TokenizerHeadMode::per_user;
      break;
    case BaselineKind::agnostic_ta:
      b.has_dqn = true;
      layout.tok_options = options;
      b.tok_mode = TokenizerHeadMode::shared;
      b.shared_cap = *std::min_element(options.begin(), options.end());
      break;
    case BaselineKind::fixed_ta:
    case BaselineKind::conventional_h265:
      b.has_dqn = true;
      b.tok_mode = TokenizerHeadMode::none;
      break;
    case BaselineKind::ddpg_ta:
      b.has_dqn = false;
      b.tok_block = *std::max_element(options.begin(), options.end());
      b.kappa_offset = users * b.tok_block;
      b.w_offset = b.kappa_offset + users * rbs;
      action_dim = b.w_offset + beam_len;
      break;
  }

  const auto adam_of = [&cfg](double lr) {
    return AdamConfig{lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  };
  if (b.has_dqn) {
    b.dqn = make_dqn(b.state_dim, layout, cfg.hidden, cfg.lr_q, rng);
    b.dqn.adam_cfg = adam_of(cfg.lr_q);
    b.dqn.eps = cfg.epsilon;
    b.dqn.gamma = cfg.gamma;
    b.dqn.tau = cfg.tau;
  }
  b.ddpg = make_ddpg(b.state_dim, action_dim, cfg.hidden, cfg.lr_actor, cfg.lr_critic, rng);
  b.ddpg.actor_cfg = adam_of(cfg.lr_actor);
  b.ddpg.critic_cfg = adam_of(cfg.lr_critic);
  b.ddpg.noise = cfg.noise;
  b.ddpg.gamma = cfg.gamma;
  b.ddpg.tau = cfg.tau;
  return b;
}

/// Ornstein-Uhlenbeck noise state; empty x means gaussian noise instead.
struct NoiseState {
  NoiseKind kind = NoiseKind::gaussian;
  double theta = 0.15;
  std::vector<double> x;
};

std::vector<double> noisy_action(const DdpgAgent& agent, const std::vector<double>& state,
                                 double sigma, Rng& rng, NoiseState& ou) {
  if (sigma <= 0.0 || ou.kind == NoiseKind::gaussian)
    return ddpg_raw_action(agent, state, sigma, rng);
  std::vector<double> a = ddpg_policy(agent, state);
  if (ou.x.size() != a.size()) ou.x.assign(a.size(), 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    ou.x[k] += ou.theta * (0.0 - ou.x[k]) + sigma * rng.normal();
    a[k] += ou.x[k];
  }
  clamp_unit(a);
  return a;
}

std::vector<int> ddpg_ta_tokenizers(const AgentBundle& b, const std::vector<double>& raw,
                                    const std::vector<std::vector<int>>& pairs) {
  std::vector<int> pick(static_cast<std::size_t>(b.users), 0);
  for (int u = 0; u < b.users; ++u) {
    const int m_u = static_cast<int>(pairs[static_cast<std::size_t>(u)].size());
    const int base = u * b.tok_block;
    int best = 0;
    for (int j = 1; j < m_u; ++j)
      if (raw[static_cast<std::size_t>(base + j)] > raw[static_cast<std::size_t>(base + best)])
        best = j;
    pick[static_cast<std::size_t>(u)] = best;
  }
  return pick;
}

Grid ddpg_ta_alloc_scores(const AgentBundle& b, const std::vector<double>& raw) {
  Grid scores(b.users, b.rbs);
  for (int i = 0; i < b.users; ++i)
    for (int l = 0; l < b.rbs; ++l)
      scores.at(i, l) = raw[static_cast<std::size_t>(b.kappa_offset + i * b.rbs + l)];
  return scores;
}

/// Episode-start tokenizer decision; for ddpg_ta the slot-1 action doubles as
/// the source of the selection, so it is returned through raw1.
std::vector<int> decide_tokenizers(const AgentBundle& b, const EpisodeConfig& env_cfg,
                                   const std::vector<double>& s1, double eps, double sigma,
                                   Rng& rng, NoiseState& ou, std::vector<double>& raw1) {
  if (env_cfg.source == QualitySource::h265_ladder) return {};
  switch (b.kind) {
    case BaselineKind::hybrid:
      if (eps > 0.0) return dqn_select_tokenizers(b.dqn, s1, eps, rng);
      return dqn_select_tokenizers(b.dqn, s1);
    case BaselineKind::agnostic_ta: {
      const int j = (eps > 0.0 && rng.bernoulli(eps))
                        ? rng.uniform_int(b.shared_cap)
                        : dqn_select_shared_tokenizer(b.dqn, s1, b.shared_cap);
      return std::vector<int>(static_cast<std::size_t>(b.users), j);
    }
    case BaselineKind::fixed_ta:
      return std::vector<int>(static_cast<std::size_t>(b.users), 0);
    case BaselineKind::ddpg_ta:
      raw1 = noisy_action(b.ddpg, s1, sigma, rng, ou);
      return ddpg_ta_tokenizers(b, raw1, env_cfg.user_pairs);
    case BaselineKind::conventional_h265: return {};
  }
  throw ConfigError("unknown baseline kind");
}

struct SlotDecision {
  RbAssignment kappa;
  BeamformingTensor w;
  std::vector<double> raw;
  std::vector<double> diag;
};

SlotDecision decide_slot(const AgentBundle& b, const EpisodeConfig& env_cfg,
                         const std::vector<double>& s, double eps, double sigma, Rng& rng,
                         NoiseState& ou, const std::vector<double>* slot1_raw) {
  SlotDecision d;
  if (b.has_dqn) {
    d.kappa = (eps > 0.0 && rng.bernoulli(eps))
                  ? random_allocation(b.users, b.rbs, env_cfg.caps, rng)
                  : dqn_select_allocation(b.dqn, s, env_cfg.caps);
    d.raw = noisy_action(b.ddpg, s, sigma, rng, ou);
  } else {
    d.raw = slot1_raw ? *slot1_raw : noisy_action(b.ddpg, s, sigma, rng, ou);
    d.kappa = greedy_allocation(ddpg_ta_alloc_scores(b, d.raw), env_cfg.caps);
  }
  d.w = apply_beam_pipeline(d.raw, d.kappa, env_cfg.channel, b.ddpg.action_dim, b.w_offset,
                            &d.diag);
  return d;
}

/// Lowest quality any of this episode's options can deliver; reported when an
/// episode never delivers a single user-slot, so the quality column stays
/// defined (and constant for a one-option policy).
double min_available_quality(const EpisodeConfig& env_cfg, const Catalog& catalog) {
  double best = std::numeric_limits<double>::infinity();
  if (env_cfg.source == QualitySource::h265_ladder) {
    for (const H265Level& lvl : env_cfg.ladder.levels) best = std::min(best, lvl.psnr_db);
  } else {
    for (const auto& pairs : env_cfg.user_pairs)
      for (int idx : pairs)
        best = std::min(best,
                        quality_of(catalog.specs[static_cast<std::size_t>(idx)], env_cfg.metric));
  }
  return best;
}

struct EpisodeAccum {
  int users = 0;
  int slots = 0;
  double reward_sum = 0.0;
  double utility_sum = 0.0;
  long long frozen_user_slots = 0;
  double quality_sum = 0.0;
  long long delivered_user_slots = 0;
  std::array<long long, 8> violations{};

  void add(const SlotOutcome& out) {
    ++slots;
    reward_sum += out.reward;
    utility_sum += out.utility;
    for (int f = 0; f < 8; ++f)
      if (out.flags.flag[static_cast<std::size_t>(f)]) ++violations[static_cast<std::size_t>(f)];
    for (int u = 0; u < users; ++u) {
      if (out.frozen[static_cast<std::size_t>(u)]) {
        ++frozen_user_slots;
      } else {
        quality_sum += out.quality[static_cast<std::size_t>(u)];
        ++delivered_user_slots;
      }
    }
  }

  void fill(EpisodeRecord& rec, double fallback_quality) const {
    rec.mean_reward = slots > 0 ? reward_sum / slots : 0.0;
    rec.mean_utility = slots > 0 ? utility_sum / slots : 0.0;
    const long long user_slots = static_cast<long long>(users) * slots;
    rec.freezing_pct = user_slots > 0 ? 100.0 * frozen_user_slots / user_slots : 0.0;
    rec.psnr_db =
        delivered_user_slots > 0 ? quality_sum / delivered_user_slots : fallback_quality;
    rec.violations = violations;
  }
};

/// One exploration-free episode; fills the non-eval metric fields of `rec`
/// and optionally captures every executed decision.
void greedy_episode(const AgentBundle& b, Env& env, std::uint64_t seed, double fallback_quality,
                    EpisodeRecord& rec, std::vector<EvalDecision>* slots_out) {
  env.reset(seed);
  Rng no_rng(0);  // greedy decisions never consume randomness
  NoiseState ou;
  std::vector<double> raw1;
  const std::vector<double> s1 = env.state_vector();
  const std::vector<int> m_local =
      decide_tokenizers(b, env.config(), s1, 0.0, 0.0, no_rng, ou, raw1);
  if (env.config().source == QualitySource::tokenizer_catalog)
    env.apply_tokenizer_selection(m_local);

  EpisodeAccum acc;
  acc.users = env.config().channel.num_users;
  std::vector<double> s = s1;
  while (!env.done()) {
    const bool first = env.slot() == 1;
    SlotDecision d = decide_slot(b, env.config(), s, 0.0, 0.0, no_rng, ou,
                                 first && !b.has_dqn ? &raw1 : nullptr);
    if (slots_out) {
      const bool catalog_src = env.config().source == QualitySource::tokenizer_catalog;
      slots_out->push_back({catalog_src ? env.selected() : std::vector<int>{}, d.kappa, d.w});
    }
    const SlotOutcome out = env.step(d.kappa, d.w);
    acc.add(out);
    if (!env.done()) s = env.state_vector();
  }
  acc.fill(rec, fallback_quality);
}

}  // namespace

TrainResult train(const TrainerConfig& cfg, BaselineKind kind, const Catalog& catalog,
                  std::uint64_t seed) {
  cfg.validate(catalog);
  require_source_match(kind, cfg.env);

  Rng init_rng(derive_seed(seed, 'I'));
  Rng act_rng(derive_seed(seed, 'A'));
  Rng buf_rng(derive_seed(seed, 'B'));

  TrainResult result;
  result.bundle = make_bundle(cfg, kind, init_rng);
  AgentBundle& b = result.bundle;

  Env env(cfg.env, catalog);
  Env eval_env(cfg.env, catalog);
  const double fallback_quality = min_available_quality(cfg.env, catalog);

  ReplayBuffer<DiscreteTransition> discrete(static_cast<std::size_t>(cfg.buffer_capacity));
  ReplayBuffer<ContinuousTransition> continuous(static_cast<std::size_t>(cfg.buffer_capacity));

  const auto next_diag = [&b, &cfg](const ContinuousTransition& tr) {
    RbAssignment kappa_next;
    if (b.has_dqn) {
      const DqnScores sc = dqn_scores(b.dqn.target, b.dqn.layout, tr.s_next);
      kappa_next = greedy_allocation(sc.alloc, cfg.env.caps);
    } else {
      const Mat out = mlp_forward(b.ddpg.actor_target, row1(tr.s_next));
      kappa_next = greedy_allocation(ddpg_ta_alloc_scores(b, out.a), cfg.env.caps);
    }
    return pipeline_diag(kappa_next, cfg.env.channel, b.ddpg.action_dim, b.w_offset);
  };

  for (int e = 1; e <= cfg.episodes; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const double eps = b.has_dqn ? b.dqn.eps.value : 0.0;
    const double sigma = b.ddpg.noise.value;

    env.reset(derive_seed(seed, 'E', static_cast<std::uint64_t>(e)));
    NoiseState ou{cfg.noise_kind, cfg.ou_theta, {}};
    std::vector<double> raw1;
    const std::vector<double> s1 = env.state_vector();
    const std::vector<int> m_local =
        decide_tokenizers(b, cfg.env, s1, eps, sigma, act_rng, ou, raw1);
    if (cfg.env.source == QualitySource::tokenizer_catalog)
      env.apply_tokenizer_selection(m_local);

    // Transitions store the tokenizer indices only when a head learns them.
    const std::vector<int> m_stored =
        b.has_dqn && b.tok_mode != TokenizerHeadMode::none ? m_local : std::vector<int>{};

    EpisodeAccum acc;
    acc.users = cfg.env.channel.num_users;
    std::vector<double> s = s1;
    while (!env.done()) {
      const bool first = env.slot() == 1;
      SlotDecision d = decide_slot(b, cfg.env, s, eps, sigma, act_rng, ou,
                                   first && !b.has_dqn ? &raw1 : nullptr);
      const SlotOutcome out = env.step(d.kappa, d.w);
      std::vector<double> s_next = env.state_vector();
      const bool terminal = env.done();

      if (b.has_dqn) discrete.push({s, s_next, m_stored, d.kappa, out.reward, terminal});
      continuous.push({std::move(s), s_next, std::move(d.raw), std::move(d.diag), out.reward,
                       terminal});
      s = std::move(s_next);
      ++result.stats.env_steps;

      const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
      const bool ready = continuous.ready(batch) && (!b.has_dqn || discrete.ready(batch));
      if (ready) {
        if (result.stats.first_update_step < 0) {
          result.stats.first_update_step = result.stats.env_steps;
          result.stats.discrete_buffer_at_first_update = static_cast<long long>(discrete.size());
          result.stats.continuous_buffer_at_first_update =
              static_cast<long long>(continuous.size());
        }
        if (b.has_dqn) {
          dqn_td_update(b.dqn, discrete.sample(batch, buf_rng), cfg.env.caps, b.tok_mode,
                        b.shared_cap);
          dqn_polyak(b.dqn);
          ++result.stats.dqn_updates;
        }
        const std::vector<ContinuousTransition> batch2 = continuous.sample(batch, buf_rng);
        ddpg_critic_update(b.ddpg, batch2, next_diag);
        ddpg_actor_update(b.ddpg, batch2);
        ddpg_polyak(b.ddpg);
        ++result.stats.ddpg_updates;
      }

      acc.add(out);
    }

    EpisodeRecord rec;
    rec.episode = e;
    acc.fill(rec, fallback_quality);
    rec.epsilon = eps;
    rec.sigma_noise = sigma;

    if (cfg.eval_each_episode) {
      EpisodeRecord probe;
      greedy_episode(b, eval_env, derive_seed(seed, 'V', static_cast<std::uint64_t>(e)),
                     fallback_quality, probe, nullptr);
      rec.eval_reward = probe.mean_reward;
      rec.eval_utility = probe.mean_utility;
      rec.eval_freezing_pct = probe.freezing_pct;
      rec.eval_psnr_db = probe.psnr_db;
    }

    if (b.has_dqn) b.dqn.eps.step();
    b.ddpg.noise.step();

    rec.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.episodes.push_back(rec);
  }
  return result;
}

TrainingLog evaluate(const AgentBundle& bundle, const EpisodeConfig& env_cfg,
                     const Catalog& catalog, int episodes, std::uint64_t seed,
                     EvalTrace* trace) {
  env_cfg.validate(catalog);
  require_source_match(bundle.kind, env_cfg);
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (env_cfg.channel.num_users != bundle.users || env_cfg.channel.num_rbs != bundle.rbs ||
      env_cfg.channel.num_antennas != bundle.antennas)
    throw ConfigError("environment dimensions do not match the trained policy");

  Env env(env_cfg, catalog);
  const double fallback_quality = min_available_quality(env_cfg, catalog);
  TrainingLog log;
  for (int k = 1; k <= episodes; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<EvalDecision>* slots_out = nullptr;
    if (trace) {
      trace->episodes.emplace_back();
      slots_out = &trace->episodes.back();
    }
    EpisodeRecord rec;
    rec.episode = k;
    greedy_episode(bundle, env, derive_seed(seed, 'V', static_cast<std::uint64_t>(k)),
                   fallback_quality, rec, slots_out);
    rec.eval_reward = rec.mean_reward;
    rec.eval_utility = rec.mean_utility;
    rec.eval_freezing_pct = rec.freezing_pct;
    rec.eval_psnr_db = rec.psnr_db;
    rec.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.episodes.push_back(rec);
  }
  return log;
}

// --- Exhaustive reference solver -------------------------------------------

namespace {

struct CandidateScore {
  bool feasible = false;
  double utility = 0.0;
  std::vector<int> tokenizer_catalog_indices;
};

/// Scores one (kappa, w) pair on a fixed channel: picks each user's best
/// supported option, checks every constraint, and computes the utility with
/// the same primitives an environment step uses.
CandidateScore score_candidate(const EpisodeConfig& cfg, const Catalog& catalog,
                               const ChannelRealization& h, const RbAssignment& kappa,
                               const BeamformingTensor& w,
                               const std::vector<int>* forced_catalog_indices) {
  const int users = cfg.channel.num_users;
  const Grid sinr = compute_sinr(h, kappa, w, cfg.channel);
  const RateResult rates = compute_rates(sinr, kappa, cfg.channel.rb_bandwidth_hz);
  const PowerResult powers = compute_powers(w);

  CandidateScore out;
  std::vector<double> required(static_cast<std::size_t>(users), 0.0);
  std::vector<double> quality(static_cast<std::size_t>(users), 0.0);
  std::vector<double> qnorm(static_cast<std::size_t>(users), 0.0);
  out.tokenizer_catalog_indices.assign(static_cast<std::size_t>(users), -1);

  for (int u = 0; u < users; ++u) {
    const double rate = rates.per_user_bps[static_cast<std::size_t>(u)];
    const VideoParams& video = cfg.video_for(u);
    if (cfg.source == QualitySource::h265_ladder) {
      required[static_cast<std::size_t>(u)] =
          cfg.ladder.required_bps(video, cfg.ladder.levels.front());
      const int lvl = cfg.ladder.pick_level(rate, video);
      if (lvl < 0) return out;  // frozen stream: never feasible
      quality[static_cast<std::size_t>(u)] = cfg.ladder.levels[static_cast<std::size_t>(lvl)].psnr_db;
    } else {
      const auto& pairs = cfg.user_pairs[static_cast<std::size_t>(u)];
      int chosen = -1;
      if (forced_catalog_indices) {
        chosen = (*forced_catalog_indices)[static_cast<std::size_t>(u)];
        if (chosen < 0 || chosen >= static_cast<int>(catalog.specs.size())) return out;
        if (required_bitrate_bps(catalog.specs[static_cast<std::size_t>(chosen)], video) > rate)
          return out;  // frozen
      } else {
        // Options are stored in ascending compression-rate (and so quality)
        // order, so the best supported one is the last that fits.
        for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
          if (required_bitrate_bps(catalog.specs[static_cast<std::size_t>(*it)], video) <= rate) {
            chosen = *it;
            break;
          }
        }
        if (chosen < 0) return out;  // no option fits: frozen under any choice
      }
      out.tokenizer_catalog_indices[static_cast<std::size_t>(u)] = chosen;
      required[static_cast<std::size_t>(u)] =
          required_bitrate_bps(catalog.specs[static_cast<std::size_t>(chosen)], video);
      quality[static_cast<std::size_t>(u)] =
          quality_of(catalog.specs[static_cast<std::size_t>(chosen)], cfg.metric);
    }
    if (quality[static_cast<std::size_t>(u)] < cfg.q_min) return out;
    qnorm[static_cast<std::size_t>(u)] =
        normalize_quality(quality[static_cast<std::size_t>(u)], cfg.q_min, cfg.q_max);
  }

  const ViolationFlags flags =
      check_constraints(cfg, kappa, powers, rates.per_user_bps, required, quality);
  if (flags.any()) return out;
  out.feasible = true;
  out.utility = utility_value(cfg, qnorm, powers.per_user_w);
  return out;
}

}  // namespace

OracleResult oracle_solve(const EpisodeConfig& env_cfg, const Catalog& catalog,
                          const std::vector<std::uint64_t>& draw_seeds,
                          const std::vector<std::vector<EvalDecision>>* extra_candidates,
                          const OracleConfig& oracle_cfg) {
  env_cfg.validate(catalog);
  const ChannelConfig& cc = env_cfg.channel;
  const int users = cc.num_users, rbs = cc.num_rbs, antennas = cc.num_antennas;
  if (users > 3 || rbs > 4 || antennas > 4)
    throw ConfigError("enumeration bound exceeded: users <= 3, RBs <= 4, antennas <= 4");
  if (env_cfg.source == QualitySource::tokenizer_catalog)
    for (const auto& pairs : env_cfg.user_pairs)
      if (pairs.size() > 4)
        throw ConfigError("enumeration bound exceeded: at most 4 options per user");
  if (oracle_cfg.grid_levels < 1) throw ConfigError("grid_levels must be >= 1");

  // All assignments satisfying the structural constraints.
  std::vector<RbAssignment> kappas;
  const int cells = users * rbs;
  for (unsigned mask = 0; mask < (1u << cells); ++mask) {
    RbAssignment kappa(users, rbs);
    for (int c = 0; c < cells; ++c)
      kappa.on[static_cast<std::size_t>(c)] = (mask >> c) & 1u ? 1 : 0;
    bool ok = true;
    for (int i = 0; i < users && ok; ++i) {
      const int rc = kappa.row_count(i);
      ok = rc >= env_cfg.caps.min_rbs_per_user && rc <= env_cfg.caps.max_rbs_per_user;
    }
    for (int l = 0; l < rbs && ok; ++l) ok = kappa.col_count(l) <= env_cfg.caps.per_rb_user_cap;
    if (ok) kappas.push_back(std::move(kappa));
  }

  OracleResult result;
  long long candidates = 0;
  const int levels = oracle_cfg.grid_levels;

  for (std::size_t d = 0; d < draw_seeds.size(); ++d) {
    const std::uint64_t draw_seed = draw_seeds[d];
    Rng rng(draw_seed);
    const ChannelRealization h = sample_channels(cc, rng);  // matches Env::reset(draw_seed)

    OracleDraw draw;
    draw.seed = draw_seed;
    double best = -std::numeric_limits<double>::infinity();

    for (const RbAssignment& kappa : kappas) {
      std::vector<std::pair<int, int>> active;
      for (int i = 0; i < users; ++i)
        for (int l = 0; l < rbs; ++l)
          if (kappa.at(i, l)) active.emplace_back(i, l);

      // Matched-filter directions are fixed per cell; only powers vary.
      std::vector<std::vector<cplx>> dir(active.size());
      for (std::size_t a = 0; a < active.size(); ++a) {
        const auto [i, l] = active[a];
        double norm2 = 0.0;
        for (int n = 0; n < antennas; ++n) norm2 += std::norm(h.at(i, l, n));
        const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        dir[a].resize(static_cast<std::size_t>(antennas));
        for (int n = 0; n < antennas; ++n)
          dir[a][static_cast<std::size_t>(n)] = h.at(i, l, n) * inv;
      }

      BeamformingTensor w(users, rbs, antennas);
      std::vector<int> lv(active.size(), 1);
      const auto try_combo = [&]() {
        if (++candidates > oracle_cfg.candidate_budget)
          throw ConfigError("enumeration bound exceeded: candidate budget");
        for (std::size_t a = 0; a < active.size(); ++a) {
          const auto [i, l] = active[a];
          const double amp = std::sqrt(lv[a] * cc.bs_power_budget_w / levels);
          for (int n = 0; n < antennas; ++n)
            w.at(i, l, n) = dir[a][static_cast<std::size_t>(n)] * amp;
        }
        const CandidateScore sc = score_candidate(env_cfg, catalog, h, kappa, w, nullptr);
        if (sc.feasible && sc.utility > best) {
          best = sc.utility;
          draw.feasible = true;
          draw.best = {sc.tokenizer_catalog_indices, kappa, w, sc.utility};
        }
      };
      // Per-cell power levels k/levels of the budget, each cell at least
      // level 1, level sum <= levels: the integer sum makes the global power
      // filter exact.
      std::function<void(std::size_t, int)> walk = [&](std::size_t pos, int remaining) {
        if (pos == active.size()) {
          try_combo();
          return;
        }
        const int later = static_cast<int>(active.size() - pos - 1);
        for (int k = 1; k + later <= remaining; ++k) {
          lv[pos] = k;
          walk(pos + 1, remaining - k);
        }
      };
      if (active.empty())
        try_combo();  // the empty assignment (possible when min_rbs_per_user = 0)
      else if (static_cast<int>(active.size()) <= levels)
        walk(0, levels);
    }

    if (extra_candidates && d < extra_candidates->size()) {
      for (const EvalDecision& dec : (*extra_candidates)[d]) {
        if (++candidates > oracle_cfg.candidate_budget)
          throw ConfigError("enumeration bound exceeded: candidate budget");
        const std::vector<int>* forced =
            env_cfg.source == QualitySource::tokenizer_catalog ? &dec.tokenizer_catalog_indices
                                                               : nullptr;
        const CandidateScore sc = score_candidate(env_cfg, catalog, h, dec.kappa, dec.w, forced);
        if (sc.feasible && sc.utility > best) {
          best = sc.utility;
          draw.feasible = true;
          draw.best = {sc.tokenizer_catalog_indices, dec.kappa, dec.w, sc.utility};
        }
      }
    }

    if (draw.feasible) {
      ++result.feasible_draws;
      result.mean_utility += draw.best.utility;
    }
    result.draws.push_back(std::move(draw));
  }
  if (result.feasible_draws > 0) result.mean_utility /= result.feasible_draws;
  return result;
}

// --- Checkpoints ------------------------------------------------------------

namespace {

double read_hex_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw ParseError("truncated checkpoint scalar", 0);
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw ParseError("bad checkpoint scalar '" + tok + "'", 0);
  return v;
}

void save_schedule(std::ostream& out, const char* name, const DecaySchedule& s) {
  out << name << " " << std::hexfloat << s.value << " " << s.floor << " " << s.decay
      << std::defaultfloat << "\n";
}

DecaySchedule load_schedule(std::istream& in, const char* name) {
  std::string word;
  if (!(in >> word) || word != name) throw ParseError(std::string("expected ") + name, 0);
  DecaySchedule s;
  s.value = read_hex_double(in);
  s.floor = read_hex_double(in);
  s.decay = read_hex_double(in);
  return s;
}

void save_adam_config(std::ostream& out, const AdamConfig& cfg) {
  out << "adamcfg " << std::hexfloat << cfg.lr << " " << cfg.beta1 << " " << cfg.beta2 << " "
      << cfg.eps << std::defaultfloat << "\n";
}

AdamConfig load_adam_config(std::istream& in) {
  std::string word;
  if (!(in >> word) || word != "adamcfg") throw ParseError("expected adamcfg", 0);
  AdamConfig cfg;
  cfg.lr = read_hex_double(in);
  cfg.beta1 = read_hex_double(in);
  cfg.beta2 = read_hex_double(in);
  cfg.eps = read_hex_double(in);
  return cfg;
}

}  // namespace

void save_bundle(std::ostream& out, const AgentBundle& b) {
  out << "tokencom-checkpoint v1\n";
  out << "kind " << to_string(b.kind) << "\n";
  out << "dims " << b.users << " " << b.rbs << " " << b.antennas << " " << b.state_dim << "\n";
  out << "tok " << static_cast<int>(b.tok_mode) << " " << b.shared_cap << " " << b.tok_block
      << " " << b.kappa_offset << " " << b.w_offset << "\n";
  out << "dqn " << (b.has_dqn ? 1 : 0) << "\n";
  if (b.has_dqn) {
    out << "layout " << b.dqn.layout.users << " " << b.dqn.layout.rbs;
    for (int m : b.dqn.layout.tok_options) out << " " << m;
    out << "\n";
    save_schedule(out, "eps", b.dqn.eps);
    out << "scalars " << std::hexfloat << b.dqn.gamma << " " << b.dqn.tau << std::defaultfloat
        << "\n";
    save_adam_config(out, b.dqn.adam_cfg);
    save_mlp(out, b.dqn.online);
    save_mlp(out, b.dqn.target);
    save_adam(out, b.dqn.adam);
  }
  out << "ddpg " << b.ddpg.state_dim << " " << b.ddpg.action_dim << "\n";
  save_schedule(out, "noise", b.ddpg.noise);
  out << "scalars " << std::hexfloat << b.ddpg.gamma << " " << b.ddpg.tau << std::defaultfloat
      << "\n";
  save_adam_config(out, b.ddpg.actor_cfg);
  save_adam_config(out, b.ddpg.critic_cfg);
  save_mlp(out, b.ddpg.actor);
  save_mlp(out, b.ddpg.actor_target);
  save_mlp(out, b.ddpg.critic);
  save_mlp(out, b.ddpg.critic_target);
  save_adam(out, b.ddpg.actor_adam);
  save_adam(out, b.ddpg.critic_adam);
}

AgentBundle load_bundle(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "tokencom-checkpoint v1")
    throw ParseError("not a checkpoint file (bad magic line)", 0);
  std::string word, kind_name;
  if (!(in >> word >> kind_name) || word != "kind") throw ParseError("expected kind record", 0);

  AgentBundle b;
  b.kind = baseline_from_string(kind_name);
  int tok_mode = 0, has_dqn = 0;
  if (!(in >> word >> b.users >> b.rbs >> b.antennas >> b.state_dim) || word != "dims")
    throw ParseError("expected dims record", 0);
  if (!(in >> word >> tok_mode >> b.shared_cap >> b.tok_block >> b.kappa_offset >> b.w_offset) ||
      word != "tok")
    throw ParseError("expected tok record", 0);
  if (tok_mode < 0 || tok_mode > 2) throw ParseError("tokenizer head mode out of range", 0);
  b.tok_mode = static_cast<TokenizerHeadMode>(tok_mode);
  if (!(in >> word >> has_dqn) || word != "dqn") throw ParseError("expected dqn record", 0);
  b.has_dqn = has_dqn != 0;

  if (b.has_dqn) {
    if (!(in >> word >> b.dqn.layout.users >> b.dqn.layout.rbs) || word != "layout")
      throw ParseError("expected layout record", 0);
    if (b.dqn.layout.users != b.users) throw ParseError("layout user count mismatch", 0);
    b.dqn.layout.tok_options.resize(static_cast<std::size_t>(b.dqn.layout.users));
    for (int& m : b.dqn.layout.tok_options)
      if (!(in >> m)) throw ParseError("truncated layout record", 0);
    b.dqn.layout.validate();
    b.dqn.eps = load_schedule(in, "eps");
    if (!(in >> word) || word != "scalars") throw ParseError("expected scalars record", 0);
    b.dqn.gamma = read_hex_double(in);
    b.dqn.tau = read_hex_double(in);
    b.dqn.adam_cfg = load_adam_config(in);
    b.dqn.online = load_mlp(in);
    b.dqn.target = load_mlp(in);
    b.dqn.adam = load_adam(in);
  }
  if (!(in >> word >> b.ddpg.state_dim >> b.ddpg.action_dim) || word != "ddpg")
    throw ParseError("expected ddpg record", 0);
  b.ddpg.noise = load_schedule(in, "noise");
  if (!(in >> word) || word != "scalars") throw ParseError("expected scalars record", 0);
  b.ddpg.gamma = read_hex_double(in);
  b.ddpg.tau = read_hex_double(in);
  b.ddpg.actor_cfg = load_adam_config(in);
  b.ddpg.critic_cfg = load_adam_config(in);
  b.ddpg.actor = load_mlp(in);
  b.ddpg.actor_target = load_mlp(in);
  b.ddpg.critic = load_mlp(in);
  b.ddpg.critic_target = load_mlp(in);
  b.ddpg.actor_adam = load_adam(in);
  b.ddpg.critic_adam = load_adam(in);
  return b;
}

void save_bundle_file(const std::string& path, const AgentBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint file for writing: " + path);
  save_bundle(out, bundle);
  if (!out) throw ConfigError("failed writing checkpoint file: " + path);
}

AgentBundle load_bundle_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint file: " + path);
  return load_bundle(in);
}

}  // namespace tokencom
