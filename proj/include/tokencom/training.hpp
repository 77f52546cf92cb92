#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tokencom/agents.hpp"
#include "tokencom/catalog.hpp"
#include "tokencom/env.hpp"

namespace tokencom {

/// The trainable policies. `hybrid` couples the discrete selector with the
/// continuous beamformer; the others remove or restrict one of its legs.
enum class BaselineKind { hybrid, ddpg_ta, agnostic_ta, fixed_ta, conventional_h265 };

std::string to_string(BaselineKind kind);
BaselineKind baseline_from_string(const std::string& name);

enum class NoiseKind { gaussian, ou };

struct TrainerConfig {
  EpisodeConfig env;
  int episodes = 500;
  int batch_size = 256;
  int buffer_capacity = 100000;
  double gamma = 0.98;
  double tau = 0.005;
  DecaySchedule epsilon{1.0, 0.05, 0.995};
  DecaySchedule noise{0.2, 0.02, 0.995};
  NoiseKind noise_kind = NoiseKind::gaussian;
  double ou_theta = 0.15;  // mean-reversion rate when noise_kind == ou
  std::vector<int> hidden{256, 256};
  double lr_q = 1e-3;
  double lr_critic = 1e-3;
  double lr_actor = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // After each training episode, run one greedy probe episode and record its
  // metrics alongside the training metrics.
  bool eval_each_episode = true;

  void validate(const Catalog& catalog) const;
};

/// Per-episode aggregates. The same record shape is produced by training and
/// by evaluation runs.
struct EpisodeRecord {
  int episode = 0;  // 1-based
  // Metrics of the episode itself (exploratory during training).
  double mean_reward = 0.0;
  double mean_utility = 0.0;
  double freezing_pct = 0.0;  // % of user-slots with a frozen stream
  double psnr_db = 0.0;       // mean delivered PSNR over non-frozen user-slots
  std::array<long long, 8> violations{};  // slots on which each flag fired
  // Metrics of the greedy probe episode (zero when probing is disabled).
  double eval_reward = 0.0;
  double eval_utility = 0.0;
  double eval_freezing_pct = 0.0;
  double eval_psnr_db = 0.0;
  // Exploration parameters in force during this episode, and wall time.
  double epsilon = 0.0;
  double sigma_noise = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainingLog {
  std::vector<EpisodeRecord> episodes;
};

/// A trained policy: which networks exist, how the continuous action vector
/// is laid out, and how tokenizer selection is made.
struct AgentBundle {
  BaselineKind kind = BaselineKind::hybrid;
  bool has_dqn = false;
  DqnAgent dqn;
  DdpgAgent ddpg;
  TokenizerHeadMode tok_mode = TokenizerHeadMode::none;
  int shared_cap = 0;     // shared-selection option count (agnostic_ta)
  int tok_block = 0;      // per-user coordinate block width (ddpg_ta), else 0
  int kappa_offset = -1;  // assignment-score block offset (ddpg_ta), else -1
  int w_offset = 0;       // beam block offset in the continuous action
  int users = 0, rbs = 0, antennas = 0;
  int state_dim = 0;
};

/// Counters proving the update schedule behaved: how many environment steps
/// ran, how many optimizer updates of each family, and the buffer fill when
/// the first update happened (updates are gated on every buffer in use
/// holding at least one full batch).
struct TrainStats {
  long long env_steps = 0;
  long long dqn_updates = 0;
  long long ddpg_updates = 0;
  long long first_update_step = -1;  // 1-based env step; -1 = never updated
  long long discrete_buffer_at_first_update = 0;
  long long continuous_buffer_at_first_update = 0;
};

struct TrainResult {
  AgentBundle bundle;
  TrainingLog log;
  TrainStats stats;
};

/// Trains one policy kind from scratch. The episode config's quality source
/// must match the kind (the ladder source is exactly the conventional
/// baseline's). Deterministic in (cfg, kind, seed).
TrainResult train(const TrainerConfig& cfg, BaselineKind kind, const Catalog& catalog,
                  std::uint64_t seed);

/// One executed slot decision, replayable through an environment.
struct EvalDecision {
  std::vector<int> tokenizer_catalog_indices;  // empty for the ladder source
  RbAssignment kappa;
  BeamformingTensor w;
};

struct EvalTrace {
  std::vector<std::vector<EvalDecision>> episodes;  // [episode][slot]
};

/// Runs greedy episodes (no exploration) and returns per-episode records in
/// the training-log schema. Optionally captures every executed decision.
TrainingLog evaluate(const AgentBundle& bundle, const EpisodeConfig& env_cfg,
                     const Catalog& catalog, int episodes, std::uint64_t seed,
                     EvalTrace* trace = nullptr);

// --- Exhaustive reference solver -------------------------------------------

struct OracleConfig {
  int grid_levels = 20;  // per-cell power grid: k/grid_levels of the budget
  long long candidate_budget = 2000000;
};

struct OracleDecision {
  std::vector<int> tokenizer_catalog_indices;
  RbAssignment kappa;
  BeamformingTensor w;
  double utility = 0.0;
};

struct OracleDraw {
  std::uint64_t seed = 0;
  bool feasible = false;  // some decision satisfies every constraint
  OracleDecision best;    // valid only when feasible
};

struct OracleResult {
  std::vector<OracleDraw> draws;
  int feasible_draws = 0;
  double mean_utility = 0.0;  // over feasible draws
};

/// Enumerates, for each single-slot channel draw, every feasible assignment
/// combined with matched-filter beams on a per-cell power grid (filtered by
/// the power budget), picking each user's highest-rate tokenizer the achieved
/// rate supports; returns the utility-maximizing feasible decision per draw.
/// `extra_candidates`, when given, supplies externally executed decisions
/// (e.g. a policy's) scored under the same feasibility filter — one list per
/// draw. Throws when the instance exceeds the enumeration bounds
/// (users <= 3, RBs <= 4, antennas <= 4, options per user <= 4) or the
/// candidate budget.
OracleResult oracle_solve(const EpisodeConfig& env_cfg, const Catalog& catalog,
                          const std::vector<std::uint64_t>& draw_seeds,
                          const std::vector<std::vector<EvalDecision>>* extra_candidates = nullptr,
                          const OracleConfig& oracle_cfg = {});

// --- Checkpoints ------------------------------------------------------------

/// Serializes every network, optimizer state, and exploration-schedule
/// position; text format, exact round-trip.
void save_bundle(std::ostream& out, const AgentBundle& bundle);
AgentBundle load_bundle(std::istream& in);
void save_bundle_file(const std::string& path, const AgentBundle& bundle);
AgentBundle load_bundle_file(const std::string& path);

}  // namespace tokencom
