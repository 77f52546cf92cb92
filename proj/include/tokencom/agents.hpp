#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "tokencom/channel.hpp"
#include "tokencom/errors.hpp"
#include "tokencom/mlp.hpp"
#include "tokencom/rng.hpp"

namespace tokencom {

/// Multiplicative decay with a floor, stepped once per episode. Used for both
/// the exploration rate and the actor noise scale.
struct DecaySchedule {
  double value = 1.0;
  double floor = 0.05;
  double decay = 0.995;

  void step() { value = value * decay < floor ? floor : value * decay; }
};

// --- Discrete agent -------------------------------------------------------

/// Output layout of the discrete action-value network: one score block per
/// user's tokenizer options (possibly empty), then one score per (user, RB)
/// cell. The value of a compound action is the sum of its chosen slots.
struct DqnLayout {
  std::vector<int> tok_options;  // per user; 0 = no tokenizer block for that user
  int users = 0;
  int rbs = 0;

  int tok_total() const;
  int tok_offset(int user) const;
  int alloc_offset() const { return tok_total(); }
  int output_dim() const { return tok_total() + users * rbs; }
  void validate() const;
};

struct DqnAgent {
  DqnLayout layout;
  Mlp online;
  Mlp target;
  AdamState adam;
  AdamConfig adam_cfg;
  DecaySchedule eps;     // exploration rate, stepped once per episode
  double gamma = 0.98;   // discount used by the TD bootstrap
  double tau = 0.005;    // soft-update mixing factor
};

DqnAgent make_dqn(int state_dim, const DqnLayout& layout, const std::vector<int>& hidden,
                  double lr, Rng& rng);

/// One network evaluation split into named blocks.
struct DqnScores {
  std::vector<std::vector<double>> tok;  // per user
  Grid alloc;
};

DqnScores dqn_scores(const Mlp& net, const DqnLayout& layout, const std::vector<double>& state);

/// Per-user argmax over that user's tokenizer block (ties -> lowest index).
std::vector<int> dqn_select_tokenizers(const DqnAgent& agent, const std::vector<double>& state);

/// Epsilon-greedy variant: with probability `epsilon` every user draws a
/// uniformly random valid local index, otherwise the per-user argmax.
std::vector<int> dqn_select_tokenizers(const DqnAgent& agent, const std::vector<double>& state,
                                       double epsilon, Rng& rng);

/// Argmax over shared option index j < max_shared of the summed per-user
/// scores; every user gets the same local index.
int dqn_select_shared_tokenizer(const DqnAgent& agent, const std::vector<double>& state,
                                int max_shared);

/// Checks whether every user can still reach min_rbs_per_user given the
/// current grants, per-RB caps, and cell exclusivity (max-flow feasibility).
bool deficits_satisfiable(const RbAssignment& kappa, const RbCaps& caps);

/// Deterministic decode of per-cell scores into a feasible assignment:
/// cells in (score desc, user asc, RB asc) order, positive scores granted
/// when caps allow and the minimum-count requirement stays satisfiable, then
/// remaining minimum-count deficits repaired best-score-first under the same
/// guard. The result always satisfies every assignment constraint.
RbAssignment greedy_allocation(const Grid& scores, const RbCaps& caps);

/// Sum of granted cells' scores; the value the decode optimizes greedily.
double allocation_value(const Grid& scores, const RbAssignment& kappa);

RbAssignment dqn_select_allocation(const DqnAgent& agent, const std::vector<double>& state,
                                   const RbCaps& caps);

/// Exploration draw: decodes i.i.d. uniform(-0.5, 0.5) cell scores, so the
/// pattern is random but always feasible.
RbAssignment random_allocation(int users, int rbs, const RbCaps& caps, Rng& rng);

struct DiscreteTransition {
  std::vector<double> s;
  std::vector<double> s_next;
  std::vector<int> m;  // per-user local tokenizer index; empty when no block
  RbAssignment kappa;
  double r = 0.0;
  bool terminal = false;
};

enum class TokenizerHeadMode { per_user, shared, none };

/// One optimizer step on the squared TD error of the compound action value.
/// The bootstrap term (discounted by agent.gamma, computed from the target
/// network only) maximizes each tokenizer block per `mode` and scores the
/// greedy decode of the target network's cell block. Returns the loss.
double dqn_td_update(DqnAgent& agent, const std::vector<DiscreteTransition>& batch,
                     const RbCaps& caps, TokenizerHeadMode mode, int shared_cap = 0);

/// target <- tau * online + (1 - tau) * target, with tau = agent.tau.
void dqn_polyak(DqnAgent& agent);

// --- Continuous agent -----------------------------------------------------

struct DdpgAgent {
  Mlp actor;
  Mlp actor_target;
  Mlp critic;  // input [state, effective action] -> scalar
  Mlp critic_target;
  AdamState actor_adam;
  AdamState critic_adam;
  AdamConfig actor_cfg;
  AdamConfig critic_cfg;
  int state_dim = 0;
  int action_dim = 0;
  DecaySchedule noise{0.2, 0.02, 0.995};  // exploration noise scale, per episode
  double gamma = 0.98;
  double tau = 0.005;
};

DdpgAgent make_ddpg(int state_dim, int action_dim, const std::vector<int>& hidden,
                    double lr_actor, double lr_critic, Rng& rng);

/// Deterministic tanh policy output (already inside [-1, 1]).
std::vector<double> ddpg_policy(const DdpgAgent& agent, const std::vector<double>& state);

/// Policy output plus N(0, sigma) per coordinate, clamped to [-1, 1].
std::vector<double> ddpg_raw_action(const DdpgAgent& agent, const std::vector<double>& state,
                                    double sigma, Rng& rng);

void clamp_unit(std::vector<double>& v);

/// Element-wise scaling applied to the raw action before it reaches the
/// radio: beam coordinates of granted cells get c(A) = sqrt(P / (2 N A)) so
/// any clamped action is inside the power budget (all-ones spends exactly
/// P), ungranted cells get 0, and coordinates outside the beam block pass
/// through unchanged. A = number of granted cells; c(0) = 0.
std::vector<double> pipeline_diag(const RbAssignment& kappa, const ChannelConfig& cfg,
                                  int action_dim, int w_offset);

/// Reads the beam block at w_offset (cell-major; per cell: N real then N
/// imaginary parts), scales by diag, and packs the beamforming tensor.
BeamformingTensor action_to_beams(const std::vector<double>& action,
                                  const std::vector<double>& diag, const ChannelConfig& cfg,
                                  int w_offset);

/// Full acting pipeline: noisy clamped policy output, masked and scaled per
/// the granted assignment, with a final projection onto the power budget
/// (folded into the diagonal so stored transitions stay exact). Ungranted
/// cells come out exactly zero and total power never exceeds the budget.
/// Optionally returns the raw action and the applied diagonal for replay.
BeamformingTensor ddpg_act(const DdpgAgent& agent, const std::vector<double>& state, double sigma,
                           Rng& rng, const RbAssignment& kappa, const ChannelConfig& cfg,
                           int w_offset, std::vector<double>* raw_out = nullptr,
                           std::vector<double>* diag_out = nullptr);

/// Same masking/scaling/projection applied to an already-drawn raw action.
BeamformingTensor apply_beam_pipeline(const std::vector<double>& raw, const RbAssignment& kappa,
                                      const ChannelConfig& cfg, int action_dim, int w_offset,
                                      std::vector<double>* diag_out = nullptr);

struct ContinuousTransition {
  std::vector<double> s;
  std::vector<double> s_next;
  std::vector<double> action;  // executed raw action, in [-1, 1]
  std::vector<double> diag;    // scaling actually applied to it
  double r = 0.0;
  bool terminal = false;
};

/// One optimizer step on the critic's squared TD error (bootstrap term from
/// the target actor and target critic, discounted by agent.gamma).
/// `next_diag` supplies the scaling that would be applied at the successor
/// state (it encodes the successor assignment). Returns the loss.
double ddpg_critic_update(DdpgAgent& agent, const std::vector<ContinuousTransition>& batch,
                          const std::function<std::vector<double>(const ContinuousTransition&)>&
                              next_diag);

/// One optimizer step on the actor against the frozen critic: minimizes
/// -mean Q(s, diag * pi(s)). Returns that loss.
double ddpg_actor_update(DdpgAgent& agent, const std::vector<ContinuousTransition>& batch);

/// Soft-updates both target networks with tau = agent.tau.
void ddpg_polyak(DdpgAgent& agent);

// --- Replay ---------------------------------------------------------------

/// Fixed-capacity ring; uniform sampling with replacement.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
  }

  void push(T t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[next_] = std::move(t);
      next_ = (next_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  const T& operator[](std::size_t k) const { return items_[k]; }
  bool ready(std::size_t batch) const { return items_.size() >= batch; }

  /// Uniform draw with replacement; requires size() >= batch.
  std::vector<T> sample(std::size_t batch, Rng& rng) const {
    if (!ready(batch)) throw ConfigError("replay buffer not ready: size < batch");
    std::vector<T> out;
    out.reserve(batch);
    for (std::size_t k = 0; k < batch; ++k)
      out.push_back(items_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(items_.size())))]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<T> items_;
};

}  // namespace tokencom
