#include "tokencom/agents.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace tokencom {

namespace {

Mat row_mat(const std::vector<double>& v) {
  Mat m(1, static_cast<int>(v.size()));
  m.a = v;
  return m;
}

Mat stack_rows(const std::vector<const std::vector<double>*>& rows) {
  if (rows.empty()) throw ConfigError("empty batch");
  const int cols = static_cast<int>(rows.front()->size());
  Mat m(static_cast<int>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r]->size()) != cols) throw ConfigError("ragged batch");
    std::copy(rows[r]->begin(), rows[r]->end(), m.a.begin() + static_cast<std::ptrdiff_t>(r) * cols);
  }
  return m;
}

}  // namespace

// --- Discrete agent -------------------------------------------------------

int DqnLayout::tok_total() const {
  int n = 0;
  for (int m : tok_options) n += m;
  return n;
}

int DqnLayout::tok_offset(int user) const {
  int off = 0;
  for (int u = 0; u < user; ++u) off += tok_options[static_cast<std::size_t>(u)];
  return off;
}

void DqnLayout::validate() const {
  if (users < 1 || rbs < 1) throw ConfigError("layout needs at least one user and one RB");
  if (static_cast<int>(tok_options.size()) != users)
    throw ConfigError("layout needs one tokenizer option count per user");
  for (int m : tok_options)
    if (m < 0) throw ConfigError("tokenizer option counts must be >= 0");
}

DqnAgent make_dqn(int state_dim, const DqnLayout& layout, const std::vector<int>& hidden,
                  double lr, Rng& rng) {
  layout.validate();
  if (state_dim < 1) throw ConfigError("state dimension must be >= 1");
  std::vector<int> dims{state_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(layout.output_dim());
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::identity;
  DqnAgent agent;
  agent.layout = layout;
  agent.online = mlp_init(dims, acts, rng);
  agent.target = agent.online;
  agent.adam = AdamState::zeros_like(agent.online);
  agent.adam_cfg.lr = lr;
  return agent;
}

DqnScores dqn_scores(const Mlp& net, const DqnLayout& layout, const std::vector<double>& state) {
  const Mat out = mlp_forward(net, row_mat(state));
  if (out.cols != layout.output_dim()) throw ConfigError("network output does not match the layout");
  DqnScores s;
  s.tok.resize(static_cast<std::size_t>(layout.users));
  for (int u = 0; u < layout.users; ++u) {
    const int off = layout.tok_offset(u);
    const int m = layout.tok_options[static_cast<std::size_t>(u)];
    s.tok[static_cast<std::size_t>(u)].assign(out.a.begin() + off, out.a.begin() + off + m);
  }
  s.alloc = Grid(layout.users, layout.rbs);
  std::copy(out.a.begin() + layout.alloc_offset(), out.a.end(), s.alloc.v.begin());
  return s;
}

std::vector<int> dqn_select_tokenizers(const DqnAgent& agent, const std::vector<double>& state) {
  const DqnScores s = dqn_scores(agent.online, agent.layout, state);
  std::vector<int> pick(static_cast<std::size_t>(agent.layout.users), 0);
  for (int u = 0; u < agent.layout.users; ++u) {
    const auto& block = s.tok[static_cast<std::size_t>(u)];
    if (block.empty()) throw ConfigError("user has no tokenizer block to select from");
    pick[static_cast<std::size_t>(u)] = static_cast<int>(
        std::max_element(block.begin(), block.end()) - block.begin());
  }
  return pick;
}

std::vector<int> dqn_select_tokenizers(const DqnAgent& agent, const std::vector<double>& state,
                                       double epsilon, Rng& rng) {
  if (rng.bernoulli(epsilon)) {
    std::vector<int> pick(static_cast<std::size_t>(agent.layout.users), 0);
    for (int u = 0; u < agent.layout.users; ++u) {
      const int m_u = agent.layout.tok_options[static_cast<std::size_t>(u)];
      if (m_u == 0) throw ConfigError("user has no tokenizer block to select from");
      pick[static_cast<std::size_t>(u)] = rng.uniform_int(m_u);
    }
    return pick;
  }
  return dqn_select_tokenizers(agent, state);
}

int dqn_select_shared_tokenizer(const DqnAgent& agent, const std::vector<double>& state,
                                int max_shared) {
  if (max_shared < 1) throw ConfigError("shared option count must be >= 1");
  const DqnScores s = dqn_scores(agent.online, agent.layout, state);
  int best = 0;
  double best_sum = 0.0;
  for (int j = 0; j < max_shared; ++j) {
    double sum = 0.0;
    for (int u = 0; u < agent.layout.users; ++u) {
      const auto& block = s.tok[static_cast<std::size_t>(u)];
      if (j >= static_cast<int>(block.size()))
        throw ConfigError("shared option index exceeds a user's block");
      sum += block[static_cast<std::size_t>(j)];
    }
    if (j == 0 || sum > best_sum) {
      best = j;
      best_sum = sum;
    }
  }
  return best;
}

bool deficits_satisfiable(const RbAssignment& kappa, const RbCaps& caps) {
  if (caps.min_rbs_per_user <= 0) return true;
  const int users = kappa.users, rbs = kappa.rbs;
  int total_deficit = 0;
  std::vector<int> deficit(static_cast<std::size_t>(users), 0);
  for (int i = 0; i < users; ++i) {
    deficit[static_cast<std::size_t>(i)] = std::max(0, caps.min_rbs_per_user - kappa.row_count(i));
    total_deficit += deficit[static_cast<std::size_t>(i)];
  }
  if (total_deficit == 0) return true;

  // Max-flow: source(0) -> users(1..U) -> RBs(U+1..U+R) -> sink(U+R+1).
  const int n = users + rbs + 2;
  const int src = 0, sink = n - 1;
  std::vector<std::vector<int>> cap(static_cast<std::size_t>(n),
                                    std::vector<int>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < users; ++i) cap[src][1 + i] = deficit[static_cast<std::size_t>(i)];
  for (int i = 0; i < users; ++i)
    for (int l = 0; l < rbs; ++l)
      if (kappa.at(i, l) == 0) cap[1 + i][1 + users + l] = 1;
  for (int l = 0; l < rbs; ++l)
    cap[1 + users + l][sink] = std::max(0, caps.per_rb_user_cap - kappa.col_count(l));

  int flow = 0;
  while (true) {
    std::vector<int> parent(static_cast<std::size_t>(n), -1);
    parent[src] = src;
    std::queue<int> q;
    q.push(src);
    while (!q.empty() && parent[sink] < 0) {
      const int v = q.front();
      q.pop();
      for (int t = 0; t < n; ++t)
        if (parent[t] < 0 && cap[v][t] > 0) {
          parent[t] = v;
          q.push(t);
        }
    }
    if (parent[sink] < 0) break;
    int bottleneck = total_deficit;
    for (int v = sink; v != src; v = parent[v]) bottleneck = std::min(bottleneck, cap[parent[v]][v]);
    for (int v = sink; v != src; v = parent[v]) {
      cap[parent[v]][v] -= bottleneck;
      cap[v][parent[v]] += bottleneck;
    }
    flow += bottleneck;
    if (flow >= total_deficit) break;
  }
  return flow >= total_deficit;
}

namespace {

struct CellRef {
  double score;
  int user;
  int rb;
};

bool cell_before(const CellRef& a, const CellRef& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.user != b.user) return a.user < b.user;
  return a.rb < b.rb;
}

}  // namespace

RbAssignment greedy_allocation(const Grid& scores, const RbCaps& caps) {
  const int users = scores.users, rbs = scores.rbs;
  caps.validate(users, rbs);
  RbAssignment kappa(users, rbs);

  std::vector<CellRef> cells;
  cells.reserve(static_cast<std::size_t>(users) * rbs);
  for (int i = 0; i < users; ++i)
    for (int l = 0; l < rbs; ++l) cells.push_back({scores.at(i, l), i, l});
  std::sort(cells.begin(), cells.end(), cell_before);

  const bool guard = caps.min_rbs_per_user > 0;
  for (const CellRef& c : cells) {
    if (c.score <= 0.0) break;  // sorted: the rest are non-positive too
    if (kappa.row_count(c.user) >= caps.max_rbs_per_user) continue;
    if (kappa.col_count(c.rb) >= caps.per_rb_user_cap) continue;
    kappa.at(c.user, c.rb) = 1;
    if (guard && !deficits_satisfiable(kappa, caps)) kappa.at(c.user, c.rb) = 0;
  }

  if (guard) {
    while (true) {
      std::vector<CellRef> candidates;
      for (int i = 0; i < users; ++i) {
        if (kappa.row_count(i) >= caps.min_rbs_per_user) continue;
        for (int l = 0; l < rbs; ++l)
          if (kappa.at(i, l) == 0 && kappa.col_count(l) < caps.per_rb_user_cap)
            candidates.push_back({scores.at(i, l), i, l});
      }
      if (candidates.empty()) break;
      std::sort(candidates.begin(), candidates.end(), cell_before);
      bool granted = false;
      for (const CellRef& c : candidates) {
        kappa.at(c.user, c.rb) = 1;
        if (deficits_satisfiable(kappa, caps)) {
          granted = true;
          break;
        }
        kappa.at(c.user, c.rb) = 0;
      }
      if (!granted)
        throw ConfigError("assignment minimum cannot be met; caps validation should prevent this");
    }
  }
  return kappa;
}

double allocation_value(const Grid& scores, const RbAssignment& kappa) {
  if (scores.users != kappa.users || scores.rbs != kappa.rbs)
    throw ConfigError("score and assignment shapes differ");
  double v = 0.0;
  for (int i = 0; i < scores.users; ++i)
    for (int l = 0; l < scores.rbs; ++l)
      if (kappa.at(i, l)) v += scores.at(i, l);
  return v;
}

RbAssignment dqn_select_allocation(const DqnAgent& agent, const std::vector<double>& state,
                                   const RbCaps& caps) {
  const DqnScores s = dqn_scores(agent.online, agent.layout, state);
  return greedy_allocation(s.alloc, caps);
}

RbAssignment random_allocation(int users, int rbs, const RbCaps& caps, Rng& rng) {
  Grid scores(users, rbs);
  for (double& v : scores.v) v = rng.uniform() - 0.5;
  return greedy_allocation(scores, caps);
}

double dqn_td_update(DqnAgent& agent, const std::vector<DiscreteTransition>& batch,
                     const RbCaps& caps, TokenizerHeadMode mode, int shared_cap) {
  if (batch.empty()) throw ConfigError("empty batch");
  const double gamma = agent.gamma;
  const DqnLayout& layout = agent.layout;
  const int batch_n = static_cast<int>(batch.size());

  std::vector<const std::vector<double>*> xs, xns;
  for (const auto& tr : batch) {
    xs.push_back(&tr.s);
    xns.push_back(&tr.s_next);
  }
  ForwardCache cache;
  const Mat q = mlp_forward(agent.online, stack_rows(xs), &cache);
  const Mat qn = mlp_forward(agent.target, stack_rows(xns));

  Mat grad_out(q.rows, q.cols);
  double loss = 0.0;
  for (int b = 0; b < batch_n; ++b) {
    const DiscreteTransition& tr = batch[static_cast<std::size_t>(b)];

    double q_pred = 0.0;
    std::vector<int> slots;
    for (int u = 0; u < layout.users; ++u) {
      const int m_u = layout.tok_options[static_cast<std::size_t>(u)];
      if (m_u == 0) continue;
      if (static_cast<int>(tr.m.size()) != layout.users)
        throw ConfigError("transition lacks a tokenizer index for every user");
      const int pick = tr.m[static_cast<std::size_t>(u)];
      if (pick < 0 || pick >= m_u) throw ConfigError("stored tokenizer index out of range");
      slots.push_back(layout.tok_offset(u) + pick);
    }
    for (int i = 0; i < layout.users; ++i)
      for (int l = 0; l < layout.rbs; ++l)
        if (tr.kappa.at(i, l)) slots.push_back(layout.alloc_offset() + i * layout.rbs + l);
    for (int slot : slots) q_pred += q.at(b, slot);

    double target = tr.r;
    if (!tr.terminal) {
      double tok_next = 0.0;
      switch (mode) {
        case TokenizerHeadMode::per_user:
          for (int u = 0; u < layout.users; ++u) {
            const int m_u = layout.tok_options[static_cast<std::size_t>(u)];
            if (m_u == 0) continue;
            double best = qn.at(b, layout.tok_offset(u));
            for (int j = 1; j < m_u; ++j) best = std::max(best, qn.at(b, layout.tok_offset(u) + j));
            tok_next += best;
          }
          break;
        case TokenizerHeadMode::shared: {
          if (shared_cap < 1) throw ConfigError("shared option count must be >= 1");
          double best = 0.0;
          for (int j = 0; j < shared_cap; ++j) {
            double sum = 0.0;
            for (int u = 0; u < layout.users; ++u) sum += qn.at(b, layout.tok_offset(u) + j);
            if (j == 0 || sum > best) best = sum;
          }
          tok_next = best;
          break;
        }
        case TokenizerHeadMode::none: break;
      }
      Grid next_scores(layout.users, layout.rbs);
      for (std::size_t t = 0; t < next_scores.v.size(); ++t)
        next_scores.v[t] = qn.at(b, layout.alloc_offset() + static_cast<int>(t));
      const RbAssignment next_kappa = greedy_allocation(next_scores, caps);
      target += gamma * (tok_next + allocation_value(next_scores, next_kappa));
    }

    const double err = q_pred - target;
    loss += err * err / batch_n;
    const double g = 2.0 * err / batch_n;
    for (int slot : slots) grad_out.at(b, slot) += g;
  }

  MlpGrads grads = MlpGrads::zeros_like(agent.online);
  mlp_backward(agent.online, cache, grad_out, grads);
  adam_step(agent.online, grads, agent.adam, agent.adam_cfg);
  return loss;
}

void dqn_polyak(DqnAgent& agent) { polyak_update(agent.target, agent.online, agent.tau); }

// --- Continuous agent -----------------------------------------------------

DdpgAgent make_ddpg(int state_dim, int action_dim, const std::vector<int>& hidden,
                    double lr_actor, double lr_critic, Rng& rng) {
  if (state_dim < 1 || action_dim < 1) throw ConfigError("state and action dimensions must be >= 1");
  std::vector<int> actor_dims{state_dim};
  actor_dims.insert(actor_dims.end(), hidden.begin(), hidden.end());
  actor_dims.push_back(action_dim);
  std::vector<Activation> actor_acts(actor_dims.size() - 1, Activation::relu);
  actor_acts.back() = Activation::tanh;

  std::vector<int> critic_dims{state_dim + action_dim};
  critic_dims.insert(critic_dims.end(), hidden.begin(), hidden.end());
  critic_dims.push_back(1);
  std::vector<Activation> critic_acts(critic_dims.size() - 1, Activation::relu);
  critic_acts.back() = Activation::identity;

  DdpgAgent agent;
  agent.state_dim = state_dim;
  agent.action_dim = action_dim;
  agent.actor = mlp_init(actor_dims, actor_acts, rng);
  agent.actor_target = agent.actor;
  agent.critic = mlp_init(critic_dims, critic_acts, rng);
  agent.critic_target = agent.critic;
  agent.actor_adam = AdamState::zeros_like(agent.actor);
  agent.critic_adam = AdamState::zeros_like(agent.critic);
  agent.actor_cfg.lr = lr_actor;
  agent.critic_cfg.lr = lr_critic;
  return agent;
}

std::vector<double> ddpg_policy(const DdpgAgent& agent, const std::vector<double>& state) {
  return mlp_forward(agent.actor, row_mat(state)).a;
}

void clamp_unit(std::vector<double>& v) {
  for (double& x : v) x = std::clamp(x, -1.0, 1.0);
}

std::vector<double> ddpg_raw_action(const DdpgAgent& agent, const std::vector<double>& state,
                                    double sigma, Rng& rng) {
  std::vector<double> a = ddpg_policy(agent, state);
  if (sigma > 0.0)
    for (double& v : a) v += rng.normal(0.0, sigma);
  clamp_unit(a);
  return a;
}

std::vector<double> pipeline_diag(const RbAssignment& kappa, const ChannelConfig& cfg,
                                  int action_dim, int w_offset) {
  const int cells = cfg.num_users * cfg.num_rbs;
  const int w_len = 2 * cells * cfg.num_antennas;
  if (w_offset < 0 || w_offset + w_len > action_dim)
    throw ConfigError("beam block does not fit in the action vector");
  if (kappa.users != cfg.num_users || kappa.rbs != cfg.num_rbs)
    throw ConfigError("assignment shape does not match the configuration");
  const int active = kappa.active_cells();
  const double c =
      active > 0 ? std::sqrt(cfg.bs_power_budget_w / (2.0 * cfg.num_antennas * active)) : 0.0;
  std::vector<double> diag(static_cast<std::size_t>(action_dim), 1.0);
  for (int i = 0; i < cfg.num_users; ++i)
    for (int l = 0; l < cfg.num_rbs; ++l) {
      const double scale = kappa.at(i, l) ? c : 0.0;
      const int base = w_offset + (i * cfg.num_rbs + l) * 2 * cfg.num_antennas;
      for (int k = 0; k < 2 * cfg.num_antennas; ++k)
        diag[static_cast<std::size_t>(base + k)] = scale;
    }
  return diag;
}

BeamformingTensor action_to_beams(const std::vector<double>& action,
                                  const std::vector<double>& diag, const ChannelConfig& cfg,
                                  int w_offset) {
  if (action.size() != diag.size()) throw ConfigError("action and scaling lengths differ");
  const int n = cfg.num_antennas;
  const int w_len = 2 * cfg.num_users * cfg.num_rbs * n;
  if (w_offset < 0 || w_offset + w_len > static_cast<int>(action.size()))
    throw ConfigError("beam block does not fit in the action vector");
  BeamformingTensor w(cfg.num_users, cfg.num_rbs, n);
  for (int i = 0; i < cfg.num_users; ++i)
    for (int l = 0; l < cfg.num_rbs; ++l) {
      const int base = w_offset + (i * cfg.num_rbs + l) * 2 * n;
      for (int k = 0; k < n; ++k) {
        const auto re_idx = static_cast<std::size_t>(base + k);
        const auto im_idx = static_cast<std::size_t>(base + n + k);
        w.at(i, l, k) = cplx(action[re_idx] * diag[re_idx], action[im_idx] * diag[im_idx]);
      }
    }
  return w;
}

BeamformingTensor apply_beam_pipeline(const std::vector<double>& raw, const RbAssignment& kappa,
                                      const ChannelConfig& cfg, int action_dim, int w_offset,
                                      std::vector<double>* diag_out) {
  if (static_cast<int>(raw.size()) != action_dim)
    throw ConfigError("raw action length does not match the action dimension");
  std::vector<double> diag = pipeline_diag(kappa, cfg, action_dim, w_offset);
  BeamformingTensor w = action_to_beams(raw, diag, cfg, w_offset);
  // The per-cell scaling already keeps the total inside the budget for any
  // clamped action; this projection is a final guarantee, folded into the
  // diagonal so stored transitions keep describing the executed map.
  const double total = compute_powers(w).total_w;
  if (total > cfg.bs_power_budget_w) {
    const double f = std::sqrt(cfg.bs_power_budget_w / total);
    const int w_len = 2 * cfg.num_users * cfg.num_rbs * cfg.num_antennas;
    for (int k = 0; k < w_len; ++k) diag[static_cast<std::size_t>(w_offset + k)] *= f;
    w = action_to_beams(raw, diag, cfg, w_offset);
  }
  if (diag_out) *diag_out = std::move(diag);
  return w;
}

BeamformingTensor ddpg_act(const DdpgAgent& agent, const std::vector<double>& state, double sigma,
                           Rng& rng, const RbAssignment& kappa, const ChannelConfig& cfg,
                           int w_offset, std::vector<double>* raw_out,
                           std::vector<double>* diag_out) {
  std::vector<double> raw = ddpg_raw_action(agent, state, sigma, rng);
  BeamformingTensor w = apply_beam_pipeline(raw, kappa, cfg, agent.action_dim, w_offset, diag_out);
  if (raw_out) *raw_out = std::move(raw);
  return w;
}

double ddpg_critic_update(DdpgAgent& agent, const std::vector<ContinuousTransition>& batch,
                          const std::function<std::vector<double>(const ContinuousTransition&)>&
                              next_diag) {
  if (batch.empty()) throw ConfigError("empty batch");
  const double gamma = agent.gamma;
  const int batch_n = static_cast<int>(batch.size());
  const int s_dim = agent.state_dim, a_dim = agent.action_dim;

  // Bootstrap values from the target pair.
  std::vector<const std::vector<double>*> xns;
  for (const auto& tr : batch) xns.push_back(&tr.s_next);
  const Mat next_actions = mlp_forward(agent.actor_target, stack_rows(xns));
  Mat qin_next(batch_n, s_dim + a_dim);
  for (int b = 0; b < batch_n; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    const std::vector<double> diag = next_diag(tr);
    if (static_cast<int>(diag.size()) != a_dim) throw ConfigError("successor scaling length is wrong");
    for (int k = 0; k < s_dim; ++k) qin_next.at(b, k) = tr.s_next[static_cast<std::size_t>(k)];
    for (int k = 0; k < a_dim; ++k)
      qin_next.at(b, s_dim + k) = next_actions.at(b, k) * diag[static_cast<std::size_t>(k)];
  }
  const Mat q_next = mlp_forward(agent.critic_target, qin_next);

  Mat qin(batch_n, s_dim + a_dim);
  for (int b = 0; b < batch_n; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    if (static_cast<int>(tr.s.size()) != s_dim || static_cast<int>(tr.action.size()) != a_dim ||
        tr.action.size() != tr.diag.size())
      throw ConfigError("transition shape does not match the agent");
    for (int k = 0; k < s_dim; ++k) qin.at(b, k) = tr.s[static_cast<std::size_t>(k)];
    for (int k = 0; k < a_dim; ++k)
      qin.at(b, s_dim + k) =
          tr.action[static_cast<std::size_t>(k)] * tr.diag[static_cast<std::size_t>(k)];
  }
  ForwardCache cache;
  const Mat q = mlp_forward(agent.critic, qin, &cache);

  Mat grad_out(batch_n, 1);
  double loss = 0.0;
  for (int b = 0; b < batch_n; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    const double target = tr.terminal ? tr.r : tr.r + gamma * q_next.at(b, 0);
    const double err = q.at(b, 0) - target;
    loss += err * err / batch_n;
    grad_out.at(b, 0) = 2.0 * err / batch_n;
  }
  MlpGrads grads = MlpGrads::zeros_like(agent.critic);
  mlp_backward(agent.critic, cache, grad_out, grads);
  adam_step(agent.critic, grads, agent.critic_adam, agent.critic_cfg);
  return loss;
}

double ddpg_actor_update(DdpgAgent& agent, const std::vector<ContinuousTransition>& batch) {
  if (batch.empty()) throw ConfigError("empty batch");
  const int batch_n = static_cast<int>(batch.size());
  const int s_dim = agent.state_dim, a_dim = agent.action_dim;

  std::vector<const std::vector<double>*> xs;
  for (const auto& tr : batch) xs.push_back(&tr.s);
  ForwardCache actor_cache;
  const Mat pi = mlp_forward(agent.actor, stack_rows(xs), &actor_cache);

  Mat qin(batch_n, s_dim + a_dim);
  for (int b = 0; b < batch_n; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    if (static_cast<int>(tr.diag.size()) != a_dim) throw ConfigError("stored scaling length is wrong");
    for (int k = 0; k < s_dim; ++k) qin.at(b, k) = tr.s[static_cast<std::size_t>(k)];
    for (int k = 0; k < a_dim; ++k)
      qin.at(b, s_dim + k) = pi.at(b, k) * tr.diag[static_cast<std::size_t>(k)];
  }
  ForwardCache critic_cache;
  const Mat q = mlp_forward(agent.critic, qin, &critic_cache);

  double loss = 0.0;
  Mat grad_q(batch_n, 1);
  for (int b = 0; b < batch_n; ++b) {
    loss -= q.at(b, 0) / batch_n;
    grad_q.at(b, 0) = -1.0 / batch_n;
  }

  // Critic stays frozen: its gradients are discarded.
  MlpGrads critic_scratch = MlpGrads::zeros_like(agent.critic);
  const Mat grad_qin = mlp_backward(agent.critic, critic_cache, grad_q, critic_scratch);

  Mat grad_pi(batch_n, a_dim);
  for (int b = 0; b < batch_n; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    for (int k = 0; k < a_dim; ++k)
      grad_pi.at(b, k) = grad_qin.at(b, s_dim + k) * tr.diag[static_cast<std::size_t>(k)];
  }
  MlpGrads actor_grads = MlpGrads::zeros_like(agent.actor);
  mlp_backward(agent.actor, actor_cache, grad_pi, actor_grads);
  adam_step(agent.actor, actor_grads, agent.actor_adam, agent.actor_cfg);
  return loss;
}

void ddpg_polyak(DdpgAgent& agent) {
  polyak_update(agent.actor_target, agent.actor, agent.tau);
  polyak_update(agent.critic_target, agent.critic, agent.tau);
}

}  // namespace tokencom
