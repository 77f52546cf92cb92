#include "tokencom/channel.hpp"

#include <cmath>
#include <string>

namespace tokencom {

void ChannelConfig::validate() const {
  if (num_antennas < 1) throw ConfigError("num_antennas must be >= 1");
  if (num_users < 1) throw ConfigError("num_users must be >= 1");
  if (num_rbs < 1) throw ConfigError("num_rbs must be >= 1");
  if (!(rb_bandwidth_hz > 0.0)) throw ConfigError("rb_bandwidth_hz must be > 0");
  if (!(noise_psd_w_per_hz > 0.0)) throw ConfigError("noise_psd_w_per_hz must be > 0");
  if (!(channel_variance > 0.0)) throw ConfigError("channel_variance must be > 0");
  if (!(bs_power_budget_w > 0.0)) throw ConfigError("bs_power_budget_w must be > 0");
}

int RbAssignment::row_count(int i) const {
  int c = 0;
  for (int l = 0; l < rbs; ++l) c += at(i, l) ? 1 : 0;
  return c;
}

int RbAssignment::col_count(int l) const {
  int c = 0;
  for (int i = 0; i < users; ++i) c += at(i, l) ? 1 : 0;
  return c;
}

int RbAssignment::active_cells() const {
  int c = 0;
  for (auto b : on) c += b ? 1 : 0;
  return c;
}

void RbCaps::validate(int num_users, int num_rbs) const {
  if (per_rb_user_cap < 1) throw ConfigError("per_rb_user_cap must be >= 1");
  if (per_rb_user_cap > num_users)
    throw ConfigError("per_rb_user_cap must be <= num_users");
  if (min_rbs_per_user < 0) throw ConfigError("min_rbs_per_user must be >= 0");
  if (max_rbs_per_user < min_rbs_per_user)
    throw ConfigError("max_rbs_per_user must be >= min_rbs_per_user");
  if (max_rbs_per_user > num_rbs)
    throw ConfigError("max_rbs_per_user must be <= num_rbs");
  // Every user must be able to hold min_rbs_per_user RBs simultaneously.
  if (static_cast<long>(num_users) * min_rbs_per_user >
      static_cast<long>(num_rbs) * per_rb_user_cap)
    throw ConfigError("num_users * min_rbs_per_user exceeds num_rbs * per_rb_user_cap");
}

ChannelRealization sample_channels(const ChannelConfig& cfg, Rng& rng) {
  cfg.validate();
  ChannelRealization h(cfg.num_users, cfg.num_rbs, cfg.num_antennas);
  const double s = std::sqrt(cfg.channel_variance / 2.0);
  for (auto& e : h.v) {
    const double re = rng.normal(0.0, s);
    const double im = rng.normal(0.0, s);
    e = cplx(re, im);
  }
  return h;
}

cplx cell_inner(const cplx* a, const cplx* b, int n) {
  double re = 0.0, im = 0.0;
  for (int k = 0; k < n; ++k) {
    const cplx p = std::conj(a[k]) * b[k];
    re += p.real();
    im += p.imag();
  }
  return {re, im};
}

Grid compute_sinr_scaled(const ChannelRealization& h, const RbAssignment& kappa,
                         const BeamformingTensor& w, double noise_w) {
  Grid sinr(h.users, h.rbs);
  const int n = h.antennas;
  for (int l = 0; l < h.rbs; ++l) {
    for (int i = 0; i < h.users; ++i) {
      if (!kappa.at(i, l)) continue;  // unassigned: SINR stays 0
      const cplx* hi = h.cell(i, l);
      double signal = 0.0, interf = 0.0;
      for (int j = 0; j < h.users; ++j) {
        if (!kappa.at(j, l)) continue;
        const double g = std::norm(cell_inner(hi, w.cell(j, l), n));
        if (j == i)
          signal = g;
        else
          interf += g;
      }
      sinr.at(i, l) = signal / (interf + noise_w);
    }
  }
  return sinr;
}

Grid compute_sinr(const ChannelRealization& h, const RbAssignment& kappa,
                  const BeamformingTensor& w, const ChannelConfig& cfg) {
  if (h.users != kappa.users || h.rbs != kappa.rbs || h.users != w.users ||
      h.rbs != w.rbs || h.antennas != w.antennas)
    throw ConfigError("compute_sinr: shape mismatch");
  return compute_sinr_scaled(h, kappa, w, cfg.rb_bandwidth_hz * cfg.noise_psd_w_per_hz);
}

RateResult compute_rates(const Grid& sinr, const RbAssignment& kappa, double bandwidth_hz) {
  RateResult r;
  r.per_rb_bps = Grid(sinr.users, sinr.rbs);
  r.per_user_bps.assign(sinr.users, 0.0);
  for (int i = 0; i < sinr.users; ++i) {
    for (int l = 0; l < sinr.rbs; ++l) {
      const double cell = bandwidth_hz * std::log2(1.0 + sinr.at(i, l));
      r.per_rb_bps.at(i, l) = cell;
      if (kappa.at(i, l)) r.per_user_bps[i] += cell;
    }
  }
  return r;
}

PowerResult compute_powers(const BeamformingTensor& w) {
  PowerResult p;
  p.per_cell_w = Grid(w.users, w.rbs);
  p.per_user_w.assign(w.users, 0.0);
  for (int i = 0; i < w.users; ++i) {
    for (int l = 0; l < w.rbs; ++l) {
      double s = 0.0;
      const cplx* c = w.cell(i, l);
      for (int n = 0; n < w.antennas; ++n) s += std::norm(c[n]);
      p.per_cell_w.at(i, l) = s;
      p.per_user_w[i] += s;
      p.total_w += s;
    }
  }
  return p;
}

}  // namespace tokencom
