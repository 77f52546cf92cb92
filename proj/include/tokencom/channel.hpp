#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "tokencom/errors.hpp"
#include "tokencom/rng.hpp"

namespace tokencom {

using cplx = std::complex<double>;

/// Downlink cell geometry and radio constants. All linear units (W, Hz).
struct ChannelConfig {
  int num_antennas = 32;           // N
  int num_users = 4;               // U
  int num_rbs = 16;                // R
  double rb_bandwidth_hz = 30e3;   // B
  double noise_psd_w_per_hz = 3.9810717055349694e-21;  // -174 dBm/Hz
  double channel_variance = 1.0;   // sigma_h^2 per complex entry
  double bs_power_budget_w = 1.0;  // P_BS

  void validate() const;
};

/// Dense complex tensor indexed (user, rb, antenna). Shared layout for
/// channel realizations and beamforming vectors.
struct ComplexTensor {
  int users = 0, rbs = 0, antennas = 0;
  std::vector<cplx> v;

  ComplexTensor() = default;
  ComplexTensor(int u, int r, int n) : users(u), rbs(r), antennas(n), v(std::size_t(u) * r * n) {}

  cplx& at(int i, int l, int n) { return v[(std::size_t(i) * rbs + l) * antennas + n]; }
  const cplx& at(int i, int l, int n) const { return v[(std::size_t(i) * rbs + l) * antennas + n]; }
  const cplx* cell(int i, int l) const { return v.data() + (std::size_t(i) * rbs + l) * antennas; }
  cplx* cell(int i, int l) { return v.data() + (std::size_t(i) * rbs + l) * antennas; }
};

using ChannelRealization = ComplexTensor;
using BeamformingTensor = ComplexTensor;

/// Binary user-to-RB assignment kappa[i][l].
struct RbAssignment {
  int users = 0, rbs = 0;
  std::vector<std::uint8_t> on;

  RbAssignment() = default;
  RbAssignment(int u, int r) : users(u), rbs(r), on(std::size_t(u) * r, 0) {}

  std::uint8_t& at(int i, int l) { return on[std::size_t(i) * rbs + l]; }
  std::uint8_t at(int i, int l) const { return on[std::size_t(i) * rbs + l]; }
  int row_count(int i) const;
  int col_count(int l) const;
  int active_cells() const;
};

/// Assignment limits: per-RB user cap and per-user RB count range.
struct RbCaps {
  int per_rb_user_cap = 2;   // kappa
  int min_rbs_per_user = 0;  // K_min
  int max_rbs_per_user = 8;  // K_max

  void validate(int num_users, int num_rbs) const;
};

/// Per-(user, RB) scalar field.
struct Grid {
  int users = 0, rbs = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int u, int r) : users(u), rbs(r), v(std::size_t(u) * r, 0.0) {}

  double& at(int i, int l) { return v[std::size_t(i) * rbs + l]; }
  double at(int i, int l) const { return v[std::size_t(i) * rbs + l]; }
};

struct RateResult {
  Grid per_rb_bps;                  // B*log2(1+SINR) per cell
  std::vector<double> per_user_bps; // sum over the user's assigned RBs
};

struct PowerResult {
  Grid per_cell_w;                // ||w_i[l]||^2
  std::vector<double> per_user_w; // P_i
  double total_w = 0.0;
};

/// i.i.d. CN(0, sigma_h^2) entries: real and imaginary parts each
/// N(0, sigma_h^2 / 2). Draw order is (user, rb, antenna, re, im).
ChannelRealization sample_channels(const ChannelConfig& cfg, Rng& rng);

/// SINR_i[l] = kappa_i[l]|h_i[l]^H w_i[l]|^2 /
///             (sum_{j != i} kappa_j[l]|h_i[l]^H w_j[l]|^2 + B*N0).
Grid compute_sinr(const ChannelRealization& h, const RbAssignment& kappa,
                  const BeamformingTensor& w, const ChannelConfig& cfg);

Grid compute_sinr_scaled(const ChannelRealization& h, const RbAssignment& kappa,
                         const BeamformingTensor& w, double noise_w);

/// Shannon rate per cell and per user over assigned RBs.
RateResult compute_rates(const Grid& sinr, const RbAssignment& kappa, double bandwidth_hz);

/// p_i[l] = ||w_i[l]||_2^2; per-user and total sums over all cells.
/// Callers must keep w zero on unassigned cells so per-user sums equal
/// sums over assigned RBs.
PowerResult compute_powers(const BeamformingTensor& w);

/// conj(a) . b over one cell's antennas.
cplx cell_inner(const cplx* a, const cplx* b, int n);

}  // namespace tokencom
