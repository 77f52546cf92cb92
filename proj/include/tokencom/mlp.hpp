#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "tokencom/errors.hpp"
#include "tokencom/rng.hpp"

namespace tokencom {

/// Row-major dense matrix.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(std::size_t(r) * c, 0.0) {}

  double& at(int r, int c) { return a[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return a[std::size_t(r) * cols + c]; }
};

enum class Activation { identity, relu, tanh };

struct Layer {
  Mat w;                  // out x in
  std::vector<double> b;  // out
  Activation act = Activation::identity;
};

struct Mlp {
  std::vector<Layer> layers;

  int input_dim() const;
  int output_dim() const;
  std::size_t param_count() const;
};

/// Glorot-uniform weights (+-sqrt(6 / (fan_in + fan_out))), zero biases.
/// dims has one entry per boundary (input, hidden..., output); acts has one
/// entry per layer.
Mlp mlp_init(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng);

/// Per-layer inputs and pre-activations recorded by a forward pass.
struct ForwardCache {
  std::vector<Mat> inputs;
  std::vector<Mat> pre;
};

/// x is batch x input_dim; returns batch x output_dim.
Mat mlp_forward(const Mlp& net, const Mat& x, ForwardCache* cache = nullptr);

struct MlpGrads {
  std::vector<Mat> w;
  std::vector<std::vector<double>> b;

  static MlpGrads zeros_like(const Mlp& net);
  void scale(double s);
};

/// Accumulates parameter gradients into `grads` (must be shaped like `net`)
/// and returns the gradient with respect to the input batch.
Mat mlp_backward(const Mlp& net, const ForwardCache& cache, const Mat& grad_out,
                 MlpGrads& grads);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Mat> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
  long long step = 0;

  static AdamState zeros_like(const Mlp& net);
};

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state, const AdamConfig& cfg);

/// target = tau * online + (1 - tau) * target, parameter-wise.
void polyak_update(Mlp& target, const Mlp& online, double tau);

/// Two-sided finite-difference check of `grads` against `loss`; returns the
/// largest relative error over all parameters. `loss` must be deterministic.
double finite_diff_max_rel_err(Mlp& net, const std::function<double(const Mlp&)>& loss,
                               const MlpGrads& grads, double step = 1e-6);

/// Text round-trip with hexfloat payloads: exact on the same platform.
void save_mlp(std::ostream& out, const Mlp& net);
Mlp load_mlp(std::istream& in);
void save_adam(std::ostream& out, const AdamState& st);
AdamState load_adam(std::istream& in);

}  // namespace tokencom
