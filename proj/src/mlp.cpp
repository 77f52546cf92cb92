#include "tokencom/mlp.hpp"

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace tokencom {

namespace {

double apply_act(Activation act, double z) {
  switch (act) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
  }
  throw ConfigError("unknown activation");
}

double act_deriv(Activation act, double z) {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  throw ConfigError("unknown activation");
}

}  // namespace

int Mlp::input_dim() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  return layers.front().w.cols;
}

int Mlp::output_dim() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  return layers.back().w.rows;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.w.a.size() + layer.b.size();
  return n;
}

Mlp mlp_init(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("network needs at least one layer");
  if (acts.size() != dims.size() - 1)
    throw ConfigError("need exactly one activation per layer");
  for (int d : dims)
    if (d < 1) throw ConfigError("layer widths must be >= 1");
  Mlp net;
  net.layers.resize(dims.size() - 1);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    Layer& layer = net.layers[k];
    const int fan_in = dims[k], fan_out = dims[k + 1];
    layer.w = Mat(fan_out, fan_in);
    layer.b.assign(static_cast<std::size_t>(fan_out), 0.0);
    layer.act = acts[k];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : layer.w.a) v = rng.uniform(-bound, bound);
  }
  return net;
}

Mat mlp_forward(const Mlp& net, const Mat& x, ForwardCache* cache) {
  if (net.layers.empty()) throw ConfigError("network has no layers");
  if (x.cols != net.input_dim()) throw ConfigError("input width does not match the network");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Mat cur = x;
  for (const auto& layer : net.layers) {
    const int out_dim = layer.w.rows, in_dim = layer.w.cols;
    Mat z(cur.rows, out_dim);
    for (int r = 0; r < cur.rows; ++r)
      for (int o = 0; o < out_dim; ++o) {
        double acc = layer.b[static_cast<std::size_t>(o)];
        const double* wrow = layer.w.a.data() + std::size_t(o) * in_dim;
        const double* xrow = cur.a.data() + std::size_t(r) * in_dim;
        for (int c = 0; c < in_dim; ++c) acc += wrow[c] * xrow[c];
        z.at(r, o) = acc;
      }
    if (cache) {
      cache->inputs.push_back(std::move(cur));
      cache->pre.push_back(z);
    }
    Mat act(z.rows, z.cols);
    for (std::size_t k = 0; k < z.a.size(); ++k) act.a[k] = apply_act(layer.act, z.a[k]);
    cur = std::move(act);
  }
  return cur;
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
  MlpGrads g;
  for (const auto& layer : net.layers) {
    g.w.emplace_back(layer.w.rows, layer.w.cols);
    g.b.emplace_back(layer.b.size(), 0.0);
  }
  return g;
}

void MlpGrads::scale(double s) {
  for (auto& m : w)
    for (double& v : m.a) v *= s;
  for (auto& vec : b)
    for (double& v : vec) v *= s;
}

Mat mlp_backward(const Mlp& net, const ForwardCache& cache, const Mat& grad_out,
                 MlpGrads& grads) {
  const std::size_t layer_count = net.layers.size();
  if (cache.inputs.size() != layer_count || cache.pre.size() != layer_count)
    throw ConfigError("forward cache does not match the network");
  if (grads.w.size() != layer_count) throw ConfigError("gradient store does not match the network");
  Mat delta = grad_out;
  for (std::size_t k = layer_count; k-- > 0;) {
    const Layer& layer = net.layers[k];
    const Mat& z = cache.pre[k];
    const Mat& x = cache.inputs[k];
    if (delta.rows != z.rows || delta.cols != z.cols)
      throw ConfigError("output gradient shape does not match the forward pass");
    // delta <- dL/dz
    for (std::size_t t = 0; t < delta.a.size(); ++t)
      delta.a[t] *= act_deriv(layer.act, z.a[t]);
    Mat& gw = grads.w[k];
    auto& gb = grads.b[k];
    const int out_dim = layer.w.rows, in_dim = layer.w.cols;
    for (int r = 0; r < delta.rows; ++r) {
      const double* drow = delta.a.data() + std::size_t(r) * out_dim;
      const double* xrow = x.a.data() + std::size_t(r) * in_dim;
      for (int o = 0; o < out_dim; ++o) {
        gb[static_cast<std::size_t>(o)] += drow[o];
        double* gwrow = gw.a.data() + std::size_t(o) * in_dim;
        for (int c = 0; c < in_dim; ++c) gwrow[c] += drow[o] * xrow[c];
      }
    }
    if (k == 0) {
      Mat grad_in(delta.rows, in_dim);
      for (int r = 0; r < delta.rows; ++r)
        for (int o = 0; o < out_dim; ++o) {
          const double d = delta.at(r, o);
          const double* wrow = layer.w.a.data() + std::size_t(o) * in_dim;
          for (int c = 0; c < in_dim; ++c) grad_in.at(r, c) += d * wrow[c];
        }
      return grad_in;
    }
    Mat next(delta.rows, in_dim);
    for (int r = 0; r < delta.rows; ++r)
      for (int o = 0; o < out_dim; ++o) {
        const double d = delta.at(r, o);
        const double* wrow = layer.w.a.data() + std::size_t(o) * in_dim;
        for (int c = 0; c < in_dim; ++c) next.at(r, c) += d * wrow[c];
      }
    delta = std::move(next);
  }
  throw ConfigError("network has no layers");
}

AdamState AdamState::zeros_like(const Mlp& net) {
  AdamState s;
  for (const auto& layer : net.layers) {
    s.m_w.emplace_back(layer.w.rows, layer.w.cols);
    s.v_w.emplace_back(layer.w.rows, layer.w.cols);
    s.m_b.emplace_back(layer.b.size(), 0.0);
    s.v_b.emplace_back(layer.b.size(), 0.0);
  }
  return s;
}

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state, const AdamConfig& cfg) {
  if (state.m_w.size() != net.layers.size() || grads.w.size() != net.layers.size())
    throw ConfigError("optimizer state does not match the network");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto update = [&](double& param, double g, double& m, double& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    param -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
  };
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    Layer& layer = net.layers[k];
    for (std::size_t t = 0; t < layer.w.a.size(); ++t)
      update(layer.w.a[t], grads.w[k].a[t], state.m_w[k].a[t], state.v_w[k].a[t]);
    for (std::size_t t = 0; t < layer.b.size(); ++t)
      update(layer.b[t], grads.b[k][t], state.m_b[k][t], state.v_b[k][t]);
  }
}

void polyak_update(Mlp& target, const Mlp& online, double tau) {
  if (target.layers.size() != online.layers.size())
    throw ConfigError("target and online networks differ in depth");
  for (std::size_t k = 0; k < target.layers.size(); ++k) {
    Layer& t = target.layers[k];
    const Layer& o = online.layers[k];
    if (t.w.a.size() != o.w.a.size() || t.b.size() != o.b.size())
      throw ConfigError("target and online networks differ in shape");
    for (std::size_t i = 0; i < t.w.a.size(); ++i)
      t.w.a[i] = tau * o.w.a[i] + (1.0 - tau) * t.w.a[i];
    for (std::size_t i = 0; i < t.b.size(); ++i)
      t.b[i] = tau * o.b[i] + (1.0 - tau) * t.b[i];
  }
}

double finite_diff_max_rel_err(Mlp& net, const std::function<double(const Mlp&)>& loss,
                               const MlpGrads& grads, double step) {
  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + step;
    const double up = loss(net);
    param = saved - step;
    const double down = loss(net);
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(numeric - analytic) /
                       std::max({1.0, std::abs(numeric), std::abs(analytic)});
    worst = std::max(worst, err);
  };
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    for (std::size_t t = 0; t < net.layers[k].w.a.size(); ++t)
      probe(net.layers[k].w.a[t], grads.w[k].a[t]);
    for (std::size_t t = 0; t < net.layers[k].b.size(); ++t)
      probe(net.layers[k].b[t], grads.b[k][t]);
  }
  return worst;
}

void save_mlp(std::ostream& out, const Mlp& net) {
  out << "mlp " << net.layers.size() << "\n";
  out << std::hexfloat;
  for (const auto& layer : net.layers) {
    out << "layer " << layer.w.rows << " " << layer.w.cols << " "
        << static_cast<int>(layer.act) << "\n";
    for (std::size_t t = 0; t < layer.w.a.size(); ++t)
      out << layer.w.a[t] << (t + 1 == layer.w.a.size() ? "\n" : " ");
    for (std::size_t t = 0; t < layer.b.size(); ++t)
      out << layer.b[t] << (t + 1 == layer.b.size() ? "\n" : " ");
  }
  out << std::defaultfloat;
}

namespace {

// Stream extraction of doubles cannot parse hexfloat; go through strtod.
double read_double_token(std::istream& in, std::size_t where) {
  std::string tok;
  if (!(in >> tok)) throw ParseError("truncated numeric payload", where);
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw ParseError("bad numeric token '" + tok + "'", where);
  return v;
}

}  // namespace

Mlp load_mlp(std::istream& in) {
  std::string word;
  std::size_t layer_count = 0;
  if (!(in >> word) || word != "mlp" || !(in >> layer_count))
    throw ParseError("expected 'mlp <layers>' record", 0);
  Mlp net;
  for (std::size_t k = 0; k < layer_count; ++k) {
    int rows = 0, cols = 0, act = 0;
    if (!(in >> word) || word != "layer" || !(in >> rows >> cols >> act))
      throw ParseError("expected 'layer <out> <in> <act>' record", k);
    if (rows < 1 || cols < 1 || act < 0 || act > 2)
      throw ParseError("layer header out of range", k);
    Layer layer;
    layer.w = Mat(rows, cols);
    layer.b.assign(static_cast<std::size_t>(rows), 0.0);
    layer.act = static_cast<Activation>(act);
    for (double& v : layer.w.a) v = read_double_token(in, k);
    for (double& v : layer.b) v = read_double_token(in, k);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

void save_adam(std::ostream& out, const AdamState& st) {
  out << "adam " << st.m_w.size() << " " << st.step << "\n";
  out << std::hexfloat;
  for (std::size_t k = 0; k < st.m_w.size(); ++k) {
    out << "moments " << st.m_w[k].rows << " " << st.m_w[k].cols << "\n";
    auto dump = [&out](const std::vector<double>& v) {
      for (std::size_t t = 0; t < v.size(); ++t) out << v[t] << (t + 1 == v.size() ? "\n" : " ");
      if (v.empty()) out << "\n";
    };
    dump(st.m_w[k].a);
    dump(st.v_w[k].a);
    dump(st.m_b[k]);
    dump(st.v_b[k]);
  }
  out << std::defaultfloat;
}

AdamState load_adam(std::istream& in) {
  std::string word;
  std::size_t layer_count = 0;
  AdamState st;
  if (!(in >> word) || word != "adam" || !(in >> layer_count >> st.step))
    throw ParseError("expected 'adam <layers> <step>' record", 0);
  for (std::size_t k = 0; k < layer_count; ++k) {
    int rows = 0, cols = 0;
    if (!(in >> word) || word != "moments" || !(in >> rows >> cols))
      throw ParseError("expected 'moments <out> <in>' record", k);
    if (rows < 1 || cols < 1) throw ParseError("moment header out of range", k);
    Mat m(rows, cols), v(rows, cols);
    std::vector<double> mb(static_cast<std::size_t>(rows)), vb(static_cast<std::size_t>(rows));
    for (double& x : m.a) x = read_double_token(in, k);
    for (double& x : v.a) x = read_double_token(in, k);
    for (double& x : mb) x = read_double_token(in, k);
    for (double& x : vb) x = read_double_token(in, k);
    st.m_w.push_back(std::move(m));
    st.v_w.push_back(std::move(v));
    st.m_b.push_back(std::move(mb));
    st.v_b.push_back(std::move(vb));
  }
  return st;
}

}  // namespace tokencom
