#include "tokencom/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "tokencom/errors.hpp"

namespace tokencom {

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) { return 30.0 + 10.0 * std::log10(watts); }

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::size_t line) {
  throw ConfigError("line " + std::to_string(line) + ": bad value '" + value + "' for key '" +
                    key + "'");
}

long long to_ll(const std::string& key, const std::string& value, std::size_t line) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0') bad_value(key, value, line);
  return v;
}

int to_int(const std::string& key, const std::string& value, std::size_t line) {
  const long long v = to_ll(key, value, line);
  if (v < -2147483648LL || v > 2147483647LL) bad_value(key, value, line);
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& value, std::size_t line) {
  const char* begin = value.c_str();
  char* end = nullptr;
  if (!value.empty() && value[0] == '-') bad_value(key, value, line);
  const unsigned long long v = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0') bad_value(key, value, line);
  return v;
}

double to_double(const std::string& key, const std::string& value, std::size_t line) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') bad_value(key, value, line);
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

/// Applies one key=value pair; returns false when the key is unknown.
bool set_field(ExperimentConfig& c, const std::string& key, const std::string& value,
               std::size_t line) {
  const auto i = [&](int& f) { f = to_int(key, value, line); };
  const auto d = [&](double& f) { f = to_double(key, value, line); };
  const auto s = [&](std::string& f) { f = value; };

  if (key == "num_antennas") i(c.num_antennas);
  else if (key == "num_rbs") i(c.num_rbs);
  else if (key == "num_users") i(c.num_users);
  else if (key == "rb_bandwidth_hz") d(c.rb_bandwidth_hz);
  else if (key == "bs_power_dbm") d(c.bs_power_dbm);
  else if (key == "noise_psd_dbm_per_hz") d(c.noise_psd_dbm_per_hz);
  else if (key == "channel_variance") d(c.channel_variance);
  else if (key == "fading") s(c.fading);
  else if (key == "per_rb_user_cap") i(c.per_rb_user_cap);
  else if (key == "min_rbs_per_user") i(c.min_rbs_per_user);
  else if (key == "max_rbs_per_user") i(c.max_rbs_per_user);
  else if (key == "rate_floor_bps") d(c.rate_floor_bps);
  else if (key == "q_min") d(c.q_min);
  else if (key == "q_max") d(c.q_max);
  else if (key == "alpha") d(c.alpha);
  else if (key == "beta") d(c.beta);
  else if (key == "lambda_pen") d(c.lambda_pen);
  else if (key == "metric") s(c.metric);
  else if (key == "quality_source") s(c.quality_source);
  else if (key == "video_height") i(c.video_height);
  else if (key == "video_width") i(c.video_width);
  else if (key == "video_fps") d(c.video_fps);
  else if (key == "user_tags") s(c.user_tags);
  else if (key == "episodes") i(c.episodes);
  else if (key == "slots_per_episode") i(c.slots_per_episode);
  else if (key == "batch_size") i(c.batch_size);
  else if (key == "buffer_capacity") i(c.buffer_capacity);
  else if (key == "gamma") d(c.gamma);
  else if (key == "tau") d(c.tau);
  else if (key == "epsilon_start") d(c.epsilon_start);
  else if (key == "epsilon_floor") d(c.epsilon_floor);
  else if (key == "epsilon_decay") d(c.epsilon_decay);
  else if (key == "noise_start") d(c.noise_start);
  else if (key == "noise_floor") d(c.noise_floor);
  else if (key == "noise_decay") d(c.noise_decay);
  else if (key == "noise_kind") s(c.noise_kind);
  else if (key == "ou_theta") d(c.ou_theta);
  else if (key == "hidden") s(c.hidden);
  else if (key == "lr_q") d(c.lr_q);
  else if (key == "lr_critic") d(c.lr_critic);
  else if (key == "lr_actor") d(c.lr_actor);
  else if (key == "adam_beta1") d(c.adam_beta1);
  else if (key == "adam_beta2") d(c.adam_beta2);
  else if (key == "adam_eps") d(c.adam_eps);
  else if (key == "eval_each_episode") i(c.eval_each_episode);
  else if (key == "eval_episodes") i(c.eval_episodes);
  else if (key == "baseline") s(c.baseline);
  else if (key == "preset") s(c.preset);
  else if (key == "seeds") s(c.seeds);
  else if (key == "seed") c.seed = to_u64(key, value, line);
  else if (key == "paper_scale") i(c.paper_scale);
  else if (key == "catalog_path") s(c.catalog_path);
  else if (key == "out_dir") s(c.out_dir);
  else if (key == "oracle_draws") i(c.oracle_draws);
  else if (key == "oracle_grid_levels") i(c.oracle_grid_levels);
  else if (key == "oracle_candidate_budget") c.oracle_candidate_budget = to_ll(key, value, line);
  else return false;
  return true;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::set<std::string>& preset_names() {
  static const std::set<std::string> names{"freezing-vs-episode", "freezing-vs-resolution",
                                           "psnr-vs-users", "psnr-vs-power"};
  return names;
}

}  // namespace

ExperimentConfig load_config(std::istream& in) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + line +
                        "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": missing key before '='");
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    if (!set_field(cfg, key, value, line_no))
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return load_config(in);
}

void save_config(std::ostream& out, const ExperimentConfig& c) {
  out << "# radio\n";
  out << "num_antennas = " << c.num_antennas << "\n";
  out << "num_rbs = " << c.num_rbs << "\n";
  out << "num_users = " << c.num_users << "\n";
  out << "rb_bandwidth_hz = " << fmt(c.rb_bandwidth_hz) << "\n";
  out << "bs_power_dbm = " << fmt(c.bs_power_dbm) << "\n";
  out << "noise_psd_dbm_per_hz = " << fmt(c.noise_psd_dbm_per_hz) << "\n";
  out << "channel_variance = " << fmt(c.channel_variance) << "\n";
  out << "fading = " << c.fading << "\n";
  out << "per_rb_user_cap = " << c.per_rb_user_cap << "\n";
  out << "min_rbs_per_user = " << c.min_rbs_per_user << "\n";
  out << "max_rbs_per_user = " << c.max_rbs_per_user << "\n";
  out << "# service\n";
  out << "rate_floor_bps = " << fmt(c.rate_floor_bps) << "\n";
  out << "q_min = " << fmt(c.q_min) << "\n";
  out << "q_max = " << fmt(c.q_max) << "\n";
  out << "alpha = " << fmt(c.alpha) << "\n";
  out << "beta = " << fmt(c.beta) << "\n";
  out << "lambda_pen = " << fmt(c.lambda_pen) << "\n";
  out << "metric = " << c.metric << "\n";
  out << "quality_source = " << c.quality_source << "\n";
  out << "video_height = " << c.video_height << "\n";
  out << "video_width = " << c.video_width << "\n";
  out << "video_fps = " << fmt(c.video_fps) << "\n";
  out << "user_tags = " << c.user_tags << "\n";
  out << "# learning\n";
  out << "episodes = " << c.episodes << "\n";
  out << "slots_per_episode = " << c.slots_per_episode << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "buffer_capacity = " << c.buffer_capacity << "\n";
  out << "gamma = " << fmt(c.gamma) << "\n";
  out << "tau = " << fmt(c.tau) << "\n";
  out << "epsilon_start = " << fmt(c.epsilon_start) << "\n";
  out << "epsilon_floor = " << fmt(c.epsilon_floor) << "\n";
  out << "epsilon_decay = " << fmt(c.epsilon_decay) << "\n";
  out << "noise_start = " << fmt(c.noise_start) << "\n";
  out << "noise_floor = " << fmt(c.noise_floor) << "\n";
  out << "noise_decay = " << fmt(c.noise_decay) << "\n";
  out << "noise_kind = " << c.noise_kind << "\n";
  out << "ou_theta = " << fmt(c.ou_theta) << "\n";
  out << "hidden = " << c.hidden << "\n";
  out << "lr_q = " << fmt(c.lr_q) << "\n";
  out << "lr_critic = " << fmt(c.lr_critic) << "\n";
  out << "lr_actor = " << fmt(c.lr_actor) << "\n";
  out << "adam_beta1 = " << fmt(c.adam_beta1) << "\n";
  out << "adam_beta2 = " << fmt(c.adam_beta2) << "\n";
  out << "adam_eps = " << fmt(c.adam_eps) << "\n";
  out << "eval_each_episode = " << c.eval_each_episode << "\n";
  out << "eval_episodes = " << c.eval_episodes << "\n";
  out << "# run control\n";
  out << "baseline = " << c.baseline << "\n";
  out << "preset = " << c.preset << "\n";
  out << "seeds = " << c.seeds << "\n";
  out << "seed = " << c.seed << "\n";
  out << "paper_scale = " << c.paper_scale << "\n";
  out << "catalog_path = " << c.catalog_path << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  out << "oracle_draws = " << c.oracle_draws << "\n";
  out << "oracle_grid_levels = " << c.oracle_grid_levels << "\n";
  out << "oracle_candidate_budget = " << c.oracle_candidate_budget << "\n";
}

std::string config_to_string(const ExperimentConfig& cfg) {
  std::ostringstream out;
  save_config(out, cfg);
  return out.str();
}

void ExperimentConfig::validate() const {
  channel().validate();  // covers antennas/rbs/users/bandwidth/noise/power/variance
  RbCaps caps{per_rb_user_cap, min_rbs_per_user, max_rbs_per_user};
  caps.validate(num_users, num_rbs);
  if (fading != "per_slot" && fading != "per_episode")
    throw ConfigError("fading must be per_slot or per_episode");
  if (metric != "psnr" && metric != "ssim" && metric != "rfvd")
    throw ConfigError("metric must be psnr, ssim, or rfvd");
  if (quality_source != "tokenizer_catalog" && quality_source != "h265_ladder")
    throw ConfigError("quality_source must be tokenizer_catalog or h265_ladder");
  if (noise_kind != "gaussian" && noise_kind != "ou")
    throw ConfigError("noise_kind must be gaussian or ou");
  if (!(rate_floor_bps >= 0.0)) throw ConfigError("rate_floor_bps must be >= 0");
  if (!(q_max > q_min)) throw ConfigError("q_max must be > q_min");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(lambda_pen >= 0.0))
    throw ConfigError("alpha, beta, and lambda_pen must be >= 0");
  if (video_height < 1 || video_width < 1) throw ConfigError("video dimensions must be >= 1");
  if (!(video_fps > 0.0)) throw ConfigError("video_fps must be > 0");
  if (episodes < 1 || slots_per_episode < 1) throw ConfigError("episode counts must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (buffer_capacity < batch_size) throw ConfigError("buffer_capacity must be >= batch_size");
  if (eval_each_episode != 0 && eval_each_episode != 1)
    throw ConfigError("eval_each_episode must be 0 or 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (paper_scale != 0 && paper_scale != 1) throw ConfigError("paper_scale must be 0 or 1");
  if (preset_names().count(preset) == 0)
    throw ConfigError("unknown preset '" + preset +
                      "' (expected freezing-vs-episode, freezing-vs-resolution, psnr-vs-users, "
                      "or psnr-vs-power)");
  baseline_from_string(baseline);  // throws on a bad name
  if (oracle_draws < 1 || oracle_grid_levels < 1 || oracle_candidate_budget < 1)
    throw ConfigError("oracle limits must be >= 1");
  seed_list();    // validates the list syntax
  hidden_list();  // validates the list syntax
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must be in [0, 1]");
  if (!(lr_q > 0.0 && lr_critic > 0.0 && lr_actor > 0.0))
    throw ConfigError("learning rates must be > 0");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_floor >= 0.0) ||
      !(epsilon_decay > 0.0 && epsilon_decay <= 1.0))
    throw ConfigError("epsilon schedule out of range");
  if (!(noise_start >= 0.0 && noise_start <= 1.0) || !(noise_floor >= 0.0) ||
      !(noise_decay > 0.0 && noise_decay <= 1.0))
    throw ConfigError("noise schedule out of range");
  if (!(ou_theta >= 0.0 && ou_theta <= 1.0)) throw ConfigError("ou_theta must be in [0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

ChannelConfig ExperimentConfig::channel() const {
  ChannelConfig cc;
  cc.num_antennas = num_antennas;
  cc.num_users = num_users;
  cc.num_rbs = num_rbs;
  cc.rb_bandwidth_hz = rb_bandwidth_hz;
  cc.noise_psd_w_per_hz = dbm_to_watts(noise_psd_dbm_per_hz);
  cc.channel_variance = channel_variance;
  cc.bs_power_budget_w = dbm_to_watts(bs_power_dbm);
  return cc;
}

EpisodeConfig ExperimentConfig::episode(const Catalog& catalog) const {
  validate();
  EpisodeConfig e;
  e.channel = channel();
  VideoParams video;
  video.height = video_height;
  video.width = video_width;
  video.fps = video_fps;
  e.video = {video};
  e.alpha = alpha;
  e.beta = beta;
  e.lambda_pen = lambda_pen;
  e.q_min = q_min;
  e.q_max = q_max;
  e.rate_floor_bps = rate_floor_bps;
  e.caps = RbCaps{per_rb_user_cap, min_rbs_per_user, max_rbs_per_user};
  e.slots_per_episode = slots_per_episode;
  e.metric = metric == "psnr" ? QualityMetric::psnr
             : metric == "ssim" ? QualityMetric::ssim
                                : QualityMetric::rfvd;
  e.fading = fading == "per_slot" ? FadingMode::per_slot : FadingMode::per_episode;
  e.source = quality_source == "tokenizer_catalog" ? QualitySource::tokenizer_catalog
                                                   : QualitySource::h265_ladder;
  e.ladder = H265Ladder::default_ladder();

  if (e.source == QualitySource::tokenizer_catalog) {
    std::vector<std::vector<std::string>> tag_lists;
    if (trim(user_tags).empty()) {
      std::vector<std::string> all;
      for (const TokenizerSpec& spec : catalog.specs) all.push_back(spec.name);
      tag_lists.assign(static_cast<std::size_t>(num_users), all);
    } else {
      for (const std::string& user_part : split(user_tags, ';'))
        tag_lists.push_back(split(user_part, ','));
      if (static_cast<int>(tag_lists.size()) != num_users)
        throw ConfigError("user_tags must list exactly num_users ';'-separated groups");
    }
    for (int u = 0; u < num_users; ++u) {
      std::vector<std::string> unknown;
      const CompatiblePairSet ps =
          compatible_pairs(catalog, u, tag_lists[static_cast<std::size_t>(u)], &unknown);
      if (!unknown.empty())
        throw ConfigError("user_tags names an unknown detokenizer: '" + unknown.front() + "'");
      e.user_pairs.push_back(ps.catalog_index);
    }
  }
  e.validate(catalog);
  return e;
}

TrainerConfig ExperimentConfig::trainer(const Catalog& catalog) const {
  TrainerConfig t;
  t.env = episode(catalog);
  t.episodes = episodes;
  t.batch_size = batch_size;
  t.buffer_capacity = buffer_capacity;
  t.gamma = gamma;
  t.tau = tau;
  t.epsilon = {epsilon_start, epsilon_floor, epsilon_decay};
  t.noise = {noise_start, noise_floor, noise_decay};
  t.noise_kind = noise_kind == "ou" ? NoiseKind::ou : NoiseKind::gaussian;
  t.ou_theta = ou_theta;
  t.hidden = hidden_list();
  t.lr_q = lr_q;
  t.lr_critic = lr_critic;
  t.lr_actor = lr_actor;
  t.adam_beta1 = adam_beta1;
  t.adam_beta2 = adam_beta2;
  t.adam_eps = adam_eps;
  t.eval_each_episode = eval_each_episode != 0;
  t.validate(catalog);
  return t;
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
  std::vector<std::uint64_t> out;
  for (const std::string& part : split(seeds, ',')) {
    if (part.empty()) throw ConfigError("seeds must be a comma-separated list of integers");
    out.push_back(to_u64("seeds", part, 0));
  }
  if (out.empty()) throw ConfigError("seeds must name at least one seed");
  return out;
}

std::vector<int> ExperimentConfig::hidden_list() const {
  std::vector<int> out;
  for (const std::string& part : split(hidden, ',')) {
    if (part.empty()) throw ConfigError("hidden must be a comma-separated list of layer sizes");
    const int v = to_int("hidden", part, 0);
    if (v < 1) throw ConfigError("hidden layer sizes must be >= 1");
    out.push_back(v);
  }
  return out;
}

Catalog load_catalog_for(const ExperimentConfig& cfg) {
  const std::string path =
      cfg.catalog_path.empty() ? std::string(TOKENCOM_DATA_DIR) + "/tokenizers.txt"
                               : cfg.catalog_path;
  return load_catalog(path);
}

}  // namespace tokencom
