#include "tokencom/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tokencom {

namespace {

bool valid_tag(std::string_view tag) {
  if (tag.empty()) return false;
  for (char c : tag)
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') return false;
  return true;
}

}  // namespace

void TokenizerSpec::validate() const {
  if (!valid_tag(name)) throw ConfigError("tokenizer name must be non-empty without spaces/commas");
  auto factor_ok = [](double m) { return m > 0.0 && m <= 1.0; };
  if (!factor_ok(mu_f) || !factor_ok(mu_h) || !factor_ok(mu_w))
    throw ConfigError("compression factors must lie in (0, 1]: " + name);
  if (codebook_size < 2) throw ConfigError("codebook_size must be >= 2: " + name);
  if (!(bpp_declared > 0.0)) throw ConfigError("bpp_declared must be > 0: " + name);
  const double eta = compression_rate_bpp(*this);
  if (std::abs(eta - bpp_declared) > 1e-3)
    throw ConfigError("computed bits-per-pixel disagrees with declared value: " + name);
}

double compression_rate_bpp(const TokenizerSpec& spec) {
  if (spec.codebook_size < 2) throw ConfigError("codebook_size must be >= 2");
  return spec.mu_f * spec.mu_h * spec.mu_w * std::log2(static_cast<double>(spec.codebook_size));
}

double required_bitrate_bps(const TokenizerSpec& spec, const VideoParams& video) {
  if (video.height < 1 || video.width < 1 || !(video.fps > 0.0))
    throw ConfigError("video parameters must be positive");
  return video.fps * compression_rate_bpp(spec) *
         static_cast<double>(video.height) * static_cast<double>(video.width);
}

double quality_of(const TokenizerSpec& spec, QualityMetric metric) {
  switch (metric) {
    case QualityMetric::psnr: return spec.psnr_db;
    case QualityMetric::ssim: return spec.ssim;
    case QualityMetric::rfvd: return -spec.rfvd;  // larger-is-better convention
  }
  throw ConfigError("unknown quality metric");
}

const TokenizerSpec* Catalog::find(std::string_view name) const {
  for (const auto& s : specs)
    if (s.name == name) return &s;
  return nullptr;
}

int Catalog::index_of(std::string_view name) const {
  for (std::size_t k = 0; k < specs.size(); ++k)
    if (specs[k].name == name) return static_cast<int>(k);
  return -1;
}

double Catalog::max_compression_rate_bpp() const {
  double m = 0.0;
  for (const auto& s : specs) m = std::max(m, compression_rate_bpp(s));
  return m;
}

void Catalog::validate() const {
  if (specs.empty()) throw ConfigError("catalog is empty");
  for (const auto& s : specs) s.validate();
  for (std::size_t a = 0; a < specs.size(); ++a)
    for (std::size_t b = a + 1; b < specs.size(); ++b)
      if (specs[a].name == specs[b].name)
        throw ConfigError("duplicate tokenizer name: " + specs[a].name);
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open catalog file: " + path);
  Catalog cat;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    TokenizerSpec s;
    if (!(ls >> s.name)) continue;  // blank line
    if (!(ls >> s.mu_f >> s.mu_h >> s.mu_w >> s.codebook_size >> s.psnr_db >> s.ssim >>
          s.rfvd >> s.bpp_declared))
      throw ParseError("catalog record needs 9 fields: " + path, line_no);
    std::string extra;
    if (ls >> extra) throw ParseError("trailing field '" + extra + "': " + path, line_no);
    cat.specs.push_back(std::move(s));
  }
  cat.validate();
  return cat;
}

CompatiblePairSet compatible_pairs(const Catalog& catalog, int user_id,
                                   const std::vector<std::string>& detokenizer_tags,
                                   std::vector<std::string>* unknown) {
  if (detokenizer_tags.empty())
    throw AgreementImpossible("user " + std::to_string(user_id) + " declared no detokenizers");
  CompatiblePairSet set;
  set.user_id = user_id;
  for (const auto& tag : detokenizer_tags) {
    const int idx = catalog.index_of(tag);
    if (idx < 0) {
      if (unknown) unknown->push_back(tag);
      continue;
    }
    if (std::find(set.catalog_index.begin(), set.catalog_index.end(), idx) ==
        set.catalog_index.end())
      set.catalog_index.push_back(idx);
  }
  if (set.catalog_index.empty())
    throw AgreementImpossible("user " + std::to_string(user_id) +
                              " shares no tokenizer with the transmitter");
  std::stable_sort(set.catalog_index.begin(), set.catalog_index.end(), [&](int a, int b) {
    return compression_rate_bpp(catalog.specs[a]) < compression_rate_bpp(catalog.specs[b]);
  });
  return set;
}

// --- wire codec -----------------------------------------------------------

namespace {

// Scans an unsigned decimal at `pos`, advancing it.
int scan_int(std::string_view line, std::size_t& pos, const char* what) {
  std::size_t start = pos;
  long value = 0;
  while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) {
    value = value * 10 + (line[pos] - '0');
    if (value > 1'000'000'000L) throw ParseError(std::string(what) + " out of range", start);
    ++pos;
  }
  if (pos == start) throw ParseError(std::string("expected ") + what, pos);
  return static_cast<int>(value);
}

void expect_char(std::string_view line, std::size_t& pos, char c) {
  if (pos >= line.size() || line[pos] != c)
    throw ParseError(std::string("expected '") + c + "'", pos);
  ++pos;
}

std::string scan_tag(std::string_view line, std::size_t& pos) {
  std::size_t start = pos;
  while (pos < line.size() && line[pos] != ',' && line[pos] != '\n' && line[pos] != ' ') ++pos;
  if (pos == start) throw ParseError("expected tokenizer tag", pos);
  return std::string(line.substr(start, pos - start));
}

}  // namespace

std::string encode_capability_message(const CapabilityMessage& msg) {
  if (msg.user_id < 0) throw ConfigError("user_id must be >= 0");
  if (msg.tags.empty()) throw ConfigError("capability message needs at least one tag");
  std::string out = "CAP " + std::to_string(msg.user_id) + " ";
  for (std::size_t k = 0; k < msg.tags.size(); ++k) {
    if (!valid_tag(msg.tags[k]))
      throw ConfigError("tag not encodable on the wire: '" + msg.tags[k] + "'");
    if (k) out += ',';
    out += msg.tags[k];
  }
  out += '\n';
  return out;
}

CapabilityMessage parse_capability_message(std::string_view line) {
  std::size_t pos = 0;
  if (line.substr(0, 4) != "CAP ") throw ParseError("expected 'CAP '", 0);
  pos = 4;
  CapabilityMessage msg;
  msg.user_id = scan_int(line, pos, "user id");
  expect_char(line, pos, ' ');
  msg.tags.push_back(scan_tag(line, pos));
  while (pos < line.size() && line[pos] == ',') {
    ++pos;
    msg.tags.push_back(scan_tag(line, pos));
  }
  expect_char(line, pos, '\n');
  if (pos != line.size()) throw ParseError("trailing bytes after newline", pos);
  return msg;
}

std::string encode_selection_message(const SelectionMessage& msg) {
  if (msg.user_id < 0) throw ConfigError("user_id must be >= 0");
  if (!valid_tag(msg.tag)) throw ConfigError("tag not encodable on the wire: '" + msg.tag + "'");
  return "SEL " + std::to_string(msg.user_id) + " " + msg.tag + "\n";
}

SelectionMessage parse_selection_message(std::string_view line) {
  std::size_t pos = 0;
  if (line.substr(0, 4) != "SEL ") throw ParseError("expected 'SEL '", 0);
  pos = 4;
  SelectionMessage msg;
  msg.user_id = scan_int(line, pos, "user id");
  expect_char(line, pos, ' ');
  msg.tag = scan_tag(line, pos);
  expect_char(line, pos, '\n');
  if (pos != line.size()) throw ParseError("trailing bytes after newline", pos);
  return msg;
}

void MessageChannel::send(std::string line) {
  if (drop_next_) {
    drop_next_ = false;
    return;
  }
  if (duplicate_next_) {
    duplicate_next_ = false;
    queue_.push_back(line);
  }
  queue_.push_back(std::move(line));
}

std::optional<std::string> MessageChannel::receive() {
  if (queue_.empty()) return std::nullopt;
  std::string front = std::move(queue_.front());
  queue_.pop_front();
  return front;
}

AgreementOutcome run_agreement(
    const Catalog& catalog,
    const std::vector<std::vector<std::string>>& user_tags,
    const std::function<int(const CompatiblePairSet&)>& choose) {
  AgreementOutcome out;
  MessageChannel uplink, downlink;

  // Step 1: every user declares its detokenizers.
  for (std::size_t u = 0; u < user_tags.size(); ++u) {
    const std::string wire =
        encode_capability_message({static_cast<int>(u), user_tags[u]});
    out.transcript.push_back(wire);
    uplink.send(wire);
  }
  std::vector<CapabilityMessage> received;
  while (auto line = uplink.receive()) received.push_back(parse_capability_message(*line));
  for (const auto& cap : received)
    out.pair_sets.push_back(compatible_pairs(catalog, cap.user_id, cap.tags));

  // Step 2: transmitter announces one selection per user.
  out.selected_catalog_index.assign(user_tags.size(), -1);
  for (const auto& set : out.pair_sets) {
    const int n = static_cast<int>(set.catalog_index.size());
    int pick = choose ? choose(set) : n - 1;
    if (pick < 0 || pick >= n)
      throw ProtocolViolation("selection outside the user's compatible set");
    const int cat_idx = set.catalog_index[pick];
    const std::string wire =
        encode_selection_message({set.user_id, catalog.specs[cat_idx].name});
    out.transcript.push_back(wire);
    downlink.send(wire);
  }
  while (auto line = downlink.receive()) {
    const SelectionMessage sel = parse_selection_message(*line);
    if (sel.user_id < 0 || sel.user_id >= static_cast<int>(user_tags.size()))
      throw ProtocolViolation("selection for unknown user " + std::to_string(sel.user_id));
    // User-side check: the tag must be one this user declared.
    const auto& declared = user_tags[sel.user_id];
    if (std::find(declared.begin(), declared.end(), sel.tag) == declared.end())
      throw ProtocolViolation("user " + std::to_string(sel.user_id) +
                              " received undeclared tokenizer '" + sel.tag + "'");
    out.selected_catalog_index[sel.user_id] = catalog.index_of(sel.tag);
  }
  for (int idx : out.selected_catalog_index)
    if (idx < 0) throw ProtocolViolation("agreement round left a user without a selection");
  return out;
}

}  // namespace tokencom
