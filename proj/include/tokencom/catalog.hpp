#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tokencom/errors.hpp"

namespace tokencom {

/// One tokenizer/detokenizer operating point.
struct TokenizerSpec {
  std::string name;       // wire tag; no whitespace or commas
  double mu_f = 1.0;      // temporal compression factor, in (0, 1]
  double mu_h = 1.0;      // vertical compression factor
  double mu_w = 1.0;      // horizontal compression factor
  std::int64_t codebook_size = 2;  // |O|, >= 2
  double psnr_db = 0.0;
  double ssim = 0.0;
  double rfvd = 0.0;      // lower is better
  double bpp_declared = 0.0;

  void validate() const;
};

struct VideoParams {
  int height = 1920;  // H
  int width = 1080;   // W
  double fps = 24.0;  // rho
};

enum class QualityMetric { psnr, ssim, rfvd };

/// eta = mu_f * mu_h * mu_w * log2(|O|), in bits per pixel.
double compression_rate_bpp(const TokenizerSpec& spec);

/// rho * eta * H * W, in bit/s.
double required_bitrate_bps(const TokenizerSpec& spec, const VideoParams& video);

/// Scalar quality where larger is always better (rFVD is negated).
double quality_of(const TokenizerSpec& spec, QualityMetric metric);

/// Reconstruction quality source list, loaded from a data file.
struct Catalog {
  std::vector<TokenizerSpec> specs;

  const TokenizerSpec* find(std::string_view name) const;
  int index_of(std::string_view name) const;  // -1 when absent
  double max_compression_rate_bpp() const;
  void validate() const;
};

/// File format: '#' comments; one record per line,
/// name mu_f mu_h mu_w codebook_size psnr ssim rfvd bpp.
Catalog load_catalog(const std::string& path);

/// Tokenizer/detokenizer pairs available to one user, ordered by ascending
/// compression rate (ties keep catalog order). Unknown tags are skipped and
/// reported through `unknown` when given; an empty intersection throws
/// AgreementImpossible.
struct CompatiblePairSet {
  int user_id = 0;
  std::vector<int> catalog_index;  // into Catalog::specs
};

CompatiblePairSet compatible_pairs(const Catalog& catalog, int user_id,
                                   const std::vector<std::string>& detokenizer_tags,
                                   std::vector<std::string>* unknown = nullptr);

// --- Two-step agreement wire protocol ------------------------------------
//
// Step 1, user -> BS:  "CAP <user_id> <tag>[,<tag>...]\n"
// Step 2, BS -> user:  "SEL <user_id> <tag>\n"
// ASCII, newline-terminated, tags free of whitespace and commas.

struct CapabilityMessage {
  int user_id = 0;
  std::vector<std::string> tags;
};

struct SelectionMessage {
  int user_id = 0;
  std::string tag;
};

std::string encode_capability_message(const CapabilityMessage& msg);
CapabilityMessage parse_capability_message(std::string_view line);
std::string encode_selection_message(const SelectionMessage& msg);
SelectionMessage parse_selection_message(std::string_view line);

/// In-process ordered reliable byte channel with injectable faults.
class MessageChannel {
 public:
  void send(std::string line);
  std::optional<std::string> receive();
  bool empty() const { return queue_.empty(); }
  void inject_drop_next() { drop_next_ = true; }
  void inject_duplicate_next() { duplicate_next_ = true; }

 private:
  std::deque<std::string> queue_;
  bool drop_next_ = false;
  bool duplicate_next_ = false;
};

/// Result of one simulated agreement round.
struct AgreementOutcome {
  std::vector<CompatiblePairSet> pair_sets;      // per user
  std::vector<int> selected_catalog_index;       // per user
  std::vector<std::string> transcript;           // wire messages in order
};

/// Runs the two-step exchange over in-process channels. `choose` maps a
/// user's pair set to a position within it (default: last entry, the
/// highest-rate pair). The user side re-validates that the selected tag was
/// declared, so an out-of-set choice raises ProtocolViolation.
AgreementOutcome run_agreement(
    const Catalog& catalog,
    const std::vector<std::vector<std::string>>& user_tags,
    const std::function<int(const CompatiblePairSet&)>& choose = {});

}  // namespace tokencom
