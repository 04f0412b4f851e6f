#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vamark {

// Flat key = value configuration file. '#' starts a comment. CLI flags
// override file values via set().
class ConfigFile {
 public:
  ConfigFile() = default;
  static ConfigFile load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::int64_t get_int64(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct PromptShape {
  int h = 16, w = 16, c = 1, e = 1;
};

// Resolved run configuration; every knob the pipeline uses.
struct RunConfig {
  // payload
  int bits_k = 32;
  int bits_n = 16;

  // decode thresholds
  double tau = 0.2;
  double theta_bit = 0.9375;  // >= 30/32 matching bits counts as "same owner"
  double theta_visual = 0.001;
  double theta_audio = 0.001;

  // losses
  double lambda_cop = 10.0;
  double alpha_loc = 100.0;
  double beta_loc = 1.0;

  // optimizer
  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.5;
  std::int64_t lr_halving_interval = 3000;

  // geometry
  int window_length = 3;
  int frame_size = 64;

  // architecture
  int inn_blocks = 16;
  int inn_hidden = 16;
  int bhm_base_channels = 16;
  int brm_channels = 16;
  int rpm_hidden = 32;
  int audio_channels = 16;
  PromptShape prompt_video{16, 16, 72, 2};
  PromptShape prompt_bits{16, 16, 16, 6};
  bool use_tafm = true;
  bool use_dpl = true;

  // training schedule
  int batch_size = 4;
  std::int64_t stage1_steps = 10000;
  std::int64_t stage2_steps = 3000;
  std::int64_t audio_steps = 6000;
  std::vector<std::string> train_degradations = {"identity", "gaussian5", "gaussian10", "poisson", "dctq"};

  // watermark color (pure blue)
  float loc_r = 0.0f, loc_g = 0.0f, loc_b = 1.0f;

  // audio
  int sample_rate = 16000;
  double audio_budget = 0.08;  // RMS(delta)/RMS(host) cap (-22 dB)

  // corpus
  int corpus_clips = 40;
  int corpus_frames = 12;
  std::uint64_t seed = 7;

  // paths
  std::string runs_dir = "runs/desk";

  static RunConfig from_file(const ConfigFile& file);
  void validate() const;
};

}  // namespace vamark
