#include "vamark/media/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vamark {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  ConfigFile cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error("config key '" + key + "' is not a number: " + it->second);
  }
}

int ConfigFile::get_int(const std::string& key, int fallback) const {
  return static_cast<int>(get_int64(key, fallback));
}

std::int64_t ConfigFile::get_int64(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t used = 0;
    const std::int64_t v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error("config key '" + key + "' is not an integer: " + it->second);
  }
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw std::runtime_error("config key '" + key + "' is not a boolean: " + it->second);
}

RunConfig RunConfig::from_file(const ConfigFile& f) {
  RunConfig c;
  c.bits_k = f.get_int("bits_k", c.bits_k);
  c.bits_n = f.get_int("bits_n", c.bits_n);
  c.tau = f.get_double("tau", c.tau);
  c.theta_bit = f.get_double("theta_bit", c.theta_bit);
  c.theta_visual = f.get_double("theta_visual", c.theta_visual);
  c.theta_audio = f.get_double("theta_audio", c.theta_audio);
  c.lambda_cop = f.get_double("lambda_cop", c.lambda_cop);
  c.alpha_loc = f.get_double("alpha_loc", c.alpha_loc);
  c.beta_loc = f.get_double("beta_loc", c.beta_loc);
  c.lr = f.get_double("lr", c.lr);
  c.adam_beta1 = f.get_double("adam_beta1", c.adam_beta1);
  c.adam_beta2 = f.get_double("adam_beta2", c.adam_beta2);
  c.lr_halving_interval = f.get_int64("lr_halving_interval", c.lr_halving_interval);
  c.window_length = f.get_int("window_length", c.window_length);
  c.frame_size = f.get_int("frame_size", c.frame_size);
  c.inn_blocks = f.get_int("inn_blocks", c.inn_blocks);
  c.inn_hidden = f.get_int("inn_hidden", c.inn_hidden);
  c.bhm_base_channels = f.get_int("bhm_base_channels", c.bhm_base_channels);
  c.brm_channels = f.get_int("brm_channels", c.brm_channels);
  c.rpm_hidden = f.get_int("rpm_hidden", c.rpm_hidden);
  c.audio_channels = f.get_int("audio_channels", c.audio_channels);
  c.prompt_video.h = f.get_int("prompt_video_h", c.prompt_video.h);
  c.prompt_video.w = f.get_int("prompt_video_w", c.prompt_video.w);
  c.prompt_video.c = f.get_int("prompt_video_c", c.prompt_video.c);
  c.prompt_video.e = f.get_int("prompt_video_e", c.prompt_video.e);
  c.prompt_bits.h = f.get_int("prompt_bits_h", c.prompt_bits.h);
  c.prompt_bits.w = f.get_int("prompt_bits_w", c.prompt_bits.w);
  c.prompt_bits.c = f.get_int("prompt_bits_c", c.prompt_bits.c);
  c.prompt_bits.e = f.get_int("prompt_bits_e", c.prompt_bits.e);
  c.use_tafm = f.get_bool("use_tafm", c.use_tafm);
  c.use_dpl = f.get_bool("use_dpl", c.use_dpl);
  c.batch_size = f.get_int("batch_size", c.batch_size);
  c.stage1_steps = f.get_int64("stage1_steps", c.stage1_steps);
  c.stage2_steps = f.get_int64("stage2_steps", c.stage2_steps);
  c.audio_steps = f.get_int64("audio_steps", c.audio_steps);
  if (f.has("train_degradations")) c.train_degradations = split_csv(f.get_string("train_degradations", ""));
  c.loc_r = static_cast<float>(f.get_double("loc_r", c.loc_r));
  c.loc_g = static_cast<float>(f.get_double("loc_g", c.loc_g));
  c.loc_b = static_cast<float>(f.get_double("loc_b", c.loc_b));
  c.sample_rate = f.get_int("sample_rate", c.sample_rate);
  c.audio_budget = f.get_double("audio_budget", c.audio_budget);
  c.corpus_clips = f.get_int("corpus_clips", c.corpus_clips);
  c.corpus_frames = f.get_int("corpus_frames", c.corpus_frames);
  c.seed = static_cast<std::uint64_t>(f.get_int64("seed", static_cast<std::int64_t>(c.seed)));
  c.runs_dir = f.get_string("runs_dir", c.runs_dir);
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (bits_n > bits_k) throw std::invalid_argument("config: bits_n must not exceed bits_k");
  if (bits_k < 4 || bits_k % 4 != 0) throw std::invalid_argument("config: bits_k must be a positive multiple of 4");
  if (bits_n < 1) throw std::invalid_argument("config: bits_n must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("config: tau must lie in (0,1)");
  if (lambda_cop <= 0.0 || alpha_loc <= 0.0 || beta_loc <= 0.0)
    throw std::invalid_argument("config: loss weights must be positive");
  if (window_length != 3) throw std::invalid_argument("config: window_length must be 3");
  if (frame_size < 16 || frame_size % 4 != 0)
    throw std::invalid_argument("config: frame_size must be a multiple of 4, at least 16");
  if (inn_blocks < 1) throw std::invalid_argument("config: inn_blocks must be positive");
  if (prompt_video.e < 1 || prompt_bits.e < 1) throw std::invalid_argument("config: prompt pools need e >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be positive");
  if (audio_budget <= 0.0 || audio_budget > 1.0) throw std::invalid_argument("config: audio_budget must be in (0,1]");
}

}  // namespace vamark
