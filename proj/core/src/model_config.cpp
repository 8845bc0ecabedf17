#include "amt/model_config.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "amt/instruments.hpp"

namespace amt::model {

int ModelConfig::window_samples() const {
  return static_cast<int>(std::llround(window_seconds * kSampleRate));
}

int ModelConfig::frames() const {
  const dsp::StftConfig s = stft();
  return s.frames_for(window_samples());
}

dsp::StftConfig ModelConfig::stft() const {
  dsp::StftConfig s;
  s.bins = spec_bins;
  return s;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("config: " + field + ": " + why);
  };
  if (instruments < 1) fail("instruments", "must be positive");
  if (latent_dim < 1) fail("latent_dim", "must be positive");
  if (heads < 1 || latent_dim % heads != 0) fail("heads", "must divide latent_dim");
  if (blocks < 0) fail("blocks", "must be non-negative");
  if (latent_layers < 1 || temporal_layers < 1) fail("layers", "must be positive");
  if (conv_channels.empty()) fail("conv_channels", "need at least one block");
  for (int c : conv_channels)
    if (c < 1) fail("conv_channels", "channels must be positive");
  if (spec_bins < 8 || spec_bins > 1024) fail("spec_bins", "must lie in [8, 1024]");
  if (spec_bins % (1 << conv_blocks()) != 0)
    fail("spec_bins", "not divisible by 2^" + std::to_string(conv_blocks()));
  if (window_seconds <= 0) fail("window_seconds", "must be positive");
  if (gru_hidden < 1) fail("gru_hidden", "must be positive");
  if (dropout < 0 || dropout >= 1) fail("dropout", "must lie in [0, 1)");
  const data::InstrumentBank b = data::InstrumentBank::by_name(bank);
  if (b.size() != instruments)
    fail("instruments",
         "bank '" + bank + "' has " + std::to_string(b.size()) + " classes");
}

std::string ModelConfig::to_kv() const {
  std::ostringstream out;
  out << "bank = " << bank << "\n";
  out << "instruments = " << instruments << "\n";
  out << "latent_dim = " << latent_dim << "\n";
  out << "blocks = " << blocks << "\n";
  out << "latent_layers = " << latent_layers << "\n";
  out << "temporal_layers = " << temporal_layers << "\n";
  out << "heads = " << heads << "\n";
  out << "dropout = " << dropout << "\n";
  out << "ffn_mult = " << ffn_mult << "\n";
  out << "conv_channels = ";
  for (size_t i = 0; i < conv_channels.size(); ++i)
    out << (i ? "," : "") << conv_channels[i];
  out << "\n";
  out << "spec_bins = " << spec_bins << "\n";
  out << "window_seconds = " << window_seconds << "\n";
  out << "gru_hidden = " << gru_hidden << "\n";
  out << "freq_pos_emb = " << (freq_pos_emb ? 1 : 0) << "\n";
  out << "temporal_pos_emb = " << (temporal_pos_emb ? 1 : 0) << "\n";
  return out.str();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ModelConfig ModelConfig::from_kv(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    try {
      if (key == "bank") cfg.bank = val;
      else if (key == "instruments") cfg.instruments = std::stoi(val);
      else if (key == "latent_dim") cfg.latent_dim = std::stoi(val);
      else if (key == "blocks") cfg.blocks = std::stoi(val);
      else if (key == "latent_layers") cfg.latent_layers = std::stoi(val);
      else if (key == "temporal_layers") cfg.temporal_layers = std::stoi(val);
      else if (key == "heads") cfg.heads = std::stoi(val);
      else if (key == "dropout") cfg.dropout = std::stod(val);
      else if (key == "ffn_mult") cfg.ffn_mult = std::stoi(val);
      else if (key == "conv_channels") {
        cfg.conv_channels.clear();
        std::istringstream vs(val);
        std::string item;
        while (std::getline(vs, item, ',')) cfg.conv_channels.push_back(std::stoi(trim(item)));
      } else if (key == "spec_bins") cfg.spec_bins = std::stoi(val);
      else if (key == "window_seconds") cfg.window_seconds = std::stod(val);
      else if (key == "gru_hidden") cfg.gru_hidden = std::stoi(val);
      else if (key == "freq_pos_emb") cfg.freq_pos_emb = std::stoi(val) != 0;
      else if (key == "temporal_pos_emb") cfg.temporal_pos_emb = std::stoi(val) != 0;
      else throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config: bad value for " + key + ": '" + val + "'");
    }
  }
  return cfg;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  if (name == "full") return ModelConfig{};
  if (name == "desk") {
    ModelConfig cfg;
    cfg.bank = "small";
    cfg.instruments = 3;
    cfg.latent_dim = 32;
    cfg.heads = 4;
    cfg.conv_channels = {8, 16, 32};
    cfg.spec_bins = 256;
    cfg.window_seconds = 2.0;
    cfg.gru_hidden = 32;
    return cfg;
  }
  if (name == "gradcheck") {
    ModelConfig cfg;
    cfg.bank = "duo";
    cfg.instruments = 2;
    cfg.latent_dim = 16;
    cfg.heads = 4;
    cfg.conv_channels = {4, 8, 16};
    cfg.spec_bins = 128;
    cfg.window_seconds = 0.16;  // 8 frames
    cfg.gru_hidden = 16;
    cfg.dropout = 0.0;
    return cfg;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

}  // namespace amt::model
