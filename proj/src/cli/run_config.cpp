#include "abc/run_config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace abc {

namespace {

constexpr std::array<std::string_view, 34> kKeys{
    "model.C",          "model.height",         "model.width",          "model.encoder_first_layer",
    "model.decoder_first_layer", "model.dilation_rates", "model.deep_supervision",
    "train.epochs",     "train.lr",             "train.batch_size",     "train.seed",
    "train.poly_power", "train.weight_decay",   "train.beta1",          "train.beta2",
    "train.adam_eps",   "train.loss_eps",       "train.flip",           "train.checkpoint_every",
    "data.count",       "data.height",          "data.width",           "data.min_targets",
    "data.max_targets", "data.min_radius",      "data.max_radius",      "data.min_peak",
    "data.max_peak",    "data.background",      "data.noise_sigma",     "data.seed",
    "paths.dataset",    "paths.out",            "paths.checkpoint",
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("invalid value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::span<const std::string_view> known_config_keys() { return kKeys; }

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
    if (cfg.has(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value for '" + std::string(key) + "'");
    cfg.values_.emplace(std::string(key), std::string(value));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

bool RunConfig::has(std::string_view key) const { return values_.find(key) != values_.end(); }

void RunConfig::set(std::string_view key, std::string value) {
  if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
    throw ConfigError("unknown key '" + std::string(key) + "'");
  }
  values_.insert_or_assign(std::string(key), std::move(value));
}

void RunConfig::require(std::span<const std::string_view> keys) const {
  std::string missing;
  for (std::string_view k : keys) {
    if (!has(k)) missing += (missing.empty() ? "" : ", ") + std::string(k);
  }
  if (!missing.empty()) throw ConfigError("missing required config key(s): " + missing);
}

std::string RunConfig::get_string(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key(s): " + std::string(key));
  return it->second;
}

std::size_t RunConfig::get_size(std::string_view key) const { return parse_number<std::size_t>(key, get_string(key)); }

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  return parse_number<std::uint64_t>(key, get_string(key));
}

double RunConfig::get_double(std::string_view key) const { return parse_number<double>(key, get_string(key)); }

bool RunConfig::get_bool(std::string_view key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("invalid boolean for " + std::string(key) + ": '" + v + "'");
}

AbcConfig RunConfig::model_config() const {
  static constexpr std::array<std::string_view, 3> required{"model.C", "model.height", "model.width"};
  require(required);
  AbcConfig cfg;
  cfg.input_dim = get_size("model.C");
  cfg.height = get_size("model.height");
  cfg.width = get_size("model.width");
  try {
    if (has("model.encoder_first_layer")) {
      cfg.encoder_first_layer = parse_encoder_first_layer(get_string("model.encoder_first_layer"));
    }
    if (has("model.decoder_first_layer")) {
      cfg.decoder_first_layer = parse_decoder_first_layer(get_string("model.decoder_first_layer"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (has("model.dilation_rates")) {
    const std::string text = get_string("model.dilation_rates");
    std::array<int, 3> rates{};
    std::size_t count = 0;
    std::string_view rest = text;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = trim(rest.substr(0, comma));
      if (count == 3) throw ConfigError("model.dilation_rates needs exactly three values");
      rates[count++] = parse_number<int>("model.dilation_rates", item);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (count != 3) throw ConfigError("model.dilation_rates needs exactly three values");
    cfg.dilation_rates = rates;
  }
  if (has("model.deep_supervision")) cfg.deep_supervision = get_bool("model.deep_supervision");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return cfg;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  if (has("train.epochs")) cfg.epochs = get_size("train.epochs");
  if (has("train.lr")) cfg.base_lr = static_cast<float>(get_double("train.lr"));
  if (has("train.batch_size")) cfg.batch_size = get_size("train.batch_size");
  if (has("train.seed")) cfg.seed = get_u64("train.seed");
  if (has("train.poly_power")) cfg.poly_power = static_cast<float>(get_double("train.poly_power"));
  if (has("train.weight_decay")) cfg.weight_decay = static_cast<float>(get_double("train.weight_decay"));
  if (has("train.beta1")) cfg.beta1 = static_cast<float>(get_double("train.beta1"));
  if (has("train.beta2")) cfg.beta2 = static_cast<float>(get_double("train.beta2"));
  if (has("train.adam_eps")) cfg.adam_eps = static_cast<float>(get_double("train.adam_eps"));
  if (has("train.loss_eps")) cfg.loss_eps = static_cast<float>(get_double("train.loss_eps"));
  if (has("train.flip")) cfg.horizontal_flip = get_bool("train.flip");
  if (has("train.checkpoint_every")) cfg.checkpoint_every = get_size("train.checkpoint_every");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return cfg;
}

SceneSpec RunConfig::scene_spec() const {
  SceneSpec spec;
  if (has("data.height")) spec.height = get_size("data.height");
  if (has("data.width")) spec.width = get_size("data.width");
  if (has("data.min_targets")) spec.min_targets = get_size("data.min_targets");
  if (has("data.max_targets")) spec.max_targets = get_size("data.max_targets");
  if (has("data.min_radius")) spec.min_radius = get_double("data.min_radius");
  if (has("data.max_radius")) spec.max_radius = get_double("data.max_radius");
  if (has("data.min_peak")) spec.min_peak = get_double("data.min_peak");
  if (has("data.max_peak")) spec.max_peak = get_double("data.max_peak");
  if (has("data.noise_sigma")) spec.noise_sigma = get_double("data.noise_sigma");
  if (has("data.seed")) spec.seed = get_u64("data.seed");
  try {
    if (has("data.background")) spec.background = parse_background_style(get_string("data.background"));
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  return spec;
}

}  // namespace abc
