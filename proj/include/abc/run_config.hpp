#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "abc/data.hpp"
#include "abc/network.hpp"
#include "abc/trainer.hpp"

namespace abc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat "key = value" run configuration. Blank lines and '#' comments are
/// ignored; keys are namespaced (model.*, train.*, data.*, paths.*) and must
/// come from known_config_keys(). Duplicate keys are rejected.
class RunConfig {
 public:
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(std::string_view key, std::string value);
  /// Throws ConfigError naming every missing key.
  void require(std::span<const std::string_view> keys) const;

  std::string get_string(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  /// model.C, model.height and model.width are required.
  AbcConfig model_config() const;
  /// Unset keys keep TrainConfig defaults.
  TrainConfig train_config() const;
  /// Unset keys keep SceneSpec defaults.
  SceneSpec scene_spec() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

std::span<const std::string_view> known_config_keys();

}  // namespace abc
