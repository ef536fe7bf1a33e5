#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "eqtsp/training.hpp"

namespace eqtsp {

/// Bad key, bad value or an invalid resulting configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a `key = value` file on top of the defaults. `#` starts a comment;
/// blank lines are ignored; unknown keys and repeated keys are errors.
/// See configs/README.md for the key list.
TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::string& path);

/// Writes every key, so parse_train_config(write_train_config(c)) == c.
void write_train_config(std::ostream& out, const TrainConfig& config);

/// Desk-scale defaults: E=5, T=50, B=32, curriculum sizes 10-20.
TrainConfig desk_train_config();

}  // namespace eqtsp
