#pragma once

#include <string>
#include <vector>

#include "xvseg/data.hpp"
#include "xvseg/train.hpp"

namespace xvseg {

// One experiment, fully described: dataset recipe plus every training knob.
// Serializes to and from flat `section.key = value` text so a run can be
// reproduced from the resolved file alone.
struct ExperimentConfig {
  DatasetSpec data;
  TrainSettings settings;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_text(const std::string& text);

  // Applies one "key=value" override (the CLI --set form). Unknown keys and
  // malformed values raise ConfigError naming the offending field.
  void set_override(const std::string& assignment);

  // Full round-trippable dump: every key, stable order, exact doubles.
  std::string serialize() const;
};

}  // namespace xvseg
