#pragma once

// Shared YAML helpers for circuit serialization and config parsing.

#include <string>

#include <yaml-cpp/yaml.h>

#include "dualbound/noise.hpp"
#include "dualbound/types.hpp"

namespace dualbound::yaml_io {

// Row-major [re, im, re, im, ...] flattening.
void emit_matrix(YAML::Emitter& out, const MatC& m);
MatC parse_matrix(const YAML::Node& node, Index rows, Index cols, const std::string& path);

void emit_noise(YAML::Emitter& out, const noise::NoiseModel& model);
noise::NoiseModel parse_noise(const YAML::Node& node, const std::string& path);

}  // namespace dualbound::yaml_io
