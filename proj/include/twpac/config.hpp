#pragma once

#include <filesystem>
#include <string>

#include "twpac/device.hpp"

namespace twpac::cli {

/// Reads a JSON (.json) or TOML (any other extension) device description. Unknown keys,
/// missing required keys and violated invariants raise ConfigError naming the key.
[[nodiscard]] device::DeviceSpec load_device(const std::filesystem::path& path);

/// Same, from text; `toml` selects the parser.
[[nodiscard]] device::DeviceSpec parse_device(const std::string& text, bool toml);

/// TOML text that load_device maps back to an equal DeviceSpec.
[[nodiscard]] std::string device_to_toml(const device::DeviceSpec& spec);
[[nodiscard]] std::string device_to_json(const device::DeviceSpec& spec);

void emit_device(const device::DeviceSpec& spec, const std::filesystem::path& path);

}  // namespace twpac::cli
