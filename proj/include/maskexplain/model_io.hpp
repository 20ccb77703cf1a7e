#pragma once

#include <filesystem>
#include <memory>

#include "maskexplain/blackbox.hpp"

namespace maskexplain {

/// Writes <dir>/manifest.txt plus one <name>.mpt1 per parameter tensor.
/// The manifest starts with a "# kind=... input=HxWxC classes=C" line
/// followed by one "name dim..." line per tensor.
void save_model(const std::filesystem::path& dir, const BlackBox& model);

/// Loads any built-in model kind written by save_model.
std::unique_ptr<BlackBox> load_model(const std::filesystem::path& dir);

}  // namespace maskexplain
