#pragma once

#include <optional>
#include <string>

#include "amt/adamw.hpp"
#include "amt/graph.hpp"

namespace amt::nn {

/// Self-describing checkpoint container: versioned header, embedded config
/// text, then (name, shape, raw little-endian values) per parameter, followed
/// by the optimizer state when present. Writes are atomic
/// (write-temp-then-rename).
struct CheckpointInfo {
  int scalar_bytes = 4;  // 4 = float, 8 = double
  std::string config_text;
  bool has_optimizer = false;
};

CheckpointInfo read_checkpoint_info(const std::string& path);

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params,
                     const AdamW<S>* optimizer, const std::string& config_text);

/// Loads values into an existing store whose parameter names and shapes must
/// match the file exactly. Returns the embedded config text.
template <typename S>
std::string load_checkpoint(const std::string& path, ParamStore<S>& params,
                            AdamW<S>* optimizer = nullptr);

}  // namespace amt::nn
