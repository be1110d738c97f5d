#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lcam/params.hpp"

namespace lcam {

inline constexpr int kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointFormat = "lcam-checkpoint";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON container: format tag, version, model config, label vocabularies and
// every parameter tensor with its shape. Doubles round-trip exactly.
std::string checkpoint_text(const Model& model);
Model parse_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace lcam
