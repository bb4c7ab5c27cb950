#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "dift/diffusion/backend.hpp"
#include "dift/temporal/video_eval.hpp"

namespace dift {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBackend = 3;

/// Runs one `dift` subcommand; args exclude the program name. Eval commands
/// print a table to `out` and write the JSON report to --report (or to `out`
/// after the table when --report is absent).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Loads images from disk, resolving relative paths against root. The image
/// id is the path relative to root, so cache keys do not depend on where a
/// dataset is mounted.
ImageProvider file_images(const std::filesystem::path& root, int max_side);
MaskProvider file_masks(const std::filesystem::path& root);

}  // namespace dift
