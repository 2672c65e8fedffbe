#pragma once

#include "csrlab/pipeline.hpp"

#include <filesystem>
#include <string>

namespace csrlab::cli {

// INI-style text: "[section]" headers, "key = value" lines, '#' or ';'
// comments. Unknown sections or keys and malformed values raise config
// errors naming the line. Relative paths resolve against base_dir.
pipeline::RunConfig parse_config_text(const std::string &text, const std::filesystem::path &base_dir);
pipeline::RunConfig parse_config(const std::filesystem::path &path);

// Every field, including defaults, in a form parse_config_text accepts.
std::string render_config(const pipeline::RunConfig &config);

} // namespace csrlab::cli
