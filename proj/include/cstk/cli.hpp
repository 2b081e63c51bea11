#ifndef CSTK_CLI_HPP
#define CSTK_CLI_HPP

#include "cstk/model.hpp"

#include <string>
#include <vector>

namespace cstk::cli {

/// Entry point for the cstk command-line tool; args excludes argv[0].
/// Returns the process exit code: 0 success, 1 computation error,
/// 2 usage error.
int run(const std::vector<std::string>& args);

/// key = value model description; unknown keys are errors with
/// line-anchored diagnostics.
CountingModel parse_model_text(const std::string& text, const std::string& source_name);
CountingModel parse_model_file(const std::string& path);

} // namespace cstk::cli

#endif
