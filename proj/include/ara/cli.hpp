#pragma once

#include <string>
#include <vector>

namespace ara::cli {

/// Runs the `ara` command line. Returns the process exit code; errors are
/// reported on stderr.
int run(int argc, char** argv);
/// Same, with argv[0] included in `args`.
int run(const std::vector<std::string>& args);

}  // namespace ara::cli
