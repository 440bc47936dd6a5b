#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evolmpnn {

/// Runs one subcommand (synth, split, train, eval, distortion). `args` excludes the
/// program name. Returns 0 on success, 1 on a validation or runtime error, 2 on a usage
/// error; errors go to `err` as one-line JSON.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace evolmpnn
