#pragma once

// The ssvae command line: train, eval, sweep, synth and dump-recon.

#include <iosfwd>

namespace ssvae::cli {

/// Exit codes: 0 success, 1 unexpected failure, 2 bad usage or settings,
/// 3 missing or malformed data.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ssvae::cli
