#pragma once

namespace rcnet {

// Parses command-line arguments and runs the selected subcommand
// (floor / pointfit / merge / construct / eval / verify / train).
// Returns the process exit code: 0 on success, 1 for invalid input or
// usage errors, 2 when a numeric certification or bound check fails.
int dispatch(int argc, const char* const* argv);

}  // namespace rcnet
