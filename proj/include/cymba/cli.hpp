#pragma once

namespace cymba {

// Parses arguments, loads the config, and dispatches to the command bodies.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.
int run_cli(int argc, char** argv);

}  // namespace cymba
