#pragma once

namespace taps {

// Entry point for the taps command-line tool. Exit codes: 0 success (even
// with recorded per-instance failures), 1 usage or configuration error,
// 2 irrecoverable runtime error.
int run_cli(int argc, char** argv);

}  // namespace taps
