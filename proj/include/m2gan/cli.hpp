#pragma once

namespace m2gan {

// Exit codes: 0 success, 2 usage error, 3 data error, 4 training-divergence
// abort, 1 anything else.
int run_cli(int argc, const char* const* argv);

}  // namespace m2gan
