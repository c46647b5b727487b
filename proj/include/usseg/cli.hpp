#ifndef USSEG_CLI_HPP
#define USSEG_CLI_HPP

namespace usseg {

// Subcommand dispatcher behind the usseg binary. Exit codes: 0 success,
// 1 runtime/validation failure (one-line 'error: ...' on stderr), 2 usage
// error.
int cli_dispatch(int argc, const char* const* argv);

} // namespace usseg
#endif
