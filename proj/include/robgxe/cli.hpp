#pragma once

namespace robgxe {

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, char** argv);

} // namespace robgxe
