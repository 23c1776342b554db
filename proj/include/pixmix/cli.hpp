#pragma once

namespace pixmix {

// Entry point for the pixmix executable. Returns the process exit code:
// 0 success, 1 per-item failures (details on stderr), 2 usage/config errors.
int cli_run(int argc, char** argv);

}  // namespace pixmix
