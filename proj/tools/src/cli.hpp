#pragma once

namespace spdmidas::cli {

/// Entry point of the `spdmidas` tool. Returns the process exit status:
/// 0 success, 2 configuration error, 3 data error, 4 numerical failure under --strict.
int run(int argc, char** argv);

}  // namespace spdmidas::cli
