#pragma once

namespace lara::cli {

/// The command-line entry point (kept out of main() so tests can drive it).
/// Subcommands: ingest, run, explain, bench, catalog, verify-udfs.
/// Exit status: 0 success, 1 usage error, 2 runtime error.
int cliMain(int argc, const char* const* argv);

} // namespace lara::cli
