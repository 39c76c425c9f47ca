#pragma once

namespace justgen {

// Entry point behind main(): parses a subcommand (synth, ingest, init,
// index, train, generate, evaluate) and runs it.  Returns the process exit
// code: 0 success, 2 usage or input error, 3 internal invariant violation.
int run_cli(int argc, const char* const* argv);

}  // namespace justgen
