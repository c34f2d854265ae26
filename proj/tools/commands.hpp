#pragma once

#include <CLI11.hpp>

namespace previts::cli {

void add_corpus_commands(CLI::App& app);
void add_track_commands(CLI::App& app);
void add_training_commands(CLI::App& app);  // train, ablate, eval, plot

// Parses, dispatches and maps exceptions to a non-zero exit code.
int run(CLI::App& app, int argc, char** argv);

}  // namespace previts::cli
