#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Tracking-supervised contrastive video pretraining"};
    previts::cli::add_training_commands(app);
    previts::cli::add_corpus_commands(*app.add_subcommand("corpus", "Synthetic corpus tools"));
    previts::cli::add_track_commands(*app.add_subcommand("track", "Tracking tube extraction"));
    return previts::cli::run(app, argc, argv);
}
