#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Synthetic corpus tools"};
    previts::cli::add_corpus_commands(app);
    return previts::cli::run(app, argc, argv);
}
