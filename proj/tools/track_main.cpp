#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Tracking tube extraction"};
    previts::cli::add_track_commands(app);
    return previts::cli::run(app, argc, argv);
}
