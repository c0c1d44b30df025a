fn main() {
    std::process::exit(chamber_twin::cli::main());
}
