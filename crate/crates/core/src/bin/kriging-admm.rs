fn main() {
    std::process::exit(kriging_admm::cli::main());
}
