fn main() {
    std::process::exit(graphalg::cli::run());
}
