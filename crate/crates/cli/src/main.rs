fn main() {
    std::process::exit(mvs_cli::run(std::env::args()));
}
