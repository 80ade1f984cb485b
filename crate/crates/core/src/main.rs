fn main() {
    std::process::exit(mbvge::cli::run(std::env::args_os()));
}
