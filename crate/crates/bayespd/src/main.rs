fn main() {
    std::process::exit(bayespd::cli::run(std::env::args_os()));
}
