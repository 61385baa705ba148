fn main() {
    std::process::exit(matchctl::cli::run(std::env::args_os()));
}
