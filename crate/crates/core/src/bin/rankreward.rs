fn main() {
    std::process::exit(rankreward::harness::cli::run(std::env::args_os()));
}
