fn main() {
    std::process::exit(synqe::cli::run(std::env::args_os()));
}
