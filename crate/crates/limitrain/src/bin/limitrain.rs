fn main() {
    std::process::exit(limitrain::cli::run_from_env());
}
