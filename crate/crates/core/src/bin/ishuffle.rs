fn main() {
    std::process::exit(invariant_shuffles::cli::run(std::env::args_os()));
}
