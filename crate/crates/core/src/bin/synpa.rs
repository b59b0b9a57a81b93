fn main() {
    std::process::exit(synpa::cli::run(std::env::args_os()));
}
