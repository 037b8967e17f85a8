fn main() {
    std::process::exit(cocyclelab::cli::run(std::env::args_os()));
}
