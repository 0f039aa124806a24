fn main() {
    std::process::exit(sbe_core::cli::run(std::env::args_os()));
}
