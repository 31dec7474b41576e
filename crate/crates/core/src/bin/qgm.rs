fn main() {
    std::process::exit(qgm::cli::main_from_args(std::env::args_os()));
}
