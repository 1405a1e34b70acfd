fn main() {
    std::process::exit(ipdg1d::cli::main_with_args(std::env::args_os()));
}
