fn main() {
    std::process::exit(warpcheck::cli::main_with_args(std::env::args_os()));
}
