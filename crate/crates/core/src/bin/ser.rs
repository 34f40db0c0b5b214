fn main() {
    std::process::exit(ser_core::cli::main_with_args(std::env::args_os()));
}
