fn main() {
    std::process::exit(ergolab::cli_io::main_with_args(std::env::args_os()));
}
