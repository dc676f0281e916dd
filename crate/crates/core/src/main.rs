fn main() {
    std::process::exit(spherecov::cli::main_with_args(std::env::args_os()));
}
