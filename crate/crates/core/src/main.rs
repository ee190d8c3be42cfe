fn main() {
    std::process::exit(locquery::cli::main_with_args(std::env::args_os()));
}
