fn main() {
    std::process::exit(objectness_cli::main_with(std::env::args_os()));
}
