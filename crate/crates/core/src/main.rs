fn main() {
    std::process::exit(glhkit::cli::main_with(std::env::args_os()));
}
