fn main() {
    std::process::exit(lecam::cli::main_with_args(std::env::args_os()));
}
