fn main() {
    std::process::exit(faultdrive::cli::main_with_args(std::env::args_os()));
}
