fn main() {
    std::process::exit(choquard_core::cli::run_command(std::env::args_os()));
}
