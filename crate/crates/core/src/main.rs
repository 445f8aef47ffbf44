fn main() {
    std::process::exit(bfd_core::cli::run_cli(std::env::args_os()));
}
