fn main() {
    std::process::exit(sshmt::cli::run_from(std::env::args_os()));
}
