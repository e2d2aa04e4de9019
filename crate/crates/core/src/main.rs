fn main() {
    std::process::exit(cavity_wigner::cli::run(std::env::args_os()));
}
