fn main() {
    std::process::exit(orbital_arm::cli::run(std::env::args_os()));
}
