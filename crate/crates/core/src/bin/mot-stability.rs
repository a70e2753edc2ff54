fn main() {
    std::process::exit(mot_stability::cli::run(std::env::args_os()));
}
