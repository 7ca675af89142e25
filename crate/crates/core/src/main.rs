fn main() {
    std::process::exit(maxconc::cli::run(std::env::args_os()));
}
