fn main() {
    std::process::exit(rldeconv::cli::run(std::env::args_os()));
}
