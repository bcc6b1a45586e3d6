fn main() {
    std::process::exit(agebranch::cli::run(std::env::args_os()));
}
