fn main() {
    std::process::exit(gexpect::cli::run(std::env::args_os()));
}
