fn main() {
    std::process::exit(printleak::cli::run(std::env::args_os()));
}
