fn main() {
    std::process::exit(cevnorm::cli::run(std::env::args_os()));
}
