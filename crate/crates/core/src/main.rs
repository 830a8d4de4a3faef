fn main() {
    std::process::exit(apimisuse::cli::run(std::env::args_os()));
}
