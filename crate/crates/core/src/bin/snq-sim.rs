fn main() {
    std::process::exit(snq::experiments::cli_main(std::env::args_os()));
}
