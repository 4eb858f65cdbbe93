fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(normprop::cli::cli_main(&args));
}
