fn main() {
    std::process::exit(ar1_breakdown::cli::run(std::env::args_os()));
}
