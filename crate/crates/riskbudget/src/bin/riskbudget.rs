fn main() {
    std::process::exit(riskbudget::cli::main_with_args(std::env::args_os()));
}
