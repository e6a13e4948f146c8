fn main() {
    std::process::exit(tmc_cli::main_with(std::env::args_os()));
}
