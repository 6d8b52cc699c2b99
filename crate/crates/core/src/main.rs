fn main() {
    let code = chainforge::cli::run_cli(std::env::args_os());
    std::process::exit(code);
}
