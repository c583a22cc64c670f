fn main() {
    let status = gazetrace_cli::run(std::env::args_os().skip(1));
    std::process::exit(status.0);
}
