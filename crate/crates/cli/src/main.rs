fn main() {
    std::process::exit(nhfield_cli::run(std::env::args_os()));
}
