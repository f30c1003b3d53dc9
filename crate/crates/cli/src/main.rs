fn main() {
    std::process::exit(condsub_cli::run(std::env::args_os()));
}
