fn main() {
    std::process::exit(sfda_cli::run(std::env::args_os()));
}
