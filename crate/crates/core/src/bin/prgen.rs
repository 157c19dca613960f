fn main() {
    env_logger::init();
    std::process::exit(prgen::harness::cli::run(std::env::args_os()));
}
