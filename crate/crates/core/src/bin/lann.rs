fn main() {
    env_logger::init();
    std::process::exit(lann::cli::run(std::env::args_os()));
}
