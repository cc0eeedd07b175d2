fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SFC_LOG", "error")).init();
    std::process::exit(sfc::cli::main_with(std::env::args_os()));
}
