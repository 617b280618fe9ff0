use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LFD_LOG", "warn")).init();
    let code = lfd_core::cli::run(std::env::args_os(), &mut io::stdout().lock());
    std::process::exit(code);
}
