use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STRANGE_SEGMENTS_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = strange_segments_cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
