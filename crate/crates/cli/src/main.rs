use std::io::{self, BufReader};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut stdin = BufReader::new(io::stdin());
    let code = factoid_cli::run(std::env::args_os(), &mut stdin, &mut io::stdout().lock(), &mut io::stderr());
    std::process::exit(code);
}
