use clap::Parser;

use cir_usv::cli::{emit, run, Cli, THREADS_ENV};

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let code = match run(&cli).and_then(|outcome| emit(&cli, &outcome)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
