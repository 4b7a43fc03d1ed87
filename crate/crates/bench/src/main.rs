use anyhow::Context;
use clap::Parser;
use compsamp_bench::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let cfg = cli.overrides.apply(cli.experiment).context("building the experiment config")?;
    let written = run(&cfg).with_context(|| format!("running {:?}", cfg.experiment))?;
    for path in &written.files {
        println!("{}", path.display());
    }
    Ok(())
}
