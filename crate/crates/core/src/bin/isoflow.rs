use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use isoflow::experiment::{self, Command, ExperimentConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Flow,
    Thermalize,
    Equilibrium,
    Fpde,
    Averages,
    Partition,
    Figures,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Flow => Command::Flow,
            Cmd::Thermalize => Command::Thermalize,
            Cmd::Equilibrium => Command::Equilibrium,
            Cmd::Fpde => Command::Fpde,
            Cmd::Averages => Command::Averages,
            Cmd::Partition => Command::Partition,
            Cmd::Figures => Command::Figures,
        }
    }
}

/// Double-bracket flows and stochastic thermalization of Hamiltonians.
#[derive(Debug, Parser)]
#[command(name = "isoflow", version)]
struct Cli {
    command: Cmd,
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    paths: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "t-final")]
    t_final: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    convention: Option<String>,
    /// Figure selection for `figures`: 2, 3, 4 or all.
    #[arg(long)]
    which: Option<String>,
    /// Any other parameter, as `key=value` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn overrides(cli: &Cli) -> Result<BTreeMap<String, String>, isoflow::Error> {
    let mut m = BTreeMap::new();
    let named = [
        ("paths", &cli.paths),
        ("dt", &cli.dt),
        ("t_final", &cli.t_final),
        ("lambda", &cli.lambda),
        ("mu", &cli.mu),
        ("nu", &cli.nu),
        ("beta", &cli.beta),
        ("convention", &cli.convention),
        ("which", &cli.which),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            m.insert(k.to_string(), v.clone());
        }
    }
    let extra = experiment::parse_config_text(&cli.set.join("\n"))?;
    m.extend(extra);
    if let Some(s) = cli.seed {
        m.insert("seed".into(), s.to_string());
    }
    if let Some(o) = &cli.out {
        m.insert("out".into(), o.display().to_string());
    }
    Ok(m)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let resolved = (|| {
        let file = match &cli.config {
            Some(p) => experiment::read_config_file(p)?,
            None => BTreeMap::new(),
        };
        ExperimentConfig::resolve(cli.command.into(), &file, &overrides(&cli)?)
    })();
    let cfg = match resolved {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match experiment::run(&cfg) {
        Ok(report) => {
            for a in &report.artifacts {
                println!("{}", report.output_dir.join(a).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
