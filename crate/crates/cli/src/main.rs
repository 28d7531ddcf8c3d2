use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bubbleloja::config::{ConfigError, RunConfig};
use bubbleloja::harness;
use bubbleloja::report::{git_describe, write_file, Report, Summary};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bubbleloja",
    version,
    about = "Adapted-bubble experiments on flat tori"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy expansion sweep over the bubble scale
    Expansion(Common),
    /// Norm scalings of the scale derivative and the variations
    Norms(Common),
    /// Łojasiewicz probe on perturbed bubbles
    Probe(Common),
    /// Smallest eigenvalues of the projected Jacobi operator
    Spectrum(Common),
    /// Exponent tables of a rate preset and the synthetic lemma checks
    Exponents(Common),
    /// Wente energy identities
    Wente(Common),
    /// Gradient flow started at a bubble
    Flow(Common),
    /// Principal term of the Green's function
    Greencheck(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Bubble scales (comma separated)
    #[arg(long)]
    lambda: Option<String>,
    /// Perturbation sizes (comma separated)
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid resolution
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn build_config(name: &str, c: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::for_command(name);
    let default_grids = cfg.grids.clone();
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        cfg.apply_text(&text).map_err(|e| ConfigError {
            line: e.line,
            message: format!("{}: {}", path.display(), e.message),
        })?;
    }
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or(ConfigError {
            line: None,
            message: format!("--set expects KEY=VALUE, got `{kv}`"),
        })?;
        cfg.set(k, v)?;
    }
    let flags = [
        ("lambda", c.lambda.clone()),
        ("eps", c.eps.clone()),
        ("seed", c.seed.map(|s| s.to_string())),
        ("n", c.n.map(|n| n.to_string())),
        ("preset", c.preset.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    // per-scale grids of the defaults no longer apply once the scales change
    if cfg.grids == default_grids && cfg.grids.len() != cfg.lambdas.len() {
        cfg.grids.clear();
    }
    if let Some(p) = &c.csv {
        cfg.csv = Some(p.clone());
    }
    if let Some(p) = &c.json {
        cfg.json = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(name: &str, cfg: &RunConfig) -> bubbleloja::Result<Report> {
    match name {
        "expansion" => harness::run_expansion(cfg),
        "norms" => harness::run_norms(cfg),
        "probe" => harness::run_probe(cfg).map(|r| r.0),
        "spectrum" => harness::run_spectrum(cfg).map(|r| r.0),
        "exponents" => harness::run_exponents(cfg),
        "wente" => harness::run_wente(cfg),
        "flow" => harness::run_flow(cfg).map(|r| r.0),
        "greencheck" => harness::run_greencheck(cfg),
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

fn headline(name: &str, rep: &Report) {
    let col = |c: &str| rep.table.column(c);
    match name {
        "exponents" => {
            let exact = col("exact").expect("column");
            let qty = col("quantity").expect("column");
            let pick = |q: &str| {
                rep.table
                    .rows
                    .iter()
                    .filter(|r| r[qty].render() == q)
                    .map(|r| r[exact].render())
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            if rep.table.rows.iter().any(|r| r[qty].render() == "alpha") {
                println!("alpha = ({})  beta = ({})", pick("alpha"), pick("beta"));
            } else {
                println!("eta = ({})", pick("eta"));
            }
        }
        "greencheck" => {
            let j = col("script_J").expect("column");
            let b = col("bergman_mixed").expect("column");
            if let Some(r) = rep.table.rows.first() {
                println!(
                    "script_J = {}  bergman_mixed = {}",
                    r[j].render(),
                    r[b].render()
                );
            }
        }
        _ => {}
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Expansion(c) => ("expansion", c),
        Command::Norms(c) => ("norms", c),
        Command::Probe(c) => ("probe", c),
        Command::Spectrum(c) => ("spectrum", c),
        Command::Exponents(c) => ("exponents", c),
        Command::Wente(c) => ("wente", c),
        Command::Flow(c) => ("flow", c),
        Command::Greencheck(c) => ("greencheck", c),
    };
    let cfg = match build_config(name, common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let rep = match run(name, &cfg) {
        Ok(rep) => rep,
        Err(e) => {
            eprintln!("{name} failed: {e}");
            return ExitCode::from(1);
        }
    };
    headline(name, &rep);
    for c in &rep.checks {
        println!(
            "{} {}: {:.6e} (bound {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.check,
            c.value,
            c.bound
        );
    }
    if let Some(path) = &cfg.csv {
        if let Err(e) = write_file(path, &rep.table.to_csv()) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if let Some(path) = &cfg.json {
        let summary = Summary {
            command: name,
            config_echo: cfg.echo(),
            results: &rep.checks,
            fitted: &rep.fitted,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
            git_describe: git_describe(),
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
        if let Err(e) = write_file(path, &(text + "\n")) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if rep.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
