use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use geoflow_cli::config::{merge, parse_n_list};
use geoflow_cli::{run, CliError, Experiment};

#[derive(Parser, Debug)]
#[command(
    name = "geoflow",
    version,
    about = "Run a geoflow verification experiment and write its CSV table"
)]
struct Args {
    experiment: Experiment,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifold: Option<String>,
    /// Vector field name; repeat for a pair.
    #[arg(long = "field")]
    fields: Vec<String>,
    #[arg(long)]
    connection: Option<String>,
    #[arg(long)]
    section: Option<String>,
    #[arg(long)]
    path: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// Comma-separated, strictly increasing.
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long)]
    steps_per_unit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded cases.
    #[arg(long)]
    cases: Option<usize>,
    /// Start point as comma-separated coordinates.
    #[arg(long)]
    point: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Args {
    fn flag_entries(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut e: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                e.push((k.to_string(), v));
            }
        };
        put("manifold", self.manifold.clone());
        put("connection", self.connection.clone());
        put("section", self.section.clone());
        put("path", self.path.clone());
        put("t", self.t.map(|v| v.to_string()));
        put("h", self.h.map(|v| v.to_string()));
        if let Some(ns) = &self.n_list {
            parse_n_list(ns)?;
        }
        put("n_list", self.n_list.clone());
        put("steps_per_unit", self.steps_per_unit.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("cases", self.cases.map(|v| v.to_string()));
        put("point", self.point.clone());
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        for f in &self.fields {
            e.push(("field".into(), f.clone()));
        }
        Ok(e)
    }
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let cfg = merge(args.experiment, args.config.as_deref(), &args.flag_entries()?)?;
    let table = run(&cfg)?;
    let csv = table.to_csv()?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &csv)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&csv)?;
        }
    }
    eprintln!("{}", table.summary());
    Ok(table.passed())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("geoflow: {e}");
            ExitCode::from(2)
        }
    }
}
