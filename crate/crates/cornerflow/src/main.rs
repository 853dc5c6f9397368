use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cornerflow::config::apply_overrides;
use cornerflow::run::{manifest_path, write_failure_manifest};
use cornerflow::{parse_config, run, RunError};

#[derive(Parser)]
#[command(name = "cornerflow", version, about = "Euler flow past a row of small obstacles: corrector rates, cell norms and blob simulations")]
struct Cli {
    /// Worker threads for sweeps and per-hole quadrature.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit |T'| near a corner of the reference obstacle.
    ConformalProbe {
        #[arg(long)]
        shape: Option<String>,
        #[arg(long)]
        corner: Option<usize>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Per-hole norms of the corrector cell terms.
    Cell {
        #[command(flatten)]
        scale: Scale,
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Permeability residual against its bound over a sweep.
    Rates {
        #[arg(long)]
        shape: Option<String>,
        #[arg(long)]
        field: Option<String>,
        /// `default` or a file of `eps d_eps` lines.
        #[arg(long)]
        sweep: Option<String>,
        /// d_eps rule for the default sweep: eps, eps^2, 0.5*eps^3, exp.
        #[arg(long)]
        d_rule: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Whole-plane and perforated blob flows from the same seeds.
    Simulate {
        #[command(flatten)]
        scale: Scale,
        #[arg(long)]
        t_end: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Args)]
struct Scale {
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    deps: Option<String>,
}

fn overrides(cli: &Cli) -> Vec<(&'static str, String)> {
    let mut o: Vec<(&'static str, Option<String>)> = Vec::new();
    match &cli.command {
        None => {}
        Some(Cmd::ConformalProbe { shape, corner, out }) => {
            o.push(("command", Some("conformal-probe".into())));
            o.extend([("shape", shape.clone()), ("corner", corner.map(|c| c.to_string())), ("out", out.clone())]);
        }
        Some(Cmd::Cell { scale, field, out }) => {
            o.push(("command", Some("cell".into())));
            push_scale(&mut o, scale);
            o.extend([("field", field.clone()), ("out", out.clone())]);
        }
        Some(Cmd::Rates { shape, field, sweep, d_rule, out }) => {
            o.push(("command", Some("rates".into())));
            o.extend([
                ("shape", shape.clone()),
                ("field", field.clone()),
                ("sweep", sweep.clone()),
                ("d_rule", d_rule.clone()),
                ("out", out.clone()),
            ]);
        }
        Some(Cmd::Simulate { scale, t_end, dt, field, out }) => {
            o.push(("command", Some("simulate".into())));
            push_scale(&mut o, scale);
            o.extend([("t_end", t_end.clone()), ("dt", dt.clone()), ("field", field.clone()), ("out", out.clone())]);
        }
    }
    o.push(("threads", cli.threads.map(|t| t.to_string())));
    o.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
}

fn push_scale(o: &mut Vec<(&'static str, Option<String>)>, s: &Scale) {
    o.extend([("shape", s.shape.clone()), ("eps", s.eps.clone()), ("deps", s.deps.clone())]);
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error ({}): {e}", e.category());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let base = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(source) => return fail(&RunError::Io { path: p.display().to_string(), source }),
        },
        None => String::new(),
    };
    let text = apply_overrides(&base, &overrides(&cli));
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errs) => {
            let e = RunError::Config(errs);
            // best effort: the output directory may be the thing that is wrong
            let out = text
                .lines()
                .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == "out").map(|(_, v)| PathBuf::from(v.trim())))
                .unwrap_or_else(|| PathBuf::from("out.csv"));
            let _ = write_failure_manifest(&manifest_path(&out), &text, &e);
            return fail(&e);
        }
    };
    match run(&cfg) {
        Ok(r) => {
            println!("wrote {} ({} rows) and {}", cfg.out.display(), r.rows, manifest_path(&cfg.out).display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
