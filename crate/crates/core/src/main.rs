use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use cnls_lab::experiment::commands::{self, to_json};
use cnls_lab::experiment::{output_root, Ini, RunConfig, EXIT_CHECK, EXIT_USAGE};
use cnls_lab::{LabError, RadialGrid, Result};

/// Radial NLS lab: ground state checks, minimization, evolution and scans.
///
/// Exit codes: 0 pass, 2 check failure, 3 usage or configuration error,
/// 4 numeric failure. Run directories go under $CNLS_LAB_OUT (default
/// ./cnls-out) unless --out is given.
#[derive(Debug, Parser)]
#[command(name = "cnls-lab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Threshold references and identity checks.
    Verify {
        #[arg(long, default_value_t = 200.0)]
        r_max: f64,
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long)]
        json: bool,
    },
    /// Minimize the Sobolev quotient from the configured seed.
    Minimize(RunArgs),
    /// Evolve the configured initial data with diagnostics.
    Evolve(RunArgs),
    /// Classify (and optionally evolve) a grid of amplitudes and scales.
    Scan {
        #[command(flatten)]
        run: RunArgs,
        /// Points evaluated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Keep rows already in the table and compute only the rest.
        #[arg(long)]
        resume: bool,
    },
    /// Interaction Morawetz quantities of a snapshot file or run directory.
    Morawetz {
        input: PathBuf,
        #[arg(long, default_value_t = 8.0)]
        r0: f64,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 256)]
        n_theta: usize,
        /// Cap on the kernel sub-grid cell count.
        #[arg(long, default_value_t = 256)]
        cells: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Starting configuration (scattering, blowup, blowup-a1.2, minimize, scan).
    #[arg(long)]
    preset: Option<String>,
    /// `key = value` file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory (overrides the output root).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn load_config(args: &RunArgs, default_preset: &str) -> Result<RunConfig> {
    let base = RunConfig::preset(args.preset.as_deref().unwrap_or(default_preset))?;
    let cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| LabError::InvalidArgument(format!("{}: {e}", p.display())))?;
            base.apply(&Ini::parse(&text)?)?
        }
        None => base,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_dir(out: &Option<PathBuf>, configured_root: Option<&Path>, name: &str) -> PathBuf {
    out.clone()
        .unwrap_or_else(|| output_root(configured_root).join(name))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Verify { r_max, n, json } => {
            let r = commands::run_verify(RadialGrid::new(r_max, n)?)?;
            if json {
                print!("{}", to_json(&r));
            } else {
                println!("grid r_max={} n={}", r.r_max, r.n);
                println!(
                    "grad_w_sq={:.17e} (exact {:.17e})",
                    r.refs.grad_w_sq, r.refs.grad_w_sq_exact
                );
                println!("m={:.17e} (exact {:.17e})", r.refs.m, r.refs.m_exact);
                for c in &r.checks {
                    let tag = if c.pass { "PASS" } else { "FAIL" };
                    println!("{tag} {} = {:.6e} (limit {:e})", c.name, c.value, c.limit);
                }
            }
            Ok(r.exit_code())
        }
        Cmd::Minimize(args) => {
            let cfg = load_config(&args, "minimize")?;
            let dir = run_dir(&args.out, cfg.out_root.as_deref(), &cfg.name);
            info!("minimize -> {}", dir.display());
            let r = commands::cmd_minimize(&cfg, &dir)?;
            if args.json {
                print!("{}", to_json(&r));
            } else {
                println!(
                    "value={:.17e} m={:.17e} rel={:.3e} iterations={} converged={} stop={:?}",
                    r.value, r.m_numeric, r.rel_to_m, r.iterations, r.converged, r.stop
                );
                if !r.converged {
                    println!("not converged: stopping tolerances were not met (see minimize.csv)");
                }
                println!("wrote {}", dir.display());
            }
            Ok(r.exit_code())
        }
        Cmd::Evolve(args) => {
            let cfg = load_config(&args, "scattering")?;
            let dir = run_dir(&args.out, cfg.out_root.as_deref(), &cfg.name);
            info!("evolve -> {}", dir.display());
            let r = commands::cmd_evolve(&cfg, &dir)?;
            if args.json {
                print!("{}", to_json(&r));
            } else {
                let td = r
                    .outcome
                    .t_detect()
                    .map_or(String::new(), |t| format!(" t_detect={t:.6e}"));
                println!(
                    "{}{td} t_final={:.6e} records={}",
                    r.outcome.name(),
                    r.t_final,
                    r.records
                );
                println!(
                    "label {} -> {}; mass drift {:.3e}; energy drift {:.3e}; L4 ratio {:.4}",
                    r.initial_label, r.final_label, r.mass_drift, r.energy_drift, r.l4_ratio
                );
                println!("wrote {}", dir.display());
            }
            Ok(r.exit_code())
        }
        Cmd::Scan { run, jobs, resume } => {
            let cfg = load_config(&run, "scan")?;
            let dir = run_dir(&run.out, cfg.out_root.as_deref(), &cfg.name);
            let r = commands::cmd_scan(&cfg, &dir, jobs, resume)?;
            if run.json {
                print!("{}", to_json(&r));
            } else {
                println!(
                    "{} points, {} resumed, {} written, {} with errors -> {}",
                    r.points,
                    r.resumed,
                    r.written,
                    r.failed,
                    r.table.display()
                );
            }
            Ok(if r.failed > 0 { EXIT_CHECK } else { 0 })
        }
        Cmd::Morawetz {
            input,
            r0,
            count,
            n_theta,
            cells,
            out,
            json,
        } => {
            let dir = run_dir(&out, None, "morawetz");
            let r = commands::cmd_morawetz(&input, r0, count, n_theta, cells, &dir)?;
            if json {
                print!("{}", to_json(&r));
            } else {
                for (rad, s) in r.radii.iter().zip(&r.sup_scaled) {
                    println!("R={rad:.6} sup|M_R|/R^4={s:.6e}");
                }
                println!(
                    "run constant {:.6e}: {}",
                    r.run_constant,
                    if r.bounded { "bounded" } else { "EXCEEDED" }
                );
                println!("wrote {}", dir.display());
            }
            Ok(if r.bounded { 0 } else { EXIT_CHECK })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code_for(&e) as u8)
        }
    }
}
