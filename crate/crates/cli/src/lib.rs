//! Command-line driver: single runs, λ-sweeps, threshold tables, the
//! kernel-constant estimate and the theory property suite.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 blow-up halt,
//! 3 property failure.

pub mod config;
pub mod manifest;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use config::Resolved;
use kslimit::experiments::{estimate_c0, lambda_sweep};
use kslimit::io::{fmt_f64, write_diagnostics_csv, write_snapshot, write_summary_csv, write_sweep_csv};
use kslimit::theory::verify::{run_suite, Formulas, VerifyConfig, DEFAULT_SEED};
use kslimit::theory::{
    condition_ass_pp_exponent_k, f_poly, threshold_chi0_pe, threshold_chi0_pp, ChiParams, ConditionParams,
};
use kslimit::{dynamics, Error};
use manifest::Manifest;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_BLOWUP: u8 = 2;
pub const EXIT_PROPERTY: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "kslimit", version, about = "Keller-Segel fast signal diffusion laboratory", after_help = config::DEFAULTS_HELP)]
pub struct Cli {
    /// TOML configuration file; omitted keys take the defaults listed below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for run and sweep artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for the verify suite [default: 0x6b736c696d6974]. Other commands are deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Machine-readable CSV on stdout for thresholds, verify and estimate-c0.
    #[arg(long, global = true)]
    pub csv: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one configuration; writes diagnostics.csv, snapshot_NNN.txt and manifest.txt.
    Run,
    /// Compare every sweep.lambdas run against the lambda = 0 reference; writes sweep.csv,
    /// summary.csv and manifest.txt.
    Sweep,
    /// Tabulate the parabolic-parabolic and parabolic-elliptic chi0 thresholds.
    Thresholds {
        /// Spatial dimension n.
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// Comma-separated lambda values.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5, 1.0, 2.0])]
        lambdas: Vec<f64>,
    },
    /// Run the randomized property suite for the closed-form theory.
    Verify {
        #[arg(long, hide = true)]
        mutate: Option<Mutation>,
    },
    /// Lower bound c0 for the Neumann kernel of w_t = Δw - w at t*.
    #[command(name = "estimate-c0")]
    EstimateC0 {
        #[arg(long, default_value_t = 1.0)]
        t_star: f64,
        #[arg(long, default_value_t = 9)]
        probes: usize,
        /// Comma-separated cell counts; overrides grid.cells (and grid.dim).
        #[arg(long, value_delimiter = ',')]
        cells: Option<Vec<usize>>,
        /// Comma-separated extents; overrides grid.extents.
        #[arg(long, value_delimiter = ',')]
        extents: Option<Vec<f64>>,
    },
}

/// Deliberately corrupted formulas for checking that the suite notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mutation {
    /// f_p(λ) without its constant term.
    FPoly,
    /// The weighted-energy condition with exponent k in place of k - 1.
    ConditionExponentK,
}

fn f_poly_no_constant(c: &ConditionParams) -> f64 {
    f_poly(c) - c.p
}

impl Mutation {
    fn formulas(self) -> Formulas {
        let mut f = Formulas::default();
        match self {
            Mutation::FPoly => f.f_poly = f_poly_no_constant,
            Mutation::ConditionExponentK => f.condition = condition_ass_pp_exponent_k,
        }
        f
    }
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_OK
            }
        }
    }
}

pub fn execute(cli: &Cli) -> u8 {
    let result = match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Sweep => cmd_sweep(cli),
        Command::Thresholds { n, k, a, eta, lambdas } => cmd_thresholds(cli, *n, *k, *a, *eta, lambdas),
        Command::Verify { mutate } => cmd_verify(cli, *mutate),
        Command::EstimateC0 {
            t_star,
            probes,
            cells,
            extents,
        } => cmd_estimate_c0(cli, *t_star, *probes, cells.as_deref(), extents.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn now() -> String {
    chrono::Local::now().to_rfc3339()
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let probe = dir.join(".kslimit-write-test");
    File::create(&probe).with_context(|| format!("output directory {} is not writable", dir.display()))?;
    std::fs::remove_file(&probe).ok();
    Ok(())
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(BufWriter<File>) -> kslimit::Result<()>) -> Result<()> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    f(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

/// Runs `body` and writes `manifest.txt` whatever its outcome. `body` fills
/// the outputs inventory and results and returns the exit code.
fn with_manifest(
    cli: &Cli,
    command: &str,
    resolved: &Resolved,
    body: impl FnOnce(&mut Vec<(String, String)>, &mut Manifest) -> Result<u8>,
) -> Result<u8> {
    prepare_out(&cli.out)?;
    let started = now();
    let mut outputs = Vec::new();
    let mut results = Manifest::new();
    let outcome = body(&mut outputs, &mut results);
    let mut m = Manifest::new();
    m.value(0, "version", env!("CARGO_PKG_VERSION"));
    m.value(0, "command", command);
    m.value(0, "started", started);
    m.value(0, "finished", now());
    let status = match &outcome {
        Ok(code) => *code,
        Err(_) => EXIT_ERROR,
    };
    m.value(0, "exit_status", i64::from(status));
    if let Err(e) = &outcome {
        m.value(0, "error", format!("{e:#}"));
    }
    m.config(&resolved.to_table());
    m.section(0, "outputs");
    for (k, v) in &outputs {
        m.value(1, k, v.as_str());
    }
    m.section(0, "results");
    m.nest(&results);
    std::fs::write(cli.out.join("manifest.txt"), m.render()).context("writing manifest.txt")?;
    outcome
}

fn cmd_run(cli: &Cli) -> Result<u8> {
    let resolved = config::resolve(&config::load(cli.config.as_deref())?)?;
    let sim = &resolved.sim;
    let init = dynamics::init_state(sim).map_err(|e| anyhow::anyhow!("{e}"))?;
    let stab = dynamics::stability_dt(sim, &init);
    if sim.dt > stab {
        eprintln!(
            "warning: dt = {} exceeds the advective stability suggestion {stab:e}",
            sim.dt
        );
    }
    with_manifest(cli, "run", &resolved, |outputs, results| {
        results.value(0, "stability_dt", stab);
        if let Some(c0) = resolved.eta_c0 {
            results.value(0, "eta_c0", c0);
        }
        let out = dynamics::run(sim)?;
        write_file(&cli.out, "diagnostics.csv", |w| {
            write_diagnostics_csv(w, &out.diagnostics)
        })?;
        outputs.push(("diagnostics".into(), "diagnostics.csv".into()));
        for (i, s) in out.snapshots.iter().enumerate() {
            let name = format!("snapshot_{i:03}.txt");
            write_file(&cli.out, &name, |w| write_snapshot(w, s))?;
            outputs.push((format!("snapshot_{i:03}"), name));
        }
        let last = out.diagnostics.last().expect("at least one record");
        results.value(0, "final_t", out.final_state.t);
        results.value(0, "steps", out.final_state.step as i64);
        results.value(0, "mass_drift", out.mass_drift());
        results.value(0, "final_max_u", last.max_u);
        results.value(0, "final_min_v", last.min_v);
        results.value(0, "blowup", out.blowup.is_some());
        println!(
            "run: t = {} after {} steps, mass drift {:e}, max u {}, min v {}",
            out.final_state.t,
            out.final_state.step,
            out.mass_drift(),
            last.max_u,
            last.min_v
        );
        match out.blowup {
            Some(b) => {
                results.value(0, "blowup_time", b.t);
                results.value(0, "blowup_max_u", b.max_u);
                results.value(0, "blowup_ceiling", b.ceiling);
                println!(
                    "blow-up: max u = {} passed the ceiling {} at t = {}",
                    b.max_u, b.ceiling, b.t
                );
                Ok(EXIT_BLOWUP)
            }
            None => Ok(EXIT_OK),
        }
    })
}

fn cmd_sweep(cli: &Cli) -> Result<u8> {
    let resolved = config::resolve(&config::load(cli.config.as_deref())?)?;
    with_manifest(cli, "sweep", &resolved, |outputs, results| {
        if let Some(c0) = resolved.eta_c0 {
            results.value(0, "eta_c0", c0);
        }
        let res = match lambda_sweep(&resolved.sweep) {
            Ok(r) => r,
            Err(Error::SweepAborted {
                lambda,
                reason,
                blowup: true,
            }) => {
                results.value(0, "blowup", true);
                results.value(0, "blowup_lambda", lambda);
                results.value(0, "blowup_reason", reason.as_str());
                println!("sweep: blow-up at lambda = {lambda}: {reason}");
                return Ok(EXIT_BLOWUP);
            }
            Err(e) => return Err(e.into()),
        };
        write_file(&cli.out, "sweep.csv", |w| write_sweep_csv(w, &res))?;
        outputs.push(("sweep".into(), "sweep.csv".into()));
        write_file(&cli.out, "summary.csv", |w| write_summary_csv(w, &res))?;
        outputs.push(("summary".into(), "summary.csv".into()));

        let s = &res.summary;
        results.value(0, "verdict", res.verdict.as_str());
        results.value(0, "norm", resolved.sweep.norms[0].as_str());
        results.value(0, "lambdas", s.iter().map(|x| x.lambda).collect::<Vec<_>>());
        results.value(0, "e_u", s.iter().map(|x| x.e_u).collect::<Vec<_>>());
        results.value(0, "e_v", s.iter().map(|x| x.e_v).collect::<Vec<_>>());
        let (first, last) = (&s[0], &s[s.len() - 1]);
        results.value(0, "e_u_ratio_last_first", last.e_u / first.e_u);
        results.value(0, "e_v_ratio_last_first", last.e_v / first.e_v);
        let rates = res.empirical_rates();
        results.value(0, "rates_u", rates.iter().map(|r| r.0).collect::<Vec<_>>());
        results.value(0, "rates_v", rates.iter().map(|r| r.1).collect::<Vec<_>>());
        results.value(0, "boundedness_ratio", res.sup_bound_ratio());
        results.value(0, "reference_runtime_seconds", res.reference_runtime_seconds);

        println!("sweep: verdict {}", res.verdict.as_str());
        for x in s {
            println!(
                "  lambda {:e}: E_u {:e}, E_v {:e} ({:.2}s)",
                x.lambda, x.e_u, x.e_v, x.runtime_seconds
            );
        }
        Ok(EXIT_OK)
    })
}

/// Renames a core configuration key such as `chi.k` to the flag `--k`.
fn flag_err(e: Error) -> anyhow::Error {
    match e {
        Error::Config { key, message } => {
            let flag = key.rsplit('.').next().unwrap_or(&key).to_string();
            anyhow::anyhow!("--{flag}: {message}")
        }
        other => anyhow::anyhow!("{other}"),
    }
}

fn cmd_thresholds(cli: &Cli, n: u32, k: f64, a: f64, eta: f64, lambdas: &[f64]) -> Result<u8> {
    if n == 0 {
        bail!("--n: must be at least 1");
    }
    if lambdas.is_empty() {
        bail!("--lambdas: must not be empty");
    }
    let chi = ChiParams::new(1.0, a, k).map_err(flag_err)?;
    let pe = threshold_chi0_pe(n, &chi, eta).map_err(flag_err)?;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let pp = threshold_chi0_pp(n, l, &chi, eta).map_err(|e| anyhow::anyhow!("--lambdas: {e}"))?;
        rows.push((l, pp.value, pe.value, pp.value.to_bits() == pe.value.to_bits()));
    }
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    if cli.csv {
        writeln!(w, "lambda,threshold_pp,threshold_pe,pp_eq_pe")?;
        for (l, pp, pe, eq) in &rows {
            writeln!(w, "{},{},{},{eq}", fmt_f64(*l), fmt_f64(*pp), fmt_f64(*pe))?;
        }
    } else {
        writeln!(w, "n = {n}, k = {k}, a = {a}, eta = {eta}")?;
        writeln!(
            w,
            "{:>12}  {:>20}  {:>20}  pp_eq_pe",
            "lambda", "threshold_pp", "threshold_pe"
        )?;
        for (l, pp, pe, eq) in &rows {
            writeln!(w, "{l:>12}  {pp:>20}  {pe:>20}  {eq}")?;
        }
        if pe.vacuous {
            writeln!(
                w,
                "note: a + eta = 0, so every threshold is 0 and no chi0 > 0 qualifies"
            )?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(cli: &Cli, mutate: Option<Mutation>) -> Result<u8> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let formulas = mutate.map_or_else(Formulas::default, Mutation::formulas);
    let report = run_suite(&VerifyConfig::with_seed(seed), &formulas);
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    if cli.csv {
        writeln!(w, "property,passed,checks,counterexample")?;
        for o in &report.outcomes {
            let ce = o.counterexample.as_deref().unwrap_or("").replace('"', "\"\"");
            writeln!(w, "{},{},{},\"{ce}\"", o.name, o.passed, o.checked)?;
        }
    } else {
        writeln!(w, "verify: seed {seed:#x}")?;
        for o in &report.outcomes {
            match &o.counterexample {
                None => writeln!(w, "PASS {} ({} checks)", o.name, o.checked)?,
                Some(c) => writeln!(w, "FAIL {} after {} checks: {c}", o.name, o.checked)?,
            }
        }
        for note in &report.notes {
            writeln!(w, "note: {note}")?;
        }
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_PROPERTY })
}

fn cmd_estimate_c0(
    cli: &Cli,
    t_star: f64,
    probes: usize,
    cells: Option<&[usize]>,
    extents: Option<&[f64]>,
) -> Result<u8> {
    let mut file = config::load(cli.config.as_deref())?;
    if let Some(c) = cells {
        file.grid.dim = Some(c.len());
        file.grid.cells = Some(c.to_vec());
    }
    if let Some(e) = extents {
        file.grid.extents = Some(e.to_vec());
    }
    let grid = config::grid_of(&file)?;
    let est = estimate_c0(&grid, t_star, probes).map_err(|e| anyhow::anyhow!("{e}"))?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    if cli.csv {
        writeln!(w, "probe,cell,min_kernel,c0")?;
        for (i, (cell, m)) in est.probes.iter().zip(&est.minima).enumerate() {
            writeln!(w, "{i},{cell},{},{}", fmt_f64(*m), fmt_f64(est.c0))?;
        }
    } else {
        let counts: Vec<String> = grid.cell_counts().iter().map(|n| n.to_string()).collect();
        writeln!(
            w,
            "grid {} cells, t* = {t_star}, {} implicit steps",
            counts.join("x"),
            est.steps
        )?;
        for (i, (cell, m)) in est.probes.iter().zip(&est.minima).enumerate() {
            let x = grid.center(*cell);
            let at = if grid.dim() == 1 {
                format!("{}", x[0])
            } else {
                format!("({}, {})", x[0], x[1])
            };
            writeln!(w, "probe {i}: cell {cell} at {at}, min kernel {m:e}")?;
        }
        writeln!(w, "c0 = {:e}", est.c0)?;
    }
    Ok(EXIT_OK)
}
