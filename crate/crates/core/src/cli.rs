//! Command-line front end of the `hnw` binary.
//!
//! Every command writes either JSON or CSV (header row, comma separator,
//! 17 significant digits, LF line endings) to stdout or `--out`. Given the
//! same arguments and seed, the output is reproduced byte for byte.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gramian::gramians_with;
use crate::hankel::{self, HankelSpectrum};
use crate::linalg::{Matrix, Tolerances};
use crate::parametric::{self, GridSpec};
use crate::reduction::{self, Method};
use crate::system::{self, LtiSystem, Model, ParametricLtiSystem};
use crate::widths::{self, Side, SubspaceCoords};

#[derive(Debug, Parser)]
#[command(name = "hnw", version, about = "Hankel singular values, n-widths and Hankel-norm reduction")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// JSON file overriding numerical tolerances (missing fields keep their defaults).
    #[arg(long, global = true)]
    pub tolerances: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hankel singular values.
    Hsv {
        #[arg(long)]
        system: PathBuf,
    },
    /// Kolmogorov n-width of the Hankel image of the unit input ball.
    Nwidth(WidthArgs),
    /// Active input subspace of dimension n.
    Active(WidthArgs),
    /// Reduced model by balanced truncation or optimal Hankel-norm approximation.
    Reduce {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        order: usize,
        /// bt | ohna
        #[arg(long, default_value = "ohna")]
        method: Method,
    },
    /// Hankel singular values over a parameter grid.
    Sweep {
        #[arg(long)]
        parametric: PathBuf,
        /// `21`, `11x5` or `points:p1;p2;…`
        #[arg(long, default_value = "21")]
        grid: GridSpec,
        /// Report the lower bound `max_p σ_{n+1}(p)` for this n.
        #[arg(long, default_value_t = 1)]
        order: usize,
    },
    /// Compare heuristic global bases with the parametric lower bound.
    GlobalBasis {
        #[arg(long)]
        parametric: PathBuf,
        #[arg(long, default_value = "21")]
        grid: GridSpec,
        #[arg(long)]
        order: usize,
        /// Number of randomly weighted pooled bases.
        #[arg(long, default_value_t = parametric::DEFAULT_BASIS_PROBES)]
        probes: usize,
    },
    /// Write a benchmark model.
    Generate {
        /// random_stable | rc_ladder | heat1d | diag
        #[arg(long)]
        model: String,
        /// State dimension (implied by --lambda for diag).
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, default_value_t = 1)]
        inputs: usize,
        #[arg(long, default_value_t = 1)]
        outputs: usize,
        #[arg(long, default_value_t = 0.5)]
        margin: f64,
        /// Eigenvalues for the diag model.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c: Vec<f64>,
    },
    /// Write the seeded random benchmark corpus into a directory.
    Corpus {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Run all invariant checks on one system or on every `*.json` in a directory.
    Verify {
        #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
        system: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Write the report here (defaults to --out or stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Random subspaces per lower-bound check.
        #[arg(long, default_value_t = 2000)]
        probes: usize,
    },
}

#[derive(Debug, Args)]
pub struct WidthArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub order: usize,
    /// Random subspaces probed for the empirical lower bound.
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
}

/// Result of a command: the text to emit and whether every check passed.
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, passed: true }
    }
}

/// Cap rayon's pool at `HW_THREADS` threads (`0` or unset: automatic).
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HW_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::BadParameter(format!("HW_THREADS must be a non-negative integer, got '{raw}'")))?;
    if threads > 0 {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

/// Run a parsed command line and write its output.
pub fn run(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    let outcome = execute(cli)?;
    let target = match &cli.command {
        Command::Verify { report: Some(p), .. } => Some(p.as_path()),
        _ => cli.common.out.as_deref(),
    };
    match target {
        Some(path) => std::fs::write(path, outcome.text.as_bytes())?,
        None => std::io::stdout().write_all(outcome.text.as_bytes())?,
    }
    Ok(outcome.passed)
}

fn tolerances(common: &Common) -> Result<Tolerances> {
    match &common.tolerances {
        None => Ok(Tolerances::default()),
        Some(path) => Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?),
    }
}

/// Execute a command and return its formatted output without writing it.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let common = &cli.common;
    let tol = tolerances(common)?;
    let format = common.format;
    match &cli.command {
        Command::Hsv { system } => {
            let spec = HankelSpectrum::compute_with(&LtiSystem::load(system)?, &tol)?;
            Ok(Outcome::ok(match format {
                Format::Json => to_json(&json!({ "sigma": spec.sigma })),
                Format::Csv => {
                    let rows = spec.sigma.iter().enumerate().map(|(i, &s)| vec![(i + 1).to_string(), num(s)]);
                    csv(&["i", "sigma"], rows)
                }
            }))
        }
        Command::Nwidth(args) | Command::Active(args) => {
            let side = if matches!(cli.command, Command::Nwidth(_)) { Side::Output } else { Side::Input };
            let spec = HankelSpectrum::compute_with(&LtiSystem::load(&args.system)?, &tol)?;
            let report = match side {
                Side::Output => widths::nwidth(&spec, args.order, args.probes, common.seed)?,
                Side::Input => widths::active_subspace(&spec, args.order, args.probes, common.seed)?,
            };
            let text = match format {
                Format::Json => to_json(&report),
                Format::Csv => csv(
                    &["side", "n", "error", "reference", "gap", "empirical_min", "probes", "lower_bound_holds"],
                    [vec![
                        format!("{:?}", report.side).to_lowercase(),
                        report.n.to_string(),
                        num(report.error),
                        num(report.reference),
                        num(report.gap),
                        report.empirical_min.map(num).unwrap_or_default(),
                        report.probes.to_string(),
                        report.lower_bound_holds.to_string(),
                    ]],
                ),
            };
            Ok(Outcome { text, passed: report.lower_bound_holds })
        }
        Command::Reduce { system, order, method } => {
            let sys = LtiSystem::load(system)?;
            let red = match method {
                Method::BalancedTruncation => reduction::balanced_truncation_with(&sys, *order, &tol)?,
                Method::OptimalHankel => reduction::optimal_hankel_with(&sys, *order, &tol)?,
            };
            let spec = HankelSpectrum::compute_with(&sys, &tol)?;
            let sigma_next = spec.sigma_after(*order);
            let method_name = match method {
                Method::BalancedTruncation => "balanced_truncation",
                Method::OptimalHankel => "optimal_hankel",
            };
            Ok(Outcome::ok(match format {
                Format::Json => to_json(&json!({
                    "method": method_name,
                    "requested_order": red.requested_order,
                    "order": red.order(),
                    "hankel_error": red.hankel_error,
                    "sigma_next": sigma_next,
                    "system": red.system.to_json(),
                })),
                Format::Csv => csv(
                    &["method", "requested_order", "order", "hankel_error", "sigma_next"],
                    [vec![
                        method_name.to_string(),
                        red.requested_order.to_string(),
                        red.order().to_string(),
                        num(red.hankel_error),
                        num(sigma_next),
                    ]],
                ),
            }))
        }
        Command::Sweep { parametric: path, grid, order } => {
            let psys = ParametricLtiSystem::load(path)?;
            let res = parametric::sweep_with(&psys, grid, &tol)?;
            let bound = res.lower_bound(*order);
            Ok(Outcome::ok(match format {
                Format::Json => {
                    let continuity = (1..=res.states())
                        .map(|i| parametric::continuity_check(&res, i))
                        .collect::<Result<Vec<_>>>()?;
                    to_json(&json!({
                        "sweep": res,
                        "lower_bound": bound,
                        "continuity": continuity,
                    }))
                }
                Format::Csv => {
                    let mut header: Vec<String> = res.parameters.clone();
                    header.extend((1..=res.states()).map(|i| format!("sigma_{i}")));
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    let rows = res.grid.iter().zip(&res.sigma_table).filter_map(|(p, s)| {
                        let s = s.as_ref()?;
                        Some(p.iter().chain(s).map(|&x| num(x)).collect::<Vec<_>>())
                    });
                    let mut text = csv(&header, rows);
                    let _ = writeln!(
                        text,
                        "# lower_bound n={} value={} index={}",
                        bound.n,
                        num(bound.value),
                        bound.index
                    );
                    text
                }
            }))
        }
        Command::GlobalBasis { parametric: path, grid, order, probes } => {
            let psys = ParametricLtiSystem::load(path)?;
            let rep = parametric::global_basis_gap_with(&psys, *order, grid, *probes, common.seed, &tol)?;
            let text = match format {
                Format::Json => to_json(&rep),
                Format::Csv => {
                    let rows = rep.candidates.iter().map(|c| {
                        vec![
                            c.name.clone(),
                            c.dimension.to_string(),
                            num(c.achieved),
                            num(rep.lower_bound.value),
                            c.worst_index.to_string(),
                            c.holds.to_string(),
                        ]
                    });
                    csv(&["basis", "dimension", "achieved", "lower_bound", "worst_index", "holds"], rows)
                }
            };
            Ok(Outcome { text, passed: rep.holds })
        }
        Command::Generate { model, order, inputs, outputs, margin, lambda, b, c } => {
            let model = match model.as_str() {
                "random_stable" => Model::RandomStable { inputs: *inputs, outputs: *outputs, margin: *margin },
                "rc_ladder" => Model::RcLadder,
                "heat1d" => Model::Heat1d,
                "diag" => Model::Diag { lambda: lambda.clone(), b: b.clone(), c: c.clone() },
                other => return Err(Error::BadParameter(format!("unknown model '{other}'"))),
            };
            let order = match (&model, order) {
                (_, Some(n)) => *n,
                (Model::Diag { lambda, .. }, None) => lambda.len(),
                _ => return Err(Error::BadParameter("--order is required".into())),
            };
            let generated = system::generate(&model, order, common.seed)?;
            Ok(Outcome::ok(to_json(&generated.to_json())))
        }
        Command::Corpus { count, dir } => {
            std::fs::create_dir_all(dir)?;
            let systems = system::corpus(*count, common.seed)?;
            let mut listing = String::new();
            for (k, sys) in systems.iter().enumerate() {
                let path = dir.join(format!("sys_{k:02}.json"));
                std::fs::write(&path, to_json(&sys.to_json()))?;
                let _ = writeln!(listing, "{}", path.display());
            }
            Ok(Outcome::ok(listing))
        }
        Command::Verify { system, corpus, probes, .. } => {
            let files = match (system, corpus) {
                (Some(f), _) => vec![f.clone()],
                (None, Some(dir)) => corpus_files(dir)?,
                (None, None) => return Err(Error::BadParameter("need --system or --corpus".into())),
            };
            let config = VerifyConfig { probes: *probes, seed: common.seed, tol };
            let mut systems = Vec::with_capacity(files.len());
            for f in &files {
                let name = f.file_name().map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into_owned());
                systems.push(verify_system(&name, &LtiSystem::load(f)?, &config)?);
            }
            let passed = systems.iter().all(|s| s.passed);
            let report = VerifyReport { seed: common.seed, probes: *probes, passed, systems };
            Ok(Outcome { text: to_json(&report), passed })
        }
    }
}

fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::BadParameter(format!("no *.json systems in {}", dir.display())));
    }
    Ok(files)
}

/// Decimal with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv<I: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: I) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Settings shared by all verify checks.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub probes: usize,
    pub seed: u64,
    pub tol: Tolerances,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity (already normalized as described by `limit`).
    pub value: f64,
    pub limit: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemReport {
    pub name: String,
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub sigma: Vec<f64>,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub probes: usize,
    pub passed: bool,
    pub systems: Vec<SystemReport>,
}

fn check(name: &str, value: f64, limit: f64, detail: String) -> Check {
    Check { name: name.into(), passed: value <= limit, value, limit, detail }
}

fn failed(name: &str, err: &Error) -> Check {
    Check { name: name.into(), passed: false, value: f64::NAN, limit: 0.0, detail: err.to_string() }
}

/// Widths checked against random subspaces: `1`, `⌊N/2⌋` and `N − 1`.
pub fn probe_orders(states: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [1, states / 2, states.saturating_sub(1)]
        .into_iter()
        .filter(|&n| n >= 1 && n < states)
        .collect();
    v.dedup();
    v
}

/// Smallest `σ_{n+1}/σ_1` for which the optimal Hankel-norm construction is
/// expected to reach `1e-6` relative accuracy: its error behaves like
/// `ε (σ_1/σ_{n+1})²` relative.
pub fn ohna_resolvable(sigma_next: f64, sigma1: f64) -> bool {
    sigma_next > 0.0 && f64::EPSILON * (sigma1 / sigma_next).powi(2) <= 1e-6
}

/// Every invariant check on a single system. Numerical failures inside a
/// check are recorded as failed checks; failures to analyze the system at all
/// (for example an unstable `A`) are returned as errors.
pub fn verify_system(name: &str, sys: &LtiSystem, cfg: &VerifyConfig) -> Result<SystemReport> {
    let tol = &cfg.tol;
    let spec = HankelSpectrum::compute_with(sys, tol)?;
    let sigma = spec.sigma.clone();
    let s1 = spec.hankel_norm();
    let n_states = sys.states();
    let mut checks = Vec::new();

    // Lyapunov residuals, relative to the size of the equation's terms.
    let g = gramians_with(sys, tol)?;
    let fro = |m: &Matrix| m.norm();
    let rel_p = (&sys.a * &g.p + &g.p * sys.a.transpose() + &sys.b * sys.b.transpose()).norm()
        / (2.0 * fro(&sys.a) * fro(&g.p) + fro(&sys.b).powi(2));
    let rel_q = (sys.a.transpose() * &g.q + &g.q * &sys.a + sys.c.transpose() * &sys.c).norm()
        / (2.0 * fro(&sys.a) * fro(&g.q) + fro(&sys.c).powi(2));
    checks.push(check("lyapunov_residual", rel_p.max(rel_q), 1e-10, String::new()));

    // The leading Schmidt spans attain σ_{n+1} on both sides.
    let mut attain: f64 = 0.0;
    let mut active: f64 = 0.0;
    for n in 0..=n_states {
        let out = widths::worst_error_output(&spec, &SubspaceCoords::leading(n_states, n, Side::Output))?;
        let inp = widths::worst_error_input(&spec, &SubspaceCoords::leading(n_states, n, Side::Input))?;
        attain = attain.max((out - spec.sigma_after(n)).abs());
        active = active.max((inp - out).abs());
    }
    checks.push(check("nwidth_attained", attain / s1, 1e-10, "max_n |e(span g_1..g_n) − σ_{n+1}| / σ_1".into()));
    checks.push(check("active_equals_nwidth", active / s1, 1e-10, "max_n |e_in − e_out| / σ_1".into()));

    // No random subspace beats σ_{n+1}.
    for n in probe_orders(n_states) {
        for side in [Side::Output, Side::Input] {
            let name = match side {
                Side::Output => format!("nwidth_lower_bound_n{n}"),
                Side::Input => format!("active_lower_bound_n{n}"),
            };
            match widths::probe_minimum(&spec, n, side, cfg.probes, cfg.seed) {
                Ok(Some(min)) => {
                    let deficit = (spec.sigma_after(n) - min) / s1;
                    checks.push(check(&name, deficit, 1e-8, format!("(σ_{{n+1}} − min over {} probes) / σ_1", cfg.probes)));
                }
                Ok(None) => {}
                Err(e) => checks.push(failed(&name, &e)),
            }
        }
    }

    // Input subspaces of Σ against output subspaces of the adjoint.
    match HankelSpectrum::compute_with(&sys.adjoint(), tol) {
        Ok(adj) => {
            let mut sine: f64 = 0.0;
            let mut diff: f64 = 0.0;
            for n in 1..=spec.rank {
                match widths::duality_from_spectra(&spec, &adj, n) {
                    Ok(r) => {
                        sine = sine.max(r.max_sine);
                        diff = diff.max(r.sigma_difference);
                    }
                    Err(e) => checks.push(failed(&format!("duality_n{n}"), &e)),
                }
            }
            checks.push(check("duality_angle", sine, 1e-6, "largest principal sine over all n".into()));
            checks.push(check("duality_sigma", diff / s1, 1e-10, "max_i |σ_i − σ_i(adjoint)| / σ_1".into()));
        }
        Err(e) => checks.push(failed("duality", &e)),
    }

    // Optimal Hankel-norm approximation attains σ_{n+1} and never loses to truncation.
    let mut ohna_rel: f64 = 0.0;
    let mut ohna_vs_bt: f64 = f64::NEG_INFINITY;
    let mut skipped = 0;
    for n in 1..n_states {
        let (prev, next) = (sigma[n - 1], sigma[n]);
        if prev - next <= tol.cluster * s1 {
            skipped += 1;
            continue;
        }
        let ohna = reduction::optimal_hankel_with(sys, n, tol);
        let bt = reduction::balanced_truncation_with(sys, n, tol);
        match (ohna, bt) {
            (Ok(o), Ok(b)) => {
                if ohna_resolvable(next, s1) {
                    ohna_rel = ohna_rel.max((o.hankel_error - next).abs() / next);
                } else {
                    skipped += 1;
                }
                ohna_vs_bt = ohna_vs_bt.max((o.hankel_error - b.hankel_error) / s1);
            }
            (Err(e), _) | (_, Err(e)) => checks.push(failed(&format!("reduction_n{n}"), &e)),
        }
    }
    checks.push(check(
        "ohna_attains_sigma_next",
        ohna_rel,
        1e-6,
        format!("relative; {skipped} orders without a σ gap or below the resolvable ratio skipped"),
    ));
    if ohna_vs_bt.is_finite() {
        checks.push(check("ohna_not_worse_than_bt", ohna_vs_bt, 1e-8, "(e_ohna − e_bt) / σ_1".into()));
    }

    // Quadrature discretization of the operator.
    match hankel::discretize_graded(sys, hankel::DEFAULT_NODES_PER_PANEL, hankel::DEFAULT_PANELS, hankel::DEFAULT_GRADING, tol)
        .and_then(|d| d.singular_values())
    {
        Ok(sv) => {
            let top = n_states.min(5);
            let worst = (0..top)
                .map(|i| (sv[i] - sigma[i]).abs() / sigma[i].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            checks.push(check("discretized_operator", worst, 1e-3, format!("relative, top {top} values")));
        }
        Err(e) => checks.push(failed("discretized_operator", &e)),
    }

    Ok(SystemReport {
        name: name.into(),
        states: n_states,
        inputs: sys.inputs(),
        outputs: sys.outputs(),
        passed: checks.iter().all(|c| c.passed),
        sigma,
        checks,
    })
}
