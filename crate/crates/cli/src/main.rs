use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use leggett_core::analysis::{
    self, noise_path_discrepancy, AlphaGrid, MaxViolation, StateSpec, ThresholdResult, DEFAULT_NOISE_TOLERANCE,
    DEFAULT_ROOT_TOLERANCE,
};
use leggett_core::lambda::LambdaModel;
use leggett_core::search::{self, CampaignReport, Objective, SearchConfig, SearchReport};
use leggett_core::settings::{literal_diagnostics, LiteralDiagnostics};
use leggett_core::verify::{run_property_suites, DEFAULT_GRID_POINTS};
use leggett_core::{Inequality, Mode};

/// Bumped whenever a JSON field is renamed, removed or changes meaning.
const SCHEMA_VERSION: u32 = 1;

const EXIT_USAGE: u8 = 1;
const EXIT_PROPERTY: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "leggett", version, about = "Leggett-inequality audit of the four-qubit GHZ state")]
struct Cli {
    #[command(flatten)]
    opts: Options,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Dump the correlation tensor of the selected state
    Tensor,
    /// Run every property suite (chain theorems, positivity, purity, taxi lemma)
    Verify,
    /// Evaluate lhs, bound and margin over an α grid
    Sweep,
    /// Upper end of the violated α interval
    Range,
    /// Largest margin over α and where it occurs
    MaxViolation,
    /// Smallest white-noise fraction that removes the violation
    NoiseThreshold,
    /// Random-λ campaign over the chain links and integrand bounds
    Campaign,
    /// Search for the smallest hidden-variable left-hand side
    Optimize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum StateKind {
    Ghz,
    NoisyGhz,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Options {
    /// Which inequality: 1 (one-qubit) or 2 (two-qubit)
    #[arg(long, global = true, default_value = "2")]
    ineq: Inequality,
    /// Constant convention of the two-qubit bound
    #[arg(long, global = true, default_value = "paper")]
    mode: Mode,
    #[arg(long, global = true, value_enum, default_value = "ghz")]
    state: StateKind,
    /// White-noise fraction for --state noisy-ghz
    #[arg(long, global = true)]
    noise: Option<f64>,
    /// λ samples per model (campaign, verify)
    #[arg(long, global = true, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report the norm defect of the literal `n = sin 2α` settings
    #[arg(long, global = true)]
    paper_literal: bool,
    /// Single angle in radians
    #[arg(long, global = true, conflicts_with = "alpha_pi", allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Single angle as a fraction of π
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha_pi: Option<f64>,
    /// Grid start in radians
    #[arg(long, global = true, allow_hyphen_values = true)]
    lo: Option<f64>,
    /// Grid end in radians
    #[arg(long, global = true, allow_hyphen_values = true)]
    hi: Option<f64>,
    /// Grid size
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Root-finder tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Model for `campaign`; both when omitted
    #[arg(long, global = true)]
    model: Option<LambdaModel>,
    #[arg(long, global = true, default_value_t = search::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, global = true, default_value = "lhs-minus-integrand")]
    objective: Objective,
}

/// Anything that stops a command before it produces output.
#[derive(Debug)]
struct Failure(String);

impl From<leggett_core::Error> for Failure {
    fn from(e: leggett_core::Error) -> Self {
        Failure(e.to_string())
    }
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema_version: u32,
    command: &'static str,
    parameters: Value,
    result: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    paper_literal: Option<Vec<LiteralDiagnostics>>,
}

struct Output {
    json: String,
    csv: String,
    /// Set when a property suite failed; the output is still written.
    failure: Option<String>,
}

impl Options {
    fn state(&self) -> Result<StateSpec, Failure> {
        match (self.state, self.noise) {
            (StateKind::Ghz, None) => Ok(StateSpec::Ghz),
            (StateKind::Ghz, Some(_)) => Err(Failure("--noise requires --state noisy-ghz".into())),
            (StateKind::NoisyGhz, Some(p)) if (0.0..=1.0).contains(&p) => Ok(StateSpec::NoisyGhz { p }),
            (StateKind::NoisyGhz, Some(p)) => Err(Failure(format!("noise fraction {p} outside [0, 1]"))),
            (StateKind::NoisyGhz, None) => Err(Failure("--state noisy-ghz requires --noise".into())),
        }
    }

    fn single_alpha(&self) -> Option<f64> {
        self.alpha.or(self.alpha_pi.map(|a| a * PI))
    }

    /// The explicit angle if one was given, otherwise the grid built from
    /// `--lo/--hi/--steps` with per-command defaults.
    fn alphas(&self, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, Failure> {
        if let Some(a) = self.single_alpha() {
            return Ok(vec![a]);
        }
        Ok(self.grid(lo, hi, steps)?.points())
    }

    fn grid(&self, lo: f64, hi: f64, steps: usize) -> Result<AlphaGrid, Failure> {
        Ok(AlphaGrid::new(self.lo.unwrap_or(lo), self.hi.unwrap_or(hi), self.steps.unwrap_or(steps))?)
    }
}

fn envelope<T: Serialize>(
    command: &'static str,
    parameters: Value,
    result: T,
    literal_at: Option<Vec<f64>>,
) -> Result<String, Failure> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        parameters,
        result,
        paper_literal: literal_at.map(|alphas| alphas.into_iter().map(literal_diagnostics).collect()),
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Failure(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        writeln!(out, "{r}").expect("write to string");
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn threshold_row(t: &ThresholdResult) -> String {
    let quantity = serde_json::to_value(t.quantity).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{}",
        quantity, t.value, t.bracket.0, t.bracket.1, t.iterations, t.tolerance, opt(t.closed_form)
    )
}

const THRESHOLD_HEADER: &str = "quantity,value,bracket_lo,bracket_hi,iterations,tolerance,closed_form";

fn run(command: Command, o: &Options) -> Result<Output, Failure> {
    let literal = |alphas: Vec<f64>| o.paper_literal.then_some(alphas);
    let default_literal = || o.single_alpha().map(|a| vec![a]).unwrap_or_else(|| AlphaGrid { lo: 0.0, hi: FRAC_PI_4, steps: 5 }.points());
    match command {
        Command::Tensor => {
            let state = o.state()?;
            let t = state.tensor()?;
            let entries: Vec<Value> =
                t.indexed().map(|(idx, v)| json!({ "index": idx, "value": v })).collect();
            let json = envelope("tensor", json!({ "state": state }), json!({ "entries": entries }), literal(default_literal()))?;
            let csv = csv(
                "i,j,k,l,value",
                t.indexed().map(|([i, j, k, l], v)| format!("{i},{j},{k},{l},{v}")),
            );
            Ok(Output { json, csv, failure: None })
        }
        Command::Verify => {
            let alphas = o.alphas(-FRAC_PI_4, FRAC_PI_4, DEFAULT_GRID_POINTS)?;
            let report = run_property_suites(o.samples, o.seed, &alphas)?;
            let failure = (!report.passed).then(|| {
                let bad: Vec<_> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
                format!("property suites failed: {}", bad.join(", "))
            });
            let csv = csv(
                "suite,passed,checks,worst_deviation",
                report.suites.iter().map(|s| format!("{},{},{},{}", s.name, s.passed, s.checks, s.worst_deviation)),
            );
            let params = json!({ "samples": o.samples, "seed": o.seed, "alpha_points": alphas.len() });
            let json = envelope("verify", params, &report, literal(alphas))?;
            Ok(Output { json, csv, failure })
        }
        Command::Sweep => {
            let state = o.state()?;
            let grid = match o.single_alpha() {
                Some(_) => return Err(Failure("sweep takes --lo/--hi/--steps, not a single angle".into())),
                None => o.grid(0.0, FRAC_PI_4, 1000)?,
            };
            let r = analysis::sweep_alpha(&state, o.ineq, o.mode, grid)?;
            let params = json!({ "state": state, "inequality": o.ineq, "mode": o.mode });
            let json = envelope("sweep", params, &r, literal(grid.points()))?;
            Ok(Output { json, csv: r.to_csv(), failure: None })
        }
        Command::Range => {
            let state = o.state()?;
            let r = analysis::violation_range(&state, o.ineq, o.mode, o.tol.unwrap_or(DEFAULT_ROOT_TOLERANCE))?;
            let params = json!({ "state": state, "inequality": o.ineq, "mode": o.mode });
            #[derive(Serialize)]
            struct RangeResult {
                #[serde(flatten)]
                threshold: ThresholdResult,
                value_over_pi: f64,
            }
            let body = RangeResult { threshold: r, value_over_pi: r.value / PI };
            let json = envelope("range", params, &body, literal(vec![r.value]))?;
            let csv = csv(&format!("{THRESHOLD_HEADER},value_over_pi"), [format!("{},{}", threshold_row(&r), r.value / PI)]);
            Ok(Output { json, csv, failure: None })
        }
        Command::MaxViolation => {
            let state = o.state()?;
            let m: MaxViolation =
                analysis::max_violation(&state, o.ineq, o.mode, o.tol.unwrap_or(DEFAULT_ROOT_TOLERANCE))?;
            let params = json!({ "state": state, "inequality": o.ineq, "mode": o.mode });
            let json = envelope("max-violation", params, m, literal(vec![m.alpha]))?;
            let csv = csv(
                "alpha_rad,alpha_over_pi,margin,iterations,closed_form_alpha,closed_form_margin",
                [format!(
                    "{},{},{},{},{},{}",
                    m.alpha, m.alpha_over_pi, m.margin, m.iterations, m.closed_form_alpha, m.closed_form_margin
                )],
            );
            Ok(Output { json, csv, failure: None })
        }
        Command::NoiseThreshold => {
            let r = analysis::noise_threshold(o.ineq, o.mode, o.tol.unwrap_or(DEFAULT_NOISE_TOLERANCE))?;
            let discrepancy = noise_path_discrepancy(r.value, o.ineq, o.mode)?;
            #[derive(Serialize)]
            struct NoiseResult {
                #[serde(flatten)]
                threshold: ThresholdResult,
                simulation_discrepancy: f64,
            }
            let params = json!({ "inequality": o.ineq, "mode": o.mode });
            let body = NoiseResult { threshold: r, simulation_discrepancy: discrepancy };
            let json = envelope("noise-threshold", params, &body, literal(default_literal()))?;
            let csv = csv(&format!("{THRESHOLD_HEADER},simulation_discrepancy"), [format!("{},{discrepancy}", threshold_row(&r))]);
            Ok(Output { json, csv, failure: None })
        }
        Command::Campaign => {
            let alphas = o.alphas(-FRAC_PI_4, FRAC_PI_4, DEFAULT_GRID_POINTS)?;
            let models = match o.model {
                Some(m) => vec![m],
                None => vec![LambdaModel::A, LambdaModel::B],
            };
            let reports: Vec<CampaignReport> = models
                .iter()
                .map(|&m| search::run_campaign_grid(m, &alphas, o.samples, o.seed))
                .collect::<Result<_, _>>()?;
            let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).map(|r| r.model.to_string()).collect();
            let failure = (!failed.is_empty()).then(|| format!("campaign failures for model {}", failed.join(", ")));
            let csv = csv(
                "model,samples,alpha_points,min_chain_slack,min_integrand_slack,min_probability,max_probability,max_total_error,failures",
                reports.iter().map(|r| {
                    format!(
                        "{},{},{},{},{},{},{},{},{}",
                        r.model,
                        r.samples,
                        r.alphas.len(),
                        r.min_chain_slack,
                        r.min_integrand_slack,
                        r.min_probability,
                        r.max_probability,
                        r.max_total_error,
                        r.failures
                    )
                }),
            );
            let params = json!({ "samples": o.samples, "seed": o.seed });
            let json = envelope("campaign", params, &reports, literal(alphas))?;
            Ok(Output { json, csv, failure })
        }
        Command::Optimize => {
            if o.restarts == 0 {
                return Err(Failure("--restarts must be at least 1".into()));
            }
            let alphas = o.alphas(-FRAC_PI_4, FRAC_PI_4, 10)?;
            let reports: Vec<SearchReport> = alphas
                .iter()
                .map(|&alpha| {
                    let mut cfg = SearchConfig::new(alpha, o.ineq, o.mode);
                    cfg.objective = o.objective;
                    cfg.restarts = o.restarts;
                    cfg.seed = o.seed;
                    search::minimize_leggett_lhs(&cfg)
                })
                .collect::<Result<_, _>>()?;
            let unsound: Vec<_> = reports.iter().filter(|r| !r.sound).map(|r| r.alpha.to_string()).collect();
            let failure = (!unsound.is_empty()).then(|| format!("search went below the bound at α = {}", unsound.join(", ")));
            let csv = csv(
                "alpha_rad,alpha_over_pi,value,lhs,integrand,threshold,gap,sound",
                reports.iter().map(|r| {
                    format!(
                        "{},{},{},{},{},{},{},{}",
                        r.alpha,
                        r.alpha / PI,
                        r.value,
                        r.lhs,
                        r.integrand,
                        r.threshold,
                        r.gap,
                        r.sound
                    )
                }),
            );
            let params = json!({
                "inequality": o.ineq,
                "mode": o.mode,
                "objective": o.objective,
                "restarts": o.restarts,
                "seed": o.seed,
            });
            let json = envelope("optimize", params, &reports, literal(alphas))?;
            Ok(Output { json, csv, failure })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let output = match run(cli.command, &cli.opts) {
        Ok(o) => o,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let text = match cli.opts.format {
        Format::Json => &output.json,
        Format::Csv => &output.csv,
    };
    match &cli.opts.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_USAGE);
            }
        }
        None => print!("{text}"),
    }
    match output.failure {
        Some(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PROPERTY)
        }
        None => ExitCode::SUCCESS,
    }
}
