use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use qcap::bounds::{
    format_value, linear_grid, report, sweep, verify_suite_with, write_csv, BoundId, BoundReport, Family, Suite,
    SuiteReport, VerifyConfig,
};
use qcap::channels::{
    erasure_channel, identity_channel, mixed_unitary, nr_channel, werner_holevo, ChannelError, QuantumChannel,
};
use qcap::linalg::Matrix;
use qcap::models::{fidelity, kappa, CodeClass, ModelSettings, SolveSide};

const CHANNELS: &str = "identity, erasure, werner, nr, mixed-unitary";

/// Semidefinite-programming bounds on quantum channel capacities.
#[derive(Parser, Debug)]
#[command(name = "qcap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    out: Option<OutFormat>,

    /// Write output to this file instead of standard output.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,

    /// Relative duality gap tolerance of the SDP solver (also settable
    /// through QCAP_SOLVER_TOL).
    #[arg(long, global = true)]
    tol_gap: Option<f64>,

    /// Iteration limit of the SDP solver.
    #[arg(long, global = true)]
    max_iter: Option<usize>,

    /// Include wall-clock timings in JSON output.
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report capacity bounds for one channel.
    Bound {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Comma-separated bound ids.
        #[arg(long, default_value = "qGamma,qTheta")]
        bounds: String,
    },
    /// Optimal channel fidelity for a code class.
    Fidelity {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        k: f64,
        #[arg(long, default_value = "pptp")]
        code: CodeClass,
        /// Also solve the dual program.
        #[arg(long)]
        dual: bool,
    },
    /// Largest perfectly transmissible code size.
    Kappa {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value = "pptp")]
        code: CodeClass,
        /// Bisection tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Bounds over a one-parameter channel family.
    Sweep {
        #[arg(long, default_value = "nr")]
        family: Family,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 0.5)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[arg(long, default_value = "qGamma,qTheta")]
        bounds: String,
    },
    /// Run property suites on named and seeded random channels.
    Verify {
        /// Comma-separated suite names, or "all".
        #[arg(long, default_value = "all")]
        suites: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Random channels (or pairs) per suite.
        #[arg(long, default_value_t = 3)]
        samples: usize,
    },
}

#[derive(Args, Debug)]
struct ChannelArgs {
    /// Built-in channel name.
    #[arg(long)]
    channel: Option<String>,
    /// Input dimension for identity, erasure and werner.
    #[arg(long)]
    dim: Option<usize>,
    /// Erasure probability.
    #[arg(long)]
    p: Option<f64>,
    /// Parameter of the nr family.
    #[arg(long)]
    r: Option<f64>,
    /// Channel JSON file (Kraus operators, or unitaries and probabilities
    /// for mixed-unitary).
    #[arg(long)]
    channel_file: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OutFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Compute(anyhow::Error),
    Verify,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Compute(_) => 2,
            Failure::Verify => 3,
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn compute(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Compute(e.into())
}

#[derive(Deserialize)]
struct MixedUnitaryFile {
    unitaries: Vec<Vec<Vec<[f64; 2]>>>,
    probabilities: Vec<f64>,
}

fn parse_matrix(rows: &[Vec<[f64; 2]>]) -> anyhow::Result<Matrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(anyhow!("unitary is not square"));
    }
    let data = rows
        .iter()
        .flatten()
        .map(|&[re, im]| qcap::linalg::Complex64::new(re, im))
        .collect();
    Ok(Matrix::from_vec(n, n, data)?)
}

fn channel_usage(e: ChannelError) -> Failure {
    match e {
        ChannelError::Io(_) => usage(anyhow!("cannot read channel file: {e}")),
        other => usage(other),
    }
}

impl ChannelArgs {
    fn load(&self) -> Result<QuantumChannel, Failure> {
        let name = self.channel.as_deref().map(str::to_ascii_lowercase);
        match (name.as_deref(), &self.channel_file) {
            (Some("mixed-unitary"), Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(usage)?;
                let file: MixedUnitaryFile = serde_json::from_str(&text)
                    .with_context(|| format!("malformed mixed-unitary file {}", path.display()))
                    .map_err(usage)?;
                let us = file
                    .unitaries
                    .iter()
                    .map(|u| parse_matrix(u))
                    .collect::<anyhow::Result<Vec<_>>>()
                    .map_err(usage)?;
                mixed_unitary(&us, &file.probabilities).map_err(channel_usage)
            }
            (Some("mixed-unitary"), None) => Err(usage(anyhow!("mixed-unitary needs --channel-file"))),
            (Some(_), Some(_)) => Err(usage(anyhow!("give either --channel or --channel-file, not both"))),
            (None, Some(path)) => QuantumChannel::load(path).map_err(channel_usage),
            (None, None) => Err(usage(anyhow!("no channel given; use --channel <{CHANNELS}> or --channel-file"))),
            (Some(name), None) => {
                let dim = self.dim;
                let ch = match name {
                    "identity" => identity_channel(dim.unwrap_or(2)),
                    "erasure" => erasure_channel(dim.unwrap_or(2), self.p.unwrap_or(0.5)),
                    "werner" | "werner-holevo" => werner_holevo(dim.unwrap_or(3)),
                    "nr" => nr_channel(self.r.unwrap_or(0.0)),
                    other => return Err(usage(anyhow!("unknown channel '{other}'; available: {CHANNELS}"))),
                };
                ch.map_err(channel_usage)
            }
        }
    }
}

fn settings(cli: &Cli) -> Result<ModelSettings, Failure> {
    let mut s = ModelSettings::default();
    if let Ok(text) = std::env::var("QCAP_SOLVER_TOL") {
        let tol: f64 = text
            .trim()
            .parse()
            .map_err(|_| usage(anyhow!("QCAP_SOLVER_TOL must be a number, got '{text}'")))?;
        s.solver.tol_gap = tol;
        s.solver.tol_feas = tol;
    }
    if let Some(tol) = cli.tol_gap {
        s.solver.tol_gap = tol;
    }
    if let Some(n) = cli.max_iter {
        s.solver.max_iter = n;
    }
    s.solver.validate().map_err(|e| usage(anyhow!("invalid solver settings: {e}")))?;
    Ok(s)
}

fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wallTimes");
            map.remove("seconds");
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn to_json(value: impl serde::Serialize, timings: bool) -> Result<String, Failure> {
    let mut v = serde_json::to_value(value).map_err(compute)?;
    if !timings {
        strip_timings(&mut v);
    }
    serde_json::to_string_pretty(&v).map(|s| s + "\n").map_err(compute)
}

fn value_or_na(r: &BoundReport, id: BoundId) -> String {
    r.values.get(&id).map(|&v| format_value(v)).unwrap_or_else(|| "n/a".into())
}

fn chain_line(r: &BoundReport) -> String {
    let v = &r.values;
    let k = v.get(&BoundId::KappaPptp).map(|k| k.log2());
    let g = v.get(&BoundId::QGamma).copied();
    let t = v.get(&BoundId::QTheta).copied();
    let mark = |a: Option<f64>, b: Option<f64>, tol: f64| match (a, b) {
        (Some(a), Some(b)) if a <= b + tol => "[ok]",
        (Some(_), Some(_)) => "[FAIL]",
        _ => "[n/a]",
    };
    format!(
        "log2(kappa_pptp) <= Q_Gamma <= Q_Theta  {} {}",
        mark(k, g, 1e-4),
        mark(g, t, 2e-5)
    )
}

fn render_report(r: &BoundReport, format: OutFormat, timings: bool) -> Result<String, Failure> {
    Ok(match format {
        OutFormat::Json => to_json(r, timings)?,
        OutFormat::Csv => {
            let mut head = String::from("channel");
            let mut row = r.channel_name.clone();
            for id in &r.requested {
                head.push(',');
                head.push_str(id.as_str());
                row.push(',');
                row.push_str(&value_or_na(r, *id));
            }
            format!("{head}\n{row}\n")
        }
        OutFormat::Text => {
            let mut out = format!("channel {} ({} -> {})\n", r.channel_name, r.dims.0, r.dims.1);
            for id in &r.requested {
                match r.errors.get(id) {
                    Some(e) => out.push_str(&format!("{id} = error: {e}\n")),
                    None => out.push_str(&format!("{id} = {}\n", value_or_na(r, *id))),
                }
            }
            out.push_str(&chain_line(r));
            out.push('\n');
            for c in &r.checks {
                let mark = if c.passed { "ok" } else { "FAIL" };
                out.push_str(&format!("check {}: {mark} ({:.3e})\n", c.name, c.observed));
            }
            out
        }
    })
}

fn render_suites(r: &SuiteReport, format: OutFormat, timings: bool) -> Result<String, Failure> {
    Ok(match format {
        OutFormat::Json => to_json(r, timings)?,
        OutFormat::Csv => {
            let mut out = String::from("suite,passed,checks,worst_ratio\n");
            for s in &r.results {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    s.suite,
                    s.passed,
                    s.checks.len(),
                    format_value(s.worst_ratio())
                ));
            }
            out
        }
        OutFormat::Text => {
            let mut out = format!("seed {}\n", r.seed);
            for s in &r.results {
                let mark = if s.passed { "PASS" } else { "FAIL" };
                out.push_str(&format!(
                    "{mark} {} ({} checks, worst observed/limit {:.3})\n",
                    s.suite,
                    s.checks.len(),
                    s.worst_ratio()
                ));
                for c in s.checks.iter().filter(|c| !c.passed) {
                    match &c.error {
                        Some(e) => out.push_str(&format!("  failed: {}: {e}\n", c.name)),
                        None => out.push_str(&format!("  failed: {}: {:.3e} > {:.1e}\n", c.name, c.observed, c.limit)),
                    }
                }
            }
            out
        }
    })
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    let mut s = settings(cli)?;
    let timings = cli.timings;
    match &cli.command {
        Command::Bound { channel, bounds } => {
            let ids = BoundId::parse_list(bounds).map_err(usage)?;
            let ch = channel.load()?;
            let r = report(&ch, &ids, &s);
            if let Some((id, e)) = r.errors.iter().next() {
                return Err(compute(anyhow!("{id} failed for {}: {e}", r.channel_name)));
            }
            render_report(&r, cli.out.unwrap_or(OutFormat::Text), timings)
        }
        Command::Fidelity { channel, k, code, dual } => {
            let ch = channel.load()?;
            if !(k.is_finite() && *k >= 1.0) {
                return Err(usage(anyhow!("--k must be at least 1, got {k}")));
            }
            let side = if *dual { SolveSide::Both } else { SolveSide::Primal };
            let mut r = fidelity(&ch, *k, *code, side, &s).map_err(compute)?;
            if !dual {
                r.dual_value = None;
            }
            Ok(match cli.out.unwrap_or(OutFormat::Text) {
                OutFormat::Json => to_json(
                    json!({
                        "channel": ch.name(),
                        "k": k,
                        "code": code,
                        "value": r.value,
                        "dualValue": r.dual_value,
                        "solverStats": r.stats,
                    }),
                    timings,
                )?,
                OutFormat::Csv => {
                    let dual = r.dual_value.map(format_value).unwrap_or_default();
                    format!("channel,k,code,value,dualValue\n{},{},{code},{},{dual}\n", ch.name(), format_value(*k), format_value(r.value))
                }
                OutFormat::Text => {
                    let mut out = format!("F_{code}({}, k={}) = {}\n", ch.name(), format_value(*k), format_value(r.value));
                    if let Some(d) = r.dual_value {
                        out.push_str(&format!("dual value = {}\n", format_value(d)));
                    }
                    out
                }
            })
        }
        Command::Kappa { channel, code, tol } => {
            if let Some(t) = tol {
                if !(*t > 0.0) {
                    return Err(usage(anyhow!("--tol must be positive, got {t}")));
                }
                s.kappa_tol = *t;
            }
            let ch = channel.load()?;
            let r = kappa(&ch, *code, &s).map_err(compute)?;
            Ok(match cli.out.unwrap_or(OutFormat::Text) {
                OutFormat::Json => to_json(json!({ "channel": ch.name(), "result": r }), timings)?,
                OutFormat::Csv => format!(
                    "channel,code,kappa,oneShotZeroError,lo,hi\n{},{code},{},{},{},{}\n",
                    ch.name(),
                    format_value(r.kappa),
                    r.one_shot_zero_error,
                    format_value(r.bracket.0),
                    format_value(r.bracket.1)
                ),
                OutFormat::Text => format!(
                    "kappa_{code}({}) = {} in [{}, {}]\none-shot zero-error = {}\nlog2(kappa) = {}\n",
                    ch.name(),
                    format_value(r.kappa),
                    format_value(r.bracket.0),
                    format_value(r.bracket.1),
                    r.one_shot_zero_error,
                    format_value(r.kappa.log2())
                ),
            })
        }
        Command::Sweep {
            family,
            from,
            to,
            steps,
            bounds,
        } => {
            let ids = BoundId::parse_list(bounds).map_err(usage)?;
            let grid = linear_grid(*from, *to, *steps).map_err(usage)?;
            let (lo, hi) = family.range();
            if grid.iter().any(|p| !(lo..=hi).contains(p)) {
                return Err(usage(anyhow!("sweep range must lie within [{lo}, {hi}]")));
            }
            let rows = sweep(*family, &grid, &ids, &s).map_err(compute)?;
            Ok(match cli.out.unwrap_or(OutFormat::Csv) {
                OutFormat::Csv => {
                    let mut buf = Vec::new();
                    write_csv(&rows, &ids, &mut buf).map_err(compute)?;
                    String::from_utf8(buf).map_err(compute)?
                }
                OutFormat::Json => {
                    let rows: Vec<Value> = rows.iter().map(|r| json!({ "param": r.parameter, "values": r.values })).collect();
                    to_json(rows, timings)?
                }
                OutFormat::Text => {
                    let mut out = String::new();
                    for r in &rows {
                        out.push_str(&format!("param = {}", format_value(r.parameter)));
                        for id in &ids {
                            out.push_str(&format!("  {id} = {}", format_value(r.values[id])));
                        }
                        out.push('\n');
                    }
                    out
                }
            })
        }
        Command::Verify { suites, seed, samples } => {
            let list: Vec<Suite> = if suites.trim().eq_ignore_ascii_case("all") {
                Suite::ALL.to_vec()
            } else {
                suites
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| p.parse::<Suite>().map_err(|e| usage(anyhow!(e))))
                    .collect::<Result<_, _>>()?
            };
            if list.is_empty() {
                return Err(usage(anyhow!("no suites given")));
            }
            let cfg = VerifyConfig {
                seed: *seed,
                samples: *samples,
            };
            let r = verify_suite_with(&list, &cfg, &s);
            let text = render_suites(&r, cli.out.unwrap_or(OutFormat::Text), timings)?;
            if r.passed() {
                Ok(text)
            } else {
                emit(cli, &text).map_err(compute)?;
                Err(Failure::Verify)
            }
        }
    }
}

fn emit(cli: &Cli, text: &str) -> anyhow::Result<()> {
    match &cli.output {
        Some(path) => {
            let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            f.write_all(text.as_bytes())?;
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = execute(&cli).and_then(|text| emit(&cli, &text).map_err(compute));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Compute(e) => eprintln!("computation failed: {e:#}"),
                Failure::Verify => eprintln!("verification failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
