//! Command-line front end. Every command is a pure function of its input
//! files, effective config and seed; the run manifest embedded in each
//! artifact records all three.

use crate::core_model::{
    assemble_companion, mcarma_stationarity, perturb_companion, var_stationarity, ModelFile, PerturbMode,
    RepresentationFile, StationarityReport,
};
use crate::error::{Error, Result};
use crate::estimate::{fit_mcar_pipeline, load_csv, FittedMcarModel, PipelineConfig};
use crate::nig_levy::NigParams;
use crate::output::{fmt_machine, fmt_table};
use crate::simulate::{
    calendar_of, simulate_extended_mcar, simulate_mcarma, strong_error_experiment, AffineDiffusion, ErrorTable,
    ExperimentSpec, JumpMap, LevyMeasure, PathSet, SimSettings,
};
use crate::transform::{discrepancy_report, forward_transform, inverse_transform_mcar, inverse_transform_closed_form};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "mcarma", version, about = "VARMA/MCARMA transformation, simulation and MCAR estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Map a model file to its discrete representation or back.
    Transform {
        /// Model JSON (forward) or representation JSON (inverse).
        input: PathBuf,
        #[arg(long, value_enum)]
        direction: Direction,
        /// Sampling step for the forward map.
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        /// Use the published p=4, d=2 closed forms for the inverse.
        #[arg(long)]
        paper_mode: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the estimation pipeline on a daily CSV.
    Fit {
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        paper_mode: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate paths from a fitted model or a plain model file with drivers.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Strong-error experiment over a grid of steps and truncation levels.
    Convergence {
        /// Experiment spec JSON; `--config` is accepted as an alias.
        spec: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stationarity report for a model, representation or fitted-model file.
    Check {
        input: PathBuf,
        /// Shift every bottom-row companion entry by this amount first.
        #[arg(long, allow_hyphen_values = true)]
        perturb: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Provenance block embedded in every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: Option<String>,
    pub input_digests: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    /// `SOURCE_DATE_EPOCH` when set, otherwise the Unix epoch, so reruns are byte-identical.
    pub timestamp: String,
}

impl RunManifest {
    fn new(command: &str, config: Option<&Value>, inputs: &[(&Path, &[u8])], seed: Option<u64>) -> Self {
        let secs = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse::<i64>().ok())
            .unwrap_or(0);
        let timestamp = chrono::DateTime::from_timestamp(secs, 0)
            .unwrap_or_default()
            .format("%Y-%m-%dT%H:%M:%SZ")
            .to_string();
        RunManifest {
            command: command.into(),
            config_digest: config.map(|c| sha256_hex(machine_json(c).as_bytes())),
            input_digests: inputs
                .iter()
                .map(|(p, bytes)| (p.display().to_string(), sha256_hex(bytes)))
                .collect(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp,
        }
    }

    fn comment_line(&self) -> Result<String> {
        Ok(format!("# manifest {}", serde_json::to_string(self)?))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Pretty JSON with every non-integer number written to 17 significant digits.
pub fn machine_json(v: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, v, 0);
    s.push('\n');
    s
}

fn write_value(s: &mut String, v: &Value, indent: usize) {
    let pad = |s: &mut String, n: usize| s.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => s.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => {
                let _ = write!(s, "{i}");
            }
            (_, Some(u), _) => {
                let _ = write!(s, "{u}");
            }
            (_, _, Some(f)) => s.push_str(&fmt_machine(f)),
            _ => s.push_str(&n.to_string()),
        },
        Value::Array(a) => {
            if a.is_empty() {
                s.push_str("[]");
            } else if a.iter().all(|x| x.is_number() || x.is_null()) {
                s.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    write_value(s, x, indent);
                }
                s.push(']');
            } else {
                s.push_str("[\n");
                for (i, x) in a.iter().enumerate() {
                    pad(s, indent + 2);
                    write_value(s, x, indent + 2);
                    s.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
                }
                pad(s, indent);
                s.push(']');
            }
        }
        Value::Object(o) => {
            if o.is_empty() {
                s.push_str("{}");
                return;
            }
            s.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                pad(s, indent + 2);
                s.push_str(&Value::String(k.clone()).to_string());
                s.push_str(": ");
                write_value(s, x, indent + 2);
                s.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            pad(s, indent);
            s.push('}');
        }
    }
}

/// Apply `key=value` overrides; dotted keys descend into objects and numeric
/// segments index arrays. Values are parsed as JSON, falling back to strings.
pub fn apply_overrides(config: &mut Value, sets: &[String]) -> Result<()> {
    for item in sets {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--set expects key=value, got {item:?}")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut *config;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let last = i + 1 == parts.len();
            node = match node {
                Value::Object(map) => {
                    if last {
                        map.insert(part.to_string(), value.clone());
                        break;
                    }
                    map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
                }
                Value::Array(arr) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| Error::Validation(format!("--set {key}: {part:?} is not an array index")))?;
                    let len = arr.len();
                    let slot = arr
                        .get_mut(idx)
                        .ok_or_else(|| Error::Validation(format!("--set {key}: index {idx} out of range ({len})")))?;
                    if last {
                        *slot = value.clone();
                        break;
                    }
                    slot
                }
                _ => return Err(Error::Validation(format!("--set {key}: {part:?} is not inside an object"))),
            };
        }
    }
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))
}

fn parse_json(path: &Path, bytes: &[u8]) -> Result<Value> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn from_value<T: for<'de> Deserialize<'de>>(v: Value, what: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Validation(format!("{what}: {e}")))
}

fn with_manifest<T: Serialize>(body: &T, manifest: &RunManifest) -> Result<String> {
    let mut v = serde_json::to_value(body)?;
    match &mut v {
        Value::Object(map) => {
            map.insert("manifest".into(), serde_json::to_value(manifest)?);
        }
        _ => return Err(Error::Numeric("artifact body is not a JSON object".into())),
    }
    Ok(machine_json(&v))
}

/// Where the machine artifact goes and where the human text goes.
struct Sink {
    out: Option<PathBuf>,
}

impl Sink {
    fn artifact(&self, text: &str, stdout: &mut dyn Write) -> Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text)
                .map_err(|e| Error::Validation(format!("cannot write {}: {e}", p.display()))),
            None => Ok(stdout.write_all(text.as_bytes())?),
        }
    }

    /// Human text goes to stdout when the artifact is in a file, to stderr otherwise.
    fn report(&self, text: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
        if self.out.is_some() {
            stdout.write_all(text.as_bytes())?;
        } else {
            stderr.write_all(text.as_bytes())?;
        }
        Ok(())
    }
}

/// Parse-free entry point used by the binary and the tests.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Transform {
            input,
            direction,
            h,
            paper_mode,
            out,
        } => cmd_transform(&input, direction, h, paper_mode, &Sink { out }, stdout, stderr),
        Command::Fit {
            data,
            config,
            set,
            paper_mode,
            out,
        } => cmd_fit(&data, config.as_deref(), &set, paper_mode, &Sink { out }, stdout, stderr),
        Command::Simulate {
            model,
            h,
            t_end,
            paths,
            seed,
            config,
            set,
            out,
        } => {
            let flags = SimulateOptions {
                h,
                t_end,
                n_paths: paths,
                seed,
                epsilon: None,
            };
            cmd_simulate(&model, flags, config.as_deref(), &set, &Sink { out }, stdout, stderr)
        }
        Command::Convergence {
            spec,
            config,
            set,
            paths,
            seed,
            t_end,
            out,
        } => {
            let path = match (spec, config) {
                (Some(s), None) | (None, Some(s)) => s,
                (Some(_), Some(_)) => {
                    return Err(Error::Validation("give the experiment spec either positionally or via --config".into()))
                }
                (None, None) => return Err(Error::Validation("convergence needs an experiment spec file".into())),
            };
            cmd_convergence(&path, &set, paths, seed, t_end, &Sink { out }, stdout, stderr)
        }
        Command::Check { input, perturb, out } => cmd_check(&input, perturb, &Sink { out }, stdout),
    }
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

fn block_table(title: &str, name: &str, blocks: &[Vec<Vec<f64>>]) -> String {
    let mut s = format!("{title}\n");
    for (j, b) in blocks.iter().enumerate() {
        for (r, row) in b.iter().enumerate() {
            let label = if r == 0 { format!("{name}{}", j + 1) } else { String::new() };
            let cells: Vec<String> = row.iter().map(|x| format!("{:>11}", fmt_table(*x))).collect();
            let _ = writeln!(s, "  {label:<6}{}", cells.join(""));
        }
    }
    s
}

fn cmd_transform(
    input: &Path,
    direction: Direction,
    h: f64,
    paper_mode: bool,
    sink: &Sink,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let bytes = read_bytes(input)?;
    let doc = parse_json(input, &bytes)?;
    let settings = serde_json::json!({ "direction": format!("{direction:?}").to_lowercase(), "h": h, "paper_mode": paper_mode });
    let manifest = RunManifest::new("transform", Some(&settings), &[(input, &bytes)], None);
    match direction {
        Direction::Forward => {
            if paper_mode {
                return Err(Error::Unsupported("paper mode applies to the inverse direction only".into()));
            }
            let mf: ModelFile = from_value(doc, "model file")?;
            let rep = forward_transform(&mf.to_coefficients()?, h)?;
            let file = RepresentationFile::from(&rep);
            sink.artifact(&with_manifest(&file, &manifest)?, stdout)?;
            let mut text = block_table(&format!("phi blocks (h = {})", fmt_table(h)), "phi", &file.phi_blocks);
            for (k, v) in &file.noise_loadings {
                text.push_str(&block_table(&format!("noise loading, offset {k}"), "L", std::slice::from_ref(v)));
            }
            sink.report(&text, stdout, stderr)
        }
        Direction::Inverse => {
            let rf: RepresentationFile = from_value(doc, "representation file")?;
            let rep = rf.to_representation()?;
            if paper_mode {
                let coeffs = inverse_transform_closed_form(&rep)?;
                let file = ModelFile::from(&coeffs);
                let report = discrepancy_report(&rep)?;
                #[derive(Serialize)]
                struct PaperInverse<'a> {
                    #[serde(flatten)]
                    model: &'a ModelFile,
                    discrepancy: &'a crate::transform::DiscrepancyReport,
                }
                let body = PaperInverse {
                    model: &file,
                    discrepancy: &report,
                };
                sink.artifact(&with_manifest(&body, &manifest)?, stdout)?;
                let mut text = block_table("A blocks (closed form)", "A", &file.a_blocks);
                let _ = writeln!(
                    text,
                    "pure-state constant ordering versus the generic inverse: {:?}; max |generic - closed form| = {}",
                    report.ordering,
                    fmt_table(report.max_abs_difference)
                );
                sink.report(&text, stdout, stderr)
            } else {
                let coeffs = inverse_transform_mcar(&rep)?;
                let file = ModelFile::from(&coeffs);
                sink.artifact(&with_manifest(&file, &manifest)?, stdout)?;
                let mut text = block_table("A blocks", "A", &file.a_blocks);
                text.push_str(&block_table("B blocks", "B", &file.b_blocks));
                sink.report(&text, stdout, stderr)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Reads the config file (if any), fills top-level keys missing from it with
/// `defaults` so nested overrides have something to descend into, then
/// applies the overrides.
fn load_config(path: Option<&Path>, sets: &[String], defaults: Value) -> Result<(Value, Vec<(PathBuf, Vec<u8>)>)> {
    let mut inputs = Vec::new();
    let mut v = match path {
        Some(p) => {
            let bytes = read_bytes(p)?;
            let v = parse_json(p, &bytes)?;
            inputs.push((p.to_path_buf(), bytes));
            v
        }
        None => Value::Object(Default::default()),
    };
    if let (Value::Object(map), Value::Object(defaults)) = (&mut v, defaults) {
        for (k, d) in defaults {
            map.entry(k).or_insert(d);
        }
    }
    apply_overrides(&mut v, sets)?;
    Ok((v, inputs))
}

fn stationarity_table(title: &str, r: &StationarityReport, verdict: &str) -> String {
    let mut s = format!("{title}\n  {:>11}{:>11}{:>11}\n", "re", "im", "modulus");
    for (e, m) in r.eigenvalues.iter().zip(&r.moduli) {
        let _ = writeln!(s, "  {:>11}{:>11}{:>11}", fmt_table(e[0]), fmt_table(e[1]), fmt_table(*m));
    }
    let _ = writeln!(s, "  verdict: {}", if r.stationary { verdict } else { "not stationary" });
    s
}

pub fn fit_report(m: &FittedMcarModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "MCAR({}) fit, d = {}", m.model.orders.p, m.model.orders.d);
    let title = match m.model.convention {
        crate::core_model::BlockConvention::BottomRow => "companion bottom-row blocks",
        crate::core_model::BlockConvention::Coefficients => "A blocks",
    };
    s.push_str(&block_table(title, "A", &m.model.a_blocks));
    if let Some(d) = &m.diagnostics {
        let _ = writeln!(s, "observations: {}, paper mode: {}", d.n_observations, d.paper_mode);
        s.push_str(&block_table("VAR coefficients", "phi", &d.var_phi));
        s.push_str(&block_table("VAR t-values (per-equation OLS)", "t", &d.var_t_values));
        s.push_str(&stationarity_table("eigenvalues of A", &d.mcar_stationarity, "stationary"));
        s.push_str(&stationarity_table("eigenvalues of F", &d.var_stationarity, "stationary"));
        if let Some(b) = &d.beta_solution {
            let _ = writeln!(s, "error loading");
            let _ = writeln!(s, "  C_delta            {}", fmt_table(b.c_delta));
            for (k, row) in b.beta.iter().enumerate() {
                let _ = writeln!(s, "  beta row {}         {:>11}{:>11}", k + 1, fmt_table(row[0]), fmt_table(row[1]));
            }
            for k in 0..2 {
                let _ = writeln!(
                    s,
                    "  dimension {}: restriction {}, delta-hat {}, relative error {}",
                    k + 1,
                    fmt_table(b.restriction_values[k]),
                    fmt_table(b.delta_hat[k]),
                    fmt_table(b.delta_relative_error[k])
                );
            }
        }
    }
    let _ = writeln!(s, "residual laws (volatility-scaled)");
    let _ = writeln!(s, "  {:>4}{:>11}{:>11}{:>11}{:>11}{:>11}{:>11}", "dim", "a", "b", "delta", "mu", "KS", "p-value");
    for (k, l) in m.residual_laws.iter().enumerate() {
        let _ = writeln!(
            s,
            "  {:>4}{:>11}{:>11}{:>11}{:>11}{:>11}{:>11}",
            k + 1,
            fmt_table(l.a),
            fmt_table(l.b),
            fmt_table(l.delta),
            fmt_table(l.mu),
            fmt_table(l.ks.statistic),
            fmt_table(l.ks.p_value)
        );
    }
    s
}

fn cmd_fit(
    data: &Path,
    config: Option<&Path>,
    sets: &[String],
    paper_mode: bool,
    sink: &Sink,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let (mut cfg_value, cfg_inputs) = load_config(config, sets, serde_json::to_value(PipelineConfig::default())?)?;
    if paper_mode {
        if let Value::Object(map) = &mut cfg_value {
            map.insert("paper_mode".into(), Value::Bool(true));
        }
    }
    let cfg: PipelineConfig = from_value(cfg_value, "config")?;
    cfg.validate()?;
    let effective = serde_json::to_value(&cfg)?;
    let bytes = read_bytes(data)?;
    let ds = load_csv(bytes.as_slice())?;
    let mut inputs: Vec<(&Path, &[u8])> = vec![(data, bytes.as_slice())];
    inputs.extend(cfg_inputs.iter().map(|(p, b)| (p.as_path(), b.as_slice())));
    let manifest = RunManifest::new("fit", Some(&effective), &inputs, None);
    let model = fit_mcar_pipeline(&ds, &cfg)?;
    sink.artifact(&with_manifest(&model, &manifest)?, stdout)?;
    sink.report(&fit_report(&model), stdout, stderr)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Simulation settings file; flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOptions {
    pub h: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    /// Small-jump truncation level.
    pub epsilon: Option<f64>,
}

/// A plain model file plus the NIG laws of its driving channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivenModelFile {
    #[serde(flatten)]
    pub model: ModelFile,
    pub drivers: Vec<NigParams>,
}

fn cmd_simulate(
    model_path: &Path,
    flags: SimulateOptions,
    config: Option<&Path>,
    sets: &[String],
    sink: &Sink,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let (cfg_value, cfg_inputs) = load_config(config, sets, Value::Null)?;
    let file_opts: SimulateOptions = from_value(cfg_value, "config")?;
    let opts = SimulateOptions {
        h: flags.h.or(file_opts.h),
        t_end: flags.t_end.or(file_opts.t_end),
        n_paths: flags.n_paths.or(file_opts.n_paths),
        seed: flags.seed.or(file_opts.seed),
        epsilon: flags.epsilon.or(file_opts.epsilon),
    };
    let settings = SimSettings {
        h: opts.h.unwrap_or(1.0),
        t_end: opts.t_end.unwrap_or(365.0),
        n_paths: opts.n_paths.unwrap_or(1),
        seed: opts.seed.unwrap_or(0),
        epsilon: opts.epsilon.unwrap_or(0.05),
        x0: None,
    };
    if settings.n_paths == 0 {
        return Err(Error::Validation("--paths must be at least 1".into()));
    }
    let effective = serde_json::json!({
        "h": settings.h, "T": settings.t_end, "n_paths": settings.n_paths,
        "seed": settings.seed, "epsilon": settings.epsilon,
    });
    let bytes = read_bytes(model_path)?;
    let doc = parse_json(model_path, &bytes)?;
    let mut inputs: Vec<(&Path, &[u8])> = vec![(model_path, bytes.as_slice())];
    inputs.extend(cfg_inputs.iter().map(|(p, b)| (p.as_path(), b.as_slice())));
    let manifest = RunManifest::new("simulate", Some(&effective), &inputs, Some(settings.seed));

    let (paths, level): (PathSet, Option<FittedMcarModel>) = if doc.get("seasonality").is_some() {
        let m: FittedMcarModel = from_value(doc, "fitted model")?;
        (simulate_extended_mcar(&m, &settings)?, Some(m))
    } else {
        if doc.get("drivers").is_none() {
            return Err(Error::Validation(
                "model file needs a \"drivers\" list of NIG laws (one per noise channel) to be simulated".into(),
            ));
        }
        let m: DrivenModelFile = from_value(doc, "model file")?;
        let sys = assemble_companion(&m.model.to_coefficients()?)?;
        (simulate_mcarma(&sys, &m.drivers, &settings)?, None)
    };

    let mut csv = manifest.comment_line()?;
    csv.push('\n');
    let mut body = Vec::new();
    paths.write_csv(&mut body)?;
    csv.push_str(std::str::from_utf8(&body).map_err(|e| Error::Numeric(e.to_string()))?);
    sink.artifact(&csv, stdout)?;

    let mut text = format!(
        "{} path(s), h = {}, T = {}, seed = {}\n",
        paths.values.len(),
        fmt_table(settings.h),
        fmt_table(settings.t_end),
        settings.seed
    );
    for w in &paths.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    let _ = writeln!(text, "  {:>4}{:>12}{:>12}{:>12}", "dim", "time mean", "std error", "level mean");
    for (k, (mean, se)) in paths.time_average_summary().iter().enumerate() {
        let lvl = match &level {
            Some(m) => {
                let n = paths.n_steps;
                (1..=n).map(|s| m.seasonality.eval(k, calendar_of(paths.time(s)).0)).sum::<f64>() / n as f64
            }
            None => 0.0,
        };
        let _ = writeln!(text, "  {:>4}{:>12}{:>12}{:>12}", k + 1, fmt_table(*mean), fmt_table(*se), fmt_table(lvl));
    }
    sink.report(&text, stdout, stderr)
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

/// Jump channel of an experiment file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpChannelFile {
    pub measure: LevyMeasure,
    #[serde(default = "identity_map")]
    pub map: JumpMap,
}

fn identity_map() -> JumpMap {
    JumpMap::Identity
}

fn default_paths() -> usize {
    2000
}

fn default_t_end() -> f64 {
    1.0
}

/// Serializable strong-error experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub diffusion: AffineDiffusion,
    #[serde(default)]
    pub jumps: Option<JumpChannelFile>,
    #[serde(default = "default_t_end", rename = "T")]
    pub t_end: f64,
    #[serde(default = "crate::simulate::default_h_list")]
    pub h_list: Vec<f64>,
    #[serde(default)]
    pub epsilon_list: Vec<f64>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentFile {
    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        Ok(ExperimentSpec {
            diffusion: self.diffusion.to_spec()?,
            jumps: self.jumps.as_ref().map(|j| (j.measure.clone(), j.map)),
            t_end: self.t_end,
            h_list: self.h_list.clone(),
            epsilon_list: self.epsilon_list.clone(),
            n_paths: self.n_paths,
            seed: self.seed,
        })
    }
}

pub fn convergence_summary(t: &ErrorTable, has_jumps: bool) -> String {
    let mut s = format!(
        "reference h = {}, reference epsilon = {}\n  {:>11}{:>11}{:>13}{:>11}{:>11}\n",
        fmt_table(t.reference_h),
        fmt_table(t.reference_epsilon),
        "h",
        "epsilon",
        "error",
        "std err",
        "G(eps)"
    );
    for c in &t.cells {
        let _ = writeln!(
            s,
            "  {:>11}{:>11}{:>13}{:>11}{:>11}",
            fmt_table(c.h),
            fmt_table(c.epsilon),
            fmt_table(c.error_l2_sup),
            fmt_table(c.std_error),
            if has_jumps { fmt_table(c.g_epsilon) } else { "-".into() }
        );
    }
    let slope = |x: Option<f64>| x.map(fmt_table).unwrap_or_else(|| "n/a".into());
    let _ = writeln!(s, "slope in h: {}", slope(t.slope_h));
    let _ = writeln!(s, "slope in G(eps): {}", slope(t.slope_g));
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_convergence(
    path: &Path,
    sets: &[String],
    paths: Option<usize>,
    seed: Option<u64>,
    t_end: Option<f64>,
    sink: &Sink,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let bytes = read_bytes(path)?;
    let mut v = parse_json(path, &bytes)?;
    apply_overrides(&mut v, sets)?;
    let mut file: ExperimentFile = from_value(v, "experiment spec")?;
    if let Some(n) = paths {
        file.n_paths = n;
    }
    if let Some(s) = seed {
        file.seed = s;
    }
    if let Some(t) = t_end {
        file.t_end = t;
    }
    let effective = serde_json::to_value(&file)?;
    let manifest = RunManifest::new("convergence", Some(&effective), &[(path, &bytes)], Some(file.seed));
    let table = strong_error_experiment(&file.to_spec()?)?;
    let mut csv = manifest.comment_line()?;
    csv.push('\n');
    let mut body = Vec::new();
    table.write_csv(&mut body)?;
    csv.push_str(std::str::from_utf8(&body).map_err(|e| Error::Numeric(e.to_string()))?);
    sink.artifact(&csv, stdout)?;
    sink.report(&convergence_summary(&table, file.jumps.is_some()), stdout, stderr)
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub mcar: Option<StationarityReport>,
    pub var: Option<StationarityReport>,
    pub perturbation: Option<f64>,
}

fn cmd_check(input: &Path, perturb: Option<f64>, sink: &Sink, stdout: &mut dyn Write) -> Result<()> {
    let bytes = read_bytes(input)?;
    let doc = parse_json(input, &bytes)?;
    let settings = serde_json::json!({ "perturb": perturb });
    let manifest = RunManifest::new("check", Some(&settings), &[(input, &bytes)], None);
    let mut report = CheckReport {
        mcar: None,
        var: None,
        perturbation: perturb,
    };
    let model_report = |mf: &ModelFile| -> Result<StationarityReport> {
        let mut sys = assemble_companion(&mf.to_coefficients()?)?;
        if let Some(rho) = perturb {
            sys = perturb_companion(&sys, rho, PerturbMode::EveryEntry);
        }
        mcarma_stationarity(&sys)
    };
    if doc.get("seasonality").is_some() {
        let m: FittedMcarModel = from_value(doc, "fitted model")?;
        report.mcar = Some(model_report(&m.model)?);
        report.var = m.diagnostics.as_ref().map(|d| d.var_stationarity.clone());
    } else if doc.get("phi_blocks").is_some() {
        if perturb.is_some() {
            return Err(Error::Validation("--perturb applies to model files only".into()));
        }
        let rf: RepresentationFile = from_value(doc, "representation file")?;
        report.var = Some(var_stationarity(&rf.to_representation()?)?);
    } else if doc.get("A_blocks").is_some() {
        let mf: ModelFile = from_value(doc, "model file")?;
        report.mcar = Some(model_report(&mf)?);
    } else {
        return Err(Error::Validation(format!(
            "{}: not a model, representation or fitted-model file",
            input.display()
        )));
    }
    let mut text = String::new();
    if let Some(r) = &report.mcar {
        let title = match perturb {
            Some(rho) => format!("eigenvalues of A (bottom row shifted by {})", fmt_table(rho)),
            None => "eigenvalues of A".into(),
        };
        text.push_str(&stationarity_table(&title, r, "stationary (all real parts < 0)"));
    }
    if let Some(r) = &report.var {
        text.push_str(&stationarity_table("eigenvalues of F", r, "stationary (all moduli < 1)"));
        let max = r.moduli.iter().cloned().fold(0.0, f64::max);
        let _ = writeln!(text, "  max modulus: {}", fmt_table(max));
    }
    match &sink.out {
        Some(_) => {
            sink.artifact(&with_manifest(&report, &manifest)?, stdout)?;
            stdout.write_all(text.as_bytes())?;
        }
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}
