//! `mcam`: command-line front end for the MCAM simulator.
//!
//! Exit status: 0 success, 1 failed check or output error, 2 configuration
//! error, 3 capacity error, 4 data error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use mcam_core::encoding::Scheme;
use mcam_core::harness::{
    encode_table, read_table, run_sweep, simulate, ExperimentConfig, HarnessError, VectorFormat,
};
use mcam_core::hat::{demo_step, gradcheck, SurrogateConfig};
use mcam_core::mcam::{CurrentModelParams, SenseConfig};
use mcam_core::oracle::mismatch_distribution;
use mcam_core::search::{Accumulation, ClassAggregation, SearchMode};
use mcam_core::QuantConfig;

#[derive(Parser)]
#[command(name = "mcam", version, about = "NAND-flash MCAM vector search simulator")]
struct Cli {
    /// TOML experiment config; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize and encode a vector file, one line per row.
    Encode(EncodeArgs),
    /// Exhaustive per-cell mismatch statistics as CSV.
    AnalyzeMismatch(MismatchArgs),
    /// Run one episode and print a per-query trace.
    Simulate(SimulateArgs),
    /// Sweep (scheme, cl) points and emit CSV and JSON reports.
    Sweep(SweepArgs),
    /// Validate the training surrogates against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    /// bin or csv; guessed from the extension by default.
    #[arg(long)]
    format: Option<VectorFormat>,
    #[arg(long, default_value = "mtmc")]
    scheme: Scheme,
    #[arg(long, default_value_t = 4)]
    cl: usize,
    /// Quantization levels [default: scheme capacity].
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long, default_value_t = 3.0)]
    clip_sigma: f64,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MismatchArgs {
    #[arg(long, default_value = "mtmc")]
    scheme: Scheme,
    #[arg(long, default_value_t = 4)]
    cl: usize,
    /// Values enumerated [default: scheme capacity, at most 1024].
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Overrides for the experiment config. Unset flags keep the file (or default) value.
#[derive(Args, Default)]
struct ExperimentArgs {
    /// Vector file; the built-in synthetic clusters are used when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    format: Option<VectorFormat>,
    /// [default: 5]
    #[arg(long)]
    n_way: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    k_shot: Option<usize>,
    /// [default: 5]
    #[arg(long)]
    query_per_class: Option<usize>,
    /// svss or avss [default: avss]
    #[arg(long)]
    mode: Option<SearchMode>,
    /// vote, analog or exact_mismatch [default: vote]
    #[arg(long, value_parser = parse_named::<Accumulation>)]
    accumulation: Option<Accumulation>,
    /// votes or scores [default: votes]
    #[arg(long, value_parser = parse_named::<ClassAggregation>)]
    aggregation: Option<ClassAggregation>,
    /// Support quantization levels [default: scheme capacity].
    #[arg(long)]
    support_levels: Option<u32>,
    /// [default: 3.0]
    #[arg(long)]
    clip_sigma: Option<f64>,
    /// Episode sampling seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// default, noiseless or bottleneck-heavy; applied before the device flags below.
    #[arg(long)]
    device_preset: Option<String>,
    /// [default: 1.0]
    #[arg(long)]
    i0: Option<f64>,
    /// [default: 0.12]
    #[arg(long)]
    alpha: Option<f64>,
    /// Four comma-separated gains for max mismatch 0..3 [default: 1,0.8,0.5,0.2].
    #[arg(long, value_delimiter = ',', num_args = 4)]
    gain: Option<Vec<f64>>,
    /// [default: 0.06]
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    device_seed: Option<u64>,
    /// ideal, threshold:<current> or percentile:<fraction> [default: ideal]
    #[arg(long, value_parser = parse_sense)]
    sense: Option<SenseConfig>,
    /// [default: 1.0]
    #[arg(long)]
    unit_cost: Option<f64>,
    /// Synthetic dataset: classes [default: 50].
    #[arg(long)]
    synth_classes: Option<usize>,
    /// Synthetic dataset: members per class [default: 20].
    #[arg(long)]
    synth_per_class: Option<usize>,
    /// Synthetic dataset: dimension [default: 48].
    #[arg(long)]
    synth_dim: Option<usize>,
    /// Synthetic dataset: center spread [default: 4.0].
    #[arg(long)]
    synth_separation: Option<f64>,
    /// Synthetic dataset: within-class deviation [default: 1.0].
    #[arg(long)]
    synth_spread: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value = "mtmc")]
    scheme: Scheme,
    #[arg(long, default_value_t = 4)]
    cl: usize,
    #[arg(long, default_value_t = 0)]
    episode: usize,
    /// Also print votes per iteration.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Comma-separated schemes [default: mtmc].
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Comma-separated code word lengths, `a..b` for an inclusive range [default: 1,2,4,8].
    #[arg(long, value_parser = parse_cls)]
    cls: Option<CodeLengths>,
    /// [default: 30]
    #[arg(long)]
    episodes: Option<usize>,
    /// Output prefix; writes <prefix>.csv and <prefix>.json. CSV goes to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 4)]
    cl: usize,
    #[arg(long, default_value_t = 1000)]
    points: usize,
    /// Largest code word length for the straight-through slope check.
    #[arg(long, default_value_t = 8)]
    max_cl: usize,
    #[arg(long, default_value_t = 0.2)]
    sharpness: f64,
    #[arg(long, default_value_t = -40.0)]
    threshold: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    sa_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    match_tol: f64,
}

#[derive(Clone, Debug)]
struct CodeLengths(Vec<usize>);

fn parse_named<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_sense(s: &str) -> Result<SenseConfig, String> {
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{v}: {e}"));
    let cfg = match s.split_once(':') {
        None if s == "ideal" => SenseConfig::IdealTopCurrent,
        Some(("threshold", v)) => SenseConfig::FixedThreshold { threshold: num(v)? },
        Some(("percentile", v)) => SenseConfig::Percentile { fraction: num(v)? },
        _ => return Err(format!("unknown sense policy '{s}'")),
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn parse_cls(s: &str) -> Result<CodeLengths, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let n = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v}: {e}"));
        match part.split_once("..") {
            Some((a, b)) => out.extend(n(a)?..=n(b)?),
            None => out.push(n(part)?),
        }
    }
    Ok(CodeLengths(out))
}

struct Failure {
    code: u8,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl ToString) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn output_error(message: impl ToString) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn base_config(cli_config: &Option<PathBuf>) -> Result<ExperimentConfig, Failure> {
    match cli_config {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

impl ExperimentArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), Failure> {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        if let Some(preset) = &self.device_preset {
            let seed = cfg.device.seed;
            cfg.device = match preset.as_str() {
                "default" => CurrentModelParams::default(),
                "noiseless" => CurrentModelParams::noiseless(),
                "bottleneck-heavy" => CurrentModelParams::bottleneck_heavy(),
                other => return Err(config_error(format!("unknown device preset '{other}'"))),
            };
            cfg.device.seed = seed;
        }
        if self.dataset.is_some() {
            cfg.dataset = self.dataset.clone();
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        if self.support_levels.is_some() {
            cfg.support_levels = self.support_levels;
        }
        if let Some(g) = &self.gain {
            cfg.device.bottleneck_gain = [g[0], g[1], g[2], g[3]];
        }
        set! {
            n_way => cfg.n_way,
            k_shot => cfg.k_shot,
            query_per_class => cfg.query_per_class,
            mode => cfg.mode,
            accumulation => cfg.accumulation,
            aggregation => cfg.aggregation,
            clip_sigma => cfg.quant.clip_sigma,
            seed => cfg.seed,
            i0 => cfg.device.i0,
            alpha => cfg.device.alpha,
            noise_sigma => cfg.device.noise_sigma,
            device_seed => cfg.device.seed,
            sense => cfg.sense,
            unit_cost => cfg.unit_cost,
            synth_classes => cfg.synthetic.classes,
            synth_per_class => cfg.synthetic.per_class,
            synth_dim => cfg.synthetic.dim,
            synth_separation => cfg.synthetic.separation,
            synth_spread => cfg.synthetic.spread,
        }
        Ok(())
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| output_error(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_encode(a: &EncodeArgs) -> Result<(), Failure> {
    let format = match a.format {
        Some(f) => f,
        None => VectorFormat::from_path(&a.input).map_err(HarnessError::from)?,
    };
    let levels = match a.levels {
        Some(l) => l,
        None => a.scheme.default_levels(a.cl).map_err(config_error)?,
    };
    let quant = QuantConfig::new(levels, a.clip_sigma).map_err(config_error)?;
    let table = read_table(&a.input, format).map_err(HarnessError::from)?;
    let rows = encode_table(&table, a.scheme, a.cl, levels, &quant).map_err(|e| match e {
        HarnessError::Encoding(inner) => config_error(inner),
        other => other.into(),
    })?;
    let mut out = open_output(&a.output)?;
    let write = |out: &mut Box<dyn Write>| -> std::io::Result<()> {
        writeln!(out, "# scheme={} cl={} levels={} dim={}", a.scheme, a.cl, levels, table.dim())?;
        for (label, enc) in &rows {
            let dims: Vec<String> = (0..enc.dim())
                .map(|i| enc.dimension(i).iter().map(|w| char::from(b'0' + w.level())).collect())
                .collect();
            writeln!(out, "{label}\t{}", dims.join(" "))?;
        }
        out.flush()
    };
    write(&mut out).map_err(output_error)
}

fn cmd_mismatch(a: &MismatchArgs) -> Result<(), Failure> {
    let cap = a.scheme.capacity(a.cl).map_err(config_error)?;
    let levels = a.levels.unwrap_or(cap.min(1024) as u32);
    let stats = mismatch_distribution(a.scheme, a.cl, levels).map_err(config_error)?;
    let out = open_output(&a.output)?;
    stats.write_csv(out).map_err(output_error)
}

fn cmd_simulate(cfg: &ExperimentConfig, a: &SimulateArgs) -> Result<(), Failure> {
    let outcome = simulate(cfg, a.scheme, a.cl, a.episode)?;
    let mut out = std::io::stdout().lock();
    let c = &outcome.counters;
    let mut lines = vec![
        format!(
            "scheme={} cl={} mode={} episode={} strings={} iterations={} sense_ops={} energy_proxy={}",
            a.scheme, a.cl, cfg.mode, a.episode, outcome.strings, c.iterations, c.sense_ops, c.energy_proxy
        ),
    ];
    for (i, t) in outcome.traces.iter().enumerate() {
        let top = t.class_totals.get(&t.predicted).copied().unwrap_or(0.0);
        lines.push(format!(
            "query {i}: label={} predicted={} oracle={} score={top} {}",
            t.label,
            t.predicted,
            t.oracle,
            if t.predicted == t.label { "ok" } else { "miss" }
        ));
        if a.verbose && !t.winners_per_iteration.is_empty() {
            let w: Vec<String> = t.winners_per_iteration.iter().map(usize::to_string).collect();
            lines.push(format!("  voters per iteration: {}", w.join(" ")));
        }
    }
    lines.push(format!(
        "accuracy={} oracle_accuracy={} agreement={}/{}",
        outcome.accuracy(),
        outcome.oracle_accuracy(),
        outcome.agreement,
        outcome.queries
    ));
    for l in lines {
        writeln!(out, "{l}").map_err(output_error)?;
    }
    Ok(())
}

fn cmd_sweep(cfg: &mut ExperimentConfig, a: &SweepArgs) -> Result<(), Failure> {
    if let Some(s) = &a.schemes {
        cfg.schemes = s.clone();
    }
    if let Some(c) = &a.cls {
        cfg.cls = c.0.clone();
    }
    if let Some(e) = a.episodes {
        cfg.episodes = e;
    }
    if a.output.is_some() {
        cfg.output = a.output.clone();
    }
    let report = run_sweep(cfg)?;
    match &cfg.output {
        Some(prefix) => {
            let (csv, json) = report.write_files(prefix)?;
            println!("wrote {} and {}", csv.display(), json.display());
        }
        None => report.write_csv(std::io::stdout().lock()).map_err(output_error)?,
    }
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<(), Failure> {
    let cfg = SurrogateConfig {
        sa_sharpness: a.sharpness,
        sa_threshold: a.threshold,
        ..SurrogateConfig::new(a.cl)
    };
    let r = gradcheck(&cfg, a.points, a.max_cl).map_err(config_error)?;
    let step = demo_step(&cfg, a.lr).map_err(config_error)?;
    println!(
        "sa: {} points, max relative error {:.3e} (tol {:.0e})",
        r.sa_points, r.sa_max_rel_error, a.sa_tol
    );
    println!(
        "ste: {} violations of unit aggregate slope over {} pairs",
        r.ste_violations, r.ste_pairs_checked
    );
    println!(
        "match: {} components, max abs error {:.3e} (tol {:.0e})",
        r.match_components, r.match_max_abs_error, a.match_tol
    );
    println!("demo step: loss {:.6} -> {:.6}", step.loss_before, step.loss_after);
    if r.passed(a.sa_tol, a.match_tol) {
        println!("PASS");
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "gradient check failed".into(),
        })
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::AnalyzeMismatch(a) => cmd_mismatch(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Simulate(a) => {
            let mut cfg = base_config(&cli.config)?;
            a.exp.apply(&mut cfg)?;
            cmd_simulate(&cfg, a)
        }
        Command::Sweep(a) => {
            let mut cfg = base_config(&cli.config)?;
            a.exp.apply(&mut cfg)?;
            cmd_sweep(&mut cfg, a)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
