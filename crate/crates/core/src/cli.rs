//! Command-line front end.
//!
//! Every file written starts with a `# manifest {…}` line holding the exact
//! arguments of the run; `replay` re-executes them.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::binsim::{self, SimError, SimParams, CSV_HEADER};
use crate::macmodel::{self, AuxPolicy, CoopConfig, InputConstraint, MacChannel, Mode};
use crate::optimizer::{self, BoundaryResult, OptError, SearchConfig};
use crate::rateregion::{hausdorff, region_compare, RateRegion};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
/// Hausdorff distance below which a sweep step is reported as saturated.
const SATURATION_GAP: f64 = 0.02;

#[derive(Debug, Parser)]
#[command(name = "macstate", version, about = "Rate regions of state-dependent MACs with cooperating encoders")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace one region and write its frontier and witnesses.
    Region(RegionArgs),
    /// Trace several cooperation settings on one channel and compare them.
    Compare(CompareArgs),
    /// Simulate the binned code at one or more blocklengths.
    Simulate(SimulateArgs),
    /// Trace one region per cooperation rate and check nesting.
    Sweep(SweepArgs),
    /// Re-run the command recorded in an output file's manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
struct ChannelArgs {
    /// Named channel; `switch_bsc` needs --pz.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    pz: Option<f64>,
    /// Channel spec JSON file.
    #[arg(long, conflicts_with = "preset")]
    channel: Option<PathBuf>,
    /// Cap on the fraction of ones sent by encoder 1.
    #[arg(long, allow_negative_numbers = true)]
    p1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 2)]
    u_card: usize,
    #[arg(long, default_value_t = 2)]
    v_card: usize,
    /// Number of weighted-sum directions.
    #[arg(long, default_value_t = 65)]
    directions: usize,
    #[arg(long, default_value_t = 24)]
    restarts: usize,
    /// Coordinate-ascent sweeps per restart.
    #[arg(long, default_value_t = 400)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            u_card: self.u_card,
            v_card: self.v_card,
            weight_count: self.directions,
            restarts: self.restarts,
            local_steps: self.steps,
            seed: self.seed,
            ..SearchConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
struct CoopArgs {
    #[arg(long)]
    mode: Mode,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c12: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c21: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c12m: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c12s: f64,
}

impl CoopArgs {
    fn config(&self) -> CoopConfig {
        CoopConfig {
            mode: self.mode,
            c12: self.c12,
            c21: self.c21,
            c12m: self.c12m,
            c12s: self.c12s,
        }
    }
}

#[derive(Debug, Args)]
struct RegionArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    coop: CoopArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Frontier CSV; witnesses go next to it as `<stem>.witness.json`.
    #[arg(long, default_value = "region.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// `mode[:key=value,…]`, e.g. `split:c12m=0.25,c12s=0.25`. Repeat.
    #[arg(long = "run", required = true)]
    runs: Vec<String>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 2e-3)]
    tol: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value = "one_way")]
    mode: Mode,
    /// Comma-separated cooperation rates.
    #[arg(long, allow_hyphen_values = true)]
    c12: String,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 2e-3)]
    tol: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Policy JSON, or a witness dump written by `region`.
    #[arg(long)]
    policy: PathBuf,
    /// Which witness of a dump to use.
    #[arg(long, default_value_t = 0)]
    witness: usize,
    /// Comma-separated blocklengths.
    #[arg(long, default_value = "8,12,16")]
    n: String,
    #[arg(long, allow_negative_numbers = true)]
    r1: f64,
    #[arg(long, allow_negative_numbers = true)]
    r2: f64,
    #[arg(long, allow_negative_numbers = true)]
    c12: f64,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sim.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Any file written by this tool.
    manifest: PathBuf,
    /// Write the reproduced output here instead of the recorded location.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Header of every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, verbatim.
    pub argv: Vec<String>,
    pub channel: String,
    pub seed: u64,
    pub output: String,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    msg: String,
}

impl CliError {
    fn invalid(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INVALID,
            msg: msg.into(),
        }
    }
}

impl From<OptError> for CliError {
    fn from(e: OptError) -> Self {
        let code = match e {
            OptError::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_INVALID,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::MemoryGuard(_) => EXIT_GUARD,
            _ => EXIT_INVALID,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<macmodel::ModelError> for CliError {
    fn from(e: macmodel::ModelError) -> Self {
        CliError::invalid(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::invalid(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    configure_threads();
    let rest: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match dispatch(cli.cmd, rest, None) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            e.code
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("MACSTATE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // A pool may already exist when embedded; keep it then.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(cmd: Command, argv: Vec<String>, redirect: Option<PathBuf>) -> CliResult {
    match cmd {
        Command::Region(a) => cmd_region(a, argv, redirect),
        Command::Compare(a) => cmd_compare(a, argv, redirect),
        Command::Simulate(a) => cmd_simulate(a, argv, redirect),
        Command::Sweep(a) => cmd_sweep(a, argv, redirect),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn load_channel(a: &ChannelArgs) -> CliResult<(MacChannel, InputConstraint, String)> {
    let (ch, mut constr, source) = match (&a.preset, &a.channel) {
        (Some(p), None) => {
            let pz = a
                .pz
                .ok_or_else(|| CliError::invalid("field `pz`: required by --preset"))?;
            let doc = serde_json::json!({ "preset": p, "pz": pz }).to_string();
            let (ch, c) = macmodel::parse_channel_spec(&doc)?;
            (ch, c, format!("preset:{p}:pz={pz}"))
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            let (ch, c) = macmodel::parse_channel_spec(&text)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            (ch, c, format!("file:{}", path.display()))
        }
        _ => return Err(CliError::invalid("give exactly one of --preset or --channel")),
    };
    if let Some(p1) = a.p1 {
        constr.p1 = p1;
        constr.active1 = true;
    }
    if let Some(p2) = a.p2 {
        constr.p2 = p2;
        constr.active2 = true;
    }
    constr
        .validate()
        .map_err(|e| CliError::invalid(e.to_string()))?;
    Ok((ch, constr, source))
}

fn manifest_line(m: &RunManifest) -> String {
    format!(
        "# manifest {}\n",
        serde_json::to_string(m).expect("manifest serializes")
    )
}

fn manifest(command: &str, argv: &[String], channel: &str, seed: u64, output: &Path) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        argv: argv.to_vec(),
        channel: channel.to_string(),
        seed,
        output: output.display().to_string(),
    }
}

fn witness_path(csv: &Path) -> PathBuf {
    csv.with_extension("witness.json")
}

#[derive(Debug, Serialize, Deserialize)]
struct WitnessEntry {
    r1: f64,
    r2: f64,
    policy: AuxPolicy,
}

#[derive(Debug, Serialize, Deserialize)]
struct WitnessDump {
    manifest: RunManifest,
    coop: CoopConfig,
    witnesses: Vec<WitnessEntry>,
    diagnostics: Vec<optimizer::DirectionDiag>,
}

fn write_region(
    path: &Path,
    m: &RunManifest,
    coop: &CoopConfig,
    res: &BoundaryResult,
) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, manifest_line(m) + &res.region.to_csv(coop))?;
    let dump = WitnessDump {
        manifest: m.clone(),
        coop: *coop,
        witnesses: res
            .region
            .boundary
            .iter()
            .zip(&res.witnesses)
            .map(|(p, w)| WitnessEntry {
                r1: p.r1,
                r2: p.r2,
                policy: w.clone(),
            })
            .collect(),
        diagnostics: res.diagnostics.clone(),
    };
    let json = serde_json::to_string_pretty(&dump).expect("witnesses serialize");
    fs::write(witness_path(path), json + "\n")?;
    Ok(())
}

fn trace(
    ch: &MacChannel,
    coop: &CoopConfig,
    constr: &InputConstraint,
    cfg: &SearchConfig,
) -> CliResult<BoundaryResult> {
    coop.validate()?;
    Ok(optimizer::trace_boundary(ch, coop, constr, cfg)?)
}

fn cmd_region(a: RegionArgs, argv: Vec<String>, redirect: Option<PathBuf>) -> CliResult {
    let (ch, constr, source) = load_channel(&a.channel)?;
    let coop = a.coop.config();
    let res = trace(&ch, &coop, &constr, &a.search.config())?;
    let m = manifest("region", &argv, &source, a.search.seed, &a.out);
    let path = redirect.unwrap_or(a.out);
    write_region(&path, &m, &coop, &res)?;
    println!(
        "{}: {} frontier points, max R1 {:.6}, max R2 {:.6}",
        path.display(),
        res.region.boundary.len(),
        res.region.max_r1(),
        res.region.max_r2()
    );
    Ok(())
}

/// Parses `mode[:key=value,…]`.
fn parse_run(spec: &str) -> CliResult<CoopConfig> {
    let (mode, params) = spec.split_once(':').unwrap_or((spec, ""));
    let mode: Mode = mode.parse()?;
    let mut c = CoopConfig {
        mode,
        c12: 0.0,
        c21: 0.0,
        c12m: 0.0,
        c12s: 0.0,
    };
    for kv in params.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("run `{spec}`: expected key=value, got `{kv}`")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| CliError::invalid(format!("run `{spec}`: `{v}` is not a number")))?;
        match k {
            "c12" => c.c12 = v,
            "c21" => c.c21 = v,
            "c12m" => c.c12m = v,
            "c12s" => c.c12s = v,
            _ => return Err(CliError::invalid(format!("run `{spec}`: unknown key `{k}`"))),
        }
    }
    c.validate()?;
    Ok(c)
}

fn label(c: &CoopConfig) -> String {
    match c.mode {
        Mode::TwoWay => format!("two_way(c12={},c21={})", c.c12, c.c21),
        Mode::Split => format!("split(c12m={},c12s={})", c.c12m, c.c12s),
        m => format!("{m}(c12={})", c.c12),
    }
}

fn verdict_lines(labels: &[String], regions: &[RateRegion], tol: f64, all_pairs: bool) -> String {
    let mut out = String::new();
    for i in 0..regions.len() {
        let others: Vec<usize> = if all_pairs {
            (i + 1..regions.len()).collect()
        } else {
            (i + 1..regions.len().min(i + 2)).collect()
        };
        for k in others {
            let c = region_compare(&regions[i], &regions[k], tol);
            let _ = writeln!(
                out,
                "{},{},{},{:.6}",
                labels[i], labels[k], c.verdict, c.max_gap
            );
        }
    }
    out
}

fn cmd_compare(a: CompareArgs, argv: Vec<String>, redirect: Option<PathBuf>) -> CliResult {
    if a.runs.len() < 2 {
        return Err(CliError::invalid("compare needs at least two --run settings"));
    }
    let coops: Vec<CoopConfig> = a.runs.iter().map(|r| parse_run(r)).collect::<CliResult<_>>()?;
    let (ch, constr, source) = load_channel(&a.channel)?;
    let cfg = a.search.config();
    let dir = redirect.unwrap_or_else(|| a.out_dir.clone());
    fs::create_dir_all(&dir)?;
    let m = manifest("compare", &argv, &source, a.search.seed, &a.out_dir);
    let mut regions = Vec::new();
    for (k, coop) in coops.iter().enumerate() {
        let res = trace(&ch, coop, &constr, &cfg)?;
        write_region(&dir.join(format!("region_{k}.csv")), &m, coop, &res)?;
        regions.push(res.region);
    }
    let labels: Vec<String> = coops.iter().map(label).collect();
    let body = verdict_lines(&labels, &regions, a.tol, true);
    fs::write(
        dir.join("verdicts.csv"),
        manifest_line(&m) + "a,b,verdict,max_gap\n" + &body,
    )?;
    print!("{body}");
    Ok(())
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> CliResult<Vec<T>> {
    let v: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| CliError::invalid(format!("field `{what}`: `{t}` is not valid")))
        })
        .collect::<CliResult<_>>()?;
    if v.is_empty() {
        return Err(CliError::invalid(format!("field `{what}`: empty list")));
    }
    Ok(v)
}

fn cmd_sweep(a: SweepArgs, argv: Vec<String>, redirect: Option<PathBuf>) -> CliResult {
    let rates: Vec<f64> = parse_list("c12", &a.c12)?;
    let coops: Vec<CoopConfig> = rates
        .iter()
        .map(|&c12| {
            let c = CoopConfig {
                mode: a.mode,
                c12: 0.0,
                c21: 0.0,
                c12m: 0.0,
                c12s: 0.0,
            };
            match a.mode {
                Mode::Split => CoopConfig { c12m: c12 / 2.0, c12s: c12 / 2.0, ..c },
                _ => CoopConfig { c12, ..c },
            }
        })
        .collect();
    for c in &coops {
        c.validate()?;
    }
    let (ch, constr, source) = load_channel(&a.channel)?;
    let cfg = a.search.config();
    let dir = redirect.unwrap_or_else(|| a.out_dir.clone());
    fs::create_dir_all(&dir)?;
    let m = manifest("sweep", &argv, &source, a.search.seed, &a.out_dir);
    let mut regions = Vec::new();
    for (coop, rate) in coops.iter().zip(&rates) {
        let res = trace(&ch, coop, &constr, &cfg)?;
        write_region(&dir.join(format!("region_c12_{rate}.csv")), &m, coop, &res)?;
        regions.push(res.region);
    }
    let labels: Vec<String> = coops.iter().map(label).collect();
    let mut body = verdict_lines(&labels, &regions, a.tol, false);
    if let [.., prev, last] = regions.as_slice() {
        let gap = hausdorff(prev, last);
        let _ = writeln!(
            body,
            "# last step moves the region by {gap:.6} bits: {}",
            if gap < SATURATION_GAP { "saturated" } else { "not saturated" }
        );
    }
    fs::write(
        dir.join("nesting.csv"),
        manifest_line(&m) + "a,b,verdict,max_gap\n" + &body,
    )?;
    print!("{body}");
    Ok(())
}

fn load_policy(path: &Path, witness: usize) -> CliResult<AuxPolicy> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    if let Ok(p) = serde_json::from_str::<AuxPolicy>(&text) {
        return Ok(p);
    }
    let dump: WitnessDump = serde_json::from_str(&text)
        .map_err(|e| CliError::invalid(format!("field `policy`: {}: {e}", path.display())))?;
    dump.witnesses
        .into_iter()
        .nth(witness)
        .map(|w| w.policy)
        .ok_or_else(|| CliError::invalid(format!("field `witness`: no witness {witness}")))
}

fn cmd_simulate(a: SimulateArgs, argv: Vec<String>, redirect: Option<PathBuf>) -> CliResult {
    let (ch, _, source) = load_channel(&a.channel)?;
    let ns: Vec<usize> = parse_list("n", &a.n)?;
    let policy = load_policy(&a.policy, a.witness)?;
    let m = manifest("simulate", &argv, &source, a.seed, &a.out);
    let mut out = manifest_line(&m);
    out += "# rounding: counts floor(2^(n*R)) at least 1; bin exponent uses eps/2\n";
    out += CSV_HEADER;
    out.push('\n');
    let mut params = Vec::new();
    for &n in &ns {
        let p = SimParams {
            channel: ch.clone(),
            policy: policy.clone(),
            n,
            r1: a.r1,
            r2: a.r2,
            c12: a.c12,
            eps: a.eps,
            trials: a.trials,
            seed: a.seed,
        };
        p.validate()?;
        params.push(p);
    }
    for p in &params {
        let r = binsim::estimate_error(p)?;
        out += &r.csv_row();
        out.push('\n');
    }
    let path = redirect.unwrap_or(a.out);
    fs::write(&path, &out)?;
    print!("{}", out.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}

fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    let first = text.lines().next().unwrap_or_default();
    let json = first
        .strip_prefix("# manifest ")
        .ok_or_else(|| CliError::invalid(format!("{}: no manifest line", path.display())))?;
    serde_json::from_str(json).map_err(|e| CliError::invalid(format!("field `manifest`: {e}")))
}

fn cmd_replay(a: ReplayArgs) -> CliResult {
    let m = read_manifest(&a.manifest)?;
    let argv: Vec<String> = std::iter::once(m.tool.clone()).chain(m.argv.iter().cloned()).collect();
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::invalid(e.to_string()))?;
    if matches!(cli.cmd, Command::Replay(_)) {
        return Err(CliError::invalid("a manifest cannot record a replay"));
    }
    dispatch(cli.cmd, m.argv, a.out)
}
