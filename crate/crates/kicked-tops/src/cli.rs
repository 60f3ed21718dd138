//! Batch command-line front end. Each subcommand resolves a configuration
//! from flags layered over an optional JSON config file, stamps every output
//! with the config hash, and echoes the resolved run into `run.json` so any
//! artifact can be regenerated from its sidecar alone.

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{Map, Value, json};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::angular::{HalfInt, SubspaceSpec};
use crate::classical::{
    ClassicalMapParams, DEFAULT_CHAOS_THRESHOLD, DEFAULT_LYAPUNOV_STEPS, SectionPoint,
    classify_grid, poincare_section,
};
use crate::ensembles::{
    EnsembleKind, EnsembleSpec, Functional, mc_average, typical_entanglement_full,
    typical_entanglement_oe, typical_entanglement_ue, typical_linear_entropy,
};
use crate::entanglement::{Window, entanglement_history_from_point, entanglement_map};
use crate::filtering::{FilterConfig, chaotic_subspace, classify_eigenstates, eigenstate_features, label_counts};
use crate::floquet::{EigenSystem, build_floquet};
use crate::states::{PhaseSpaceGrid, husimi, husimi_entropy, projected_coherent};
use crate::{Error, Result, io};

/// Parses an angle given as a decimal (`0.5`), a rational (`3/2`), or a
/// rational multiple of pi (`pi`, `pi/2`, `3pi/2`, `-0.5pi`).
pub fn parse_angle(text: &str) -> Result<f64> {
    let cleaned = text.trim().to_ascii_lowercase().replace([' ', '*'], "");
    let bad = || Error::Config(format!("cannot parse angle '{text}'"));
    let (sign, body) = match cleaned.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, cleaned.as_str()),
    };
    let value = if let Some(idx) = body.find("pi") {
        let numerator = &body[..idx];
        let tail = &body[idx + 2..];
        let num: f64 = if numerator.is_empty() {
            1.0
        } else {
            numerator.parse().map_err(|_| bad())?
        };
        let den: f64 = match tail.strip_prefix('/') {
            Some(d) => d.parse().map_err(|_| bad())?,
            None if tail.is_empty() => 1.0,
            None => return Err(bad()),
        };
        num * PI / den
    } else if let Some((num, den)) = body.split_once('/') {
        let num: f64 = num.parse().map_err(|_| bad())?;
        let den: f64 = den.parse().map_err(|_| bad())?;
        num / den
    } else {
        body.parse().map_err(|_| bad())?
    };
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(sign * value)
}

/// Grid extents given as `N_VxN_PHI`, e.g. `61x61`.
pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("cannot parse grid '{text}' (expected e.g. 61x61)"));
    let (v, phi) = text.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        v.parse().map_err(|_| bad())?,
        phi.parse().map_err(|_| bad())?,
    ))
}

/// Averaging window given as `START:END`, e.g. `300:320` (inclusive).
pub fn parse_window(text: &str) -> Result<Window> {
    let bad = || Error::Config(format!("cannot parse window '{text}' (expected e.g. 300:320)"));
    let (a, b) = text.trim().split_once(':').ok_or_else(bad)?;
    let start: u64 = a.parse().map_err(|_| bad())?;
    let end: u64 = b.parse().map_err(|_| bad())?;
    Window::new(start, end)
}

/// A section point given as `DELTA_FZ:DELTA_PHI`; the azimuth part accepts
/// the angle grammar.
pub fn parse_point(text: &str) -> Result<SectionPoint> {
    let bad = || {
        Error::Config(format!(
            "cannot parse section point '{text}' (expected e.g. -0.5:pi/3)"
        ))
    };
    let (fz, phi) = text.trim().split_once(':').ok_or_else(bad)?;
    let delta_fz: f64 = fz.parse().map_err(|_| bad())?;
    Ok(SectionPoint::new(delta_fz, parse_angle(phi)?))
}

#[derive(Parser, Debug)]
#[command(
    name = "ktops",
    version,
    about = "Kicked coupled-tops toolkit: classical sections, Floquet spectra, entanglement, and ensemble statistics"
)]
pub struct Cli {
    /// Cap on worker threads (also applied to the BLAS backend).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON config file; explicit flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classical surface-of-section orbits.
    Poincare(PoincareArgs),
    /// Lyapunov exponent and regular/chaotic label on a section grid.
    LyapunovMap(LyapunovMapArgs),
    /// Floquet eigenphases and eigenvector weights for one block.
    Eigensystem(EigensystemArgs),
    /// Husimi distribution of an eigenstate or a projected coherent state.
    Husimi(HusimiArgs),
    /// Per-eigenstate phase-space features with regular/chaotic labels.
    Features(FeaturesArgs),
    /// Entanglement of an initially coherent state, step by step.
    EntHistory(EntHistoryArgs),
    /// Long-time entanglement averages over a grid of initial states.
    EntMap(EntMapArgs),
    /// Closed-form typical-entanglement values.
    Typical(TypicalArgs),
    /// Monte-Carlo ensemble averages, optionally over the chaotic subspace.
    Mc(McArgs),
}

/// Interaction and kick strengths shared by every dynamical command.
#[derive(Args, Clone, Debug)]
pub struct DynamicsArgs {
    /// Interaction strength alpha (decimal, rational, or pi-multiple).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Kick angle beta about z [default: pi/2].
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub beta: Option<f64>,
}

/// Block quantum numbers shared by the quantum commands.
#[derive(Args, Clone, Debug)]
pub struct BlockArgs {
    /// Spin size J (both spins have this magnitude) [default: 150].
    #[arg(long = "J", visible_alias = "spin")]
    pub spin: Option<f64>,
    /// Conserved total z component F_z of the block [default: 0].
    #[arg(long = "m-f", visible_alias = "mf")]
    pub m_f: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PoincareArgs {
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    /// Initial condition DELTA_FZ:DELTA_PHI; repeatable.
    #[arg(long = "ic", value_parser = parse_point, allow_hyphen_values = true)]
    pub ic: Vec<SectionPoint>,
    /// Launch a cell-centered grid of initial conditions when no --ic is
    /// given [default: 8x8].
    #[arg(long, value_parser = parse_grid)]
    pub ic_grid: Option<(usize, usize)>,
    /// Points recorded per orbit [default: 500].
    #[arg(long)]
    pub steps: Option<u64>,
    /// Output CSV [default: poincare.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LyapunovMapArgs {
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    /// Vertex-centered section grid [default: 61x61].
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Steps per exponent estimate [default: 2000].
    #[arg(long)]
    pub steps: Option<u64>,
    /// Exponent above which a point counts as chaotic [default: 0.05].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output CSV [default: lyapunov_map.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EigensystemArgs {
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Append each eigenstate's entanglement as a final column and print the
    /// block mean with its random-matrix reference.
    #[arg(long)]
    pub with_entanglement: bool,
    /// Also dump the raw Floquet matrix to this binary file.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    /// Output CSV [default: eigensystem.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HusimiArgs {
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Eigenstate index to render (phase-sorted order).
    #[arg(long)]
    pub k: Option<usize>,
    /// Render a projected coherent state at this polar offset instead of an
    /// eigenstate (requires --delta-phi).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub delta_theta: Option<f64>,
    /// Azimuthal offset of the coherent state.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub delta_phi: Option<f64>,
    /// Vertex-centered section grid [default: 61x61].
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Output CSV [default: husimi.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional grayscale heatmap (binary PGM, max-normalized).
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Vertex-centered grid for the Husimi entropies [default: 61x61].
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Chaotic box: minimum Husimi entropy.
    #[arg(long)]
    pub s_q_min: Option<f64>,
    /// Chaotic box: lower <J_z> bound.
    #[arg(long, allow_negative_numbers = true)]
    pub jz_min: Option<f64>,
    /// Chaotic box: upper <J_z> bound.
    #[arg(long, allow_negative_numbers = true)]
    pub jz_max: Option<f64>,
    /// Fraction of each feature range treated as an ambiguous margin.
    #[arg(long)]
    pub grey_fraction: Option<f64>,
    /// Output CSV [default: features.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EntHistoryArgs {
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Polar offset of the initial coherent state [default: pi/2].
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub delta_theta: Option<f64>,
    /// Azimuthal offset of the initial coherent state [default: pi/3].
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub delta_phi: Option<f64>,
    /// Last kick recorded [default: the window end].
    #[arg(long)]
    pub n_max: Option<u64>,
    /// Long-time averaging window START:END [default: 300:320].
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
    /// Output CSV [default: ent_history.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EntMapArgs {
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Vertex-centered grid of initial states [default: 61x61].
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Long-time averaging window START:END [default: 300:320].
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
    /// Also classify each grid point with the classical map and emit a
    /// chaotic column.
    #[arg(long)]
    pub with_classical: bool,
    /// Steps per classical exponent when --with-classical [default: 2000].
    #[arg(long)]
    pub classical_steps: Option<u64>,
    /// Classical chaos threshold when --with-classical [default: 0.05].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output CSV [default: ent_map.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional grayscale heatmap (binary PGM, max-normalized).
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TypicalArgs {
    /// Ensemble: oe, ue, or full (bipartite Haar).
    #[arg(long)]
    pub kind: Option<String>,
    /// Block dimension for oe/ue.
    #[arg(long)]
    pub d: Option<usize>,
    /// Smaller factor dimension for --kind full.
    #[arg(long)]
    pub d1: Option<usize>,
    /// Larger factor dimension for --kind full.
    #[arg(long)]
    pub d2: Option<usize>,
    /// Report the linear entropy instead of the entanglement entropy.
    #[arg(long)]
    pub linear: bool,
    /// Output JSON [default: typical.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct McArgs {
    /// Ensemble: oe or ue.
    #[arg(long)]
    pub kind: Option<String>,
    /// Block dimension (ignored with --subspace).
    #[arg(long)]
    pub d: Option<usize>,
    /// Sample count [default: 10000].
    #[arg(long)]
    pub samples: Option<u64>,
    /// RNG seed [default: 7].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Average the linear entropy instead of the entanglement entropy.
    #[arg(long)]
    pub linear: bool,
    /// Sample from the chaotic subspace of the (alpha, beta, J, m_f) block
    /// instead of the full space.
    #[arg(long)]
    pub subspace: bool,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Feature grid for the subspace filter [default: 61x61].
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Chaotic box override: minimum Husimi entropy.
    #[arg(long)]
    pub s_q_min: Option<f64>,
    /// Chaotic box override: lower <J_z> bound.
    #[arg(long, allow_negative_numbers = true)]
    pub jz_min: Option<f64>,
    /// Chaotic box override: upper <J_z> bound.
    #[arg(long, allow_negative_numbers = true)]
    pub jz_max: Option<f64>,
    /// Ambiguous margin as a fraction of each feature range.
    #[arg(long)]
    pub grey_fraction: Option<f64>,
    /// Output JSON [default: mc.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Config-file counterpart of the flags: every field optional, angles and
/// coordinates as plain numbers. A previous run's `run.json` is itself a
/// valid config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(alias = "J")]
    pub spin: Option<f64>,
    pub m_f: Option<f64>,
    pub grid: Option<String>,
    pub ic_grid: Option<String>,
    pub ic: Option<Vec<String>>,
    pub window: Option<String>,
    pub steps: Option<u64>,
    pub classical_steps: Option<u64>,
    pub threshold: Option<f64>,
    pub n_max: Option<u64>,
    pub k: Option<usize>,
    pub delta_theta: Option<f64>,
    pub delta_phi: Option<f64>,
    pub kind: Option<String>,
    pub d: Option<usize>,
    pub d1: Option<usize>,
    pub d2: Option<usize>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub linear: Option<bool>,
    pub subspace: Option<bool>,
    pub with_entanglement: Option<bool>,
    pub with_classical: Option<bool>,
    pub s_q_min: Option<f64>,
    pub jz_min: Option<f64>,
    pub jz_max: Option<f64>,
    pub grey_fraction: Option<f64>,
    pub out: Option<PathBuf>,
    pub pgm: Option<PathBuf>,
    pub matrix_out: Option<PathBuf>,
    // Echo-only fields, accepted so run.json round-trips as a config.
    pub command: Option<String>,
    pub library_version: Option<String>,
    pub config_hash: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))
    }

    fn grid_spec(&self) -> Result<Option<(usize, usize)>> {
        self.grid.as_deref().map(parse_grid).transpose()
    }

    fn window_spec(&self) -> Result<Option<Window>> {
        self.window.as_deref().map(parse_window).transpose()
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| Error::Config(format!("missing required parameter --{name}")))
}

fn pick_flag(flag: bool, file: Option<bool>) -> bool {
    flag || file.unwrap_or(false)
}

fn block_spec(block: &BlockArgs, file: &FileConfig) -> Result<SubspaceSpec> {
    let spin = HalfInt::from_f64(pick(block.spin, file.spin, 150.0))?;
    let m_f = HalfInt::from_f64(pick(block.m_f, file.m_f, 0.0))?;
    SubspaceSpec::new(spin, spin, m_f)
}

fn resolve_filter(
    s_q_min: Option<f64>,
    jz_min: Option<f64>,
    jz_max: Option<f64>,
    grey: Option<f64>,
    file: &FileConfig,
) -> FilterConfig {
    let defaults = FilterConfig::default();
    FilterConfig {
        s_q_min: pick(s_q_min, file.s_q_min, defaults.s_q_min),
        jz_min: pick(jz_min, file.jz_min, defaults.jz_min),
        jz_max: pick(jz_max, file.jz_max, defaults.jz_max),
        grey_fraction: pick(grey, file.grey_fraction, defaults.grey_fraction),
    }
}

/// Shortest-roundtrip decimal rendering used in all CSV output.
fn num(x: f64) -> String {
    format!("{x}")
}

/// Runs `body`, leaving `<out>.FAILED` behind when it errors so partial
/// artifacts are never mistaken for complete ones.
fn guarded<F: FnOnce() -> Result<()>>(out: &Path, body: F) -> Result<()> {
    io::clear_failure_marker(out);
    let result = body();
    if let Err(e) = &result {
        io::write_failure_marker(out, &e.to_string());
    }
    result
}

/// Hashes the resolved parameters, then writes `run.json` (the parameters
/// plus library version and hash) next to the primary output.
fn echo_run(out: &Path, mut params: Map<String, Value>) -> Result<String> {
    let hash = io::config_hash(&params)?;
    params.insert("library_version".into(), json!(env!("CARGO_PKG_VERSION")));
    params.insert("config_hash".into(), json!(hash));
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty());
    let path = dir.map_or_else(|| PathBuf::from("run.json"), |d| d.join("run.json"));
    let text = serde_json::to_string_pretty(&Value::Object(params))
        .map_err(|e| Error::Config(format!("cannot serialize run echo: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(hash)
}

fn build_eigensystem(spec: &SubspaceSpec, alpha: f64, beta: f64) -> Result<EigenSystem> {
    let cache = io::cache_dir();
    build_floquet(spec, alpha, beta, cache.as_deref())?.diagonalize_cached(cache.as_deref())
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        std::env::set_var("OPENBLAS_NUM_THREADS", n.to_string());
        std::env::set_var("OMP_NUM_THREADS", n.to_string());
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Poincare(args) => cmd_poincare(args, &file),
        Command::LyapunovMap(args) => cmd_lyapunov_map(args, &file),
        Command::Eigensystem(args) => cmd_eigensystem(args, &file),
        Command::Husimi(args) => cmd_husimi(args, &file),
        Command::Features(args) => cmd_features(args, &file),
        Command::EntHistory(args) => cmd_ent_history(args, &file),
        Command::EntMap(args) => cmd_ent_map(args, &file),
        Command::Typical(args) => cmd_typical(args, &file),
        Command::Mc(args) => cmd_mc(args, &file),
    }
}

/// Entry point for the binary: prints errors and maps them to exit codes
/// (0 success, 2 configuration, 3 numerics).
pub fn main_entry() -> i32 {
    match run(Cli::parse()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() { 2 } else { 3 }
        }
    }
}

fn cmd_poincare(args: PoincareArgs, file: &FileConfig) -> Result<()> {
    let alpha = require(args.dynamics.alpha, file.alpha, "alpha")?;
    let beta = pick(args.dynamics.beta, file.beta, PI / 2.0);
    let steps = pick(args.steps, file.steps, 500).max(1);
    let file_ics: Option<Vec<SectionPoint>> = file
        .ic
        .as_ref()
        .map(|list| list.iter().map(|s| parse_point(s)).collect::<Result<_>>())
        .transpose()?;
    let explicit = if args.ic.is_empty() {
        file_ics.unwrap_or_default()
    } else {
        args.ic.clone()
    };
    let ic_grid = match args.ic_grid {
        Some(g) => Some(g),
        None => file.ic_grid.as_deref().map(parse_grid).transpose()?,
    };
    let ics = if explicit.is_empty() {
        let (n_v, n_phi) = ic_grid.unwrap_or((8, 8));
        PhaseSpaceGrid::cell_centered(n_v, n_phi)?.points().to_vec()
    } else {
        explicit
    };
    let out = pick(args.out, file.out.clone(), PathBuf::from("poincare.csv"));

    guarded(&out, || {
        let params = json_map(json!({
            "command": "poincare",
            "alpha": alpha,
            "beta": beta,
            "steps": steps,
            "ic": ics.iter().map(|p| format!("{}:{}", p.delta_fz, p.delta_phi)).collect::<Vec<_>>(),
            "out": out.display().to_string(),
        }));
        let hash = echo_run(&out, params)?;
        let orbits = poincare_section(
            &ClassicalMapParams::new(alpha, beta)?,
            &ics,
            steps as usize,
        )?;
        let mut rows = Vec::with_capacity(orbits.iter().map(Vec::len).sum());
        for (orbit_id, orbit) in orbits.iter().enumerate() {
            for (step, p) in orbit.iter().enumerate() {
                rows.push(vec![
                    orbit_id.to_string(),
                    step.to_string(),
                    num(p.delta_fz),
                    num(p.delta_phi),
                ]);
            }
        }
        io::write_csv(&out, &hash, &["orbit_id", "step", "delta_fz", "delta_phi"], &rows)?;
        println!(
            "wrote {} orbits x {} points to {}",
            orbits.len(),
            steps,
            out.display()
        );
        Ok(())
    })
}

fn cmd_lyapunov_map(args: LyapunovMapArgs, file: &FileConfig) -> Result<()> {
    let alpha = require(args.dynamics.alpha, file.alpha, "alpha")?;
    let beta = pick(args.dynamics.beta, file.beta, PI / 2.0);
    let (n_v, n_phi) = pick(args.grid, file.grid_spec()?, (61, 61));
    let steps = pick(args.steps, file.steps, DEFAULT_LYAPUNOV_STEPS as u64).max(100);
    let threshold = pick(args.threshold, file.threshold, DEFAULT_CHAOS_THRESHOLD);
    let out = pick(args.out, file.out.clone(), PathBuf::from("lyapunov_map.csv"));

    guarded(&out, || {
        let params = json_map(json!({
            "command": "lyapunov-map",
            "alpha": alpha,
            "beta": beta,
            "grid": format!("{n_v}x{n_phi}"),
            "steps": steps,
            "threshold": threshold,
            "out": out.display().to_string(),
        }));
        let hash = echo_run(&out, params)?;
        let grid = PhaseSpaceGrid::vertex_centered(n_v, n_phi)?;
        let classes = classify_grid(
            &ClassicalMapParams::new(alpha, beta)?,
            grid.points(),
            threshold,
            steps as usize,
        )?;
        let rows: Vec<Vec<String>> = grid
            .points()
            .iter()
            .zip(classes.iter())
            .map(|(p, c)| {
                vec![
                    num(p.delta_fz),
                    num(p.delta_phi),
                    num(c.lyapunov),
                    u8::from(c.chaotic).to_string(),
                ]
            })
            .collect();
        io::write_csv(
            &out,
            &hash,
            &["delta_fz", "delta_phi", "lyapunov", "chaotic"],
            &rows,
        )?;
        let fraction =
            classes.iter().filter(|c| c.chaotic).count() as f64 / classes.len() as f64;
        println!(
            "classified {} points: chaotic fraction {:.3} (threshold {})",
            classes.len(),
            fraction,
            threshold
        );
        Ok(())
    })
}

fn cmd_eigensystem(args: EigensystemArgs, file: &FileConfig) -> Result<()> {
    let alpha = require(args.dynamics.alpha, file.alpha, "alpha")?;
    let beta = pick(args.dynamics.beta, file.beta, PI / 2.0);
    let spec = block_spec(&args.block, file)?;
    let with_entanglement = pick_flag(args.with_entanglement, file.with_entanglement);
    let matrix_out = args.matrix_out.or_else(|| file.matrix_out.clone());
    let out = pick(args.out, file.out.clone(), PathBuf::from("eigensystem.csv"));

    guarded(&out, || {
        let params = json_map(json!({
            "command": "eigensystem",
            "alpha": alpha,
            "beta": beta,
            "spin": spec.spin_j().as_f64(),
            "m_f": spec.m_f().as_f64(),
            "with_entanglement": with_entanglement,
            "matrix_out": matrix_out.as_ref().map(|p| p.display().to_string()),
            "out": out.display().to_string(),
        }));
        let hash = echo_run(&out, params)?;
        let system = {
            let cache = io::cache_dir();
            build_floquet(&spec, alpha, beta, cache.as_deref())?
        };
        if let Some(path) = &matrix_out {
            write_matrix(path, system.matrix())?;
        }
        let eigen = system.diagonalize_cached(io::cache_dir().as_deref())?;

        let mut header: Vec<String> = vec!["k".into(), "phase".into()];
        for m in spec.m_j_values() {
            header.push(format!("p_{}", m.as_f64()));
        }
        if with_entanglement {
            header.push("E".into());
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();

        let mut mean_e = 0.0;
        let mut rows = Vec::with_capacity(eigen.dim());
        for k in 0..eigen.dim() {
            let mut row = vec![k.to_string(), num(eigen.phases()[k])];
            let mut entropy = 0.0;
            for c in eigen.vectors().column(k).iter() {
                let p = c.norm_sqr();
                row.push(num(p));
                if p > 0.0 {
                    entropy -= p * p.ln();
                }
            }
            if with_entanglement {
                row.push(num(entropy));
            }
            mean_e += entropy;
            rows.push(row);
        }
        mean_e /= eigen.dim() as f64;
        io::write_csv(&out, &hash, &header_refs, &rows)?;
        println!("wrote {} eigenpairs to {}", eigen.dim(), out.display());
        if with_entanglement {
            println!("mean eigenstate entanglement = {mean_e:.4}");
            println!(
                "orthogonal-ensemble reference (d = {}) = {:.4}",
                eigen.dim(),
                typical_entanglement_oe(eigen.dim())?
            );
        }
        Ok(())
    })
}

fn cmd_husimi(args: HusimiArgs, file: &FileConfig) -> Result<()> {
    let alpha = require(args.dynamics.alpha, file.alpha, "alpha")?;
    let beta = pick(args.dynamics.beta, file.beta, PI / 2.0);
    let spec = block_spec(&args.block, file)?;
    let (n_v, n_phi) = pick(args.grid, file.grid_spec()?, (61, 61));
    let k = args.k.or(file.k);
    let delta_theta = args.delta_theta.or(file.delta_theta);
    let delta_phi = args.delta_phi.or(file.delta_phi);
    let pgm = args.pgm.or_else(|| file.pgm.clone());
    let out = pick(args.out, file.out.clone(), PathBuf::from("husimi.csv"));

    guarded(&out, || {
        let state_desc: Value;
        let state = match (k, delta_theta, delta_phi) {
            (Some(k), None, None) => {
                state_desc = json!({"k": k});
                let eigen = build_eigensystem(&spec, alpha, beta)?;
                if k >= eigen.dim() {
                    return Err(Error::Config(format!(
                        "--k {k} outside the {}-dimensional block",
                        eigen.dim()
                    )));
                }
                eigen.eigenstate(k)?
            }
            (None, Some(dt), Some(dp)) => {
                state_desc = json!({"delta_theta": dt, "delta_phi": dp});
                projected_coherent(&spec, SectionPoint::from_angles(dt, dp))?
            }
            _ => {
                return Err(Error::Config(
                    "pick exactly one of --k or (--delta-theta, --delta-phi)".into(),
                ));
            }
        };
        let mut params = json_map(json!({
            "command": "husimi",
            "alpha": alpha,
            "beta": beta,
            "spin": spec.spin_j().as_f64(),
            "m_f": spec.m_f().as_f64(),
            "grid": format!("{n_v}x{n_phi}"),
            "pgm": pgm.as_ref().map(|p| p.display().to_string()),
            "out": out.display().to_string(),
        }));
        merge_map(&mut params, state_desc);
        let hash = echo_run(&out, params)?;

        let grid = PhaseSpaceGrid::vertex_centered(n_v, n_phi)?;
        let q = husimi(&state, &grid)?;
        let rows: Vec<Vec<String>> = grid
            .points()
            .iter()
            .zip(q.iter())
            .map(|(p, &v)| vec![num(p.delta_theta()), num(p.delta_phi), num(v)])
            .collect();
        io::write_csv(&out, &hash, &["delta_theta", "delta_phi", "Q"], &rows)?;
        if let Some(path) = &pgm {
            io::write_pgm(path, n_phi, n_v, &q)?;
        }
        println!(
            "Husimi entropy over the section = {:.4} (uniform limit {:.4})",
            husimi_entropy(&q, grid.weights())?,
            (4.0 * PI).ln()
        );
        Ok(())
    })
}

fn cmd_features(args: FeaturesArgs, file: &FileConfig) -> Result<()> {
    let alpha = require(args.dynamics.alpha, file.alpha, "alpha")?;
    let beta = pick(args.dynamics.beta, file.beta, PI / 2.0);
    let spec = block_spec(&args.block, file)?;
    let (n_v, n_phi) = pick(args.grid, file.grid_spec()?, (61, 61));
    let filter = resolve_filter(args.s_q_min, args.jz_min, args.jz_max, args.grey_fraction, file);
    let out = pick(args.out, file.out.clone(), PathBuf::from("features.csv"));

    guarded(&out, || {
        let params = json_map(json!({
            "command": "features",
            "alpha": alpha,
            "beta": beta,
            "spin": spec.spin_j().as_f64(),
            "m_f": spec.m_f().as_f64(),
            "grid": format!("{n_v}x{n_phi}"),
            "s_q_min": filter.s_q_min,
            "jz_min": filter.jz_min,
            "jz_max": filter.jz_max,
            "grey_fraction": filter.grey_fraction,
            "out": out.display().to_string(),
        }));
        let hash = echo_run(&out, params)?;
        let eigen = build_eigensystem(&spec, alpha, beta)?;
        let grid = PhaseSpaceGrid::vertex_centered(n_v, n_phi)?;
        let features = classify_eigenstates(eigenstate_features(&eigen, &grid)?, &filter)?;
        let rows: Vec<Vec<String>> = features
            .iter()
            .map(|f| {
                vec![
                    f.k.to_string(),
                    num(f.phase),
                    num(f.s_q),
                    num(f.jz),
                    num(f.entanglement),
                    f.label.map_or_else(String::new, |l| l.to_string()),
                ]
            })
            .collect();
        io::write_csv(
            &out,
            &hash,
            &["k", "phase", "s_q", "jz", "E_eigenstate", "label"],
            &rows,
        )?;
        let counts = label_counts(&features);
        println!(
            "labeled {} states: {} chaotic, {} regular, {} ambiguous",
            features.len(),
            counts.chaotic,
            counts.regular,
            counts.ambiguous
        );
        Ok(())
    })
}

fn cmd_ent_history(args: EntHistoryArgs, file: &FileConfig) -> Result<()> {
    let alpha = require(args.dynamics.alpha, file.alpha, "alpha")?;
    let beta = pick(args.dynamics.beta, file.beta, PI / 2.0);
    let spec = block_spec(&args.block, file)?;
    let delta_theta = pick(args.delta_theta, file.delta_theta, PI / 2.0);
    let delta_phi = pick(args.delta_phi, file.delta_phi, PI / 3.0);
    let window = pick(args.window, file.window_spec()?, Window::default());
    let n_max = pick(args.n_max, file.n_max, window.end()).max(window.end());
    let out = pick(args.out, file.out.clone(), PathBuf::from("ent_history.csv"));

    guarded(&out, || {
        let params = json_map(json!({
            "command": "ent-history",
            "alpha": alpha,
            "beta": beta,
            "spin": spec.spin_j().as_f64(),
            "m_f": spec.m_f().as_f64(),
            "delta_theta": delta_theta,
            "delta_phi": delta_phi,
            "n_max": n_max,
            "window": format!("{}:{}", window.start(), window.end()),
            "out": out.display().to_string(),
        }));
        let hash = echo_run(&out, params)?;
        let eigen = build_eigensystem(&spec, alpha, beta)?;
        let point = SectionPoint::from_angles(delta_theta, delta_phi);
        let history = entanglement_history_from_point(&eigen, point, n_max)?;
        let rows: Vec<Vec<String>> = history
            .series()
            .iter()
            .enumerate()
            .map(|(n, &e)| vec![n.to_string(), num(e)])
            .collect();
        io::write_csv(&out, &hash, &["n", "E"], &rows)?;
        let average = crate::entanglement::long_time_average(&history, window)?;
        println!(
            "window [{}, {}] average = {:.4}",
            window.start(),
            window.end(),
            average
        );
        println!(
            "unitary-ensemble reference (d = {}) = {:.4}",
            eigen.dim(),
            typical_entanglement_ue(eigen.dim())?
        );
        Ok(())
    })
}

fn cmd_ent_map(args: EntMapArgs, file: &FileConfig) -> Result<()> {
    let alpha = require(args.dynamics.alpha, file.alpha, "alpha")?;
    let beta = pick(args.dynamics.beta, file.beta, PI / 2.0);
    let spec = block_spec(&args.block, file)?;
    let (n_v, n_phi) = pick(args.grid, file.grid_spec()?, (61, 61));
    let window = pick(args.window, file.window_spec()?, Window::default());
    let with_classical = pick_flag(args.with_classical, file.with_classical);
    let classical_steps = pick(
        args.classical_steps,
        file.classical_steps,
        DEFAULT_LYAPUNOV_STEPS as u64,
    )
    .max(100);
    let threshold = pick(args.threshold, file.threshold, DEFAULT_CHAOS_THRESHOLD);
    let pgm = args.pgm.or_else(|| file.pgm.clone());
    let out = pick(args.out, file.out.clone(), PathBuf::from("ent_map.csv"));

    guarded(&out, || {
        let params = json_map(json!({
            "command": "ent-map",
            "alpha": alpha,
            "beta": beta,
            "spin": spec.spin_j().as_f64(),
            "m_f": spec.m_f().as_f64(),
            "grid": format!("{n_v}x{n_phi}"),
            "window": format!("{}:{}", window.start(), window.end()),
            "with_classical": with_classical,
            "classical_steps": if with_classical { Some(classical_steps) } else { None },
            "threshold": if with_classical { Some(threshold) } else { None },
            "pgm": pgm.as_ref().map(|p| p.display().to_string()),
            "out": out.display().to_string(),
        }));
        let hash = echo_run(&out, params)?;
        let eigen = build_eigensystem(&spec, alpha, beta)?;
        let grid = PhaseSpaceGrid::vertex_centered(n_v, n_phi)?;
        let averages = entanglement_map(&eigen, &grid, window)?;
        let classes = if with_classical {
            Some(classify_grid(
                &ClassicalMapParams::new(alpha, beta)?,
                grid.points(),
                threshold,
                classical_steps as usize,
            )?)
        } else {
            None
        };
        let header: &[&str] = if with_classical {
            &["delta_theta", "delta_phi", "E_avg", "chaotic"]
        } else {
            &["delta_theta", "delta_phi", "E_avg"]
        };
        let rows: Vec<Vec<String>> = grid
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut row = vec![num(p.delta_theta()), num(p.delta_phi), num(averages[i])];
                if let Some(classes) = &classes {
                    row.push(u8::from(classes[i].chaotic).to_string());
                }
                row
            })
            .collect();
        io::write_csv(&out, &hash, header, &rows)?;
        if let Some(path) = &pgm {
            io::write_pgm(path, n_phi, n_v, &averages)?;
        }
        let mean = averages.iter().sum::<f64>() / averages.len() as f64;
        let std = (averages.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
            / averages.len() as f64)
            .sqrt();
        println!("map mean = {mean:.4}, std = {std:.4}");
        if let Some(classes) = &classes {
            let (mut sum_c, mut n_c, mut sum_r, mut n_r) = (0.0, 0usize, 0.0, 0usize);
            for (e, c) in averages.iter().zip(classes.iter()) {
                if c.chaotic {
                    sum_c += e;
                    n_c += 1;
                } else {
                    sum_r += e;
                    n_r += 1;
                }
            }
            if n_c > 0 && n_r > 0 {
                println!(
                    "chaotic mean = {:.4} over {} points, regular mean = {:.4} over {} points",
                    sum_c / n_c as f64,
                    n_c,
                    sum_r / n_r as f64,
                    n_r
                );
            }
        }
        Ok(())
    })
}

fn cmd_typical(args: TypicalArgs, file: &FileConfig) -> Result<()> {
    let kind = require(args.kind, file.kind.clone(), "kind")?;
    let linear = pick_flag(args.linear, file.linear);
    let out = pick(args.out, file.out.clone(), PathBuf::from("typical.json"));

    guarded(&out, || {
        let functional = if linear { "linear_entropy" } else { "entropy" };
        let (params, report, value) = if kind.eq_ignore_ascii_case("full") {
            let d1 = require(args.d1, file.d1, "d1")?;
            let d2 = require(args.d2, file.d2, "d2")?;
            if linear {
                return Err(Error::Config(
                    "--linear is not available for --kind full".into(),
                ));
            }
            let value = typical_entanglement_full(d1, d2)?;
            (
                json_map(json!({
                    "command": "typical",
                    "kind": "full",
                    "d1": d1,
                    "d2": d2,
                    "linear": false,
                    "out": out.display().to_string(),
                })),
                json!({"kind": "full", "d1": d1, "d2": d2, "functional": functional, "analytic": value}),
                value,
            )
        } else {
            let ensemble: EnsembleKind = kind.parse()?;
            let d = require(args.d, file.d, "d")?;
            let value = match (ensemble, linear) {
                (EnsembleKind::Unitary, false) => typical_entanglement_ue(d)?,
                (EnsembleKind::Orthogonal, false) => typical_entanglement_oe(d)?,
                (_, true) => typical_linear_entropy(ensemble, d)?,
            };
            (
                json_map(json!({
                    "command": "typical",
                    "kind": ensemble.to_string(),
                    "d": d,
                    "linear": linear,
                    "out": out.display().to_string(),
                })),
                json!({"kind": ensemble.to_string(), "d": d, "functional": functional, "analytic": value}),
                value,
            )
        };
        let hash = echo_run(&out, params)?;
        io::write_json(&out, &hash, &report)?;
        println!("typical {functional} = {value:.6}");
        Ok(())
    })
}

fn cmd_mc(args: McArgs, file: &FileConfig) -> Result<()> {
    let kind: EnsembleKind = require(args.kind, file.kind.clone(), "kind")?.parse()?;
    let samples = pick(args.samples, file.samples, 10_000);
    let seed = pick(args.seed, file.seed, 7);
    let linear = pick_flag(args.linear, file.linear);
    let subspace = pick_flag(args.subspace, file.subspace);
    let functional = if linear {
        Functional::LinearEntropy
    } else {
        Functional::Entropy
    };
    let out = pick(args.out, file.out.clone(), PathBuf::from("mc.json"));

    guarded(&out, || {
        let (params, ensemble, subspace_tag) = if subspace {
            let alpha = require(args.dynamics.alpha, file.alpha, "alpha")?;
            let beta = pick(args.dynamics.beta, file.beta, PI / 2.0);
            let spec = block_spec(&args.block, file)?;
            let (n_v, n_phi) = pick(args.grid, file.grid_spec()?, (61, 61));
            let filter = resolve_filter(
                args.s_q_min,
                args.jz_min,
                args.jz_max,
                args.grey_fraction,
                file,
            );
            let params = json_map(json!({
                "command": "mc",
                "kind": kind.to_string(),
                "linear": linear,
                "samples": samples,
                "seed": seed,
                "subspace": true,
                "alpha": alpha,
                "beta": beta,
                "spin": spec.spin_j().as_f64(),
                "m_f": spec.m_f().as_f64(),
                "grid": format!("{n_v}x{n_phi}"),
                "s_q_min": filter.s_q_min,
                "jz_min": filter.jz_min,
                "jz_max": filter.jz_max,
                "grey_fraction": filter.grey_fraction,
                "out": out.display().to_string(),
            }));
            let eigen = build_eigensystem(&spec, alpha, beta)?;
            let grid = PhaseSpaceGrid::vertex_centered(n_v, n_phi)?;
            let features = classify_eigenstates(eigenstate_features(&eigen, &grid)?, &filter)?;
            let basis = chaotic_subspace(&eigen, &features)?;
            println!(
                "chaotic subspace dimension {} of {}",
                basis.ncols(),
                eigen.dim()
            );
            (params, EnsembleSpec::with_basis(kind, basis, seed)?, true)
        } else {
            let d = require(args.d, file.d, "d")?;
            let params = json_map(json!({
                "command": "mc",
                "kind": kind.to_string(),
                "linear": linear,
                "d": d,
                "samples": samples,
                "seed": seed,
                "subspace": false,
                "out": out.display().to_string(),
            }));
            (params, EnsembleSpec::full(kind, d, seed)?, false)
        };
        let hash = echo_run(&out, params)?;
        let mut report = mc_average(&ensemble, functional, samples)?;
        if subspace_tag {
            report.subspace_id = Some(format!("chaotic-{hash}"));
        }
        io::write_json(&out, &hash, &report)?;
        match report.analytic {
            Some(analytic) => println!(
                "mc mean = {:.4} +- {:.4} (analytic {:.4})",
                report.mc_mean, report.mc_stderr, analytic
            ),
            None => println!(
                "mc mean = {:.4} +- {:.4} over the restricted subspace",
                report.mc_mean, report.mc_stderr
            ),
        }
        Ok(())
    })
}

/// Raw complex matrix dump: magic, version, dimensions, then row-major
/// little-endian (re, im) f64 pairs.
fn write_matrix(path: &Path, matrix: &ndarray::Array2<crate::C64>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + matrix.len() * 16);
    out.extend_from_slice(b"KTUM");
    out.push(1);
    out.extend_from_slice(&(matrix.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.ncols() as u64).to_le_bytes());
    for value in matrix.iter() {
        out.extend_from_slice(&value.re.to_le_bytes());
        out.extend_from_slice(&value.im.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

fn json_map(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map,
        _ => unreachable!("run parameters are always built as an object"),
    }
}

fn merge_map(target: &mut Map<String, Value>, extra: Value) {
    if let Value::Object(map) = extra {
        for (k, v) in map {
            target.insert(k, v);
        }
    }
}
