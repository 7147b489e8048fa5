use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stagpatch::census::{self, CensusConfig};
use stagpatch::eigen::{analyze, EigenOptions};
use stagpatch::geometry::{EdgeType, GridId, MicroGridSpec, Parity, PatchGridLayout};
use stagpatch::micro::{self, MicroGrid, WaveParams};
use stagpatch::scheme::{build_scheme, EdgeLayerSpec, GridParams, PatchScheme};
use stagpatch::sim::{self, Integrator};
use stagpatch::Error;

#[derive(Parser, Debug)]
#[command(name = "stagpatch", version, about = "Staggered-grid multiscale patch schemes for linear waves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
enum Command {
    /// Sub-patch micro-grids and patch grid layouts.
    #[command(subcommand)]
    Grids(GridsCmd),
    /// Eigenvalues of the full-domain micro model or of a patch scheme.
    #[command(subcommand)]
    Eig(EigCmd),
    /// Stability and accuracy sweep over every layout of a parity.
    Census(CensusArgs),
    /// Time integration of a patch scheme or of the full-domain model.
    Simulate(SimArgs),
    /// Re-run a command from an emitted `config.toml`.
    #[serde(skip)]
    Run(RunArgs),
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
enum GridsCmd {
    /// The 16 compatible edge types with their centre-node kinds.
    List(ListArgs),
    /// Node counts and parameters of the patch scheme for one layout.
    Describe(DescribeArgs),
    /// Convert between a layout string and its patch grid Id.
    Id(IdArgs),
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
enum EigCmd {
    /// Eigenvalues of the full-domain staggered micro model per wavenumber.
    Micro(MicroArgs),
    /// Patch scheme spectrum over all resolved wavenumbers.
    Patch(PatchArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ModelArgs {
    /// Domain period L.
    #[arg(long = "L", default_value_t = TAU)]
    l: f64,
    /// Macro-grid interval count N (even).
    #[arg(long = "N", default_value_t = 10)]
    big_n: usize,
    /// Sub-patch micro-grid interval count n (even, >= 4).
    #[arg(long = "n", default_value_t = 6)]
    n: usize,
    /// Patch scale ratio r in (0, 0.5].
    #[arg(long = "r", default_value_t = 0.1)]
    r: f64,
    /// Linear drag coefficient c_D.
    #[arg(long = "cD", default_value_t = 0.0)]
    c_d: f64,
    /// Viscosity coefficient c_V.
    #[arg(long = "cV", default_value_t = 0.0)]
    c_v: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<GridParams, Error> {
        GridParams::new(self.l, self.big_n, self.n, self.r)
    }

    fn wave(&self) -> Result<WaveParams, Error> {
        WaveParams::new(self.c_d, self.c_v, self.l)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct LayoutArgs {
    /// Four comma-separated slots in (p,q) order (0,0),(1,0),(0,1),(1,1); `----` is empty.
    #[arg(long)]
    layout: String,
    /// Edge layers: n1t0, n2t0 or n3t2.
    #[arg(long, default_value = "n2t0")]
    layers: String,
    /// Parity of n/2 (odd or even); must agree with --n when given.
    #[arg(long)]
    parity: Option<String>,
}

impl LayoutArgs {
    fn layout(&self, n: usize) -> Result<PatchGridLayout, Error> {
        let parity = resolve_parity(self.parity.as_deref(), n)?;
        PatchGridLayout::parse(&self.layout, parity)
    }

    fn layers(&self) -> Result<EdgeLayerSpec, Error> {
        self.layers.parse()
    }
}

fn resolve_parity(flag: Option<&str>, n: usize) -> Result<Parity, Error> {
    let implied = Parity::of(n);
    match flag {
        None => Ok(implied),
        Some(s) => {
            let p: Parity = s.parse()?;
            if p != implied {
                return Err(Error::InvalidParams(format!("--parity {p} disagrees with n = {n} (parity {implied})")));
            }
            Ok(p)
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ListArgs {
    /// Parity of n/2 (odd or even).
    #[arg(long, default_value = "odd")]
    parity: String,
    /// Interval count used for the window shapes (defaults to 6 for odd, 4 for even).
    #[arg(long = "n")]
    n: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct DescribeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    layout: LayoutArgs,
    /// Output directory (description.json, config.toml).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct IdArgs {
    /// Layout string to convert to an Id.
    #[arg(long, conflicts_with = "id")]
    layout: Option<String>,
    /// Patch grid Id (1..=83520) to convert to a layout.
    #[arg(long)]
    id: Option<u32>,
    /// Parity of n/2 (odd or even).
    #[arg(long, default_value = "odd")]
    parity: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct MicroArgs {
    /// Domain period L.
    #[arg(long = "L", default_value_t = TAU)]
    l: f64,
    /// Staggered intervals per axis of the full-domain grid (even).
    #[arg(long = "n", default_value_t = 12)]
    n: usize,
    /// Linear drag coefficient c_D.
    #[arg(long = "cD", default_value_t = 0.0)]
    c_d: f64,
    /// Viscosity coefficient c_V.
    #[arg(long = "cV", default_value_t = 0.0)]
    c_v: f64,
    /// Output directory (eigs_mu.csv, config.toml).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct PatchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    layout: LayoutArgs,
    /// Also compute eigenvectors and the structural mode classification.
    #[arg(long)]
    structural: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory (eigs.csv, eigs_mu.csv, report.json, config.toml).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct CensusArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Edge layers: n1t0, n2t0 or n3t2.
    #[arg(long, default_value = "n2t0")]
    layers: String,
    /// odd, even or both; --n applies to its own parity, the other parity uses n = 6 (odd) or n = 4 (even).
    #[arg(long, default_value = "odd")]
    parity: String,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Continue from census_<parity>.jsonl in the output directory.
    #[arg(long)]
    resume: bool,
    /// Analyse every layout instead of one per symmetry orbit.
    #[arg(long)]
    no_symmetry: bool,
    /// Output directory (census.csv, census_<parity>.jsonl, summary.json, config.toml).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum SimModel {
    Patch,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum SimMethod {
    Rk4,
    Bs3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum SimOutput {
    Aggregates,
    Full,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SimArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Patch grid layout (patch model only).
    #[arg(long, default_value = "uuvv,hhvv,uuhh,----")]
    layout: String,
    /// Edge layers: n1t0, n2t0 or n3t2.
    #[arg(long, default_value = "n2t0")]
    layers: String,
    /// Parity of n/2 (odd or even); must agree with --n when given.
    #[arg(long)]
    parity: Option<String>,
    /// Simulate the patch scheme or the full-domain model.
    #[arg(long = "model", value_enum, default_value_t = SimModel::Patch)]
    sim_model: SimModel,
    /// Staggered intervals per axis of the full-domain grid.
    #[arg(long, default_value_t = 60)]
    grid_n: usize,
    /// Initial condition h = cos(k_x x + k_y y), u = v = 0, given as k_x,k_y.
    #[arg(long, default_value = "1,0")]
    mode: String,
    /// Final time.
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    /// Number of equally spaced samples including t = 0.
    #[arg(long, default_value_t = 11)]
    samples: usize,
    /// Time integrator.
    #[arg(long, value_enum, default_value_t = SimMethod::Rk4)]
    method: SimMethod,
    /// RK4 step.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// BS3 relative tolerance.
    #[arg(long, default_value_t = 1e-8)]
    rtol: f64,
    /// BS3 absolute tolerance.
    #[arg(long, default_value_t = 1e-10)]
    atol: f64,
    /// Trajectory columns: per-patch aggregates or the full state.
    #[arg(long, value_enum, default_value_t = SimOutput::Aggregates)]
    output: SimOutput,
    /// Output directory (traj.csv, config.toml).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RunArgs {
    /// A config.toml written by an earlier run.
    config: PathBuf,
}

/// Fully resolved configuration written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    version: String,
    command: Command,
}

impl RunConfig {
    fn toml(&self) -> Result<String, Error> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("cannot serialise config: {e}")))
    }

    fn hash(&self) -> Result<String, Error> {
        let mut h = Sha256::new();
        h.update(self.toml()?.as_bytes());
        Ok(hex::encode(&h.finalize()[..8]))
    }
}

fn prepare_out(dir: &Path, cfg: &RunConfig) -> Result<String, Error> {
    fs::create_dir_all(dir)?;
    let hash = cfg.hash()?;
    let text = format!("# config_hash = \"{hash}\"\n{}", cfg.toml()?);
    fs::write(dir.join("config.toml"), text)?;
    Ok(hash)
}

/// CSV with a leading `# config_hash=...` metadata line.
fn write_csv(path: &Path, hash: &str, body: &str) -> Result<(), Error> {
    fs::write(path, format!("# config_hash={hash}\n{body}"))?;
    Ok(())
}

fn set_threads(threads: usize) {
    if threads > 0 {
        // Ignored when a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn run(command: Command) -> Result<(), Error> {
    let cfg = RunConfig { version: env!("CARGO_PKG_VERSION").into(), command: command.clone() };
    match command {
        Command::Run(args) => {
            let text = fs::read_to_string(&args.config)?;
            let loaded: RunConfig =
                toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", args.config.display())))?;
            if let Command::Run(_) = loaded.command {
                return Err(Error::Parse("a config cannot re-run itself".into()));
            }
            run(loaded.command)
        }
        Command::Grids(GridsCmd::List(a)) => grids_list(&a),
        Command::Grids(GridsCmd::Describe(a)) => grids_describe(&a, &cfg),
        Command::Grids(GridsCmd::Id(a)) => grids_id(&a),
        Command::Eig(EigCmd::Micro(a)) => eig_micro(&a, &cfg),
        Command::Eig(EigCmd::Patch(a)) => eig_patch(&a, &cfg),
        Command::Census(a) => run_census(&a, &cfg),
        Command::Simulate(a) => simulate(&a, &cfg),
    }
}

fn grids_list(a: &ListArgs) -> Result<(), Error> {
    let parity: Parity = a.parity.parse()?;
    let n = a.n.unwrap_or(parity.representative_n());
    if Parity::of(n) != parity {
        return Err(Error::InvalidParams(format!("n = {n} is not of parity {parity}")));
    }
    println!("digit,edge_type,symmetric,centre,mx,my");
    for (k, e) in EdgeType::all().iter().enumerate() {
        let spec = MicroGridSpec::new(n, *e)?;
        let centre = spec.centre.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        println!("{},{},{},{},{},{}", k + 1, e, e.is_symmetric(), centre, spec.mx, spec.my);
    }
    Ok(())
}

fn scheme_from(model: &ModelArgs, layout: &LayoutArgs) -> Result<PatchScheme, Error> {
    let params = model.params()?;
    build_scheme(params, layout.layout(model.n)?, layout.layers()?, model.wave()?)
}

fn grids_describe(a: &DescribeArgs, cfg: &RunConfig) -> Result<(), Error> {
    let scheme = scheme_from(&a.model, &a.layout)?;
    let text = serde_json::to_string_pretty(&scheme.describe())?;
    println!("{text}");
    if let Some(dir) = &a.out {
        let hash = prepare_out(dir, cfg)?;
        let mut v: serde_json::Value = serde_json::from_str(&text)?;
        v["config_hash"] = hash.into();
        fs::write(dir.join("description.json"), serde_json::to_string_pretty(&v)?)?;
    }
    Ok(())
}

fn grids_id(a: &IdArgs) -> Result<(), Error> {
    let parity: Parity = a.parity.parse()?;
    match (&a.layout, a.id) {
        (Some(l), None) => {
            let layout = PatchGridLayout::parse(l, parity)?;
            println!("{}", layout.id().id);
        }
        (None, Some(id)) => {
            let layout = GridId::new(id, parity)?.layout();
            println!("{layout}");
        }
        _ => return Err(Error::InvalidParams("give exactly one of --layout or --id".into())),
    }
    Ok(())
}

fn eig_micro(a: &MicroArgs, cfg: &RunConfig) -> Result<(), Error> {
    let wave = WaveParams::new(a.c_d, a.c_v, a.l)?;
    MicroGrid::staggered(a.n, a.l)?;
    let modes = micro::resolved_modes(a.n);
    let csv = micro::spectrum_csv(a.n, &wave, &modes)?;
    let hash = prepare_out(&a.out, cfg)?;
    write_csv(&a.out.join("eigs_mu.csv"), &hash, &csv)?;
    let max_re = micro::spectrum_union(a.n, &wave)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    println!("n={} eigenvalues={} max_re={}", a.n, 3 * modes.len() * modes.len(), fmt17(max_re));
    Ok(())
}

fn eig_patch(a: &PatchArgs, cfg: &RunConfig) -> Result<(), Error> {
    set_threads(a.threads);
    let scheme = scheme_from(&a.model, &a.layout)?;
    let params = scheme.params;
    let modes = params.resolved_modes();
    let opts = EigenOptions { structural: a.structural, ..Default::default() };
    let report = analyze(&scheme, &modes, &opts)?;
    let hash = prepare_out(&a.out, cfg)?;
    write_csv(&a.out.join("eigs.csv"), &hash, &report.to_csv())?;
    let mut mu = String::from("k_x,k_y,re,im\n");
    for &(kx, ky) in &modes {
        let w = &scheme.wave;
        for z in micro::eig_mu(w.wavenumber(kx), w.wavenumber(ky), params.delta(), w)? {
            mu.push_str(&format!("{kx},{ky},{},{}\n", fmt17(z.re), fmt17(z.im)));
        }
    }
    write_csv(&a.out.join("eigs_mu.csv"), &hash, &mu)?;
    let mut json = report.summary_json();
    json["config_hash"] = hash.into();
    json["layout"] = scheme.layout.to_string().into();
    json["id"] = scheme.layout.id().id.into();
    fs::write(a.out.join("report.json"), serde_json::to_string_pretty(&json)?)?;
    println!(
        "layout={} id={} eigenvalues={} max_re={} stable={} n_unstable={} max_eps={}",
        scheme.layout,
        scheme.layout.id().id,
        report.n_eigenvalues,
        fmt17(report.max_re),
        report.stable,
        report.n_unstable,
        fmt17(report.max_eps)
    );
    Ok(())
}

fn run_census(a: &CensusArgs, cfg: &RunConfig) -> Result<(), Error> {
    set_threads(a.threads);
    let layers: EdgeLayerSpec = a.layers.parse()?;
    let wave = a.model.wave()?;
    let parities: Vec<Parity> = match a.parity.as_str() {
        "both" => vec![Parity::Odd, Parity::Even],
        s => vec![s.parse()?],
    };
    let hash = prepare_out(&a.out, cfg)?;
    let mut all = Vec::new();
    let mut summaries = serde_json::Map::new();
    for parity in parities {
        let n = if Parity::of(a.model.n) == parity { a.model.n } else { parity.representative_n() };
        let params = GridParams::new(a.model.l, a.model.big_n, n, a.model.r)?;
        let config = CensusConfig { params, wave, layers, parity, use_symmetry: !a.no_symmetry };
        let jsonl = a.out.join(format!("census_{parity}.jsonl"));
        if !a.resume && jsonl.exists() {
            fs::remove_file(&jsonl)?;
        }
        let records = census::run_census(&config, Some(&jsonl), None)?;
        let s = census::summarize(&records);
        println!(
            "parity={parity} n={n} total={} stable={} centred_stable={} non_centred_stable={} unstable={} accurate={} errors={} stable_iff_symmetric={}",
            s.total, s.stable, s.stable_centred, s.stable_non_centred, s.unstable, s.accurate, s.errors, s.stable_iff_symmetric
        );
        summaries.insert(parity.to_string(), serde_json::to_value(&s)?);
        all.extend(records);
    }
    let combined = census::summarize(&all);
    println!("combined stable={} accurate={}", combined.stable, combined.accurate);
    summaries.insert("combined".into(), serde_json::to_value(&combined)?);
    summaries.insert("config_hash".into(), hash.clone().into());
    write_csv(&a.out.join("census.csv"), &hash, &census::to_csv(&all))?;
    fs::write(a.out.join("summary.json"), serde_json::to_string_pretty(&summaries)?)?;
    Ok(())
}

fn parse_mode(s: &str) -> Result<(i64, i64), Error> {
    let bad = || Error::Parse(format!("mode must be `k_x,k_y` integers, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn simulate(a: &SimArgs, cfg: &RunConfig) -> Result<(), Error> {
    let (kx, ky) = parse_mode(&a.mode)?;
    if a.samples < 1 || a.t_end.is_nan() || a.t_end < 0.0 {
        return Err(Error::InvalidParams("need at least one sample and t_end >= 0".into()));
    }
    let times: Vec<f64> = if a.samples == 1 {
        vec![a.t_end]
    } else {
        (0..a.samples).map(|i| a.t_end * i as f64 / (a.samples - 1) as f64).collect()
    };
    let integ = match a.method {
        SimMethod::Rk4 => Integrator::rk4(a.dt),
        SimMethod::Bs3 => Integrator::bs3(a.rtol, a.atol),
    };
    let wave = a.model.wave()?;
    let (k1, k2) = (wave.wavenumber(kx), wave.wavenumber(ky));
    let (names, rows) = match a.sim_model {
        SimModel::Patch => {
            let layout = LayoutArgs { layout: a.layout.clone(), layers: a.layers.clone(), parity: a.parity.clone() };
            let scheme = scheme_from(&a.model, &layout)?;
            let ni = scheme.interior_len();
            let two = 2.0 * scheme.params.macro_delta();
            let m = scheme.params.cells_per_axis();
            let mut x0 = Vec::with_capacity(scheme.total_interior_len());
            for c in 0..scheme.cells() {
                let (ci, cj) = ((c / m) as f64, (c % m) as f64);
                for k in 0..ni {
                    let (px, py) = scheme.interior_position(k);
                    let is_h = scheme.interior[k].kind == stagpatch::geometry::NodeKind::H;
                    x0.push(if is_h { (k1 * (px + two * ci) + k2 * (py + two * cj)).cos() } else { 0.0 });
                }
            }
            let tr = sim::integrate_patch(&scheme, &x0, &times, &integ)?;
            match a.output {
                SimOutput::Aggregates => {
                    (sim::aggregate_names(&scheme), tr.states.iter().map(|x| sim::aggregates(&scheme, x)).collect())
                }
                SimOutput::Full => ((0..x0.len()).map(|i| format!("x{i}")).collect(), tr.states),
            }
        }
        SimModel::Full => {
            let grid = MicroGrid::staggered(a.grid_n, a.model.l)?;
            let x0: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&(i, j, kind)| {
                    let (x, y) = grid.coords(i, j);
                    if kind == stagpatch::geometry::NodeKind::H { (k1 * x + k2 * y).cos() } else { 0.0 }
                })
                .collect();
            let tr = sim::integrate_full(&grid, &wave, &x0, &times, &integ)?;
            let names = grid.nodes().iter().map(|(i, j, k)| format!("{k}_{i}_{j}")).collect();
            (names, tr.states)
        }
    };
    let hash = prepare_out(&a.out, cfg)?;
    write_csv(&a.out.join("traj.csv"), &hash, &sim::trajectory_csv(&names, &times, &rows))?;
    println!("samples={} columns={} t_end={}", rows.len(), names.len(), fmt17(a.t_end));
    Ok(())
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse(_) => "parse",
        Error::Range(_) => "range",
        Error::InvalidParams(_) => "invalid_params",
        Error::InvalidLayout(_) => "invalid_layout",
        Error::Incompatible(_) => "incompatible",
        Error::InsufficientLayers(_) => "insufficient_layers",
        Error::Coupling(_) => "coupling",
        Error::Eigen(_) => "eigen",
        Error::Integrator(_) => "integrator",
        Error::TooLarge(_) => "too_large",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

