use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use noon_core::estimation::{
    bound_sweep, fidelity_bounds, gap_threshold_count, least_squares_estimate, noon_mixture, noon_working_state,
    physical_estimate, working_state, FidelityBounds, SweepOptions,
};
use noon_core::measurement::{cavity_pair_layout, completeness_rank, generate_record, sample_settings};
use noon_core::noise::decohered_run;
use noon_core::protocol::{budget, noon_phase_and_fidelity, noon_schedule, simulate, Backend};
use noon_core::quantum::{fidelity_with_pure, HermitianOperator, ProjectionMode, QuantumState};

use crate::config::RunConfig;
use crate::files::{encode_matrix, read_json, write_json, write_sweep, Meta, RecordFile, StateFile};
use crate::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "noon", version, about = "NOON-state preparation and fidelity certification")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the preparation schedule and write the final state as JSON.
    Prepare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ideal")]
        backend: BackendArg,
        /// Write the full five-factor state instead of the cropped cavity pair.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form protocol duration and the largest N within T2/2.
    Budget {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample displaced number measurements of a prepared state.
    Measure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Least-squares reconstruction projected onto density matrices.
    Tomo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        record: PathBuf,
        #[arg(long, value_enum, default_value = "nearest")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lower and upper fidelity bounds consistent with a record.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bounds on nested prefixes of one sampled record, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep the mixture p·NOON + (1 − p)·I/d.
        #[arg(long, conflicts_with = "state")]
        p: Option<f64>,
        /// Sweep a prepared state instead of a mixture.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Comma-separated measurement counts.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        /// Also report the smallest count whose gap is at most this value.
        #[arg(long)]
        gap_threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank of the span of sampled observables against d².
    CheckComplete {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    g_inv_ns: Option<f64>,
    #[arg(long)]
    detuning_ratio: Option<f64>,
    #[arg(long)]
    omega0_ghz: Option<f64>,
    #[arg(long)]
    t_rabi_ns: Option<f64>,
    #[arg(long)]
    t1_ns: Option<f64>,
    #[arg(long)]
    t2_ns: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kappa: Option<f64>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = RunConfig::load(self.config.as_deref())?;
        let s = &mut c.system;
        s.n = self.n.or(s.n);
        s.g_inv_ns = self.g_inv_ns.unwrap_or(s.g_inv_ns);
        s.detuning_ratio = self.detuning_ratio.unwrap_or(s.detuning_ratio);
        s.omega0_ghz = self.omega0_ghz.unwrap_or(s.omega0_ghz);
        s.t_rabi_ns = self.t_rabi_ns.unwrap_or(s.t_rabi_ns);
        c.noise.t1_ns = self.t1_ns.or(c.noise.t1_ns);
        c.noise.t2_ns = self.t2_ns.or(c.noise.t2_ns);
        c.target.phi = self.phi.or(c.target.phi);
        let m = &mut c.measurement;
        m.sigma = self.sigma.unwrap_or(m.sigma);
        m.radius = self.radius.or(m.radius);
        m.count = self.count.or(m.count);
        m.seed = self.seed.or(m.seed);
        m.kappa = self.kappa.unwrap_or(m.kappa);
        if !(m.sigma >= 0.0) || !m.sigma.is_finite() {
            bail!(ConfigError("sigma must be nonnegative".into()));
        }
        Ok(c)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BackendArg {
    Ideal,
    Hamiltonian,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Clip,
    Nearest,
}

impl From<ModeArg> for ProjectionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Clip => ProjectionMode::Clip,
            ModeArg::Nearest => ProjectionMode::Nearest,
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Prepare { common, backend, full, out } => prepare(&common.resolve()?, backend, full, out),
        Command::Budget { common, out } => budget_cmd(&common.resolve()?, out),
        Command::Measure { common, state, out } => measure(&common.resolve()?, state, out),
        Command::Tomo { common, record, mode, out } => tomo(&common.resolve()?, record, mode.into(), out),
        Command::Bound { common, record, out } => bound(&common.resolve()?, record, out),
        Command::Sweep { common, p, state, counts, gap_threshold, out } => {
            sweep(&common.resolve()?, p, state, counts, gap_threshold, out)
        }
        Command::CheckComplete { common } => check_complete(&common.resolve()?),
    }
}

fn prepare(cfg: &RunConfig, backend: BackendArg, full: bool, out: PathBuf) -> anyhow::Result<()> {
    let n = cfg.n()?;
    let params = cfg.system_params()?;
    let noise = cfg.noise_params()?;
    let schedule = noon_schedule(n, &params)?;
    let state = match backend {
        BackendArg::Ideal if noise.is_noiseless() => simulate(&schedule, Backend::Ideal, &params, None)?,
        BackendArg::Ideal => decohered_run(&schedule, &params, &noise)?.0,
        BackendArg::Hamiltonian if noise.is_noiseless() => simulate(&schedule, Backend::Hamiltonian, &params, None)?,
        BackendArg::Hamiltonian => bail!(ConfigError("noise channels are only available with the ideal backend".into())),
    };
    let (phi, fidelity) = noon_phase_and_fidelity(&state, n)?;
    let saved = if full { state } else { working_state(&state, n)? };
    let mut extra = BTreeMap::new();
    extra.insert("duration_ns".into(), schedule.total_duration());
    let file = StateFile {
        meta: Meta { command: "prepare".into(), config_sha256: cfg.digest("prepare"), seed: cfg.measurement.seed },
        n,
        phi,
        noon_fidelity: fidelity,
        layout: saved.layout().factors().to_vec(),
        density: encode_matrix(&saved.to_density_matrix()),
        extra,
    };
    write_json(&out, &file)?;
    println!("N = {n}\nphi = {phi}\nfidelity = {fidelity}\nduration_ns = {}", schedule.total_duration());
    Ok(())
}

#[derive(Serialize)]
struct BudgetFile {
    meta: Meta,
    report: noon_core::protocol::BudgetReport,
}

fn budget_cmd(cfg: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let n = cfg.n()?;
    let Some(t2) = cfg.noise.t2_ns else {
        bail!(ConfigError("budget needs T2 (--t2-ns or noise.t2_ns)".into()));
    };
    let report = budget(n, cfg.g(), cfg.system.t_rabi_ns, t2)?;
    println!("N = {}", report.n);
    println!("T_tot = {:.3} ns", report.t_tot);
    println!("T2/2 = {:.3} ns", report.t_limit);
    println!("N_max = {}", report.n_max);
    for s in &report.steps {
        println!("  photon {}: window {:.3} ns, rabi {:.3} ns", s.photon, s.window, s.rabi);
    }
    if let Some(out) = out {
        let meta = Meta { command: "budget".into(), config_sha256: cfg.digest("budget"), seed: None };
        write_json(&out, &BudgetFile { meta, report })?;
    }
    Ok(())
}

fn measure(cfg: &RunConfig, state_path: PathBuf, out: PathBuf) -> anyhow::Result<()> {
    let seed = cfg.seed()?;
    let file: StateFile = read_json(&state_path)?;
    if cfg.system.n.is_some_and(|n| n != file.n) {
        bail!(ConfigError(format!("N = {} does not match the state file (N = {})", cfg.system.n.unwrap_or(0), file.n)));
    }
    let n = file.n;
    let Some(count) = cfg.measurement.count else {
        bail!(ConfigError("measurement count is required (--count or measurement.count)".into()));
    };
    let rho = working_state(&file.state()?, n)?;
    let settings = sample_settings(count, cfg.radius(n), seed)?;
    let record = generate_record(&rho, &settings, cfg.measurement.sigma, seed)?;
    let digest = cfg.digest(&format!("measure:{}", file.meta.config_sha256));
    let rec = RecordFile {
        meta: Meta { command: "measure".into(), config_sha256: digest, seed: Some(seed) },
        n,
        phi: cfg.target.phi.unwrap_or(file.phi),
        record,
    };
    rec.write(&out)?;
    println!("wrote {count} settings for N = {n}");
    Ok(())
}

fn record_target(cfg: &RunConfig, rec: &RecordFile) -> anyhow::Result<QuantumState> {
    let target = noon_core::protocol::NoonTarget::new(rec.n, cfg.target.phi.unwrap_or(rec.phi))?;
    Ok(noon_working_state(&target))
}

#[derive(Serialize)]
struct TomoFile {
    meta: Meta,
    n: usize,
    phi: f64,
    mode: ProjectionMode,
    fidelity: f64,
    /// Smallest eigenvalue of the least-squares estimate before projection.
    raw_min_eigenvalue: f64,
    layout: Vec<(noon_core::FactorLabel, usize)>,
    density: Vec<Vec<[f64; 2]>>,
}

fn tomo(cfg: &RunConfig, path: PathBuf, mode: ProjectionMode, out: PathBuf) -> anyhow::Result<()> {
    let rec = RecordFile::read(&path)?;
    let target = record_target(cfg, &rec)?;
    let dims = [rec.n + 1; 2];
    let raw = least_squares_estimate(&rec.record, dims)?;
    let raw_min = HermitianOperator::new(cavity_pair_layout(dims)?, raw.hermitian_part())?
        .eigenvalues()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let est = physical_estimate(&rec.record, dims, mode)?;
    let fidelity = fidelity_with_pure(&est, &target)?;
    let file = TomoFile {
        meta: Meta {
            command: "tomo".into(),
            config_sha256: cfg.digest(&format!("tomo:{}", rec.meta.config_sha256)),
            seed: rec.meta.seed,
        },
        n: rec.n,
        phi: cfg.target.phi.unwrap_or(rec.phi),
        mode,
        fidelity,
        raw_min_eigenvalue: raw_min,
        layout: est.layout().factors().to_vec(),
        density: encode_matrix(&est.to_density_matrix()),
    };
    write_json(&out, &file)?;
    println!("fidelity = {fidelity}");
    Ok(())
}

#[derive(Serialize)]
struct BoundFile {
    meta: Meta,
    n: usize,
    phi: f64,
    kappa: f64,
    bounds: FidelityBounds,
}

fn bound(cfg: &RunConfig, path: PathBuf, out: PathBuf) -> anyhow::Result<()> {
    let rec = RecordFile::read(&path)?;
    let target = record_target(cfg, &rec)?;
    let kappa = cfg.measurement.kappa;
    let bounds = fidelity_bounds(&rec.record, &target, kappa)?;
    println!("lower = {}\nupper = {}", bounds.lower, bounds.upper);
    let file = BoundFile {
        meta: Meta {
            command: "bound".into(),
            config_sha256: cfg.digest(&format!("bound:{}", rec.meta.config_sha256)),
            seed: rec.meta.seed,
        },
        n: rec.n,
        phi: cfg.target.phi.unwrap_or(rec.phi),
        kappa,
        bounds,
    };
    write_json(&out, &file)
}

fn sweep(
    cfg: &RunConfig,
    p: Option<f64>,
    state: Option<PathBuf>,
    counts: Vec<usize>,
    gap_threshold: Option<f64>,
    out: PathBuf,
) -> anyhow::Result<()> {
    let seed = cfg.seed()?;
    let (n, phi, rho, upstream) = match (p, state) {
        (Some(p), None) => {
            let target = cfg.target(0.0)?;
            (target.n, target.phi, noon_mixture(&target, p)?, String::new())
        }
        (None, Some(path)) => {
            let file: StateFile = read_json(&path)?;
            let rho = working_state(&file.state()?, file.n)?;
            (file.n, cfg.target.phi.unwrap_or(file.phi), rho, file.meta.config_sha256)
        }
        _ => bail!(ConfigError("sweep needs exactly one of --p or --state".into())),
    };
    let target = noon_working_state(&noon_core::protocol::NoonTarget::new(n, phi)?);
    let opts = SweepOptions {
        sigma: cfg.measurement.sigma,
        kappa: cfg.measurement.kappa,
        radius: cfg.measurement.radius,
        seed,
    };
    let mut result = bound_sweep(&rho, &target, &counts, &opts)?;
    result.p = p;
    let meta = Meta {
        command: "sweep".into(),
        config_sha256: cfg.digest(&format!("sweep:p={p:?}:counts={counts:?}:{upstream}")),
        seed: Some(seed),
    };
    write_sweep(&out, &meta, &result)?;
    for r in &result.rows {
        println!("{:>6}  lower {:.6}  upper {:.6}  gap {:.6}", r.count, r.lower, r.upper, r.gap);
    }
    if let Some(threshold) = gap_threshold {
        let max = counts.iter().copied().max().unwrap_or(0);
        match gap_threshold_count(&rho, &target, max, threshold, &opts)? {
            Some(k) => println!("gap <= {threshold} from count {k}"),
            None => println!("gap <= {threshold} not reached within {max} settings"),
        }
    }
    Ok(())
}

fn check_complete(cfg: &RunConfig) -> anyhow::Result<()> {
    let n = cfg.n()?;
    let seed = cfg.seed()?;
    let Some(count) = cfg.measurement.count else {
        bail!(ConfigError("measurement count is required (--count or measurement.count)".into()));
    };
    let settings = sample_settings(count, cfg.radius(n), seed)?;
    let rank = completeness_rank(&settings, &[n + 1, n + 1])?;
    let full = (n + 1).pow(4);
    let verdict = if rank == full { "complete" } else { "incomplete" };
    println!("rank {rank} of d^2 = {full} ({verdict})");
    Ok(())
}
