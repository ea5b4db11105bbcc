//! Experiment orchestration behind the `steinpp` binary: realization
//! sampling, verification suites and bound-dominance tables.
//!
//! Every command is a pure function of the configuration and its seed, so
//! repeated runs write byte-identical files whatever the worker count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use steinpp::config::{CheckSpec, ExperimentConfig};
use steinpp::distances::{box_count, cardinality, dyadic_boxes, TestFunctional};
use steinpp::dominance::{run_pair_report, DominanceRow, DominanceSettings, PairSpec};
use steinpp::glauber::{
    stein_dirichlet, verify_commutation, verify_invariance_and_rate, verify_semigroup, verify_stationarity,
    GlauberTarget, SteinDirichletSettings, RATE_TIMES,
};
use steinpp::io::{config_to_json, write_config_csv, write_table, Format};
use steinpp::papangelou::{check_structural_lemmas, evaluator, gnz_check, reference_quadrature, LemmaSettings, TestFn};
use steinpp::report::CheckRow;
use steinpp::{Configuration, Density, Model, Point, PointProcess, Space, Streams};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] steinpp::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const CHECKS_HEADER: [&str; 6] = ["model_id", "check_id", "lhs", "rhs", "stderr", "pass"];
pub const CONVERGENCE_HEADER: [&str; 6] = ["functional", "config_size", "t", "gap", "stderr", "reference"];
pub const DOMINANCE_HEADER: [&str; 9] =
    ["pair_id", "bound_id", "bound", "bound_stderr", "kr_lower", "kr_stderr", "functional", "margin", "pass"];
pub const BOUNDS_HEADER: [&str; 6] = ["pair_id", "bound_id", "value", "stderr", "inputs_hash", "seed"];

/// Reads and validates a config; `seed` replaces the configured seed.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let mut cfg = ExperimentConfig::from_json(&text)
        .map_err(|e| steinpp::Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Writes one realization per sample entry and replica to `out/samples/`.
/// Files are `<model>.<ext>`, or `<model>_<r>.<ext>` with several replicas.
pub fn cmd_sample(cfg: &ExperimentConfig, out: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let dir = out.join("samples");
    ensure_dir(&dir)?;
    let mut written = Vec::new();
    for spec in &cfg.samples {
        let named = cfg.model(&spec.model)?;
        let model = named.build()?;
        let dim = model.space()?.dim();
        let streams = Streams::new(cfg.seed, &format!("sample:{}", spec.model));
        for r in 0..spec.replicas {
            let phi = model.sample(&mut streams.rng(r as u64))?;
            let stem = if spec.replicas > 1 { format!("{}_{r}", spec.model) } else { spec.model.clone() };
            let path = dir.join(format!("{stem}.{}", format.extension()));
            let bytes = match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_config_csv(&phi, dim, &mut buf)?;
                    buf
                }
                Format::Json => {
                    let mut s = config_to_json(&phi, dim)?;
                    s.push('\n');
                    s.into_bytes()
                }
            };
            write_file(&path, &bytes)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// One point of a Glauber convergence curve: `|P_t F(φ) − E F(ζ)|` with its
/// reference `e^{−t}(|φ| + M(X))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub functional: String,
    pub config_size: usize,
    pub t: f64,
    pub gap: f64,
    pub stderr: f64,
    pub reference: f64,
}

/// Rows of a verification run.
#[derive(Clone, Debug, Default)]
pub struct VerifyOutput {
    pub checks: Vec<CheckRow>,
    pub convergence: Vec<ConvergenceRow>,
}

impl VerifyOutput {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|r| r.pass)
    }
}

fn lower_half_count(space: &Space) -> impl Fn(&Point, &Configuration) -> f64 + Sync {
    let (lo, hi) = space.bounding_box();
    let mid = 0.5 * (lo[0] + hi[0]);
    move |_: &Point, phi: &Configuration| phi.count(|p| p.coords()[0] < mid) as f64
}

fn run_gnz(
    model_id: &str,
    check_id: &str,
    model: &Model,
    eval_model: &Model,
    n: usize,
    resolution: Option<usize>,
    streams: &Streams,
) -> Result<Vec<CheckRow>> {
    let e = evaluator(eval_model)?;
    let space = model.space()?;
    let q = reference_quadrature(e.as_ref(), &space, resolution);
    let one = |_: &Point, _: &Configuration| 1.0;
    let count = lower_half_count(&space);
    let us: [TestFn; 2] = [&one, &count];
    let reports = gnz_check(model, e.as_ref(), &q, &us, n, streams)?;
    Ok(reports
        .iter()
        .zip(["gnz:u=1", "gnz:u=count_lower_half"])
        .map(|(r, name)| r.row(model_id, &format!("{check_id}:{name}")))
        .collect())
}

/// The three functionals of the Glauber suite.
pub fn glauber_functionals() -> Vec<TestFunctional> {
    let quarter = dyadic_boxes(&Space::unit_box(2), 2)[1];
    vec![
        cardinality(),
        TestFunctional::new("soft_count", 1.0, |phi| 1.0 - (-(phi.len() as f64)).exp()),
        box_count("quarter", quarter),
    ]
}

/// Starting configurations of sizes 0, 3 and 6.
pub fn glauber_configurations() -> Vec<Configuration> {
    vec![
        Configuration::new(),
        [Point::xy(0.1, 0.1), Point::xy(0.5, 0.5), Point::xy(0.9, 0.2)].into_iter().collect(),
        (0..6).map(|i| Point::xy(0.05 + 0.15 * i as f64, 0.3)).collect(),
    ]
}

fn run_glauber(check_id: &str, intensity: f64, n: usize, streams: &Streams, out: &mut VerifyOutput) -> Result<()> {
    let target = GlauberTarget::new(Space::unit_box(2), Density::constant(intensity))?;
    let family = glauber_functionals();
    let mut rows = Vec::new();
    for f in &family {
        for phi in glauber_configurations() {
            let suffix = format!(":phi{}", phi.len());
            let s = streams.child(&format!("{}{suffix}", f.id));
            let mut batch = vec![
                verify_semigroup(f, &phi, 0.4, 0.7, &target, n, &s.child("semigroup"))?,
                verify_commutation(f, &Point::xy(0.2, 0.2), &phi, 0.8, &target, n, &s.child("commutation"))?,
            ];
            let rate_rows = verify_invariance_and_rate(f, &phi, &target, n, &s.child("rate"))?;
            for (row, t) in rate_rows.iter().filter(|r| r.check_id.starts_with("rate:")).zip(RATE_TIMES) {
                out.convergence.push(ConvergenceRow {
                    functional: f.id.clone(),
                    config_size: phi.len(),
                    t,
                    gap: row.lhs,
                    stderr: row.stderr,
                    reference: row.rhs,
                });
            }
            batch.extend(rate_rows);
            let settings = SteinDirichletSettings { n_samples: n, ..Default::default() };
            batch.push(stein_dirichlet(f, &phi, &target, settings, &s.child("stein_dirichlet"))?);
            for mut row in batch {
                row.check_id.push_str(&suffix);
                rows.push(row);
            }
        }
    }
    rows.extend(verify_stationarity(&target, &target, &family, 16, n, &streams.child("stationarity"))?);
    for mut row in rows {
        row.check_id = format!("{check_id}:{}", row.check_id);
        out.checks.push(row);
    }
    Ok(())
}

/// Runs every configured check. Each check draws from its own stream
/// family keyed by its id, so adding or reordering checks leaves the
/// others unchanged.
pub fn run_checks(cfg: &ExperimentConfig) -> Result<VerifyOutput> {
    let mut out = VerifyOutput::default();
    for check in &cfg.checks {
        let streams = Streams::new(cfg.seed, &format!("check:{}", check.id()));
        match check {
            CheckSpec::Gnz { id, model, evaluator, n_samples, resolution } => {
                let m = cfg.model(model)?.build()?;
                let e = match evaluator {
                    Some(spec) => spec.build()?,
                    None => m.clone(),
                };
                out.checks.extend(run_gnz(model, id, &m, &e, *n_samples, *resolution, &streams)?);
            }
            CheckSpec::Lemmas { id, model, n_samples, weakly_repulsive } => {
                let m = cfg.model(model)?.build()?;
                let e = evaluator(&m)?;
                let settings =
                    LemmaSettings { n_samples: *n_samples, weakly_repulsive: *weakly_repulsive, ..Default::default() };
                for mut row in check_structural_lemmas(model, &m, e.as_ref(), &m.space()?, None, settings, &streams)? {
                    row.check_id = format!("{id}:{}", row.check_id);
                    out.checks.push(row);
                }
            }
            CheckSpec::Glauber { id, intensity, n_samples } => {
                run_glauber(id, *intensity, *n_samples, &streams, &mut out)?;
            }
        }
    }
    Ok(out)
}

/// Runs the checks and writes `checks.<ext>` and `convergence.<ext>`.
/// Returns whether every check passed.
pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path, format: Format) -> Result<VerifyOutput> {
    ensure_dir(out)?;
    let result = run_checks(cfg)?;
    let ext = format.extension();
    write_table(&out.join(format!("checks.{ext}")), &CHECKS_HEADER, &result.checks, format)?;
    write_table(&out.join(format!("convergence.{ext}")), &CONVERGENCE_HEADER, &result.convergence, format)?;
    Ok(result)
}

/// A bound as written to `bounds.<ext>`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub pair_id: String,
    pub bound_id: String,
    pub value: f64,
    pub stderr: f64,
    pub inputs_hash: String,
    pub seed: Option<u64>,
}

/// Rows of a bound run, in configuration order.
#[derive(Clone, Debug, Default)]
pub struct BoundOutput {
    pub dominance: Vec<DominanceRow>,
    pub bounds: Vec<BoundRow>,
}

impl BoundOutput {
    pub fn all_pass(&self) -> bool {
        self.dominance.iter().all(|r| r.pass)
    }
}

/// Bounds and paired KR lower bounds; the eight-pair suite when the
/// config has no `bounds` section.
pub fn run_bounds(cfg: &ExperimentConfig) -> Result<BoundOutput> {
    let (settings, pairs) = match &cfg.bounds {
        Some(b) => (b.settings, b.pairs.clone()),
        None => (DominanceSettings::default(), PairSpec::suite()),
    };
    let streams = Streams::new(cfg.seed, "bound");
    let mut out = BoundOutput::default();
    for (i, pair) in pairs.iter().enumerate() {
        // Index in the stream label keeps repeated pair kinds independent.
        let (row, report) = run_pair_report(pair, &settings, &streams.child(&i.to_string()))?;
        out.bounds.push(BoundRow {
            pair_id: row.pair_id.clone(),
            bound_id: report.bound_id,
            value: report.value,
            stderr: report.stderr,
            inputs_hash: report.inputs_hash,
            seed: report.seed,
        });
        out.dominance.push(row);
    }
    Ok(out)
}

/// Writes `dominance.<ext>` and `bounds.<ext>`.
pub fn cmd_bound(cfg: &ExperimentConfig, out: &Path, format: Format) -> Result<BoundOutput> {
    ensure_dir(out)?;
    let result = run_bounds(cfg)?;
    let ext = format.extension();
    write_table(&out.join(format!("dominance.{ext}")), &DOMINANCE_HEADER, &result.dominance, format)?;
    write_table(&out.join(format!("bounds.{ext}")), &BOUNDS_HEADER, &result.bounds, format)?;
    Ok(result)
}
