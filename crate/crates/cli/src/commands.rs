//! The five verbs. Each one validates all of its inputs before writing
//! anything, and writes every file through an atomic rename.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, ArrayView2};
use rbmlab::data::write_atomic;
use rbmlab::dynamics::{
    autocorrelation, equilibrium_reference, fit_mixing_time, log_grid, thermalization_time, Curve, MixingFit,
    Trajectory,
};
use rbmlab::likelihood::{exact_log_z, exact_moments, log_likelihood, log_z_auto, ais_log_z, BetaSchedule, LogZ};
use rbmlab::metrics;
use rbmlab::rng::labels;
use rbmlab::trainer::{Checkpoint, Trainer};
use rbmlab::{BinaryDataset, ChainEnsemble, RbmError, RbmModel, Result, SeedSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::archive::{self, ArchiveIndex, ArchivePoint};
use crate::checkpoint;
use crate::config::{ExperimentConfig, InitMode, MetricsSection};
use crate::curve::{MetricCurve, Record};

pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const RHO_FILE: &str = "rho.csv";
const RHO_HEADER: &str = "t_age,lag,rho";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub n_updates: u64,
    pub checkpoints: Vec<ManifestEntry>,
    #[serde(rename = "final")]
    pub final_checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub t_age: u64,
    pub file: String,
    /// Seconds since the start of the run that wrote the file.
    pub wall_seconds: f64,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.training_fingerprint().as_bytes()))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| RbmError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RbmError::Format {
        location: format!("{}, line {}", path.display(), e.line()),
        message: e.to_string(),
    })
}

/// Trains and writes `checkpoints/ckpt_<age>.rbm` plus `manifest.json` under
/// the configured output directory. With `resume`, restarts from the oldest
/// checkpoint not yet superseded on disk.
pub fn cmd_train(cfg: &ExperimentConfig, resume: bool) -> Result<Manifest> {
    cfg.validate()?;
    let (train, _) = cfg.datasets()?;
    let tc = cfg.train_config();
    let hash = config_hash(cfg);
    let out = &cfg.output;
    let ckpt_dir = out.join(CHECKPOINT_DIR);

    let mut entries = Vec::new();
    let mut trainer = Trainer::new(&train, tc.clone())?;
    if resume && out.join(MANIFEST).is_file() {
        let old = read_manifest(out)?;
        if old.config_hash != hash {
            return Err(RbmError::Input(
                "cannot resume: configuration differs from the one in the manifest".into(),
            ));
        }
        let latest = old
            .checkpoints
            .iter()
            .filter(|e| ckpt_dir.join(&e.file).is_file())
            .max_by_key(|e| e.t_age);
        if let Some(e) = latest {
            let cp = checkpoint::load(&ckpt_dir.join(&e.file))?;
            if cp.config != tc {
                return Err(RbmError::Input(format!(
                    "checkpoint {} was written with another configuration",
                    e.file
                )));
            }
            entries = old.checkpoints.iter().filter(|x| x.t_age <= cp.t_age).cloned().collect();
            trainer = Trainer::resume(&train, cp)?;
        }
    }

    create_dir(&ckpt_dir)?;
    let start = Instant::now();
    let mut manifest = Manifest {
        config_hash: hash,
        n_updates: tc.n_updates,
        checkpoints: entries,
        final_checkpoint: None,
    };
    trainer.run(|cp| {
        let file = checkpoint::file_name(cp.t_age);
        checkpoint::save(&cp, &ckpt_dir.join(&file))?;
        manifest.checkpoints.retain(|e| e.t_age != cp.t_age);
        manifest.checkpoints.push(ManifestEntry {
            t_age: cp.t_age,
            file: file.clone(),
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if cp.t_age == tc.n_updates {
            manifest.final_checkpoint = Some(file);
        }
        write_atomic(&out.join(MANIFEST), &json_bytes(&manifest))
    })?;
    Ok(manifest)
}

fn generation_seed(cfg: &ExperimentConfig, stream: u64) -> SeedSpec {
    SeedSpec::new(SeedSpec::new(cfg.seed, 0).derive(labels::GENERATE).master_seed, stream)
}

/// Lags with unit spacing up to 64, then log-spaced up to `max_lag`.
pub fn rho_lags(max_lag: u64) -> Vec<u64> {
    let mut lags: Vec<u64> = (0..=max_lag.min(64)).collect();
    lags.extend(log_grid(max_lag, 60).into_iter().filter(|&l| l > 64));
    lags
}

/// Autocorrelation of an equilibrated model after discarding `discard` steps.
pub fn measure_rho(model: &RbmModel, cfg: &ExperimentConfig) -> Result<(Vec<u64>, Vec<f64>)> {
    let horizon = cfg.generate.horizon;
    let discard = cfg.discard();
    if discard >= horizon {
        return Err(RbmError::Input(format!(
            "discard {discard} leaves nothing of horizon {horizon}"
        )));
    }
    let n = cfg.generate.rho_chains;
    let reference = equilibrium_reference(model, discard, n, horizon, generation_seed(cfg, 2))?;
    let mut chains = ChainEnsemble::init_random(model, n, generation_seed(cfg, 3))?;
    let times: Vec<u64> = rho_lags(horizon - discard).iter().map(|l| l + discard).collect();
    let traj = Trajectory::record(model, &mut chains, &times, reference)?;
    let a = autocorrelation(&traj, discard)?;
    Ok((a.lags, a.rho))
}

/// Runs `n_chains` chains from the checkpoint and stores the visible states
/// at each point of the log-spaced grid.
pub fn cmd_generate(
    cfg: &ExperimentConfig,
    checkpoint_path: &Path,
    init: InitMode,
    out_dir: &Path,
    with_rho: bool,
) -> Result<ArchiveIndex> {
    cfg.validate()?;
    let cp = checkpoint::load(checkpoint_path)?;
    let model = &cp.model;
    let g = &cfg.generate;
    let seed = generation_seed(cfg, init.stream());
    let (mut chains, image_shape) = match init {
        InitMode::Random => (
            ChainEnsemble::init_random(model, g.n_chains, seed)?,
            cfg.dataset.image_shape.map(|[r, c]| (r, c)),
        ),
        InitMode::Dataset => {
            let (train, _) = cfg.datasets()?;
            if train.n_visible() != model.n_visible() {
                return Err(RbmError::Dimension(format!(
                    "dataset has {} columns, model {} visible units",
                    train.n_visible(),
                    model.n_visible()
                )));
            }
            let shape = train.image_shape();
            (ChainEnsemble::init_from_dataset(model, &train, g.n_chains, seed)?, shape)
        }
    };
    if with_rho && cfg.discard() >= g.horizon {
        return Err(RbmError::Input("discard must be smaller than the horizon".into()));
    }
    let grid = log_grid(g.horizon, g.n_points);
    let snaps = chains.record_trajectory(model, g.horizon, &grid)?;
    let rho = if with_rho { Some(measure_rho(model, cfg)?) } else { None };

    create_dir(out_dir)?;
    let mut points = Vec::with_capacity(snaps.len());
    for snap in snaps {
        let file = archive::sample_file(snap.t_g);
        let ds = BinaryDataset::new(snap.visible_states, format!("t_G={}", snap.t_g))?.with_image_shape(image_shape)?;
        write_atomic(&out_dir.join(&file), &ds.to_packed_bytes())?;
        points.push(ArchivePoint { t_g: snap.t_g, file });
    }
    let rho_name = match rho {
        Some((lags, rho)) => {
            let mut text = format!("{RHO_HEADER}\n");
            for (l, r) in lags.iter().zip(&rho) {
                text.push_str(&format!("{},{l},{r:?}\n", cp.t_age));
            }
            write_atomic(&out_dir.join(RHO_FILE), text.as_bytes())?;
            Some(RHO_FILE.to_string())
        }
        None => None,
    };
    let index = ArchiveIndex {
        t_age: cp.t_age,
        init,
        seed: cfg.seed,
        n_chains: g.n_chains,
        n_visible: model.n_visible(),
        image_shape,
        points,
        rho: rho_name,
    };
    archive::write_index(out_dir, &index)?;
    Ok(index)
}

fn ais_schedule(cfg: &ExperimentConfig) -> Result<BetaSchedule> {
    BetaSchedule::uniform(cfg.ais.n_temperatures)
}

fn log_z_for(model: &RbmModel, cfg: &ExperimentConfig) -> Result<LogZ> {
    log_z_auto(
        model,
        &ais_schedule(cfg)?,
        cfg.ais.n_runners,
        SeedSpec::new(cfg.seed, 0).derive(labels::AIS),
    )
}

fn head(x: ArrayView2<'_, u8>, n: usize) -> ArrayView2<'_, u8> {
    x.slice_move(s![..n.min(x.nrows()), ..])
}

/// Leading rows of both sets, truncated to the smaller size.
fn paired<'a, 'b>(a: ArrayView2<'a, u8>, b: ArrayView2<'b, u8>) -> (ArrayView2<'a, u8>, ArrayView2<'b, u8>) {
    let n = a.nrows().min(b.nrows());
    (head(a, n), head(b, n))
}

/// Computes the enabled metrics for one generated set.
pub fn evaluate_set(
    gen: ArrayView2<'_, u8>,
    model: &RbmModel,
    train: &BinaryDataset,
    test: Option<&BinaryDataset>,
    image_shape: Option<(usize, usize)>,
    log_z: Option<LogZ>,
    m: &MetricsSection,
) -> Result<Vec<(String, f64)>> {
    let reference = train.samples();
    let mut out = Vec::new();
    if m.e2 {
        out.push(("e2".into(), metrics::moment2_error(gen, reference)?));
    }
    if m.e3 {
        let n = m.n_sites.min(gen.ncols());
        out.push(("e3".into(), metrics::moment3_error(gen, reference, n)?));
    }
    if m.psd {
        if let Some(shape) = image_shape {
            out.push(("e_psd".into(), metrics::psd_error(gen, reference, shape)?));
        }
    }
    if m.aai {
        let (g, r) = paired(gen, reference);
        out.push(("e_aai_train".into(), metrics::adversarial_accuracy(g, r)?.e_aa));
        if let Some(t) = test {
            let (g, r) = paired(gen, t.samples());
            out.push(("e_aai_test".into(), metrics::adversarial_accuracy(g, r)?.e_aa));
        }
    }
    if m.entropy {
        let (g, r) = paired(gen, reference);
        out.push(("delta_s".into(), metrics::entropy_gap(g, r)?));
    }
    if m.energy {
        out.push(("e_energy".into(), metrics::energy_error(model, gen, reference)?));
    }
    if let Some(z) = log_z {
        let tag = if z.is_exact() { "log_z_exact" } else { "log_z_ais" };
        out.push((tag.into(), z.value()));
        out.push(("ll_rbm".into(), log_likelihood(model, gen, z.value())?));
        out.push(("ll_data".into(), log_likelihood(model, reference, z.value())?));
    }
    Ok(out)
}

/// Evaluates every archived set and merges the records into `out_csv`.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    archive_dir: &Path,
    checkpoint_path: &Path,
    out_csv: &Path,
    selection: &MetricsSection,
) -> Result<MetricCurve> {
    cfg.validate()?;
    let index = archive::read_index(archive_dir)?;
    let cp = checkpoint::load(checkpoint_path)?;
    if cp.t_age != index.t_age {
        return Err(RbmError::Input(format!(
            "archive was generated at t_age {}, checkpoint has t_age {}",
            index.t_age, cp.t_age
        )));
    }
    let (train, test) = cfg.datasets()?;
    if train.n_visible() != index.n_visible || cp.model.n_visible() != index.n_visible {
        return Err(RbmError::Input(format!(
            "archive has {} columns, reference {}, model {}",
            index.n_visible,
            train.n_visible(),
            cp.model.n_visible()
        )));
    }
    let mut curve = if out_csv.is_file() {
        MetricCurve::load(out_csv)?
    } else {
        MetricCurve::default()
    };
    let sets = index
        .points
        .iter()
        .map(|p| archive::load_point(archive_dir, p).map(|d| (p.t_g, d)))
        .collect::<Result<Vec<_>>>()?;
    let log_z = if selection.ll { Some(log_z_for(&cp.model, cfg)?) } else { None };
    let shape = index.image_shape.or(train.image_shape());
    let mut records = Vec::new();
    for (t_g, set) in &sets {
        if set.n_visible() != index.n_visible {
            return Err(RbmError::Input(format!("sample set at t_G={t_g} has the wrong width")));
        }
        for (metric, value) in evaluate_set(set.samples(), &cp.model, &train, test.as_ref(), shape, log_z, selection)? {
            records.push(Record {
                t_age: index.t_age,
                t_g: *t_g,
                init: index.init,
                metric,
                value,
                seed: index.seed,
            });
        }
    }
    curve.merge(records);
    if let Some(dir) = out_csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    curve.save(out_csv)?;
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermStatus {
    Merged,
    NotThermalized,
    /// One of the two initializations has no records.
    MissingInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Equilibrium,
    Ooe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeAnalysis {
    pub t_age: u64,
    pub t_alpha: Option<f64>,
    pub mixing_fit: Option<MixingFit>,
    pub t_therm: Option<u64>,
    pub therm_status: ThermStatus,
    /// metric → init → t_G of the smallest value.
    pub argmin: BTreeMap<String, BTreeMap<String, u64>>,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub metric: String,
    pub tolerance: f64,
    pub k: Option<u64>,
    pub ages: Vec<AgeAnalysis>,
}

/// Autocorrelation curves keyed by `t_age`, as `(lags, rho)`.
pub type RhoTable = BTreeMap<u64, (Vec<u64>, Vec<f64>)>;

/// Reads a file with header `t_age,lag,rho`.
pub fn read_rho(path: &Path) -> Result<RhoTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RbmError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some(RHO_HEADER) {
        return Err(RbmError::Format {
            location: format!("{}, line 1", path.display()),
            message: format!("expected header '{RHO_HEADER}'"),
        });
    }
    let mut out = RhoTable::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |m: String| RbmError::Format {
            location: format!("{}, line {}", path.display(), i + 1),
            message: m,
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", f.len())));
        }
        let age: u64 = f[0].parse().map_err(|e| bad(format!("{e}")))?;
        let lag: u64 = f[1].parse().map_err(|e| bad(format!("{e}")))?;
        let rho: f64 = f[2].parse().map_err(|e| bad(format!("{e}")))?;
        let entry = out.entry(age).or_default();
        entry.0.push(lag);
        entry.1.push(rho);
    }
    Ok(out)
}

pub fn verdict(t_therm: Option<u64>, status: ThermStatus, k: Option<u64>) -> Option<Verdict> {
    let k = k?;
    match (status, t_therm) {
        (ThermStatus::Merged, Some(t)) if t <= k => Some(Verdict::Equilibrium),
        (ThermStatus::Merged, Some(_)) | (ThermStatus::NotThermalized, _) => Some(Verdict::Ooe),
        _ => None,
    }
}

pub fn analyze(
    curve: &MetricCurve,
    rho: &RhoTable,
    metric: &str,
    tolerance: f64,
    k: Option<u64>,
) -> Result<Analysis> {
    let mut ages: Vec<u64> = curve.t_ages();
    ages.extend(rho.keys());
    ages.sort_unstable();
    ages.dedup();
    let mut out = Vec::new();
    for t_age in ages {
        let fit = match rho.get(&t_age) {
            Some((lags, r)) => match fit_mixing_time(r, lags) {
                Ok(f) => Some(f),
                Err(e) if e.is_validation() => return Err(e),
                Err(_) => None,
            },
            None => None,
        };
        let mut argmin: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for m in curve.metrics() {
            for init in [InitMode::Random, InitMode::Dataset] {
                let (t_g, v) = curve.series(t_age, init, &m);
                if let Some(t) = Curve::new(t_g, v)?.argmin() {
                    argmin.entry(m.clone()).or_default().insert(init.as_str().into(), t);
                }
            }
        }
        let (status, t_therm) = if curve.has_init(t_age, InitMode::Random) && curve.has_init(t_age, InitMode::Dataset) {
            let (gr, vr) = curve.series(t_age, InitMode::Random, metric);
            let (gd, vd) = curve.series(t_age, InitMode::Dataset, metric);
            match thermalization_time(&Curve::new(gr, vr)?, &Curve::new(gd, vd)?, tolerance)? {
                Some(t) => (ThermStatus::Merged, Some(t)),
                None => (ThermStatus::NotThermalized, None),
            }
        } else {
            (ThermStatus::MissingInit, None)
        };
        out.push(AgeAnalysis {
            t_age,
            t_alpha: fit.map(|f| f.t_alpha),
            mixing_fit: fit,
            t_therm,
            therm_status: status,
            argmin,
            verdict: verdict(t_therm, status, k),
        });
    }
    Ok(Analysis {
        metric: metric.to_string(),
        tolerance,
        k,
        ages: out,
    })
}

/// Combines metric curves (and optional autocorrelation files) into a
/// per-age summary written as JSON.
pub fn cmd_analyze(
    curves: &[PathBuf],
    rho_files: &[PathBuf],
    metric: &str,
    tolerance: f64,
    k: Option<u64>,
    out: &Path,
) -> Result<Analysis> {
    if curves.is_empty() && rho_files.is_empty() {
        return Err(RbmError::Input("nothing to analyze".into()));
    }
    if !(tolerance > 0.0) {
        return Err(RbmError::Input("tolerance must be positive".into()));
    }
    let mut curve = MetricCurve::default();
    for p in curves {
        curve.merge(MetricCurve::load(p)?.records().iter().cloned());
    }
    let mut rho = BTreeMap::new();
    for p in rho_files {
        rho.extend(read_rho(p)?);
    }
    let analysis = analyze(&curve, &rho, metric, tolerance, k)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_atomic(out, &json_bytes(&analysis))?;
    Ok(analysis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub exact_log_z: Option<f64>,
    pub ais_log_z: f64,
    pub ais_temperatures: usize,
    pub ais_runners: usize,
    /// Exact `⟨v_i⟩` when enumeration is possible.
    pub visible_means: Option<Vec<f64>>,
}

/// Exact enumeration next to the AIS estimate for one model.
pub fn cmd_oracle(cfg: &ExperimentConfig, model: &RbmModel) -> Result<OracleReport> {
    cfg.validate()?;
    let ais = ais_log_z(
        model,
        &ais_schedule(cfg)?,
        cfg.ais.n_runners,
        SeedSpec::new(cfg.seed, 0).derive(labels::AIS),
    )?;
    let exact = match exact_log_z(model) {
        Ok(z) => Some(z),
        Err(RbmError::Capacity(_)) => None,
        Err(e) => return Err(e),
    };
    let visible_means = match exact {
        Some(_) => Some(exact_moments(model)?.v.to_vec()),
        None => None,
    };
    Ok(OracleReport {
        n_visible: model.n_visible(),
        n_hidden: model.n_hidden(),
        exact_log_z: exact,
        ais_log_z: ais.log_z_estimate,
        ais_temperatures: cfg.ais.n_temperatures,
        ais_runners: cfg.ais.n_runners,
        visible_means,
    })
}

pub fn load_model(path: &Path) -> Result<Checkpoint> {
    checkpoint::load(path)
}
