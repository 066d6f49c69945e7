//! Relaxation of Gibbs chains: autocorrelation of the mean magnetizations,
//! exponential mixing-time fits, and the thermalization time at which chains
//! started from noise and from data become indistinguishable.

use std::collections::BTreeMap;

use ndarray::{Array1, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{RbmError, Result};
use crate::model::RbmModel;
use crate::rng::SeedSpec;
use crate::sampler::ChainEnsemble;

/// Bounds of the default fit window on ρ.
pub const FIT_WINDOW: (f64, f64) = (0.05, 0.8);
pub const THERMALIZATION_FLOOR: f64 = 1e-12;
pub const DEFAULT_TOLERANCE: f64 = 0.05;

/// Mean magnetizations `m_i(t) = P(v_i = 1 | h(t))` of a set of chains at
/// increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<u64>,
    /// time × chain × visible unit
    means: Array3<f64>,
    reference: Array1<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<u64>, means: Array3<f64>, reference: Array1<f64>) -> Result<Self> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RbmError::Input("trajectory times must be strictly increasing".into()));
        }
        if means.len_of(Axis(0)) != times.len() {
            return Err(RbmError::Dimension(format!(
                "{} times but {} records",
                times.len(),
                means.len_of(Axis(0))
            )));
        }
        if means.len_of(Axis(2)) != reference.len() {
            return Err(RbmError::Dimension(format!(
                "records have {} sites, reference has {}",
                means.len_of(Axis(2)),
                reference.len()
            )));
        }
        Ok(Self { times, means, reference })
    }

    /// A trajectory of one chain from a time × site matrix.
    pub fn single_chain(times: Vec<u64>, means: ArrayView2<'_, f64>, reference: Array1<f64>) -> Result<Self> {
        let m = means.insert_axis(Axis(1)).to_owned();
        Self::new(times, m, reference)
    }

    /// Advances `chains` and stores their mean magnetizations at each
    /// absolute step count in `times`.
    pub fn record(
        model: &RbmModel,
        chains: &mut ChainEnsemble,
        times: &[u64],
        reference: Array1<f64>,
    ) -> Result<Self> {
        if times.first().is_some_and(|&t| t < chains.step_counter()) {
            return Err(RbmError::Input(format!(
                "time {} is already past (chains at step {})",
                times[0],
                chains.step_counter()
            )));
        }
        let mut means = Array3::zeros((times.len(), chains.n_chains(), chains.n_visible()));
        for (j, &t) in times.iter().enumerate() {
            if j > 0 && t <= times[j - 1] {
                return Err(RbmError::Input("trajectory times must be strictly increasing".into()));
            }
            chains.gibbs_step(model, t - chains.step_counter())?;
            means.index_axis_mut(Axis(0), j).assign(&chains.visible_means());
        }
        Self::new(times.to_vec(), means, reference)
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn means(&self) -> &Array3<f64> {
        &self.means
    }

    pub fn reference(&self) -> &Array1<f64> {
        &self.reference
    }

    pub fn n_chains(&self) -> usize {
        self.means.len_of(Axis(1))
    }

    fn index_of(&self, t: u64) -> Result<usize> {
        self.times
            .binary_search(&t)
            .map_err(|_| RbmError::Input(format!("time {t} is not on the trajectory grid")))
    }

    /// `(1/N) Σ_i (m_i(a) - m̄_i)(m_i(b) - m̄_i)` averaged over chains.
    fn correlation(&self, a: usize, b: usize) -> f64 {
        let da = &self.means.index_axis(Axis(0), a) - &self.reference;
        let db = &self.means.index_axis(Axis(0), b) - &self.reference;
        (da * db).mean().unwrap()
    }
}

/// Time and chain average of the mean magnetizations over
/// `(burn_in, horizon]` for random-initialized chains.
pub fn equilibrium_reference(
    model: &RbmModel,
    burn_in: u64,
    n_chains: usize,
    horizon: u64,
    seed: SeedSpec,
) -> Result<Array1<f64>> {
    if horizon <= burn_in {
        return Err(RbmError::Input(format!(
            "horizon {horizon} must exceed burn-in {burn_in}"
        )));
    }
    let mut chains = ChainEnsemble::init_random(model, n_chains, seed)?;
    chains.gibbs_step(model, burn_in)?;
    let mut acc = Array1::zeros(model.n_visible());
    for _ in burn_in..horizon {
        chains.gibbs_step(model, 1)?;
        acc += &chains.visible_means().sum_axis(Axis(0));
    }
    Ok(acc / ((horizon - burn_in) as f64 * n_chains as f64))
}

/// Normalized autocorrelation `ρ(t) = C(t)/C(0)` at each lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    pub lags: Vec<u64>,
    pub rho: Vec<f64>,
}

/// Autocorrelation with the time origin moved to `discard`, which must lie
/// on the trajectory grid.
pub fn autocorrelation(traj: &Trajectory, discard: u64) -> Result<Autocorrelation> {
    let origin = traj.index_of(discard)?;
    let c0 = traj.correlation(origin, origin);
    if !(c0 > 0.0) {
        return Err(RbmError::Degenerate(format!(
            "zero initial correlation at t = {discard}"
        )));
    }
    let (lags, rho) = (origin..traj.times.len())
        .map(|j| (traj.times[j] - discard, traj.correlation(j, origin) / c0))
        .unzip();
    Ok(Autocorrelation { lags, rho })
}

/// `ρ(t, t_w)` for each waiting time.
pub fn two_time_autocorrelation(
    traj: &Trajectory,
    waiting_times: &[u64],
) -> Result<BTreeMap<u64, Autocorrelation>> {
    waiting_times
        .iter()
        .map(|&tw| Ok((tw, autocorrelation(traj, tw)?)))
        .collect()
}

/// Largest sup-norm gap between two-time curves over their common lags.
pub fn aging_gap(curves: &BTreeMap<u64, Autocorrelation>) -> f64 {
    let list: Vec<&Autocorrelation> = curves.values().collect();
    let mut gap: f64 = 0.0;
    for (i, a) in list.iter().enumerate() {
        for b in &list[i + 1..] {
            for (lag, ra) in a.lags.iter().zip(&a.rho) {
                if let Ok(k) = b.lags.binary_search(lag) {
                    gap = gap.max((ra - b.rho[k]).abs());
                }
            }
        }
    }
    gap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingFit {
    pub t_alpha: f64,
    pub amplitude: f64,
    pub fit_window: (u64, u64),
    pub residual: f64,
}

/// Fits `ρ(t) ≈ A exp(-t / t_α)` by least squares on `ln ρ`.
///
/// The window starts at the first point with `ρ ≤ 0.8` and ends before the
/// first point with `ρ < 0.05`. Points are weighted by `ρ²`, the inverse
/// variance of `ln ρ` under additive noise.
pub fn fit_mixing_time(rho: &[f64], times: &[u64]) -> Result<MixingFit> {
    fit_mixing_time_window(rho, times, FIT_WINDOW)
}

pub fn fit_mixing_time_window(rho: &[f64], times: &[u64], window: (f64, f64)) -> Result<MixingFit> {
    if rho.len() != times.len() {
        return Err(RbmError::Dimension(format!(
            "{} values for {} times",
            rho.len(),
            times.len()
        )));
    }
    let (lo, hi) = window;
    let end = rho.iter().position(|&r| r < lo).unwrap_or(rho.len());
    let pts: Vec<(f64, f64)> = times[..end]
        .iter()
        .zip(&rho[..end])
        .filter(|(_, &r)| r >= lo && r <= hi)
        .map(|(&t, &r)| (t as f64, r))
        .collect();
    if pts.len() < 4 {
        return Err(RbmError::InsufficientData(format!(
            "{} points inside the fit window, need 4",
            pts.len()
        )));
    }
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, r) in &pts {
        let w = r * r;
        let y = r.ln();
        sw += w;
        st += w * t;
        sy += w * y;
        stt += w * t * t;
        sty += w * t * y;
    }
    let det = sw * stt - st * st;
    if det <= 0.0 {
        return Err(RbmError::InsufficientData("fit points share a single time".into()));
    }
    let slope = (sw * sty - st * sy) / det;
    let intercept = (sy - slope * st) / sw;
    if !(slope < 0.0) {
        return Err(RbmError::Degenerate(format!(
            "autocorrelation does not decay (slope {slope})"
        )));
    }
    let residual = (pts
        .iter()
        .map(|&(t, r)| (r.ln() - intercept - slope * t).powi(2))
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    Ok(MixingFit {
        t_alpha: -1.0 / slope,
        amplitude: intercept.exp(),
        fit_window: (pts[0].0 as u64, pts[pts.len() - 1].0 as u64),
        residual,
    })
}

/// An observable measured along a generation-time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub t_g: Vec<u64>,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn new(t_g: Vec<u64>, values: Vec<f64>) -> Result<Self> {
        if t_g.len() != values.len() {
            return Err(RbmError::Dimension(format!(
                "{} grid points, {} values",
                t_g.len(),
                values.len()
            )));
        }
        Ok(Self { t_g, values })
    }

    /// Grid point of the smallest value.
    pub fn argmin(&self) -> Option<u64> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| self.t_g[i])
    }
}

/// Earliest grid point from which the random-initialized curve stays within
/// relative `tolerance` of the dataset-initialized one. `None` when the two
/// never merge for good.
pub fn thermalization_time(random: &Curve, dataset: &Curve, tolerance: f64) -> Result<Option<u64>> {
    if random.t_g != dataset.t_g {
        return Err(RbmError::Input("curves are on different grids".into()));
    }
    let close = |(r, d): (&f64, &f64)| (r - d).abs() / d.abs().max(THERMALIZATION_FLOOR) < tolerance;
    let flags: Vec<bool> = random.values.iter().zip(&dataset.values).map(close).collect();
    let first = flags.iter().rposition(|&ok| !ok).map_or(0, |i| i + 1);
    Ok(random.t_g.get(first).copied())
}

/// Log-spaced integer grid from 1 to `horizon`, at most `n` points.
pub fn log_grid(horizon: u64, n: usize) -> Vec<u64> {
    crate::trainer::checkpoint_ages(horizon, n)
}
