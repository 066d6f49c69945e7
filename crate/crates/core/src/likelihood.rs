//! Partition functions and log-likelihoods.
//!
//! Small machines are handled exactly by enumerating the smaller layer and
//! marginalizing the other in closed form. Larger ones use annealed importance
//! sampling over the joint `(v, h)` state with bridging distributions
//! `p_k(v, h) ∝ exp(-β_k E(v, h))`.

use std::f64::consts::LN_2;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{RbmError, Result};
use crate::math::{log_mean_exp, log_sum_exp, logistic};
use crate::model::RbmModel;
use crate::rng::{uniform, SeedSpec};
use crate::trainer::SufficientStats;

/// Largest layer size that is enumerated exhaustively.
pub const MAX_ENUMERATION_BITS: usize = 20;

const ENUM_CHUNK: usize = 4096;
const AIS_BLOCK: usize = 32;

/// Inverse temperatures `0 = β_0 < β_1 < ... < β_K = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSchedule {
    betas: Vec<f64>,
}

impl BetaSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(RbmError::Input("schedule needs at least two temperatures".into()));
        }
        if betas[0] != 0.0 || *betas.last().unwrap() != 1.0 {
            return Err(RbmError::Input("schedule must start at 0 and end at 1".into()));
        }
        if betas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(RbmError::Input("schedule must be strictly increasing".into()));
        }
        Ok(Self { betas })
    }

    /// `n` equally spaced inverse temperatures, `β_k = k / (n - 1)`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(RbmError::Input(format!("uniform schedule needs n >= 2, got {n}")));
        }
        let last = (n - 1) as f64;
        Self::new((0..n).map(|k| k as f64 / last).collect())
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisResult {
    pub log_z_estimate: f64,
    pub log_weights: Vec<f64>,
    pub n_temperatures: usize,
    pub n_runners: usize,
}

impl AisResult {
    /// `ln Z_0` of the uniform joint distribution the runners start from.
    pub fn log_z0(n_visible: usize, n_hidden: usize) -> f64 {
        (n_visible + n_hidden) as f64 * LN_2
    }
}

/// Enumerates all `2^n` binary vectors of length `n` in chunks, handing each
/// chunk (as rows, bit `i` of the code in column `i`) to `f`.
fn for_each_chunk<T: Send>(n: usize, f: impl Fn(Array2<f64>) -> T + Sync) -> Vec<T> {
    let total = 1usize << n;
    let n_chunks = total.div_ceil(ENUM_CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * ENUM_CHUNK;
            let len = ENUM_CHUNK.min(total - start);
            let states = Array2::from_shape_fn((len, n), |(r, i)| (((start + r) >> i) & 1) as f64);
            f(states)
        })
        .collect()
}

fn check_enumerable(n: usize, what: &str) -> Result<()> {
    if n > MAX_ENUMERATION_BITS {
        return Err(RbmError::Capacity(format!(
            "{what} has {n} units; enumeration supports at most {MAX_ENUMERATION_BITS}"
        )));
    }
    Ok(())
}

/// Exact `ln Z`, enumerating whichever layer is smaller.
pub fn exact_log_z(model: &RbmModel) -> Result<f64> {
    let (nv, nh) = (model.n_visible(), model.n_hidden());
    if nv.min(nh) > MAX_ENUMERATION_BITS {
        return Err(RbmError::Capacity(format!(
            "both layers ({nv}, {nh}) exceed {MAX_ENUMERATION_BITS} units"
        )));
    }
    let swapped;
    let m = if nv <= nh {
        model
    } else {
        swapped = model.swap_layers();
        &swapped
    };
    let partial = for_each_chunk(m.n_visible(), |states| {
        log_sum_exp(m.free_energies_f64(states.view()).as_slice().unwrap())
    });
    Ok(log_sum_exp(&partial))
}

/// `ln p(v)` for every visible configuration, indexed by `Σ_i v_i 2^i`.
pub fn exact_visible_log_probs(model: &RbmModel) -> Result<Vec<f64>> {
    check_enumerable(model.n_visible(), "visible layer")?;
    let log_z = exact_log_z(model)?;
    let chunks = for_each_chunk(model.n_visible(), |states| {
        model.free_energies_f64(states.view()).to_vec()
    });
    Ok(chunks.into_iter().flatten().map(|f| f - log_z).collect())
}

/// Exact model moments `⟨v hᵀ⟩, ⟨v⟩, ⟨h⟩` under the Boltzmann distribution,
/// with the hidden layer marginalized analytically.
pub fn exact_moments(model: &RbmModel) -> Result<SufficientStats> {
    check_enumerable(model.n_visible(), "visible layer")?;
    let log_z = exact_log_z(model)?;
    let (nv, nh) = (model.n_visible(), model.n_hidden());
    let parts = for_each_chunk(nv, |states| {
        let p = (model.free_energies_f64(states.view()) - log_z).mapv(f64::exp);
        let h_mean = model.hidden_preactivation(states.view()).mapv(logistic);
        let weighted = &states * &p.view().insert_axis(Axis(1));
        SufficientStats {
            vh: weighted.t().dot(&h_mean),
            v: weighted.sum_axis(Axis(0)),
            h: h_mean.t().dot(&p),
        }
    });
    let mut total = SufficientStats::zeros(nv, nh);
    for s in parts {
        total.vh += &s.vh;
        total.v += &s.v;
        total.h += &s.h;
    }
    Ok(total)
}

/// Annealed importance sampling estimate of `ln Z`.
///
/// Runners start from the uniform joint distribution. At every temperature
/// step the log-weight gains `(β_{k+1} - β_k)(-E(v, h))`, after which the
/// state is moved by one block Gibbs sweep (h then v) targeting `p_{k+1}`.
pub fn ais_log_z(
    model: &RbmModel,
    schedule: &BetaSchedule,
    n_runners: usize,
    seed: SeedSpec,
) -> Result<AisResult> {
    if n_runners < 2 {
        return Err(RbmError::Input(format!("AIS needs at least 2 runners, got {n_runners}")));
    }
    let n_blocks = n_runners.div_ceil(AIS_BLOCK);
    let log_weights: Vec<f64> = (0..n_blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let lo = b * AIS_BLOCK;
            let hi = (lo + AIS_BLOCK).min(n_runners);
            ais_block(model, schedule.betas(), lo..hi, seed)
        })
        .collect();
    let log_z0 = AisResult::log_z0(model.n_visible(), model.n_hidden());
    Ok(AisResult {
        log_z_estimate: log_mean_exp(&log_weights) + log_z0,
        log_weights,
        n_temperatures: schedule.len(),
        n_runners,
    })
}

fn ais_block(
    model: &RbmModel,
    betas: &[f64],
    runners: std::ops::Range<usize>,
    seed: SeedSpec,
) -> Vec<f64> {
    let n = runners.len();
    let (nv, nh) = (model.n_visible(), model.n_hidden());
    let mut rngs: Vec<ChaCha8Rng> = runners
        .map(|r| SeedSpec::new(seed.chain_key(), r as u64).rng())
        .collect();
    let mut v = Array2::<f64>::zeros((n, nv));
    let mut h = Array2::<f64>::zeros((n, nh));
    for (r, rng) in rngs.iter_mut().enumerate() {
        v.row_mut(r).mapv_inplace(|_| (uniform(rng) < 0.5) as u8 as f64);
        h.row_mut(r).mapv_inplace(|_| (uniform(rng) < 0.5) as u8 as f64);
    }
    let mut log_w = Array1::<f64>::zeros(n);
    let w = model.weights();
    let b = model.visible_bias();
    let c = model.hidden_bias();
    let last = betas.len() - 1;
    for k in 0..last {
        let delta = betas[k + 1] - betas[k];
        // -E(v, h) = v·W·h + v·b + h·c, row by row.
        let pre_h = v.dot(&w) + c;
        let neg_energy = (&pre_h * &h).sum_axis(Axis(1)) + v.dot(&b);
        log_w.scaled_add(delta, &neg_energy);
        if k + 1 == last {
            break;
        }
        let beta = betas[k + 1];
        sample_tempered(&mut h, &pre_h, beta, &mut rngs);
        let pre_v = h.dot(&w.t()) + b;
        sample_tempered(&mut v, &pre_v, beta, &mut rngs);
    }
    log_w.to_vec()
}

fn sample_tempered(states: &mut Array2<f64>, pre: &Array2<f64>, beta: f64, rngs: &mut [ChaCha8Rng]) {
    Zip::from(states.rows_mut())
        .and(pre.rows())
        .and(ndarray::ArrayViewMut1::from(rngs))
        .for_each(|mut row, pre_row, rng| {
            for (x, &a) in row.iter_mut().zip(pre_row) {
                *x = (uniform(rng) < logistic(beta * a)) as u8 as f64;
            }
        });
}

/// Mean of `ln p(v)` over the rows of `samples`, given `ln Z`.
pub fn log_likelihood(model: &RbmModel, samples: ArrayView2<'_, u8>, log_z: f64) -> Result<f64> {
    if samples.nrows() == 0 {
        return Err(RbmError::Input("log-likelihood of an empty sample set".into()));
    }
    let f = model.free_energies(samples)?;
    Ok(f.mean().unwrap() - log_z)
}

/// How a log-partition value was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogZ {
    Exact(f64),
    Ais(f64),
}

impl LogZ {
    pub fn value(self) -> f64 {
        match self {
            LogZ::Exact(x) | LogZ::Ais(x) => x,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, LogZ::Exact(_))
    }
}

/// Exact `ln Z` when the smaller layer can be enumerated, AIS otherwise.
pub fn log_z_auto(
    model: &RbmModel,
    schedule: &BetaSchedule,
    n_runners: usize,
    seed: SeedSpec,
) -> Result<LogZ> {
    if model.n_visible().min(model.n_hidden()) <= MAX_ENUMERATION_BITS {
        exact_log_z(model).map(LogZ::Exact)
    } else {
        ais_log_z(model, schedule, n_runners, seed).map(|r| LogZ::Ais(r.log_z_estimate))
    }
}
