//! Log-likelihood gradient ascent.
//!
//! The positive term of the gradient is computed on the minibatch with the
//! hidden layer marginalized analytically. The negative term comes from
//! `minibatch_size` Markov chains advanced `k` block Gibbs steps, started
//! according to the scheme:
//!
//! * `Rdm`: fresh fair-coin visible states at every update;
//! * `Cd`: the minibatch rows;
//! * `Pcd`: the chains left by the previous update.
//!
//! Updates are plain gradient steps (no momentum, no weight decay), optionally
//! centered with running offsets for both layers.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::BinaryDataset;
use crate::error::{RbmError, Result};
use crate::math::logistic;
use crate::model::RbmModel;
use crate::rng::{labels, shuffle, SeedSpec};
use crate::sampler::ChainEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rdm,
    Cd,
    Pcd,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Rdm => "rdm",
            Scheme::Cd => "cd",
            Scheme::Pcd => "pcd",
        })
    }
}

impl FromStr for Scheme {
    type Err = RbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rdm" => Ok(Scheme::Rdm),
            "cd" => Ok(Scheme::Cd),
            "pcd" => Ok(Scheme::Pcd),
            other => Err(RbmError::Input(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub scheme: Scheme,
    /// Gibbs steps per parameter update.
    pub k: u64,
    pub learning_rate: f64,
    /// Minibatch size, also the number of negative chains.
    pub minibatch_size: usize,
    pub n_updates: u64,
    pub centered: bool,
    pub seed: SeedSpec,
    pub n_hidden: usize,
    /// Standard deviation of the initial Gaussian weights.
    pub init_weight_scale: f64,
    /// Exponential moving-average rate of the centering offsets.
    pub offset_rate: f64,
    /// Number of log-spaced checkpoint ages.
    pub n_checkpoints: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rdm,
            k: 10,
            learning_rate: 0.01,
            minibatch_size: 128,
            n_updates: 1000,
            centered: true,
            seed: SeedSpec::new(0, 0),
            n_hidden: 32,
            init_weight_scale: 0.01,
            offset_rate: 0.01,
            n_checkpoints: 40,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(RbmError::Input("k must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RbmError::Input(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.minibatch_size == 0 || self.n_hidden == 0 {
            return Err(RbmError::Input(
                "minibatch size and hidden layer size must be positive".into(),
            ));
        }
        if !(self.offset_rate > 0.0 && self.offset_rate <= 1.0) {
            return Err(RbmError::Input("offset rate must lie in (0, 1]".into()));
        }
        if !(self.init_weight_scale >= 0.0 && self.init_weight_scale.is_finite()) {
            return Err(RbmError::Input("initial weight scale must be finite and >= 0".into()));
        }
        if self.n_checkpoints == 0 {
            return Err(RbmError::Input("need at least one checkpoint".into()));
        }
        Ok(())
    }
}

/// Averages `⟨v hᵀ⟩`, `⟨v⟩`, `⟨h⟩` over a set of states.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub vh: Array2<f64>,
    pub v: Array1<f64>,
    pub h: Array1<f64>,
}

impl SufficientStats {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            vh: Array2::zeros((n_visible, n_hidden)),
            v: Array1::zeros(n_visible),
            h: Array1::zeros(n_hidden),
        }
    }

    /// Statistics of visible rows with each hidden unit replaced by `P(h_a = 1 | v)`.
    pub(crate) fn from_visible(model: &RbmModel, v: ArrayView2<'_, f64>) -> Self {
        let n = v.nrows() as f64;
        let h_mean = model.hidden_preactivation(v).mapv(logistic);
        Self {
            vh: v.t().dot(&h_mean) / n,
            v: v.mean_axis(Axis(0)).unwrap(),
            h: h_mean.mean_axis(Axis(0)).unwrap(),
        }
    }
}

/// A parameter-space gradient with the model's shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub d_weights: Array2<f64>,
    pub d_visible_bias: Array1<f64>,
    pub d_hidden_bias: Array1<f64>,
}

/// Running per-unit means used to center the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Offsets {
    pub visible: Array1<f64>,
    pub hidden: Array1<f64>,
}

impl Offsets {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            visible: Array1::zeros(n_visible),
            hidden: Array1::zeros(n_hidden),
        }
    }

    pub fn initial(data: &BinaryDataset, n_hidden: usize) -> Self {
        Self {
            visible: data.column_means(),
            hidden: Array1::from_elem(n_hidden, 0.5),
        }
    }

    fn track(&mut self, rate: f64, visible_mean: &Array1<f64>, hidden_mean: &Array1<f64>) {
        self.visible *= 1.0 - rate;
        self.visible.scaled_add(rate, visible_mean);
        self.hidden *= 1.0 - rate;
        self.hidden.scaled_add(rate, hidden_mean);
    }
}

/// Visible biases matching the per-site data frequencies,
/// `ln(m / (1 - m))` with `m` clamped to `[1/(2M), 1 - 1/(2M)]`.
pub fn init_visible_bias(data: &BinaryDataset) -> Result<Array1<f64>> {
    let m = data.n_samples();
    if m == 0 {
        return Err(RbmError::EmptyDataset(data.name().to_string()));
    }
    let lo = 1.0 / (2.0 * m as f64);
    Ok(data
        .column_means()
        .mapv(|p| {
            let p = p.clamp(lo, 1.0 - lo);
            (p / (1.0 - p)).ln()
        }))
}

/// Data term of the gradient: hidden units marginalized given each row.
pub fn positive_phase(model: &RbmModel, minibatch: ArrayView2<'_, u8>) -> Result<SufficientStats> {
    if minibatch.nrows() == 0 {
        return Err(RbmError::Input("empty minibatch".into()));
    }
    if minibatch.ncols() != model.n_visible() {
        return Err(RbmError::Dimension(format!(
            "minibatch has {} columns, model has {} visible units",
            minibatch.ncols(),
            model.n_visible()
        )));
    }
    Ok(SufficientStats::from_visible(model, minibatch.mapv(f64::from).view()))
}

/// Model term of the gradient estimated with `minibatch.nrows()` chains.
///
/// `update_index` addresses the random streams of the fresh chains used by
/// `Rdm` and `Cd`. `Pcd` consumes and returns the persistent ensemble; it is
/// created at random on update 0 and must be supplied afterwards.
pub fn negative_phase(
    model: &RbmModel,
    config: &TrainConfig,
    persistent: Option<ChainEnsemble>,
    minibatch: ArrayView2<'_, u8>,
    update_index: u64,
) -> Result<(SufficientStats, Option<ChainEnsemble>)> {
    if config.k == 0 {
        return Err(RbmError::Input("k must be at least 1".into()));
    }
    let n_chains = minibatch.nrows();
    if n_chains == 0 {
        return Err(RbmError::Input("empty minibatch".into()));
    }
    let fresh = SeedSpec::new(config.seed.derive(labels::NEGATIVE).master_seed, update_index);
    let mut chains = match config.scheme {
        Scheme::Rdm => ChainEnsemble::init_random(model, n_chains, fresh)?,
        Scheme::Cd => ChainEnsemble::init_from_rows(model, minibatch, fresh)?,
        Scheme::Pcd => match persistent {
            Some(c) if c.n_chains() == n_chains => c,
            Some(c) => {
                return Err(RbmError::State(format!(
                    "persistent ensemble has {} chains, minibatch has {n_chains} rows",
                    c.n_chains()
                )))
            }
            None if update_index == 0 => {
                ChainEnsemble::init_random(model, n_chains, config.seed.derive(labels::PERSISTENT))?
            }
            None => {
                return Err(RbmError::State(format!(
                    "PCD update {update_index} has no persistent chains"
                )))
            }
        },
    };
    chains.gibbs_step(model, config.k)?;
    let stats = SufficientStats::from_visible(model, chains.visible());
    let keep = (config.scheme == Scheme::Pcd).then_some(chains);
    Ok((stats, keep))
}

/// Centered log-likelihood gradient expressed in the uncentered parameters.
///
/// With offsets `μ` (visible) and `λ` (hidden):
///
/// ```text
/// ΔW = ⟨(v-μ)(h-λ)ᵀ⟩_D - ⟨(v-μ)(h-λ)ᵀ⟩_H
/// Δb = ⟨v⟩_D - ⟨v⟩_H - ΔW λ
/// Δc = ⟨h⟩_D - ⟨h⟩_H - ΔWᵀ μ
/// ```
///
/// Zero offsets give the plain gradient.
pub fn centered_gradient(
    positive: &SufficientStats,
    negative: &SufficientStats,
    offsets: &Offsets,
) -> GradientEstimate {
    let dv = &positive.v - &negative.v;
    let dh = &positive.h - &negative.h;
    let mu = offsets.visible.view().insert_axis(Axis(1));
    let lambda = offsets.hidden.view().insert_axis(Axis(0));
    let d_weights = &positive.vh - &negative.vh
        - &mu.dot(&dh.view().insert_axis(Axis(0)))
        - &dv.view().insert_axis(Axis(1)).dot(&lambda);
    let d_visible_bias = &dv - &d_weights.dot(&offsets.hidden);
    let d_hidden_bias = &dh - &d_weights.t().dot(&offsets.visible);
    GradientEstimate {
        d_weights,
        d_visible_bias,
        d_hidden_bias,
    }
}

/// One ascent step `θ ← θ + α ∇θ` with the centered gradient.
pub fn centered_update(
    model: &RbmModel,
    positive: &SufficientStats,
    negative: &SufficientStats,
    learning_rate: f64,
    offsets: &Offsets,
) -> Result<RbmModel> {
    let g = centered_gradient(positive, negative, offsets);
    let mut next = model.clone();
    apply_gradient(&mut next, &g, learning_rate)?;
    Ok(next)
}

pub(crate) fn apply_gradient(model: &mut RbmModel, g: &GradientEstimate, learning_rate: f64) -> Result<()> {
    let (w, b, c) = model.parts_mut();
    if w.dim() != g.d_weights.dim() || b.len() != g.d_visible_bias.len() || c.len() != g.d_hidden_bias.len() {
        return Err(RbmError::Dimension("gradient shape does not match the model".into()));
    }
    w.scaled_add(learning_rate, &g.d_weights);
    b.scaled_add(learning_rate, &g.d_visible_bias);
    c.scaled_add(learning_rate, &g.d_hidden_bias);
    model.check_finite()
}

/// `n_points` ages equally spaced in log scale between 1 and `n_updates`,
/// rounded and deduplicated; always ends at `n_updates`. `[0]` when there are
/// no updates.
pub fn checkpoint_ages(n_updates: u64, n_points: usize) -> Vec<u64> {
    if n_updates == 0 {
        return vec![0];
    }
    if n_points <= 1 {
        return vec![n_updates];
    }
    let top = (n_updates as f64).ln();
    let mut ages: Vec<u64> = (0..n_points)
        .map(|j| (top * j as f64 / (n_points - 1) as f64).exp().round() as u64)
        .map(|t| t.clamp(1, n_updates))
        .collect();
    ages.dedup();
    if *ages.last().unwrap() != n_updates {
        ages.push(n_updates);
    }
    ages
}

/// Complete training state at a given age.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: RbmModel,
    pub t_age: u64,
    pub config: TrainConfig,
    pub offsets: Offsets,
    pub persistent_chains: Option<ChainEnsemble>,
}

/// Stateful training loop over one dataset.
pub struct Trainer<'a> {
    data: &'a BinaryDataset,
    config: TrainConfig,
    model: RbmModel,
    offsets: Offsets,
    persistent: Option<ChainEnsemble>,
    t_age: u64,
    epoch_order: Option<(u64, Vec<usize>)>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a BinaryDataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if data.n_samples() == 0 {
            return Err(RbmError::EmptyDataset(data.name().to_string()));
        }
        if config.minibatch_size > data.n_samples() {
            return Err(RbmError::Input(format!(
                "minibatch size {} exceeds the {} training samples",
                config.minibatch_size,
                data.n_samples()
            )));
        }
        let model = RbmModel::random(
            data.n_visible(),
            config.n_hidden,
            config.init_weight_scale,
            config.seed.derive(labels::MODEL_INIT),
        )
        .with_visible_bias(init_visible_bias(data)?)?;
        let offsets = if config.centered {
            Offsets::initial(data, config.n_hidden)
        } else {
            Offsets::zeros(data.n_visible(), config.n_hidden)
        };
        Ok(Self {
            data,
            config,
            model,
            offsets,
            persistent: None,
            t_age: 0,
            epoch_order: None,
        })
    }

    /// Continues training from a saved state.
    pub fn resume(data: &'a BinaryDataset, checkpoint: Checkpoint) -> Result<Self> {
        let mut trainer = Self::new(data, checkpoint.config.clone())?;
        if checkpoint.model.n_visible() != data.n_visible() {
            return Err(RbmError::Dimension(
                "checkpoint and dataset disagree on the visible layer".into(),
            ));
        }
        if checkpoint.config.scheme == Scheme::Pcd
            && checkpoint.t_age > 0
            && checkpoint.persistent_chains.is_none()
        {
            return Err(RbmError::State("PCD checkpoint without persistent chains".into()));
        }
        trainer.model = checkpoint.model;
        trainer.offsets = checkpoint.offsets;
        trainer.persistent = checkpoint.persistent_chains;
        trainer.t_age = checkpoint.t_age;
        Ok(trainer)
    }

    pub fn model(&self) -> &RbmModel {
        &self.model
    }

    pub fn t_age(&self) -> u64 {
        self.t_age
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            t_age: self.t_age,
            config: self.config.clone(),
            offsets: self.offsets.clone(),
            persistent_chains: self.persistent.clone(),
        }
    }

    fn batches_per_epoch(&self) -> u64 {
        (self.data.n_samples() / self.config.minibatch_size) as u64
    }

    fn minibatch_rows(&mut self, update: u64) -> Vec<usize> {
        let per_epoch = self.batches_per_epoch();
        let epoch = update / per_epoch;
        let batch = (update % per_epoch) as usize;
        if self.epoch_order.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let mut order: Vec<usize> = (0..self.data.n_samples()).collect();
            let seed = SeedSpec::new(self.config.seed.derive(labels::SHUFFLE).master_seed, epoch);
            shuffle(&mut order, &mut seed.rng());
            self.epoch_order = Some((epoch, order));
        }
        let order = &self.epoch_order.as_ref().unwrap().1;
        let n = self.config.minibatch_size;
        order[batch * n..(batch + 1) * n].to_vec()
    }

    /// Applies one gradient update.
    pub fn step(&mut self) -> Result<()> {
        let rows = self.minibatch_rows(self.t_age);
        let minibatch = self.data.samples().select(Axis(0), &rows);
        let positive = positive_phase(&self.model, minibatch.view())?;
        let (negative, chains) = negative_phase(
            &self.model,
            &self.config,
            self.persistent.take(),
            minibatch.view(),
            self.t_age,
        )?;
        self.persistent = chains;
        if self.config.centered {
            let batch_mean = minibatch.mapv(f64::from).mean_axis(Axis(0)).unwrap();
            self.offsets
                .track(self.config.offset_rate, &batch_mean, &positive.h);
        }
        let g = centered_gradient(&positive, &negative, &self.offsets);
        apply_gradient(&mut self.model, &g, self.config.learning_rate)?;
        self.t_age += 1;
        Ok(())
    }

    /// Trains until `config.n_updates`, handing every scheduled checkpoint
    /// not older than the current age to `sink`.
    pub fn run(&mut self, mut sink: impl FnMut(Checkpoint) -> Result<()>) -> Result<()> {
        let ages = checkpoint_ages(self.config.n_updates, self.config.n_checkpoints);
        for &age in &ages {
            if age < self.t_age {
                continue;
            }
            while self.t_age < age {
                self.step()?;
            }
            sink(self.checkpoint())?;
        }
        Ok(())
    }
}

/// Runs a full training and returns the log-spaced checkpoints.
pub fn train(data: &BinaryDataset, config: &TrainConfig) -> Result<Vec<Checkpoint>> {
    let mut trainer = Trainer::new(data, config.clone())?;
    let mut out = Vec::new();
    trainer.run(|c| {
        out.push(c);
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(x: Array2<u8>) -> BinaryDataset {
        BinaryDataset::new(x, "t").unwrap()
    }

    #[test]
    fn visible_bias_initialization() {
        let mut x = Array2::<u8>::zeros((100, 3));
        x.column_mut(0).fill(1);
        for r in 0..50 {
            x[[r, 1]] = 1;
        }
        let eta = init_visible_bias(&ds(x)).unwrap();
        assert!((eta[0] - 199f64.ln()).abs() < 1e-12);
        assert!((eta[0] - 5.293).abs() < 1e-3);
        assert_eq!(eta[1], 0.0);
        assert!((eta[2] + 199f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn visible_bias_logit_inverse() {
        // Frequency e/(1+e) is not representable exactly with finite M; use the
        // closest integer count and check the logit is within rounding.
        let m = 1_000_000;
        let ones = (m as f64 * std::f64::consts::E / (1.0 + std::f64::consts::E)).round() as usize;
        let x = Array2::from_shape_fn((m, 1), |(r, _)| (r < ones) as u8);
        let eta = init_visible_bias(&ds(x)).unwrap();
        assert!((eta[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn positive_phase_zero_model() {
        let m = RbmModel::zeros(3, 2);
        let x = array![[1u8, 0, 1], [1, 0, 0]];
        let s = positive_phase(&m, x.view()).unwrap();
        assert!(s.h.iter().all(|&h| h == 0.5));
        assert_eq!(s.v, array![1.0, 0.0, 0.5]);
        for i in 0..3 {
            for a in 0..2 {
                assert_eq!(s.vh[[i, a]], 0.5 * s.v[i]);
            }
        }
    }

    #[test]
    fn positive_phase_duplicates() {
        let m = RbmModel::random_full(4, 3, 0.7, SeedSpec::new(1, 0));
        let one = array![[1u8, 0, 1, 1]];
        let many = array![[1u8, 0, 1, 1], [1, 0, 1, 1], [1, 0, 1, 1]];
        let a = positive_phase(&m, one.view()).unwrap();
        let b = positive_phase(&m, many.view()).unwrap();
        assert!((a.vh - b.vh).iter().all(|d| d.abs() < 1e-15));
        assert!(positive_phase(&m, Array2::<u8>::zeros((0, 4)).view()).is_err());
        assert!(positive_phase(&m, Array2::<u8>::zeros((2, 5)).view()).is_err());
    }

    #[test]
    fn cd_zero_model_gives_fair_coin_moments() {
        let m = RbmModel::zeros(6, 2);
        let cfg = TrainConfig {
            scheme: Scheme::Cd,
            k: 1,
            ..TrainConfig::default()
        };
        let batch = Array2::<u8>::ones((20_000, 6));
        let (s, keep) = negative_phase(&m, &cfg, None, batch.view(), 0).unwrap();
        assert!(keep.is_none());
        assert!(s.v.iter().all(|&v| (v - 0.5).abs() < 0.02));
    }

    #[test]
    fn k_zero_rejected() {
        let m = RbmModel::zeros(2, 2);
        let cfg = TrainConfig { k: 0, ..TrainConfig::default() };
        let batch = Array2::<u8>::ones((2, 2));
        assert!(negative_phase(&m, &cfg, None, batch.view(), 0).is_err());
    }

    #[test]
    fn pcd_bookkeeping() {
        let m = RbmModel::random(5, 3, 0.3, SeedSpec::new(2, 0));
        let cfg = TrainConfig {
            scheme: Scheme::Pcd,
            k: 4,
            ..TrainConfig::default()
        };
        let batch = Array2::<u8>::ones((10, 5));
        let (_, c1) = negative_phase(&m, &cfg, None, batch.view(), 0).unwrap();
        let c1 = c1.unwrap();
        assert_eq!(c1.step_counter(), 4);
        let (_, c2) = negative_phase(&m, &cfg, Some(c1), batch.view(), 1).unwrap();
        assert_eq!(c2.unwrap().step_counter(), 8);
        assert!(matches!(
            negative_phase(&m, &cfg, None, batch.view(), 2),
            Err(RbmError::State(_))
        ));
    }

    #[test]
    fn equal_phases_leave_model_unchanged() {
        let m = RbmModel::random_full(4, 3, 0.5, SeedSpec::new(3, 0));
        let s = positive_phase(&m, array![[1u8, 0, 1, 1], [0, 1, 1, 0]].view()).unwrap();
        let offsets = Offsets {
            visible: array![0.2, 0.4, 0.6, 0.1],
            hidden: array![0.5, 0.3, 0.9],
        };
        let next = centered_update(&m, &s, &s, 0.1, &offsets).unwrap();
        assert_eq!(next, m);
    }

    #[test]
    fn zero_offsets_give_plain_gradient() {
        let m = RbmModel::random_full(4, 3, 0.5, SeedSpec::new(3, 0));
        let pos = positive_phase(&m, array![[1u8, 0, 1, 1], [0, 1, 1, 0]].view()).unwrap();
        let neg = positive_phase(&m, array![[0u8, 0, 1, 0], [1, 1, 1, 1]].view()).unwrap();
        let next = centered_update(&m, &pos, &neg, 0.1, &Offsets::zeros(4, 3)).unwrap();
        let expect_w = &m.weights() + &((&pos.vh - &neg.vh) * 0.1);
        let expect_b = &m.visible_bias() + &((&pos.v - &neg.v) * 0.1);
        let expect_c = &m.hidden_bias() + &((&pos.h - &neg.h) * 0.1);
        assert!((&next.weights() - &expect_w).iter().all(|d| d.abs() < 1e-15));
        assert!((&next.visible_bias() - &expect_b).iter().all(|d| d.abs() < 1e-15));
        assert!((&next.hidden_bias() - &expect_c).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn checkpoint_schedule() {
        assert_eq!(checkpoint_ages(0, 40), vec![0]);
        assert_eq!(checkpoint_ages(100, 5), vec![1, 3, 10, 32, 100]);
        let a = checkpoint_ages(5000, 40);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*a.last().unwrap(), 5000);
        assert_eq!(a[0], 1);
        assert!(a.len() <= 40);
        assert_eq!(checkpoint_ages(7, 1), vec![7]);
    }

    #[test]
    fn train_zero_updates() {
        let d = ds(array![[1u8, 0, 1], [0, 1, 1]]);
        let cfg = TrainConfig {
            n_updates: 0,
            minibatch_size: 2,
            n_hidden: 2,
            ..TrainConfig::default()
        };
        let cps = train(&d, &cfg).unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].t_age, 0);
    }

    #[test]
    fn train_ages_and_determinism() {
        let d = ds(Array2::from_shape_fn((40, 6), |(r, c)| ((r * 7 + c * 3) % 5 < 2) as u8));
        for scheme in [Scheme::Rdm, Scheme::Cd, Scheme::Pcd] {
            let cfg = TrainConfig {
                scheme,
                k: 3,
                n_updates: 30,
                minibatch_size: 8,
                n_hidden: 4,
                n_checkpoints: 6,
                learning_rate: 0.05,
                ..TrainConfig::default()
            };
            let a = train(&d, &cfg).unwrap();
            let b = train(&d, &cfg).unwrap();
            assert_eq!(a, b);
            let ages: Vec<u64> = a.iter().map(|c| c.t_age).collect();
            assert!(ages.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(*ages.last().unwrap(), 30);
            assert_eq!(a.last().unwrap().persistent_chains.is_some(), scheme == Scheme::Pcd);
        }
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let d = ds(Array2::from_shape_fn((40, 6), |(r, c)| ((r * 5 + c) % 3 == 0) as u8));
        let cfg = TrainConfig {
            scheme: Scheme::Pcd,
            k: 2,
            n_updates: 25,
            minibatch_size: 10,
            n_hidden: 3,
            n_checkpoints: 4,
            ..TrainConfig::default()
        };
        let full = train(&d, &cfg).unwrap();
        let mid = full[full.len() - 2].clone();
        let mut resumed = Trainer::resume(&d, mid).unwrap();
        let mut last = None;
        resumed
            .run(|c| {
                last = Some(c);
                Ok(())
            })
            .unwrap();
        assert_eq!(last.unwrap(), *full.last().unwrap());
    }

    #[test]
    fn minibatch_larger_than_dataset_rejected() {
        let d = ds(array![[1u8, 0], [0, 1]]);
        let cfg = TrainConfig { minibatch_size: 3, ..TrainConfig::default() };
        assert!(Trainer::new(&d, cfg).is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("PCD".parse::<Scheme>().unwrap(), Scheme::Pcd);
        assert!("gibbs".parse::<Scheme>().is_err());
        assert_eq!(Scheme::Rdm.to_string(), "rdm");
    }
}
