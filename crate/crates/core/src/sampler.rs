//! Block Gibbs sampling of chain ensembles.

use ndarray::{s, Array2, ArrayView2, ArrayViewMut1, Zip};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::BinaryDataset;
use crate::error::{RbmError, Result};
use crate::math::logistic;
use crate::model::{check_binary, RbmModel};
use crate::rng::{addressed_rng, index, uniform, SeedSpec};

/// Work below this many unit updates per half-step runs on the calling thread.
const PARALLEL_THRESHOLD: usize = 8192;

/// A batch of parallel Markov chains over the joint `(v, h)` state.
///
/// Chain `c` draws its randomness for step `t` from the keystream
/// `(key, streams[c])` at word offset `t * words_per_step`; step 0 is the
/// initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEnsemble {
    visible: Array2<f64>,
    hidden: Array2<f64>,
    visible_means: Array2<f64>,
    step_counter: u64,
    key: u64,
    streams: Vec<u64>,
}

/// Copy of an ensemble's visible layer at one sampling time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t_g: u64,
    pub visible_states: Array2<u8>,
    pub visible_means: Array2<f64>,
}

enum VisibleInit<'a> {
    Coins,
    Rows(ArrayView2<'a, u8>),
    Resample(ArrayView2<'a, u8>),
}

impl ChainEnsemble {
    /// Visible units are fair coins, hidden units are drawn from `P(h | v)`.
    pub fn init_random(model: &RbmModel, n_chains: usize, seed: SeedSpec) -> Result<Self> {
        Self::init(model, n_chains, seed, VisibleInit::Coins)
    }

    /// Visible states drawn uniformly with replacement from the dataset rows.
    pub fn init_from_dataset(
        model: &RbmModel,
        data: &BinaryDataset,
        n_chains: usize,
        seed: SeedSpec,
    ) -> Result<Self> {
        if data.n_samples() == 0 {
            return Err(RbmError::EmptyDataset(format!(
                "cannot initialize chains from empty dataset '{}'",
                data.name()
            )));
        }
        Self::init(model, n_chains, seed, VisibleInit::Resample(data.samples()))
    }

    /// One chain per row, visible state equal to that row.
    pub fn init_from_rows(model: &RbmModel, rows: ArrayView2<'_, u8>, seed: SeedSpec) -> Result<Self> {
        for row in rows.rows() {
            check_binary(row, "visible")?;
        }
        Self::init(model, rows.nrows(), seed, VisibleInit::Rows(rows))
    }

    fn init(model: &RbmModel, n_chains: usize, seed: SeedSpec, how: VisibleInit<'_>) -> Result<Self> {
        if n_chains == 0 {
            return Err(RbmError::Input("ensemble needs at least one chain".into()));
        }
        let (nv, nh) = (model.n_visible(), model.n_hidden());
        if let VisibleInit::Rows(d) | VisibleInit::Resample(d) = &how {
            if d.ncols() != nv {
                return Err(RbmError::Dimension(format!(
                    "rows have {} columns, model has {nv} visible units",
                    d.ncols()
                )));
            }
        }
        let mut ens = ChainEnsemble {
            visible: Array2::zeros((n_chains, nv)),
            hidden: Array2::zeros((n_chains, nh)),
            visible_means: Array2::zeros((n_chains, nv)),
            step_counter: 0,
            key: seed.chain_key(),
            streams: (0..n_chains as u64).collect(),
        };
        let mut rngs = ens.step_rngs(0);
        for (c, rng) in rngs.iter_mut().enumerate() {
            let mut row = ens.visible.row_mut(c);
            match &how {
                VisibleInit::Coins => row.mapv_inplace(|_| (uniform(rng) < 0.5) as u8 as f64),
                VisibleInit::Rows(d) => row.assign(&d.row(c).mapv(f64::from)),
                VisibleInit::Resample(d) => {
                    let r = index(rng, d.nrows());
                    row.assign(&d.row(r).mapv(f64::from));
                }
            }
        }
        ens.sample_hidden(model, &mut rngs);
        ens.refresh_means(model);
        Ok(ens)
    }

    pub fn n_chains(&self) -> usize {
        self.visible.nrows()
    }

    pub fn n_visible(&self) -> usize {
        self.visible.ncols()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden.ncols()
    }

    /// Number of block Gibbs steps applied since initialization (`t_G`).
    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn visible(&self) -> ArrayView2<'_, f64> {
        self.visible.view()
    }

    pub fn hidden(&self) -> ArrayView2<'_, f64> {
        self.hidden.view()
    }

    /// `m_i(t)`: logistic means used in the last visible update of each chain.
    pub fn visible_means(&self) -> ArrayView2<'_, f64> {
        self.visible_means.view()
    }

    pub fn visible_states(&self) -> Array2<u8> {
        self.visible.mapv(|x| x as u8)
    }

    pub fn hidden_states(&self) -> Array2<u8> {
        self.hidden.mapv(|x| x as u8)
    }

    pub fn streams(&self) -> &[u64] {
        &self.streams
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Reassembles an ensemble from stored parts, validating shapes and binarity.
    pub fn from_parts(
        visible: Array2<f64>,
        hidden: Array2<f64>,
        visible_means: Array2<f64>,
        step_counter: u64,
        key: u64,
        streams: Vec<u64>,
    ) -> Result<Self> {
        let n = visible.nrows();
        if hidden.nrows() != n || visible_means.dim() != visible.dim() || streams.len() != n {
            return Err(RbmError::Dimension("inconsistent ensemble parts".into()));
        }
        if visible.iter().chain(hidden.iter()).any(|&x| x != 0.0 && x != 1.0) {
            return Err(RbmError::Domain("chain states must be 0 or 1".into()));
        }
        Ok(Self {
            visible,
            hidden,
            visible_means,
            step_counter,
            key,
            streams,
        })
    }

    /// Reorders chains (states and their random streams) by `order`.
    pub fn permuted(&self, order: &[usize]) -> ChainEnsemble {
        let pick = |m: &Array2<f64>| m.select(ndarray::Axis(0), order);
        ChainEnsemble {
            visible: pick(&self.visible),
            hidden: pick(&self.hidden),
            visible_means: pick(&self.visible_means),
            step_counter: self.step_counter,
            key: self.key,
            streams: order.iter().map(|&i| self.streams[i]).collect(),
        }
    }

    fn words_per_step(&self) -> u128 {
        2 * (self.n_visible() + self.n_hidden() + 1) as u128
    }

    fn step_rngs(&self, step: u64) -> Vec<ChaCha8Rng> {
        let offset = step as u128 * self.words_per_step();
        self.streams
            .iter()
            .map(|&s| addressed_rng(self.key, s, offset))
            .collect()
    }

    fn check_model(&self, model: &RbmModel) -> Result<()> {
        if model.n_visible() != self.n_visible() || model.n_hidden() != self.n_hidden() {
            return Err(RbmError::Dimension(format!(
                "ensemble is ({}, {}), model is ({}, {})",
                self.n_visible(),
                self.n_hidden(),
                model.n_visible(),
                model.n_hidden()
            )));
        }
        Ok(())
    }

    /// Applies `n_steps` block updates (h given v, then v given h).
    pub fn gibbs_step(&mut self, model: &RbmModel, n_steps: u64) -> Result<()> {
        self.check_model(model)?;
        if n_steps == 0 {
            return Ok(());
        }
        // A step draws one u64 per unit; the spare u64 of each slot is
        // skipped so sequential reads land on the addressed offsets.
        let mut rngs = self.step_rngs(self.step_counter + 1);
        for i in 0..n_steps {
            if i > 0 {
                rngs.iter_mut().for_each(|r| {
                    r.next_u64();
                });
            }
            self.step_counter += 1;
            self.sample_hidden(model, &mut rngs);
            self.sample_visible(model, &mut rngs);
        }
        Ok(())
    }

    fn sample_hidden(&mut self, model: &RbmModel, rngs: &mut [ChaCha8Rng]) {
        let pre = model.hidden_preactivation(self.visible.view());
        let parallel = pre.len() >= PARALLEL_THRESHOLD;
        bernoulli_rows(&mut self.hidden, &pre, rngs, None, parallel);
    }

    fn sample_visible(&mut self, model: &RbmModel, rngs: &mut [ChaCha8Rng]) {
        let pre = model.visible_preactivation(self.hidden.view());
        let parallel = pre.len() >= PARALLEL_THRESHOLD;
        bernoulli_rows(
            &mut self.visible,
            &pre,
            rngs,
            Some(&mut self.visible_means),
            parallel,
        );
    }

    fn refresh_means(&mut self, model: &RbmModel) {
        self.visible_means = model
            .visible_preactivation(self.hidden.view())
            .mapv(logistic);
    }

    /// Runs `horizon` steps, copying the visible layer after each requested
    /// number of steps (counted from the current position; 0 snapshots the
    /// current state).
    pub fn record_trajectory(
        &mut self,
        model: &RbmModel,
        horizon: u64,
        points: &[u64],
    ) -> Result<Vec<Snapshot>> {
        self.check_model(model)?;
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RbmError::Input(
                "snapshot points must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = points.last() {
            if last > horizon {
                return Err(RbmError::Input(format!(
                    "snapshot point {last} exceeds horizon {horizon}"
                )));
            }
        }
        let start = self.step_counter;
        let mut out = Vec::with_capacity(points.len());
        for &p in points {
            let target = start + p;
            self.gibbs_step(model, target - self.step_counter)?;
            out.push(self.snapshot());
        }
        let rest = start + horizon - self.step_counter;
        self.gibbs_step(model, rest)?;
        Ok(out)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t_g: self.step_counter,
            visible_states: self.visible_states(),
            visible_means: self.visible_means.clone(),
        }
    }
}

fn bernoulli_rows(
    states: &mut Array2<f64>,
    pre: &Array2<f64>,
    rngs: &mut [ChaCha8Rng],
    means: Option<&mut Array2<f64>>,
    parallel: bool,
) {
    let rngs = ArrayViewMut1::from(rngs);
    let update = |mut row: ndarray::ArrayViewMut1<'_, f64>,
                  pre_row: ndarray::ArrayView1<'_, f64>,
                  rng: &mut ChaCha8Rng,
                  mean_row: Option<ndarray::ArrayViewMut1<'_, f64>>| {
        match mean_row {
            Some(mut m) => {
                for ((x, &a), mu) in row.iter_mut().zip(pre_row).zip(m.iter_mut()) {
                    let p = logistic(a);
                    *mu = p;
                    *x = (uniform(rng) < p) as u8 as f64;
                }
            }
            None => {
                for (x, &a) in row.iter_mut().zip(pre_row) {
                    *x = (uniform(rng) < logistic(a)) as u8 as f64;
                }
            }
        }
    };
    match means {
        Some(m) => {
            let z = Zip::from(states.rows_mut())
                .and(pre.rows())
                .and(rngs)
                .and(m.rows_mut());
            if parallel {
                z.par_for_each(|r, p, g, mu| update(r, p, g, Some(mu)));
            } else {
                z.for_each(|r, p, g, mu| update(r, p, g, Some(mu)));
            }
        }
        None => {
            let z = Zip::from(states.rows_mut()).and(pre.rows()).and(rngs);
            if parallel {
                z.par_for_each(|r, p, g| update(r, p, g, None));
            } else {
                z.for_each(|r, p, g| update(r, p, g, None));
            }
        }
    }
}

/// Runs `n_chains` random-initialized chains for `burn_in` steps and then
/// collects `n_samples_per_chain` visible states, one per step.
pub fn sample_visible_states(
    model: &RbmModel,
    n_chains: usize,
    burn_in: u64,
    n_samples_per_chain: u64,
    seed: SeedSpec,
) -> Result<Array2<u8>> {
    let mut ens = ChainEnsemble::init_random(model, n_chains, seed)?;
    ens.gibbs_step(model, burn_in)?;
    let total = n_chains * n_samples_per_chain as usize;
    let mut out = Array2::zeros((total, model.n_visible()));
    for t in 0..n_samples_per_chain as usize {
        ens.gibbs_step(model, 1)?;
        out.slice_mut(s![t * n_chains..(t + 1) * n_chains, ..])
            .assign(&ens.visible.mapv(|x| x as u8));
    }
    Ok(out)
}

/// Visible-state frequencies of a sample batch, indexed by the bit code
/// `Σ_i v_i 2^i`. Only meaningful for small visible layers.
pub fn visible_histogram(samples: ArrayView2<'_, u8>) -> Vec<u64> {
    let nv = samples.ncols();
    assert!(nv <= 24, "histogram over 2^{nv} states is too large");
    let mut counts = vec![0u64; 1 << nv];
    let codes: Vec<usize> = samples
        .rows()
        .into_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| row.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum())
        .collect();
    for c in codes {
        counts[c] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> RbmModel {
        RbmModel::random_full(5, 3, 0.8, SeedSpec::new(21, 0))
    }

    #[test]
    fn random_init_is_binary_and_fair() {
        let m = RbmModel::zeros(4, 2);
        let ens = ChainEnsemble::init_random(&m, 100_000, SeedSpec::new(1, 2)).unwrap();
        assert_eq!(ens.step_counter(), 0);
        assert!(ens.visible().iter().all(|&x| x == 0.0 || x == 1.0));
        let mean = ens.visible().mean().unwrap();
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn same_seed_same_ensemble() {
        let m = tiny();
        let a = ChainEnsemble::init_random(&m, 3, SeedSpec::new(9, 1)).unwrap();
        let b = ChainEnsemble::init_random(&m, 3, SeedSpec::new(9, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let m = RbmModel::zeros(16, 2);
        let a = ChainEnsemble::init_random(&m, 8, SeedSpec::new(9, 1)).unwrap();
        let b = ChainEnsemble::init_random(&m, 8, SeedSpec::new(9, 2)).unwrap();
        for c in 0..8 {
            assert_ne!(a.visible().row(c), b.visible().row(c));
        }
    }

    #[test]
    fn zero_chains_rejected() {
        assert!(ChainEnsemble::init_random(&tiny(), 0, SeedSpec::new(0, 0)).is_err());
    }

    #[test]
    fn single_row_dataset_init() {
        let m = tiny();
        let d = BinaryDataset::new(array![[1u8, 0, 1, 1, 0]], "one").unwrap();
        let ens = ChainEnsemble::init_from_dataset(&m, &d, 7, SeedSpec::new(3, 3)).unwrap();
        for row in ens.visible_states().rows() {
            assert_eq!(row, array![1u8, 0, 1, 1, 0]);
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let m = tiny();
        let d = BinaryDataset::new(Array2::zeros((0, 5)), "empty").unwrap();
        assert!(matches!(
            ChainEnsemble::init_from_dataset(&m, &d, 2, SeedSpec::new(0, 0)),
            Err(RbmError::EmptyDataset(_))
        ));
    }

    #[test]
    fn zero_steps_is_identity() {
        let m = tiny();
        let mut ens = ChainEnsemble::init_random(&m, 4, SeedSpec::new(2, 2)).unwrap();
        let before = ens.clone();
        ens.gibbs_step(&m, 0).unwrap();
        assert_eq!(ens, before);
    }

    #[test]
    fn step_counter_advances() {
        let m = tiny();
        let mut ens = ChainEnsemble::init_random(&m, 4, SeedSpec::new(2, 2)).unwrap();
        ens.gibbs_step(&m, 3).unwrap();
        ens.gibbs_step(&m, 4).unwrap();
        assert_eq!(ens.step_counter(), 7);
    }

    #[test]
    fn means_are_logistic_of_last_hidden() {
        let m = tiny();
        let mut ens = ChainEnsemble::init_random(&m, 6, SeedSpec::new(5, 0)).unwrap();
        ens.gibbs_step(&m, 5).unwrap();
        let expected = m.visible_preactivation(ens.hidden()).mapv(logistic);
        assert_eq!(ens.visible_means(), expected);
        assert!(ens.visible_means().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn mismatched_model_rejected() {
        let m = tiny();
        let mut ens = ChainEnsemble::init_random(&m, 2, SeedSpec::new(0, 0)).unwrap();
        assert!(matches!(
            ens.gibbs_step(&RbmModel::zeros(4, 3), 1),
            Err(RbmError::Dimension(_))
        ));
    }

    #[test]
    fn trajectory_points() {
        let m = tiny();
        let mut ens = ChainEnsemble::init_random(&m, 3, SeedSpec::new(4, 4)).unwrap();
        let snaps = ens.record_trajectory(&m, 100, &[1, 10, 100]).unwrap();
        let t: Vec<u64> = snaps.iter().map(|s| s.t_g).collect();
        assert_eq!(t, vec![1, 10, 100]);
        assert_eq!(ens.step_counter(), 100);
    }

    #[test]
    fn empty_points_still_advance() {
        let m = tiny();
        let mut ens = ChainEnsemble::init_random(&m, 3, SeedSpec::new(4, 4)).unwrap();
        let snaps = ens.record_trajectory(&m, 25, &[]).unwrap();
        assert!(snaps.is_empty());
        assert_eq!(ens.step_counter(), 25);
    }

    #[test]
    fn unsorted_points_rejected() {
        let m = tiny();
        let mut ens = ChainEnsemble::init_random(&m, 3, SeedSpec::new(4, 4)).unwrap();
        assert!(matches!(
            ens.record_trajectory(&m, 100, &[10, 5]),
            Err(RbmError::Input(_))
        ));
        assert!(ens.record_trajectory(&m, 10, &[20]).is_err());
    }

    #[test]
    fn replay_equivalence() {
        let m = tiny();
        let seed = SeedSpec::new(77, 5);
        let mut a = ChainEnsemble::init_random(&m, 10, seed).unwrap();
        let snaps = a.record_trajectory(&m, 40, &[13]).unwrap();
        let mut resumed = a.clone();
        resumed.gibbs_step(&m, 20).unwrap();

        let mut b = ChainEnsemble::init_random(&m, 10, seed).unwrap();
        b.gibbs_step(&m, 13).unwrap();
        assert_eq!(b.visible_states(), snaps[0].visible_states);
        b.gibbs_step(&m, 47).unwrap();
        assert_eq!(resumed, b);
    }

    #[test]
    fn batched_steps_match_single_steps() {
        let m = tiny();
        let mut a = ChainEnsemble::init_random(&m, 7, SeedSpec::new(3, 1)).unwrap();
        let mut b = a.clone();
        a.gibbs_step(&m, 25).unwrap();
        for _ in 0..25 {
            b.gibbs_step(&m, 1).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn chains_are_exchangeable() {
        let m = tiny();
        let ens = ChainEnsemble::init_random(&m, 9, SeedSpec::new(8, 8)).unwrap();
        let order = [4, 0, 8, 2, 7, 1, 3, 6, 5];
        let mut a = ens.clone();
        a.gibbs_step(&m, 6).unwrap();
        let mut b = ens.permuted(&order);
        b.gibbs_step(&m, 6).unwrap();
        assert_eq!(a.permuted(&order), b);
    }

    #[test]
    fn parallel_and_serial_paths_agree() {
        // 600 chains x 16 units crosses the parallel threshold.
        let m = RbmModel::random_full(16, 16, 0.3, SeedSpec::new(1, 1));
        let ens = ChainEnsemble::init_random(&m, 600, SeedSpec::new(3, 0)).unwrap();
        let mut a = ens.clone();
        a.gibbs_step(&m, 3).unwrap();
        let sub: Vec<usize> = (0..10).collect();
        let mut b = ens.permuted(&sub);
        b.gibbs_step(&m, 3).unwrap();
        assert_eq!(a.permuted(&sub), b);
    }

    #[test]
    fn zero_model_step_gives_fresh_coins() {
        let m = RbmModel::zeros(8, 4);
        let rows = Array2::<u8>::ones((20_000, 8));
        let mut ens = ChainEnsemble::init_from_rows(&m, rows.view(), SeedSpec::new(6, 0)).unwrap();
        ens.gibbs_step(&m, 1).unwrap();
        let mean = ens.visible().mean().unwrap();
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn histogram_counts_codes() {
        let s = array![[1u8, 0], [1, 0], [0, 1], [1, 1]];
        assert_eq!(visible_histogram(s.view()), vec![0, 2, 1, 1]);
    }
}
