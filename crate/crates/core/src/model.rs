//! Binary-binary RBM parameterization.
//!
//! The energy of a joint configuration `(v, h)` with `v ∈ {0,1}^Nv`, `h ∈ {0,1}^Nh` is
//!
//! ```text
//! E(v, h) = -Σ_ia v_i w_ia h_a - Σ_i b_i v_i - Σ_a c_a h_a
//! ```
//!
//! Weights are stored visible-major: `weights[[i, a]]` couples visible unit `i`
//! to hidden unit `a`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{RbmError, Result};
use crate::math::{logistic, softplus};
use crate::rng::SeedSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    weights: Array2<f64>,
    visible_bias: Array1<f64>,
    hidden_bias: Array1<f64>,
}

/// A joint binary state of both layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    visible: Array1<u8>,
    hidden: Array1<u8>,
}

impl Configuration {
    pub fn new(visible: Array1<u8>, hidden: Array1<u8>) -> Result<Self> {
        check_binary(visible.view(), "visible")?;
        check_binary(hidden.view(), "hidden")?;
        Ok(Self { visible, hidden })
    }

    pub fn visible(&self) -> ArrayView1<'_, u8> {
        self.visible.view()
    }

    pub fn hidden(&self) -> ArrayView1<'_, u8> {
        self.hidden.view()
    }
}

pub(crate) fn check_binary(x: ArrayView1<'_, u8>, what: &str) -> Result<()> {
    match x.iter().position(|&b| b > 1) {
        Some(i) => Err(RbmError::Domain(format!(
            "{what} entry {i} is {}, expected 0 or 1",
            x[i]
        ))),
        None => Ok(()),
    }
}

pub(crate) fn to_f64(x: ArrayView1<'_, u8>) -> Array1<f64> {
    x.mapv(f64::from)
}

impl RbmModel {
    pub fn new(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
    ) -> Result<Self> {
        let (nv, nh) = weights.dim();
        if nv == 0 || nh == 0 {
            return Err(RbmError::Dimension(
                "both layers need at least one unit".into(),
            ));
        }
        if visible_bias.len() != nv || hidden_bias.len() != nh {
            return Err(RbmError::Dimension(format!(
                "weights are {nv}x{nh} but biases have lengths {} and {}",
                visible_bias.len(),
                hidden_bias.len()
            )));
        }
        let model = Self {
            weights,
            visible_bias,
            hidden_bias,
        };
        model.check_finite()?;
        Ok(model)
    }

    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        assert!(n_visible > 0 && n_hidden > 0, "empty layer");
        Self {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
        }
    }

    /// Gaussian weights with standard deviation `weight_scale`, zero biases.
    pub fn random(n_visible: usize, n_hidden: usize, weight_scale: f64, seed: SeedSpec) -> Self {
        let mut rng = seed.rng();
        let mut model = Self::zeros(n_visible, n_hidden);
        model.weights.mapv_inplace(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            weight_scale * z
        });
        model
    }

    /// Gaussian weights and biases, all with standard deviation `scale`.
    pub fn random_full(n_visible: usize, n_hidden: usize, scale: f64, seed: SeedSpec) -> Self {
        let mut model = Self::random(n_visible, n_hidden, scale, seed);
        let mut rng = seed.derive(1).rng();
        for x in model
            .visible_bias
            .iter_mut()
            .chain(model.hidden_bias.iter_mut())
        {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = scale * z;
        }
        model
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn visible_bias(&self) -> ArrayView1<'_, f64> {
        self.visible_bias.view()
    }

    pub fn hidden_bias(&self) -> ArrayView1<'_, f64> {
        self.hidden_bias.view()
    }

    pub fn with_visible_bias(mut self, visible_bias: Array1<f64>) -> Result<Self> {
        if visible_bias.len() != self.n_visible() {
            return Err(RbmError::Dimension("visible bias length".into()));
        }
        self.visible_bias = visible_bias;
        self.check_finite()?;
        Ok(self)
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut Array2<f64>, &mut Array1<f64>, &mut Array1<f64>) {
        (
            &mut self.weights,
            &mut self.visible_bias,
            &mut self.hidden_bias,
        )
    }

    pub fn check_finite(&self) -> Result<()> {
        let finite = self
            .weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .all(|x| x.is_finite());
        if finite {
            Ok(())
        } else {
            Err(RbmError::Numeric("non-finite model parameter".into()))
        }
    }

    /// The model with the roles of the two layers exchanged: `(wᵀ, c, b)`.
    pub fn swap_layers(&self) -> RbmModel {
        RbmModel {
            weights: self.weights.t().to_owned(),
            visible_bias: self.hidden_bias.clone(),
            hidden_bias: self.visible_bias.clone(),
        }
    }

    pub fn energy(&self, cfg: &Configuration) -> Result<f64> {
        if cfg.visible.len() != self.n_visible() || cfg.hidden.len() != self.n_hidden() {
            return Err(RbmError::Dimension(format!(
                "configuration is ({}, {}), model is ({}, {})",
                cfg.visible.len(),
                cfg.hidden.len(),
                self.n_visible(),
                self.n_hidden()
            )));
        }
        let v = to_f64(cfg.visible.view());
        let h = to_f64(cfg.hidden.view());
        Ok(self.energy_f64(v.view(), h.view()))
    }

    pub(crate) fn energy_f64(&self, v: ArrayView1<'_, f64>, h: ArrayView1<'_, f64>) -> f64 {
        -(v.dot(&self.weights.dot(&h)) + v.dot(&self.visible_bias) + h.dot(&self.hidden_bias))
    }

    /// `P(h_a = 1 | v)` for every hidden unit.
    pub fn hidden_conditional(&self, visible: ArrayView1<'_, u8>) -> Result<Array1<f64>> {
        self.check_visible(visible)?;
        let v = to_f64(visible);
        Ok((v.dot(&self.weights) + &self.hidden_bias).mapv(logistic))
    }

    /// `P(v_i = 1 | h)` for every visible unit.
    pub fn visible_conditional(&self, hidden: ArrayView1<'_, u8>) -> Result<Array1<f64>> {
        if hidden.len() != self.n_hidden() {
            return Err(RbmError::Dimension(format!(
                "hidden vector has length {}, model has {} hidden units",
                hidden.len(),
                self.n_hidden()
            )));
        }
        check_binary(hidden, "hidden")?;
        let h = to_f64(hidden);
        Ok((self.weights.dot(&h) + &self.visible_bias).mapv(logistic))
    }

    /// `ln Σ_h exp(-E(v, h))` in closed form.
    pub fn visible_free_energy(&self, visible: ArrayView1<'_, u8>) -> Result<f64> {
        self.check_visible(visible)?;
        Ok(self.free_energy_f64(to_f64(visible).view()))
    }

    pub(crate) fn free_energy_f64(&self, v: ArrayView1<'_, f64>) -> f64 {
        let pre = v.dot(&self.weights) + &self.hidden_bias;
        v.dot(&self.visible_bias) + pre.iter().map(|&x| softplus(x)).sum::<f64>()
    }

    /// Row-wise free energies of a batch of visible states (one per row).
    pub fn free_energies(&self, visible: ArrayView2<'_, u8>) -> Result<Array1<f64>> {
        if visible.ncols() != self.n_visible() {
            return Err(RbmError::Dimension(format!(
                "samples have {} columns, model has {} visible units",
                visible.ncols(),
                self.n_visible()
            )));
        }
        for row in visible.rows() {
            check_binary(row, "visible")?;
        }
        Ok(self.free_energies_f64(visible.mapv(f64::from).view()))
    }

    pub(crate) fn free_energies_f64(&self, v: ArrayView2<'_, f64>) -> Array1<f64> {
        let pre = self.hidden_preactivation(v);
        let linear = v.dot(&self.visible_bias);
        let soft = pre.map_axis(Axis(1), |row| row.iter().map(|&x| softplus(x)).sum::<f64>());
        linear + soft
    }

    /// `v W + c` for each row of `v`.
    pub(crate) fn hidden_preactivation(&self, v: ArrayView2<'_, f64>) -> Array2<f64> {
        v.dot(&self.weights) + &self.hidden_bias
    }

    /// `h Wᵀ + b` for each row of `h`.
    pub(crate) fn visible_preactivation(&self, h: ArrayView2<'_, f64>) -> Array2<f64> {
        h.dot(&self.weights.t()) + &self.visible_bias
    }

    fn check_visible(&self, visible: ArrayView1<'_, u8>) -> Result<()> {
        if visible.len() != self.n_visible() {
            return Err(RbmError::Dimension(format!(
                "visible vector has length {}, model has {} visible units",
                visible.len(),
                self.n_visible()
            )));
        }
        check_binary(visible, "visible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn all_states(n: usize) -> Vec<Array1<u8>> {
        (0..1u64 << n)
            .map(|code| Array1::from_shape_fn(n, |i| ((code >> i) & 1) as u8))
            .collect()
    }

    #[test]
    fn zero_model_energy_is_zero() {
        let m = RbmModel::zeros(4, 3);
        let cfg = Configuration::new(array![1, 0, 1, 1], array![0, 1, 1]).unwrap();
        assert_eq!(m.energy(&cfg).unwrap(), 0.0);
    }

    #[test]
    fn two_by_one_energy() {
        let m = RbmModel::new(array![[1.0], [1.0]], array![0.0, 0.0], array![0.0]).unwrap();
        let cfg = Configuration::new(array![1, 1], array![1]).unwrap();
        assert_eq!(m.energy(&cfg).unwrap(), -2.0);
    }

    #[test]
    fn energy_matches_double_loop() {
        let m = RbmModel::random_full(6, 4, 0.7, SeedSpec::new(17, 0));
        for v in all_states(6).iter().step_by(5) {
            for h in all_states(4) {
                let mut naive = 0.0;
                for i in 0..6 {
                    for a in 0..4 {
                        naive -= v[i] as f64 * m.weights()[[i, a]] * h[a] as f64;
                    }
                    naive -= m.visible_bias()[i] * v[i] as f64;
                }
                for a in 0..4 {
                    naive -= m.hidden_bias()[a] * h[a] as f64;
                }
                let cfg = Configuration::new(v.clone(), h.clone()).unwrap();
                assert!((m.energy(&cfg).unwrap() - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energy_shape_mismatch() {
        let m = RbmModel::zeros(3, 2);
        let cfg = Configuration::new(array![1, 0], array![0, 1]).unwrap();
        assert!(matches!(m.energy(&cfg), Err(RbmError::Dimension(_))));
    }

    #[test]
    fn configuration_rejects_non_binary() {
        assert!(matches!(
            Configuration::new(array![0, 2], array![1]),
            Err(RbmError::Domain(_))
        ));
    }

    #[test]
    fn constructor_rejects_non_finite_and_bad_shapes() {
        assert!(RbmModel::new(array![[f64::NAN]], array![0.0], array![0.0]).is_err());
        assert!(matches!(
            RbmModel::new(array![[1.0, 2.0]], array![0.0], array![0.0]),
            Err(RbmError::Dimension(_))
        ));
    }

    #[test]
    fn conditionals_of_zero_model() {
        let m = RbmModel::zeros(5, 3);
        let ph = m.hidden_conditional(array![1, 0, 1, 0, 1].view()).unwrap();
        assert!(ph.iter().all(|&p| p == 0.5));
        let pv = m.visible_conditional(array![1, 1, 0].view()).unwrap();
        assert!(pv.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn conditionals_saturate() {
        let m = RbmModel::new(Array2::zeros((2, 2)), array![50.0, 0.0], array![0.0, 50.0]).unwrap();
        let ph = m.hidden_conditional(array![0, 1].view()).unwrap();
        assert!((ph[1] - 1.0).abs() <= 1e-15);
        let pv = m.visible_conditional(array![0, 0].view()).unwrap();
        assert!((pv[0] - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn conditional_rejects_non_binary() {
        let m = RbmModel::zeros(2, 2);
        assert!(matches!(
            m.hidden_conditional(array![0, 3].view()),
            Err(RbmError::Domain(_))
        ));
        assert!(matches!(
            m.visible_conditional(array![5, 0].view()),
            Err(RbmError::Domain(_))
        ));
    }

    // Exact p(h | v) from the joint: each factor p(h_a=1|v) is a marginal of the
    // enumerated conditional, and the full conditional is their product.
    #[test]
    fn conditionals_match_enumeration() {
        let m = RbmModel::random_full(4, 3, 0.9, SeedSpec::new(2, 0));
        for v in all_states(4) {
            let weights: Vec<(Array1<u8>, f64)> = all_states(3)
                .into_iter()
                .map(|h| {
                    let e = m.energy(&Configuration::new(v.clone(), h.clone()).unwrap()).unwrap();
                    (h, (-e).exp())
                })
                .collect();
            let z: f64 = weights.iter().map(|(_, w)| w).sum();
            let cond = m.hidden_conditional(v.view()).unwrap();
            for a in 0..3 {
                let marg: f64 = weights.iter().filter(|(h, _)| h[a] == 1).map(|(_, w)| w).sum();
                assert!((marg / z - cond[a]).abs() < 1e-12);
            }
            for (h, w) in &weights {
                let prod: f64 = (0..3)
                    .map(|a| if h[a] == 1 { cond[a] } else { 1.0 - cond[a] })
                    .product();
                assert!((w / z - prod).abs() < 1e-12);
            }
        }
        for h in all_states(3) {
            let mut z = 0.0;
            let mut marg = [0.0; 4];
            for v in all_states(4) {
                let w = (-m.energy(&Configuration::new(v.clone(), h.clone()).unwrap()).unwrap()).exp();
                z += w;
                for i in 0..4 {
                    if v[i] == 1 {
                        marg[i] += w;
                    }
                }
            }
            let cond = m.visible_conditional(h.view()).unwrap();
            for i in 0..4 {
                assert!((marg[i] / z - cond[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn free_energy_of_zero_model() {
        let m = RbmModel::zeros(3, 5);
        let f = m.visible_free_energy(array![1, 1, 0].view()).unwrap();
        assert!((f - 5.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn free_energy_bias_only() {
        let m = RbmModel::zeros(3, 4)
            .with_visible_bias(array![1.0, 0.0, 0.0])
            .unwrap();
        let f = m.visible_free_energy(array![1, 0, 0].view()).unwrap();
        assert!((f - (1.0 + 4.0 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn free_energy_matches_hidden_enumeration() {
        let m = RbmModel::random_full(5, 4, 1.1, SeedSpec::new(8, 1));
        for v in all_states(5) {
            let terms: Vec<f64> = all_states(4)
                .into_iter()
                .map(|h| -m.energy(&Configuration::new(v.clone(), h).unwrap()).unwrap())
                .collect();
            let brute = terms.iter().map(|t| t.exp()).sum::<f64>().ln();
            assert!((m.visible_free_energy(v.view()).unwrap() - brute).abs() < 1e-10);
        }
    }

    #[test]
    fn free_energy_stable_at_large_parameters() {
        let m = RbmModel::new(array![[800.0], [-800.0]], array![0.0, 0.0], array![0.0]).unwrap();
        let f = m.visible_free_energy(array![1, 0].view()).unwrap();
        assert!((f - 800.0).abs() < 1e-9);
        let f = m.visible_free_energy(array![0, 1].view()).unwrap();
        assert!(f.is_finite() && f >= 0.0);
    }

    #[test]
    fn batch_free_energies_agree() {
        let m = RbmModel::random_full(5, 3, 0.5, SeedSpec::new(4, 4));
        let states = all_states(5);
        let batch = Array2::from_shape_fn((states.len(), 5), |(r, c)| states[r][c]);
        let f = m.free_energies(batch.view()).unwrap();
        for (r, v) in states.iter().enumerate() {
            assert!((f[r] - m.visible_free_energy(v.view()).unwrap()).abs() < 1e-12);
        }
    }
}
