use ndarray::{Array1, Array2};
use rbmlab::likelihood::{exact_log_z, exact_moments, log_likelihood};
use rand::Rng;
use rbmlab::trainer::{
    centered_update, negative_phase, positive_phase, train, Offsets, SufficientStats,
};
use rbmlab::{BinaryDataset, RbmModel, Scheme, SeedSpec, TrainConfig};

fn random_rows(n: usize, nv: usize, seed: u64) -> Array2<u8> {
    let mut rng = SeedSpec::new(seed, 0).rng();
    Array2::from_shape_fn((n, nv), |_| rng.random_bool(0.5) as u8)
}

fn exact_ll(model: &RbmModel, data: &Array2<u8>) -> f64 {
    log_likelihood(model, data.view(), exact_log_z(model).unwrap()).unwrap()
}

fn perturbed(model: &RbmModel, which: usize, index: usize, delta: f64) -> RbmModel {
    let mut w = model.weights().to_owned();
    let mut b = model.visible_bias().to_owned();
    let mut c = model.hidden_bias().to_owned();
    match which {
        0 => w.as_slice_mut().unwrap()[index] += delta,
        1 => b[index] += delta,
        _ => c[index] += delta,
    }
    RbmModel::new(w, b, c).unwrap()
}

fn flat(model: &RbmModel) -> Vec<f64> {
    let mut out: Vec<f64> = model.weights().iter().copied().collect();
    out.extend(model.visible_bias().iter());
    out.extend(model.hidden_bias().iter());
    out
}

/// Central finite differences of the exact mean log-likelihood.
fn finite_difference_gradient(model: &RbmModel, data: &Array2<u8>, eps: f64) -> Vec<f64> {
    let (nv, nh) = (model.n_visible(), model.n_hidden());
    let mut g = Vec::new();
    for (which, len) in [(0, nv * nh), (1, nv), (2, nh)] {
        for i in 0..len {
            let up = exact_ll(&perturbed(model, which, i, eps), data);
            let down = exact_ll(&perturbed(model, which, i, -eps), data);
            g.push((up - down) / (2.0 * eps));
        }
    }
    g
}

#[test]
fn plain_update_follows_exact_gradient() {
    for seed in 0..3 {
        let model = RbmModel::random_full(6, 4, 0.5, SeedSpec::new(seed, 1));
        let data = random_rows(8, 6, seed + 100);
        let pos = positive_phase(&model, data.view()).unwrap();
        let neg = exact_moments(&model).unwrap();
        let lr = 1e-3;
        let next = centered_update(&model, &pos, &neg, lr, &Offsets::zeros(6, 4)).unwrap();
        let fd = finite_difference_gradient(&model, &data, 1e-5);
        for ((a, b), f) in flat(&next).iter().zip(flat(&model)).zip(&fd) {
            let step = a - b;
            let rel = (step - lr * f).abs() / (lr * f.abs()).max(1e-12);
            assert!(rel < 1e-6, "seed {seed}: step {step} vs {} (rel {rel})", lr * f);
        }
    }
}

#[test]
fn exact_gradient_ascent_never_decreases_likelihood() {
    let mut model = RbmModel::random_full(6, 3, 0.3, SeedSpec::new(7, 0));
    let data = random_rows(12, 6, 8);
    let pos_at = |m: &RbmModel| positive_phase(m, data.view()).unwrap();
    let mut ll = exact_ll(&model, &data);
    let start = ll;
    for step in 0..100 {
        let neg = exact_moments(&model).unwrap();
        model = centered_update(&model, &pos_at(&model), &neg, 0.05, &Offsets::zeros(6, 3)).unwrap();
        let next = exact_ll(&model, &data);
        assert!(next >= ll - 1e-12, "step {step}: {ll} -> {next}");
        ll = next;
    }
    assert!(ll > start + 0.01);
}

#[test]
fn positive_phase_matches_hidden_enumeration() {
    let model = RbmModel::random_full(4, 3, 0.8, SeedSpec::new(3, 3));
    let row = random_rows(1, 4, 9);
    let stats = positive_phase(&model, row.view()).unwrap();
    let v = row.row(0).mapv(f64::from);
    // p(h|v) ∝ exp(hᵀ(Wᵀv + c)) over all 8 hidden states
    let mut weights = Vec::new();
    let mut states = Vec::new();
    for code in 0..8u32 {
        let h = Array1::from_shape_fn(3, |a| ((code >> a) & 1) as f64);
        let e = h.dot(&(model.weights().t().dot(&v) + model.hidden_bias()));
        weights.push(e.exp());
        states.push(h);
    }
    let z: f64 = weights.iter().sum();
    let mut mean_h = Array1::<f64>::zeros(3);
    for (w, h) in weights.iter().zip(&states) {
        mean_h.scaled_add(w / z, h);
    }
    for a in 0..3 {
        assert!((stats.h[a] - mean_h[a]).abs() < 1e-12);
        for i in 0..4 {
            assert!((stats.vh[[i, a]] - v[i] * mean_h[a]).abs() < 1e-12);
        }
    }
}

/// Every entry of `got` within three standard errors of `exact`, using the
/// Bernoulli bound `m(1-m)` on the variance of a `[0, 1]` statistic.
fn assert_within_three_se(got: &SufficientStats, exact: &SufficientStats, n: usize, label: &str) {
    let check = |g: f64, m: f64| {
        let se = (m * (1.0 - m) / n as f64).sqrt();
        assert!((g - m).abs() < 3.0 * se, "{label}: {g} vs exact {m} (se {se})");
    };
    got.v.iter().zip(&exact.v).for_each(|(&g, &m)| check(g, m));
    got.h.iter().zip(&exact.h).for_each(|(&g, &m)| check(g, m));
    got.vh.iter().zip(&exact.vh).for_each(|(&g, &m)| check(g, m));
}

#[test]
fn long_chains_reach_exact_moments_for_rdm_and_pcd() {
    let model = RbmModel::random_full(6, 4, 0.4, SeedSpec::new(21, 0));
    let exact = exact_moments(&model).unwrap();
    let n = 2000;
    let minibatch = Array2::<u8>::zeros((n, 6));
    for scheme in [Scheme::Rdm, Scheme::Pcd] {
        let config = TrainConfig {
            scheme,
            k: 10_000,
            seed: SeedSpec::new(5, 0),
            ..TrainConfig::default()
        };
        let (stats, _) = negative_phase(&model, &config, None, minibatch.view(), 0).unwrap();
        assert_within_three_se(&stats, &exact, n, &scheme.to_string());
    }
}

fn best_exact_ll(data: &BinaryDataset, n_hidden: usize) -> f64 {
    // Full-batch ascent on the exact gradient from several starts.
    let rows = data.samples().to_owned();
    let nv = data.n_visible();
    let mut best = f64::NEG_INFINITY;
    for start in 0..3 {
        let mut model = RbmModel::random(nv, n_hidden, 0.1, SeedSpec::new(start, 9));
        for _ in 0..20_000 {
            let pos = positive_phase(&model, rows.view()).unwrap();
            let neg = exact_moments(&model).unwrap();
            model = centered_update(&model, &pos, &neg, 0.1, &Offsets::zeros(nv, n_hidden)).unwrap();
        }
        best = best.max(exact_ll(&model, &rows));
    }
    best
}

#[test]
fn long_random_chain_training_approaches_best_likelihood() {
    let data = rbmlab::data::synth_modes(8, 4, 0.05, 25, SeedSpec::new(4, 0)).unwrap().dataset;
    let config = TrainConfig {
        scheme: Scheme::Rdm,
        k: 10_000,
        learning_rate: 0.2,
        minibatch_size: 20,
        n_updates: 5000,
        seed: SeedSpec::new(4, 1),
        n_hidden: 4,
        init_weight_scale: 0.1,
        n_checkpoints: 2,
        ..TrainConfig::default()
    };
    let last = train(&data, &config).unwrap().pop().unwrap();
    let rows = data.samples().to_owned();
    let ll = exact_ll(&last.model, &rows);
    let best = best_exact_ll(&data, 4);
    assert!((ll - best).abs() <= 0.05 * best.abs(), "trained {ll}, best {best}");
}
