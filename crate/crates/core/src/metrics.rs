//! Observables comparing a generated sample set with a reference set.
//!
//! Every function takes the two sets as binary matrices (rows are samples).
//! Error metrics are zero when both arguments are the same matrix.

use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{RbmError, Result};
use crate::model::RbmModel;

/// Additive floor inside the logarithm of the radial power spectrum.
pub const PSD_FLOOR: f64 = 1e-10;
/// Compression level used by [`entropy_gap`].
pub const GZIP_LEVEL: u32 = 6;
pub const DEFAULT_THIRD_ORDER_SITES: usize = 50;

fn same_width(gen: ArrayView2<'_, u8>, reference: ArrayView2<'_, u8>) -> Result<()> {
    if gen.ncols() != reference.ncols() {
        return Err(RbmError::Dimension(format!(
            "generated set has {} columns, reference has {}",
            gen.ncols(),
            reference.ncols()
        )));
    }
    Ok(())
}

fn nonempty(x: ArrayView2<'_, u8>, what: &str) -> Result<()> {
    if x.nrows() == 0 {
        return Err(RbmError::Input(format!("{what} set is empty")));
    }
    Ok(())
}

fn centered(x: ArrayView2<'_, u8>) -> Array2<f64> {
    let x = x.mapv(f64::from);
    let m = x.mean_axis(Axis(0)).unwrap();
    x - &m
}

/// Population covariance matrix, `(1/N) Σ (v - m)(v - m)ᵀ`.
pub fn covariance(x: ArrayView2<'_, u8>) -> Array2<f64> {
    let c = centered(x);
    c.t().dot(&c) / x.nrows() as f64
}

/// Mean squared difference of the off-diagonal covariances,
/// `2/(N(N-1)) Σ_{i<j} (C^gen_ij - C^ref_ij)²`.
pub fn moment2_error(gen: ArrayView2<'_, u8>, reference: ArrayView2<'_, u8>) -> Result<f64> {
    same_width(gen, reference)?;
    nonempty(gen, "generated")?;
    nonempty(reference, "reference")?;
    let n = gen.ncols();
    if n < 2 {
        return Err(RbmError::Input("need at least 2 visible units".into()));
    }
    let d = covariance(gen) - covariance(reference);
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += d[[i, j]] * d[[i, j]];
        }
    }
    Ok(2.0 * sum / (n * (n - 1)) as f64)
}

/// Indices of the `n_sites` columns whose mean is closest to 0.5, lower
/// index first among ties, returned in increasing order.
pub fn most_active_sites(x: ArrayView2<'_, u8>, n_sites: usize) -> Vec<usize> {
    let means = x.mapv(f64::from).mean_axis(Axis(0)).unwrap();
    let mut idx: Vec<usize> = (0..x.ncols()).collect();
    idx.sort_by(|&a, &b| {
        (means[a] - 0.5)
            .abs()
            .total_cmp(&(means[b] - 0.5).abs())
            .then(a.cmp(&b))
    });
    idx.truncate(n_sites);
    idx.sort_unstable();
    idx
}

fn third_moments(c: &Array2<f64>) -> Vec<f64> {
    let n = c.ncols();
    let rows = c.nrows() as f64;
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ci = c.column(i);
            (i + 1..n).flat_map(move |j| {
                let cij = &ci * &c.column(j);
                (j + 1..n).map(move |k| cij.dot(&c.column(k)) / rows)
            })
        })
        .collect()
}

/// Mean squared difference of the connected third moments over the
/// `n_sites` most active sites of the reference set,
/// `6/(n(n-1)(n-2)) Σ_{i<j<k} (C^gen_ijk - C^ref_ijk)²`.
pub fn moment3_error(gen: ArrayView2<'_, u8>, reference: ArrayView2<'_, u8>, n_sites: usize) -> Result<f64> {
    same_width(gen, reference)?;
    nonempty(gen, "generated")?;
    nonempty(reference, "reference")?;
    if n_sites < 3 {
        return Err(RbmError::Input(format!("need at least 3 sites, got {n_sites}")));
    }
    if n_sites > reference.ncols() {
        return Err(RbmError::Input(format!(
            "{n_sites} sites requested from {} columns",
            reference.ncols()
        )));
    }
    let sites = most_active_sites(reference, n_sites);
    let cg = third_moments(&centered(gen.select(Axis(1), &sites).view()));
    let cr = third_moments(&centered(reference.select(Axis(1), &sites).view()));
    let sum: f64 = cg.iter().zip(&cr).map(|(a, b)| (a - b) * (a - b)).sum();
    let n = n_sites as f64;
    Ok(6.0 * sum / (n * (n - 1.0) * (n - 2.0)))
}

/// Log radial power spectrum `P(d)`, `d = 0..=min(rows, cols)/2`.
pub fn radial_log_power(x: ArrayView2<'_, u8>, shape: (usize, usize)) -> Result<Vec<f64>> {
    let (rows, cols) = shape;
    if rows * cols != x.ncols() {
        return Err(RbmError::Input(format!(
            "image shape {rows}x{cols} does not match {} columns",
            x.ncols()
        )));
    }
    nonempty(x, "image")?;
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(cols);
    let col_fft = planner.plan_fft_forward(rows);
    let power = x
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|img| {
            let mut buf: Vec<Complex<f64>> = img.iter().map(|&p| Complex::new(p as f64, 0.0)).collect();
            for r in buf.chunks_exact_mut(cols) {
                row_fft.process(r);
            }
            let mut column = vec![Complex::default(); rows];
            for c in 0..cols {
                for r in 0..rows {
                    column[r] = buf[r * cols + c];
                }
                col_fft.process(&mut column);
                for r in 0..rows {
                    buf[r * cols + c] = column[r];
                }
            }
            buf.iter().map(|z| z.norm_sqr()).collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0.0; rows * cols], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(s, v)| *s += v);
            a
        });
    let d_max = rows.min(cols) / 2;
    let mut sum = vec![0.0; d_max + 1];
    let mut count = vec![0usize; d_max + 1];
    let signed = |k: usize, n: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    for k in 0..rows {
        for l in 0..cols {
            let d = signed(k, rows).hypot(signed(l, cols)).round() as usize;
            if d <= d_max {
                sum[d] += power[k * cols + l];
                count[d] += 1;
            }
        }
    }
    let n = x.nrows() as f64;
    Ok(sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| (s / (n * c as f64) + PSD_FLOOR).ln())
        .collect())
}

/// Squared distance between the log radial power spectra of the two sets.
pub fn psd_error(
    gen: ArrayView2<'_, u8>,
    reference: ArrayView2<'_, u8>,
    image_shape: (usize, usize),
) -> Result<f64> {
    same_width(gen, reference)?;
    let pg = radial_log_power(gen, image_shape)?;
    let pr = radial_log_power(reference, image_shape)?;
    Ok(pg.iter().zip(&pr).map(|(a, b)| (a - b) * (a - b)).sum())
}

fn pack_rows(x: ArrayView2<'_, u8>) -> Vec<Vec<u64>> {
    x.axis_iter(Axis(0))
        .map(|row| {
            let mut words = vec![0u64; row.len().div_ceil(64)];
            for (i, &b) in row.iter().enumerate() {
                words[i / 64] |= (b as u64) << (i % 64);
            }
            words
        })
        .collect()
}

fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// For each row of `from`: (nearest distance within `from` excluding itself,
/// nearest distance to `to`).
fn nearest(from: &[Vec<u64>], to: &[Vec<u64>]) -> Vec<(u32, u32)> {
    from.par_iter()
        .enumerate()
        .map(|(m, a)| {
            let own = from
                .iter()
                .enumerate()
                .filter(|&(n, _)| n != m)
                .map(|(_, b)| hamming(a, b))
                .min()
                .unwrap_or(u32::MAX);
            let other = to.iter().map(|b| hamming(a, b)).min().unwrap_or(u32::MAX);
            (own, other)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialAccuracy {
    /// Fraction of source samples whose nearest neighbor is another source sample.
    pub a_s: f64,
    /// Fraction of target samples whose nearest neighbor is another target sample.
    pub a_t: f64,
    /// `(a_s - 0.5)² + (a_t - 0.5)²`.
    pub e_aa: f64,
}

/// Nearest-neighbor adversarial accuracy between the generated (target)
/// and reference (source) sets. Distances are Euclidean, which on binary
/// vectors orders pairs exactly like the Hamming distance.
pub fn adversarial_accuracy(gen: ArrayView2<'_, u8>, reference: ArrayView2<'_, u8>) -> Result<AdversarialAccuracy> {
    same_width(gen, reference)?;
    if gen.nrows() != reference.nrows() {
        return Err(RbmError::Input(format!(
            "set sizes differ: {} generated, {} reference",
            gen.nrows(),
            reference.nrows()
        )));
    }
    if gen.nrows() < 2 {
        return Err(RbmError::Input("need at least 2 samples per set".into()));
    }
    let t = pack_rows(gen);
    let s = pack_rows(reference);
    let frac = |pairs: Vec<(u32, u32)>| {
        pairs.iter().filter(|(own, other)| own < other).count() as f64 / pairs.len() as f64
    };
    let a_t = frac(nearest(&t, &s));
    let a_s = frac(nearest(&s, &t));
    Ok(AdversarialAccuracy {
        a_s,
        a_t,
        e_aa: (a_s - 0.5).powi(2) + (a_t - 0.5).powi(2),
    })
}

/// Size in bytes of the gzip stream of `x`, one byte per entry, row-major.
pub fn compressed_size(x: ArrayView2<'_, u8>) -> usize {
    let mut enc = GzEncoder::new(Vec::new(), Compression::new(GZIP_LEVEL));
    for row in x.axis_iter(Axis(0)) {
        match row.as_slice() {
            Some(bytes) => enc.write_all(bytes),
            None => enc.write_all(&row.to_vec()),
        }
        .expect("writing to memory");
    }
    enc.finish().expect("writing to memory").len()
}

/// Relative growth of the compressed size when the second half of the
/// reference set is replaced by generated rows.
pub fn entropy_gap(gen: ArrayView2<'_, u8>, reference: ArrayView2<'_, u8>) -> Result<f64> {
    same_width(gen, reference)?;
    let n = reference.nrows();
    if gen.nrows() != n {
        return Err(RbmError::Input(format!(
            "set sizes differ: {} generated, {n} reference",
            gen.nrows()
        )));
    }
    nonempty(reference, "reference")?;
    let half_ref = n.div_ceil(2);
    let cross = ndarray::concatenate(
        Axis(0),
        &[reference.slice(s![..half_ref, ..]), gen.slice(s![..n / 2, ..])],
    )
    .expect("equal widths");
    let s_src = compressed_size(reference) as f64;
    let s_cross = compressed_size(cross.view()) as f64;
    Ok(s_cross / s_src - 1.0)
}

/// Mean energy `-F(v)` of a set, hidden units marginalized.
pub fn mean_energy(model: &RbmModel, x: ArrayView2<'_, u8>) -> Result<f64> {
    nonempty(x, "sample")?;
    Ok(-model.free_energies(x)?.mean().unwrap())
}

/// Squared difference of the mean energies of the two sets.
pub fn energy_error(model: &RbmModel, gen: ArrayView2<'_, u8>, reference: ArrayView2<'_, u8>) -> Result<f64> {
    same_width(gen, reference)?;
    let d = mean_energy(model, gen)? - mean_energy(model, reference)?;
    Ok(d * d)
}

/// All observables for one generated set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub e2: f64,
    pub e3: f64,
    pub e_psd: Option<f64>,
    pub e_aai_train: f64,
    pub e_aai_test: Option<f64>,
    pub delta_s: f64,
    pub e_energy: f64,
    pub ll_rbm: Option<f64>,
    pub ll_data: Option<f64>,
}

/// Inputs of [`report`] besides the generated set.
pub struct ReportInputs<'a> {
    pub model: &'a RbmModel,
    pub train: ArrayView2<'a, u8>,
    pub test: Option<ArrayView2<'a, u8>>,
    pub image_shape: Option<(usize, usize)>,
    pub log_z: Option<f64>,
    pub n_sites: usize,
}

/// Evaluates every metric. Reference sets are truncated to the size of the
/// generated set where equal sizes are required.
pub fn report(gen: ArrayView2<'_, u8>, inputs: &ReportInputs<'_>) -> Result<MetricReport> {
    let n = gen.nrows();
    let head = |x: ArrayView2<'_, u8>| -> Result<Array2<u8>> {
        if x.nrows() < n {
            return Err(RbmError::Input(format!(
                "reference has {} rows, {n} generated samples need as many",
                x.nrows()
            )));
        }
        Ok(x.slice(s![..n, ..]).to_owned())
    };
    let train_head = head(inputs.train)?;
    let n_sites = inputs.n_sites.min(gen.ncols());
    let ll = |x: ArrayView2<'_, u8>| -> Result<Option<f64>> {
        inputs
            .log_z
            .map(|z| crate::likelihood::log_likelihood(inputs.model, x, z))
            .transpose()
    };
    Ok(MetricReport {
        e2: moment2_error(gen, inputs.train)?,
        e3: moment3_error(gen, inputs.train, n_sites)?,
        e_psd: inputs
            .image_shape
            .map(|shape| psd_error(gen, inputs.train, shape))
            .transpose()?,
        e_aai_train: adversarial_accuracy(gen, train_head.view())?.e_aa,
        e_aai_test: inputs
            .test
            .map(|t| head(t).and_then(|t| Ok(adversarial_accuracy(gen, t.view())?.e_aa)))
            .transpose()?,
        delta_s: entropy_gap(gen, train_head.view())?,
        e_energy: energy_error(inputs.model, gen, inputs.train)?,
        ll_rbm: ll(gen)?,
        ll_data: ll(inputs.train)?,
    })
}

/// Per-site means of a sample set.
pub fn site_means(x: ArrayView2<'_, u8>) -> Array1<f64> {
    x.mapv(f64::from).mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;
    use ndarray::array;
    use rand::Rng;

    fn bernoulli(rows: usize, cols: usize, p: f64, seed: u64) -> Array2<u8> {
        let mut rng = SeedSpec::new(seed, 0).rng();
        Array2::from_shape_simple_fn((rows, cols), || rng.random_bool(p) as u8)
    }

    #[test]
    fn moment2_naive_oracle() {
        let a = array![[1u8, 0, 1, 1], [0, 0, 1, 0], [1, 1, 0, 0], [1, 0, 0, 1], [0, 1, 1, 1]];
        let b = array![[0u8, 0, 1, 1], [1, 1, 1, 0], [1, 1, 0, 1]];
        let cov = |x: &Array2<u8>, i: usize, j: usize| {
            let n = x.nrows() as f64;
            let mi = x.column(i).iter().map(|&v| v as f64).sum::<f64>() / n;
            let mj = x.column(j).iter().map(|&v| v as f64).sum::<f64>() / n;
            (0..x.nrows())
                .map(|r| (x[[r, i]] as f64 - mi) * (x[[r, j]] as f64 - mj))
                .sum::<f64>()
                / n
        };
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i < j {
                    s += (cov(&a, i, j) - cov(&b, i, j)).powi(2);
                }
            }
        }
        let want = 2.0 * s / 12.0;
        assert!((moment2_error(a.view(), b.view()).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn moment2_constant_sets() {
        let z = Array2::<u8>::zeros((5, 4));
        let o = Array2::<u8>::ones((7, 4));
        assert_eq!(moment2_error(z.view(), o.view()).unwrap(), 0.0);
        assert!(moment2_error(Array2::<u8>::zeros((3, 1)).view(), Array2::<u8>::zeros((3, 1)).view()).is_err());
    }

    #[test]
    fn moment3_triple_loop_oracle() {
        let a = bernoulli(30, 5, 0.4, 1);
        let b = bernoulli(20, 5, 0.6, 2);
        let c3 = |x: &Array2<u8>, i: usize, j: usize, k: usize| {
            let n = x.nrows() as f64;
            let m = |c: usize| x.column(c).iter().map(|&v| v as f64).sum::<f64>() / n;
            let (mi, mj, mk) = (m(i), m(j), m(k));
            (0..x.nrows())
                .map(|r| (x[[r, i]] as f64 - mi) * (x[[r, j]] as f64 - mj) * (x[[r, k]] as f64 - mk))
                .sum::<f64>()
                / n
        };
        let mut s = 0.0;
        for i in 0..5 {
            for j in i + 1..5 {
                for k in j + 1..5 {
                    s += (c3(&a, i, j, k) - c3(&b, i, j, k)).powi(2);
                }
            }
        }
        let want = 6.0 * s / 60.0;
        assert!((moment3_error(a.view(), b.view(), 5).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn moment3_site_selection_and_errors() {
        let x = array![[1u8, 1, 0, 1, 0], [1, 0, 0, 1, 1], [1, 1, 0, 0, 0], [1, 0, 1, 0, 1]];
        // means 1, .5, .25, .5, .5
        assert_eq!(most_active_sites(x.view(), 3), vec![1, 3, 4]);
        assert_eq!(most_active_sites(x.view(), 4), vec![1, 2, 3, 4]);
        assert!(moment3_error(x.view(), x.view(), 2).is_err());
        assert!(moment3_error(x.view(), x.view(), 6).is_err());
    }

    #[test]
    fn moment3_independent_columns_near_zero() {
        let a = bernoulli(4000, 8, 0.5, 3);
        let b = bernoulli(4000, 8, 0.5, 4);
        // third moments of fair coins vanish; sampling sd of each is 1/(8 sqrt(N))
        let e = moment3_error(a.view(), b.view(), 8).unwrap();
        assert!(e < 2.0 * 2.0 * 9.0 / (64.0 * 4000.0), "{e}");
    }

    fn naive_radial(x: &Array2<u8>, rows: usize, cols: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        let d_max = rows.min(cols) / 2;
        let mut sum = vec![0.0; d_max + 1];
        let mut cnt = vec![0.0; d_max + 1];
        for k in 0..rows {
            for l in 0..cols {
                let mut p = 0.0;
                for img in x.axis_iter(Axis(0)) {
                    let (mut re, mut im) = (0.0, 0.0);
                    for r in 0..rows {
                        for c in 0..cols {
                            let ang = -2.0 * PI * ((k * r) as f64 / rows as f64 + (l * c) as f64 / cols as f64);
                            re += img[r * cols + c] as f64 * ang.cos();
                            im += img[r * cols + c] as f64 * ang.sin();
                        }
                    }
                    p += re * re + im * im;
                }
                let kk = if k <= rows / 2 { k as f64 } else { k as f64 - rows as f64 };
                let ll = if l <= cols / 2 { l as f64 } else { l as f64 - cols as f64 };
                let d = (kk * kk + ll * ll).sqrt().round() as usize;
                if d <= d_max {
                    sum[d] += p / x.nrows() as f64;
                    cnt[d] += 1.0;
                }
            }
        }
        sum.iter().zip(&cnt).map(|(s, c)| (s / c + PSD_FLOOR).ln()).collect()
    }

    #[test]
    fn psd_matches_direct_dft() {
        let checker = Array2::from_shape_fn((1, 16), |(_, i)| ((i / 4 + i % 4) % 2) as u8);
        let uniform = bernoulli(6, 16, 0.5, 5);
        let want: f64 = naive_radial(&checker, 4, 4)
            .iter()
            .zip(naive_radial(&uniform, 4, 4))
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let got = psd_error(checker.view(), uniform.view(), (4, 4)).unwrap();
        assert!((got - want).abs() < 1e-9 * want.max(1.0), "{got} {want}");
        let rect = bernoulli(3, 15, 0.3, 6);
        let p = radial_log_power(rect.view(), (3, 5)).unwrap();
        let q = naive_radial(&rect, 3, 5);
        assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn psd_zero_images_and_shape_error() {
        let z = Array2::<u8>::zeros((3, 16));
        assert_eq!(psd_error(z.view(), z.view(), (4, 4)).unwrap(), 0.0);
        assert!(radial_log_power(z.view(), (4, 4))
            .unwrap()
            .iter()
            .all(|&p| p == PSD_FLOOR.ln()));
        assert!(psd_error(z.view(), z.view(), (3, 5)).is_err());
    }

    #[test]
    fn adversarial_duplicates() {
        let x = array![[1u8, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]];
        let r = adversarial_accuracy(x.view(), x.view()).unwrap();
        assert_eq!((r.a_s, r.a_t, r.e_aa), (0.0, 0.0, 0.5));
    }

    #[test]
    fn adversarial_three_point_oracle() {
        let t = array![[0u8, 0, 0, 0], [1, 1, 0, 0], [1, 1, 1, 1]];
        let s = array![[0u8, 0, 0, 1], [0, 0, 1, 1], [1, 1, 1, 0]];
        let d = |a: ndarray::ArrayView1<u8>, b: ndarray::ArrayView1<u8>| {
            a.iter().zip(b).map(|(x, y)| ((*x as f64) - (*y as f64)).powi(2)).sum::<f64>().sqrt()
        };
        let frac = |x: &Array2<u8>, y: &Array2<u8>| {
            let mut hits = 0;
            for m in 0..3 {
                let own = (0..3).filter(|&n| n != m).map(|n| d(x.row(m), x.row(n))).fold(f64::INFINITY, f64::min);
                let other = (0..3).map(|n| d(x.row(m), y.row(n))).fold(f64::INFINITY, f64::min);
                hits += (own < other) as usize;
            }
            hits as f64 / 3.0
        };
        let r = adversarial_accuracy(t.view(), s.view()).unwrap();
        assert_eq!(r.a_t, frac(&t, &s));
        assert_eq!(r.a_s, frac(&s, &t));
        assert!((r.e_aa - ((r.a_s - 0.5).powi(2) + (r.a_t - 0.5).powi(2))).abs() < 1e-15);
        assert!(adversarial_accuracy(t.view(), s.slice(s![..2, ..])).is_err());
        assert!(adversarial_accuracy(t.slice(s![..1, ..]), s.slice(s![..1, ..])).is_err());
    }

    #[test]
    fn adversarial_wide_rows() {
        // more than 64 columns exercises multi-word packing
        let a = bernoulli(20, 130, 0.5, 7);
        let r = adversarial_accuracy(a.view(), a.view()).unwrap();
        assert_eq!(r.e_aa, 0.5);
    }

    #[test]
    fn entropy_gap_self_and_constant() {
        let r = bernoulli(400, 32, 0.5, 8);
        let same = entropy_gap(r.view(), r.view()).unwrap();
        assert!(same.abs() < 0.02, "{same}");
        let z = Array2::<u8>::zeros((400, 32));
        assert!(entropy_gap(z.view(), r.view()).unwrap() < 0.0);
        assert_eq!(entropy_gap(z.view(), r.view()).unwrap(), entropy_gap(z.view(), r.view()).unwrap());
    }

    #[test]
    fn energy_error_cases() {
        let m = RbmModel::zeros(3, 2);
        let a = array![[1u8, 0, 1]];
        let b = array![[0u8, 0, 0], [1, 1, 1]];
        assert!((mean_energy(&m, a.view()).unwrap() + 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(energy_error(&m, a.view(), b.view()).unwrap(), 0.0);
        let m = RbmModel::random_full(3, 2, 0.8, SeedSpec::new(9, 0));
        let e = |x: &Array2<u8>| {
            x.axis_iter(Axis(0)).map(|v| -m.visible_free_energy(v).unwrap()).sum::<f64>() / x.nrows() as f64
        };
        let want = (e(&a) - e(&b)).powi(2);
        assert!((energy_error(&m, a.view(), b.view()).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn report_on_reference_itself() {
        let x = bernoulli(60, 16, 0.4, 10);
        let m = RbmModel::random(16, 4, 0.1, SeedSpec::new(11, 0));
        let r = report(
            x.view(),
            &ReportInputs {
                model: &m,
                train: x.view(),
                test: None,
                image_shape: Some((4, 4)),
                log_z: Some(crate::likelihood::exact_log_z(&m).unwrap()),
                n_sites: 50,
            },
        )
        .unwrap();
        assert_eq!((r.e2, r.e3, r.e_psd, r.e_energy), (0.0, 0.0, Some(0.0), 0.0));
        assert_eq!(r.ll_rbm, r.ll_data);
        assert!(r.e_aai_test.is_none());
    }
}
