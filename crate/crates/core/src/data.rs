//! Binary datasets: loading, saving, binarization, splitting and synthetic generators.
//!
//! Packed-bits layout (all integers little-endian):
//!
//! ```text
//! "RBM1" | u32 n_samples | u32 n_visible | u32 rows | u32 cols | payload
//! ```
//!
//! `rows = cols = 0` means no image shape. The payload is the row-major
//! sample matrix as one bit stream, bit `j` stored in byte `j / 8` at bit
//! position `j % 8`; the last byte is zero-padded.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{RbmError, Result};
use crate::rng::{uniform, SeedSpec};

pub const PACKED_MAGIC: &[u8; 4] = b"RBM1";
const PACKED_HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    #[default]
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// On-disk encodings accepted by [`load_binary_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Format {
    /// Comma-separated `0`/`1` entries, one sample per line.
    Csv01,
    /// The `RBM1` bit-packed container.
    PackedBits,
    /// IDX unsigned-byte tensor (MNIST layout); bytes are scaled to [0, 1]
    /// and binarized at `threshold`.
    Idx { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    samples: Array2<u8>,
    image_shape: Option<(usize, usize)>,
    name: String,
    split: Split,
}

impl BinaryDataset {
    pub fn new(samples: Array2<u8>, name: impl Into<String>) -> Result<Self> {
        if let Some(((r, c), &x)) = samples.indexed_iter().find(|(_, &x)| x > 1) {
            return Err(RbmError::Domain(format!(
                "sample {r}, column {c} is {x}, expected 0 or 1"
            )));
        }
        Ok(Self {
            samples,
            image_shape: None,
            name: name.into(),
            split: Split::Train,
        })
    }

    pub fn with_image_shape(mut self, shape: Option<(usize, usize)>) -> Result<Self> {
        if let Some((r, c)) = shape {
            if r * c != self.n_visible() {
                return Err(RbmError::Dimension(format!(
                    "image shape {r}x{c} does not cover {} visible units",
                    self.n_visible()
                )));
            }
        }
        self.image_shape = shape;
        Ok(self)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn samples(&self) -> ArrayView2<'_, u8> {
        self.samples.view()
    }

    pub fn into_samples(self) -> Array2<u8> {
        self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_visible(&self) -> usize {
        self.samples.ncols()
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// Per-site empirical frequency of ones.
    pub fn column_means(&self) -> Array1<f64> {
        self.samples
            .mapv(f64::from)
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(self.n_visible()))
    }

    /// A new dataset made of the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> BinaryDataset {
        BinaryDataset {
            samples: self.samples.select(Axis(0), rows),
            image_shape: self.image_shape,
            name: self.name.clone(),
            split: self.split,
        }
    }

    /// The first `n` rows (all rows if fewer).
    pub fn head(&self, n: usize) -> BinaryDataset {
        let rows: Vec<usize> = (0..n.min(self.n_samples())).collect();
        self.select_rows(&rows)
    }

    pub fn to_csv01(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 2);
        for row in self.samples.rows() {
            for (j, &x) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push(if x == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let (m, nv) = self.samples.dim();
        let (rows, cols) = self.image_shape.unwrap_or((0, 0));
        let mut out = Vec::with_capacity(PACKED_HEADER_LEN + (m * nv).div_ceil(8));
        out.extend_from_slice(PACKED_MAGIC);
        for x in [m, nv, rows, cols] {
            out.extend_from_slice(&(x as u32).to_le_bytes());
        }
        let mut payload = vec![0u8; (m * nv).div_ceil(8)];
        for (j, &x) in self.samples.iter().enumerate() {
            payload[j / 8] |= x << (j % 8);
        }
        out.extend_from_slice(&payload);
        out
    }

    pub fn save(&self, path: &Path, format: Format) -> Result<()> {
        let bytes = match format {
            Format::Csv01 => self.to_csv01().into_bytes(),
            Format::PackedBits => self.to_packed_bytes(),
            Format::Idx { .. } => {
                return Err(RbmError::Input("saving as IDX is not supported".into()))
            }
        };
        write_atomic(path, &bytes)
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| RbmError::Input(format!("not a file path: {}", path.display())))?;
    let tmp_name = format!(".{}.tmp", file_name.to_string_lossy());
    let tmp = match dir {
        Some(d) => d.join(tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

pub fn load_binary_matrix(path: &Path, format: Format) -> Result<BinaryDataset> {
    let bytes = fs::read(path)?;
    let name = dataset_name(path);
    match format {
        Format::Csv01 => {
            let text = String::from_utf8(bytes)
                .map_err(|e| RbmError::format(path.display().to_string(), e.to_string()))?;
            parse_csv01(&text, &name)
        }
        Format::PackedBits => parse_packed(&bytes, &name),
        Format::Idx { threshold } => parse_idx(&bytes, &name, threshold),
    }
}

pub fn parse_csv01(text: &str, name: &str) -> Result<BinaryDataset> {
    let mut data = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for (col, field) in line.split(',').enumerate() {
            let value = match field.trim() {
                "0" => 0u8,
                "1" => 1u8,
                other if other.parse::<f64>().is_ok() => {
                    return Err(RbmError::Domain(format!(
                        "line {}, column {}: entry '{other}' is not 0 or 1",
                        lineno + 1,
                        col + 1
                    )))
                }
                other => {
                    return Err(RbmError::format(
                        format!("line {}, column {}", lineno + 1, col + 1),
                        format!("cannot parse '{other}'"),
                    ))
                }
            };
            data.push(value);
            count += 1;
        }
        match n_cols {
            None => n_cols = Some(count),
            Some(n) if n != count => {
                return Err(RbmError::format(
                    format!("line {}", lineno + 1),
                    format!("expected {n} columns, found {count}"),
                ))
            }
            _ => {}
        }
        n_rows += 1;
    }
    let n_cols = n_cols.ok_or_else(|| RbmError::EmptyDataset(format!("'{name}' has no rows")))?;
    let samples = Array2::from_shape_vec((n_rows, n_cols), data)
        .map_err(|e| RbmError::format(name, e.to_string()))?;
    BinaryDataset::new(samples, name)
}

fn read_u32_le(bytes: &[u8], at: usize) -> Result<usize> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .ok_or_else(|| RbmError::format(format!("offset {at}"), "truncated header"))
}

fn read_u32_be(bytes: &[u8], at: usize) -> Result<usize> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .ok_or_else(|| RbmError::format(format!("offset {at}"), "truncated header"))
}

pub fn parse_packed(bytes: &[u8], name: &str) -> Result<BinaryDataset> {
    if bytes.is_empty() {
        return Err(RbmError::EmptyDataset(format!("'{name}' is empty")));
    }
    if bytes.len() < 4 || &bytes[..4] != PACKED_MAGIC {
        return Err(RbmError::format("offset 0", "missing RBM1 magic"));
    }
    let m = read_u32_le(bytes, 4)?;
    let nv = read_u32_le(bytes, 8)?;
    let rows = read_u32_le(bytes, 12)?;
    let cols = read_u32_le(bytes, 16)?;
    let n_bits = m
        .checked_mul(nv)
        .ok_or_else(|| RbmError::format("offset 4", "matrix size overflows"))?;
    let expected = PACKED_HEADER_LEN + n_bits.div_ceil(8);
    if bytes.len() != expected {
        return Err(RbmError::format(
            format!("offset {}", bytes.len().min(expected)),
            format!("payload length {} != expected {}", bytes.len(), expected),
        ));
    }
    let payload = &bytes[PACKED_HEADER_LEN..];
    let samples = Array2::from_shape_fn((m, nv), |(r, c)| {
        let j = r * nv + c;
        (payload[j / 8] >> (j % 8)) & 1
    });
    let shape = match (rows, cols) {
        (0, 0) => None,
        (r, c) => Some((r, c)),
    };
    BinaryDataset::new(samples, name)?.with_image_shape(shape)
}

pub fn parse_idx(bytes: &[u8], name: &str, threshold: f64) -> Result<BinaryDataset> {
    if bytes.is_empty() {
        return Err(RbmError::EmptyDataset(format!("'{name}' is empty")));
    }
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(RbmError::format("offset 0", "bad IDX magic"));
    }
    if bytes[2] != 0x08 {
        return Err(RbmError::format(
            "offset 2",
            format!("IDX element type {:#04x} is not unsigned byte", bytes[2]),
        ));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 {
        return Err(RbmError::format("offset 3", "IDX tensor has no dimensions"));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|d| read_u32_be(bytes, 4 + 4 * d))
        .collect::<Result<_>>()?;
    let m = dims[0];
    let nv: usize = dims[1..].iter().product();
    let start = 4 + 4 * ndim;
    if bytes.len() != start + m * nv {
        return Err(RbmError::format(
            format!("offset {start}"),
            format!("payload length {} != expected {}", bytes.len() - start, m * nv),
        ));
    }
    if m == 0 {
        return Err(RbmError::EmptyDataset(format!("'{name}' has no samples")));
    }
    let real = Array2::from_shape_fn((m, nv), |(r, c)| bytes[start + r * nv + c] as f64 / 255.0);
    let shape = (ndim == 3).then(|| (dims[1], dims[2]));
    binarize(real.view(), threshold, name)?.with_image_shape(shape)
}

/// Entries `>= threshold` become 1, the rest 0.
pub fn binarize(values: ArrayView2<'_, f64>, threshold: f64, name: &str) -> Result<BinaryDataset> {
    if let Some(x) = values.iter().find(|x| !x.is_finite()) {
        return Err(RbmError::Domain(format!("non-finite entry {x}")));
    }
    BinaryDataset::new(values.mapv(|x| (x >= threshold) as u8), name)
}

/// Shuffles rows under `seed` and cuts the permutation after `n_train`.
pub fn split(
    data: &BinaryDataset,
    n_train: usize,
    seed: SeedSpec,
) -> Result<(BinaryDataset, BinaryDataset)> {
    if n_train >= data.n_samples() {
        return Err(RbmError::Input(format!(
            "n_train = {n_train} must be smaller than the {} available samples",
            data.n_samples()
        )));
    }
    let mut order: Vec<usize> = (0..data.n_samples()).collect();
    crate::rng::shuffle(&mut order, &mut seed.rng());
    let train = data.select_rows(&order[..n_train]).with_split(Split::Train);
    let test = data.select_rows(&order[n_train..]).with_split(Split::Test);
    Ok((train, test))
}

/// A synthetic multimodal dataset and the prototypes it was drawn around.
#[derive(Debug, Clone)]
pub struct SynthModes {
    pub dataset: BinaryDataset,
    pub prototypes: Array2<u8>,
}

const SYNTH_MAX_TRIES: usize = 10_000;

/// Random prototypes with pairwise Hamming distance `>= n_visible / 4`, each
/// emitted `samples_per_mode` times with independent bit flips.
pub fn synth_modes(
    n_visible: usize,
    n_modes: usize,
    flip_prob: f64,
    samples_per_mode: usize,
    seed: SeedSpec,
) -> Result<SynthModes> {
    if n_modes < 2 {
        return Err(RbmError::Input("need at least two modes".into()));
    }
    if !(0.0..0.5).contains(&flip_prob) {
        return Err(RbmError::Input(format!(
            "flip probability {flip_prob} outside [0, 0.5)"
        )));
    }
    if n_visible == 0 {
        return Err(RbmError::Input("need at least one visible unit".into()));
    }
    let mut rng = seed.rng();
    let mut prototypes: Vec<Vec<u8>> = Vec::with_capacity(n_modes);
    let mut tries = 0;
    while prototypes.len() < n_modes {
        if tries == SYNTH_MAX_TRIES {
            return Err(RbmError::Generation(format!(
                "could not place {n_modes} prototypes {n_visible}/4 apart in {SYNTH_MAX_TRIES} tries"
            )));
        }
        tries += 1;
        let candidate: Vec<u8> = (0..n_visible).map(|_| (uniform(&mut rng) < 0.5) as u8).collect();
        let separated = prototypes.iter().all(|p| {
            let d = p.iter().zip(&candidate).filter(|(a, b)| a != b).count();
            4 * d >= n_visible
        });
        if separated {
            prototypes.push(candidate);
        }
    }
    let mut samples = Array2::zeros((n_modes * samples_per_mode, n_visible));
    for (m, proto) in prototypes.iter().enumerate() {
        for s in 0..samples_per_mode {
            let mut row = samples.row_mut(m * samples_per_mode + s);
            for (x, &p) in row.iter_mut().zip(proto) {
                let flip = uniform(&mut rng) < flip_prob;
                *x = p ^ flip as u8;
            }
        }
    }
    let prototypes = Array2::from_shape_fn((n_modes, n_visible), |(m, i)| prototypes[m][i]);
    Ok(SynthModes {
        dataset: BinaryDataset::new(samples, "synth_modes")?,
        prototypes,
    })
}
