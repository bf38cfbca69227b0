//! Spectral-entropy monitoring of the penultimate representation.
//!
//! Given probe representations `z` (N rows, N > d), the monitor forms the
//! empirical covariance `Σ̂ = (1/N) Σ (z_i − z̄)(z_i − z̄)ᵀ` in f64, takes its
//! eigenvalues, and reports the normalised spectral entropy
//! `H̃ = −Σ p_k ln p_k / ln d` of the eigenvalue distribution
//! `p_k = λ_k / Σ λ`, together with the effective rank `exp(H)`.
//! `H̃ = 1` means an isotropic covariance, `H̃ → 0` a rank-1 one.
//!
//! Numerics: eigenvalues are clamped to `[0, ∞)`, eigenvalues below
//! `1e-15·λ₁` are zeroed before normalisation, and the `1e-12` regulariser
//! inside the logarithm is applied as a floor so that exact closed-form
//! spectra (uniform, `(1,1,0,0)`, …) come out exact.
//!
//! Also here: the train/test probe divergence tracker and the Fourier
//! alignment probe of an embedding table over the residues of a modular
//! task.

use crate::eigen::{self, EigenError};
use crate::math;
use crate::matrix::Matrix;
use alloc::vec::Vec;
use core::fmt;

/// Floor inside the entropy logarithm.
const LOG_EPS: f64 = 1e-12;
/// Eigenvalues below this fraction of the largest are treated as zero.
const SPECTRUM_CLIP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub enum EntropyError {
    ProbeTooSmall { n: usize, d: usize },
    Eigen(EigenError),
    EmbeddingRows { rows: usize, expected: usize },
}

impl fmt::Display for EntropyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntropyError::ProbeTooSmall { n, d } => {
                write!(f, "covariance needs more samples than dimensions: N={n}, d={d}")
            }
            EntropyError::Eigen(e) => write!(f, "{e}"),
            EntropyError::EmbeddingRows { rows, expected } => {
                write!(f, "embedding has {rows} rows, expected {expected} residues")
            }
        }
    }
}

impl core::error::Error for EntropyError {}

impl From<EigenError> for EntropyError {
    fn from(e: EigenError) -> Self {
        EntropyError::Eigen(e)
    }
}

/// Spectrum of one probe covariance with its entropy measures.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    /// Eigenvalues, descending, clamped to `[0, ∞)`.
    pub eigenvalues: Vec<f64>,
    /// Raw spectral entropy `H = −Σ p_k ln p_k`.
    pub entropy: f64,
    /// `H / ln d`, in `[0, 1]`.
    pub normalized_entropy: f64,
    /// `exp(H)`, in `[1, d]`.
    pub effective_rank: f64,
    /// Set when every eigenvalue is zero; the summary is then all-zero
    /// entropy by convention.
    pub degenerate: bool,
}

/// Empirical covariance of the rows of `z`, `(1/N)·Σ (z_i−z̄)(z_i−z̄)ᵀ`,
/// symmetrised. Requires `N > d` so the estimate can be full rank.
pub fn covariance(z: &Matrix) -> Result<Matrix, EntropyError> {
    let (n, d) = z.shape();
    if n <= d {
        return Err(EntropyError::ProbeTooSmall { n, d });
    }
    let mut mean = alloc::vec![0.0f64; d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(z.row(i)) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut centered = Matrix::zeros(n, d);
    for i in 0..n {
        for (j, (&x, &m)) in z.row(i).iter().zip(&mean).enumerate() {
            centered.set(i, j, x - m);
        }
    }
    let mut cov = Matrix::zeros(d, d);
    crate::matrix::matmul_at_b_into(&mut cov, &centered, &centered, false);
    cov.scale_in_place(1.0 / n as f64);
    Ok(cov.symmetrized())
}

/// Entropy measures from a raw eigenvalue list (clamps negatives, clips
/// near-zero eigenvalues, normalises).
pub fn summary_from_eigenvalues(raw: &[f64]) -> SpectralSummary {
    let d = raw.len();
    let mut vals: Vec<f64> = raw.iter().map(|&l| if l > 0.0 { l } else { 0.0 }).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = vals.first().copied().unwrap_or(0.0);
    for v in vals.iter_mut() {
        if *v < SPECTRUM_CLIP * top {
            *v = 0.0;
        }
    }
    let total: f64 = vals.iter().sum();
    if total <= 0.0 {
        return SpectralSummary {
            eigenvalues: vals,
            entropy: 0.0,
            normalized_entropy: 0.0,
            effective_rank: 1.0,
            degenerate: true,
        };
    }
    let mut entropy = 0.0;
    for &v in &vals {
        if v > 0.0 {
            let p = v / total;
            entropy -= p * math::ln(p.max(LOG_EPS));
        }
    }
    let normalized = if d > 1 { entropy / math::ln(d as f64) } else { 0.0 };
    SpectralSummary {
        eigenvalues: vals,
        entropy,
        normalized_entropy: normalized,
        effective_rank: math::exp(entropy),
        degenerate: false,
    }
}

/// Normalised spectral entropy of a PSD covariance.
pub fn spectral_entropy(cov: &Matrix) -> Result<SpectralSummary, EntropyError> {
    let vals = eigen::sym_eigvals_raw(cov)?;
    Ok(summary_from_eigenvalues(&vals))
}

/// Covariance plus entropy in one call: the per-eval monitor path.
pub fn probe_summary(z: &Matrix) -> Result<SpectralSummary, EntropyError> {
    spectral_entropy(&covariance(z)?)
}

// ── Probe robustness ─────────────────────────────────────────────────────────

/// Accumulates per-step entropy pairs from the train- and test-set probes.
#[derive(Debug, Clone, Default)]
pub struct ProbeComparison {
    train: Vec<f64>,
    test: Vec<f64>,
}

/// Divergence between the two probe trajectories after the latest step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDivergence {
    pub latest_abs_diff: f64,
    pub mean_abs_diff: f64,
    /// Pearson r across all steps so far; `None` until two points exist.
    /// Zero-variance series report `Some(0.0)`.
    pub pearson_r: Option<f64>,
}

impl ProbeComparison {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn push(&mut self, h_train: f64, h_test: f64) -> ProbeDivergence {
        self.train.push(h_train);
        self.test.push(h_test);
        let diffs: Vec<f64> = self
            .train
            .iter()
            .zip(&self.test)
            .map(|(a, b)| (a - b).abs())
            .collect();
        ProbeDivergence {
            latest_abs_diff: *diffs.last().unwrap(),
            mean_abs_diff: diffs.iter().sum::<f64>() / diffs.len() as f64,
            pearson_r: self.running_pearson(),
        }
    }

    fn running_pearson(&self) -> Option<f64> {
        let n = self.train.len();
        if n < 2 {
            return None;
        }
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let (ma, mb) = (mean(&self.train), mean(&self.test));
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (a, b) in self.train.iter().zip(&self.test) {
            sab += (a - ma) * (b - mb);
            saa += (a - ma) * (a - ma);
            sbb += (b - mb) * (b - mb);
        }
        if saa <= 0.0 || sbb <= 0.0 {
            return Some(0.0);
        }
        Some(sab / math::sqrt(saa * sbb))
    }
}

// ── Fourier alignment ────────────────────────────────────────────────────────

/// Fraction of the embedding's centered energy concentrated at its dominant
/// modular frequency.
///
/// For each frequency `f ∈ 1..=⌊p/2⌋` this takes the squared correlation of
/// every column with the `cos(2πfa/p)`/`sin(2πfa/p)` pair, averaged across
/// columns with variance weights (equivalently: the share of total spectral
/// power at `f`), and returns the maximum over frequencies. A perfectly
/// sinusoidal embedding scores 1; an i.i.d.-noise embedding scores about
/// `1/⌊p/2⌋`. Zero-variance (constant) embeddings score 0.
///
/// `embedding` must have exactly `p` rows (one per residue).
pub fn fourier_alignment(embedding: &Matrix, p: usize) -> Result<f64, EntropyError> {
    if embedding.rows() != p {
        return Err(EntropyError::EmbeddingRows {
            rows: embedding.rows(),
            expected: p,
        });
    }
    let d = embedding.cols();
    // center columns (drops the DC component)
    let mut centered = embedding.clone();
    for j in 0..d {
        let mean: f64 = (0..p).map(|a| embedding.get(a, j)).sum::<f64>() / p as f64;
        for a in 0..p {
            centered.set(a, j, embedding.get(a, j) - mean);
        }
    }
    let total_power: f64 = centered.data().iter().map(|x| x * x).sum();
    if total_power <= 0.0 {
        return Ok(0.0);
    }

    let mut best = 0.0f64;
    for f in 1..=(p / 2) {
        let (mut cos_b, mut sin_b) = (alloc::vec![0.0f64; p], alloc::vec![0.0f64; p]);
        for a in 0..p {
            let phase = 2.0 * math::PI * (f * a) as f64 / p as f64;
            cos_b[a] = math::cos(phase);
            sin_b[a] = math::sin(phase);
        }
        // center the bases too; exact zero-mean up to rounding
        for basis in [&mut cos_b, &mut sin_b] {
            let m: f64 = basis.iter().sum::<f64>() / p as f64;
            basis.iter_mut().for_each(|x| *x -= m);
        }
        let cos_norm: f64 = cos_b.iter().map(|x| x * x).sum();
        let sin_norm: f64 = sin_b.iter().map(|x| x * x).sum();

        let mut freq_power = 0.0;
        for j in 0..d {
            let (mut pc, mut ps) = (0.0f64, 0.0f64);
            for a in 0..p {
                let x = centered.get(a, j);
                pc += x * cos_b[a];
                ps += x * sin_b[a];
            }
            if cos_norm > 1e-12 {
                freq_power += pc * pc / cos_norm;
            }
            if sin_norm > 1e-12 {
                freq_power += ps * ps / sin_norm;
            }
        }
        best = best.max(freq_power / total_power);
    }
    Ok(best)
}
