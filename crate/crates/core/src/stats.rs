//! The statistical toolkit used to compare experimental conditions:
//! percentile bootstrap CIs, one-sided Mann–Whitney U, Cohen's d, and
//! Pearson correlation with a t-approximated p-value.
//!
//! The Mann–Whitney test is exact (full null distribution of U) whenever the
//! smaller sample has at most 12 values and there are no ties — which is
//! precisely the regime of 10-seed condition comparisons, where the normal
//! approximation is weakest. Larger or tied inputs fall back to the normal
//! approximation with tie and continuity corrections.

use crate::math;
use crate::rng::Rng;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    EmptyInput,
    TooFewSamples { needed: usize, got: usize },
    ZeroPooledVariance,
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::EmptyInput => write!(f, "empty input"),
            StatsError::TooFewSamples { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
            StatsError::ZeroPooledVariance => write!(f, "pooled variance is zero"),
        }
    }
}

impl core::error::Error for StatsError {}

// ── Bootstrap ────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCi {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub resamples: usize,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

/// Percentile bootstrap CI (95%) for the mean, with seeded resampling.
pub fn bootstrap_ci_mean(
    samples: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<BootstrapCi, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = samples.len();
    let estimate = samples.iter().sum::<f64>() / n as f64;
    let mut rng = Rng::substream(seed, "bootstrap");
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut s = 0.0;
        for _ in 0..n {
            s += samples[rng.next_below(n as u64) as usize];
        }
        means.push(s / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(BootstrapCi {
        estimate,
        lower: quantile_sorted(&means, 0.025),
        upper: quantile_sorted(&means, 0.975),
        resamples,
    })
}

// ── Mann–Whitney U ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct MwuResult {
    /// U statistic of the first sample (pairs where `a > b`, ties ½).
    pub u: f64,
    /// One-sided p-value for the alternative "a tends greater than b".
    pub p: f64,
    /// Whether the exact null distribution was used.
    pub exact: bool,
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Counts of interleavings by U value: `f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u)`
/// (the largest remaining value is an `a` beating all `j` b's, or a `b`).
fn exact_u_distribution(n: usize, m: usize) -> Vec<f64> {
    let umax = n * m;
    // table[j][u] for current i
    let mut prev = vec![vec![0.0f64; umax + 1]; m + 1];
    for row in prev.iter_mut() {
        row[0] = 1.0; // i = 0: only u = 0
    }
    let mut cur = prev.clone();
    for _i in 1..=n {
        for j in 0..=m {
            for u in 0..=umax {
                let take_a = if u >= j { prev[j][u - j] } else { 0.0 };
                let take_b = if j > 0 { cur[j - 1][u] } else { 0.0 };
                cur[j][u] = take_a + take_b;
            }
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[m].clone()
}

/// One-sided Mann–Whitney U test (alternative: `a` greater than `b`).
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MwuResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let (n, m) = (a.len(), b.len());
    let mut u = 0.0f64;
    let mut has_ties = false;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
                has_ties = true;
            }
        }
    }
    // ties within each sample also break exactness of the rank distribution
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for w in pooled.windows(2) {
        if w[0] == w[1] {
            has_ties = true;
        }
    }

    if !has_ties && n.min(m) <= 12 {
        let dist = exact_u_distribution(n, m);
        let total = binomial(n + m, n);
        let u_obs = libm::round(u) as usize;
        let tail: f64 = dist[u_obs..].iter().sum();
        return Ok(MwuResult {
            u,
            p: tail / total,
            exact: true,
        });
    }

    // normal approximation with tie correction and continuity correction
    let nn = (n + m) as f64;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j] == pooled[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = (n as f64 * m as f64 / 12.0) * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    let mean = n as f64 * m as f64 / 2.0;
    if var <= 0.0 {
        return Ok(MwuResult {
            u,
            p: 0.5,
            exact: false,
        });
    }
    let z = (u - mean - 0.5) / math::sqrt(var);
    Ok(MwuResult {
        u,
        p: 0.5 * math::erfc(z / math::sqrt(2.0)),
        exact: false,
    })
}

// ── Effect size ──────────────────────────────────────────────────────────────

/// Cohen's d with the pooled standard deviation (n−1 weights).
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let var = |xs: &[f64], m: f64| {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (var(a, ma), var(b, mb));
    let pooled = ((a.len() - 1) as f64 * va + (b.len() - 1) as f64 * vb)
        / (a.len() + b.len() - 2) as f64;
    if pooled <= 0.0 {
        return Err(StatsError::ZeroPooledVariance);
    }
    Ok((ma - mb) / math::sqrt(pooled))
}

// ── Pearson correlation ──────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct PearsonResult {
    pub rho: f64,
    /// Two-sided p-value from the t(n−2) approximation. Extreme tails are
    /// approximation-limited.
    pub p_value: f64,
    /// Set when either side has zero variance; rho is then defined as 0.
    pub degenerate: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<PearsonResult, StatsError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(StatsError::TooFewSamples {
            needed: 3,
            got: x.len().min(y.len()),
        });
    }
    let n = x.len();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(PearsonResult {
            rho: 0.0,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let mut rho = sxy / math::sqrt(sxx * syy);
    rho = rho.clamp(-1.0, 1.0);
    let nu = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t2 = rho * rho * nu / (1.0 - rho * rho);
        reg_inc_beta(nu / 2.0, 0.5, nu / (nu + t2))
    };
    Ok(PearsonResult {
        rho,
        p_value,
        degenerate: false,
    })
}

// ── Special functions ────────────────────────────────────────────────────────

/// Regularised incomplete beta `I_x(a, b)` by the Lentz continued fraction.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * math::ln(x) + b * math::ln(1.0 - x)
        - (math::ln_gamma(a) + math::ln_gamma(b) - math::ln_gamma(a + b));
    let front = math::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
