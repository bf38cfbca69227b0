//! Trajectory analysis: grok/collapse event detection, threshold estimation,
//! the predictive power law over the entropy gap, online grok-time
//! prediction, predictor comparison, leave-one-out evaluation, and the
//! training-state diagnostic.
//!
//! Event definitions (eval cadence τ, index `i` over evaluations):
//! * `T_grok` — first evaluation with test accuracy ≥ the grok threshold.
//! * `T_collapse` — first evaluation where `H̃` fell by more than 0.05 over
//!   the trailing five evaluations: `H̃[i−5] − H̃[i] > 0.05`. Granularity is
//!   inherently ±τ.
//!
//! The forecasting model is `ΔT(t) = C1·(H̃(t) − H̃*)^γ + C2`, fitted by a
//! γ grid over `[0.25, 4.0]` in steps of 0.01 with the closed-form linear
//! subproblem for `(C1, C2)` at each γ — deterministic and derivative-free.

use crate::math;
use crate::stats;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Rolling window (in evaluations) of the collapse detector.
pub const COLLAPSE_WINDOW: usize = 5;
/// Entropy drop over the window that declares collapse.
pub const COLLAPSE_DROP: f64 = 0.05;
/// Default grok criterion on test accuracy.
pub const DEFAULT_GROK_THRESHOLD: f64 = 0.99;
/// Prediction activates once `H̃ < H̃* + GATE`.
pub const PREDICTION_GATE: f64 = 0.15;
/// Half-width of the reported 95% predictive band, in steps.
pub const PREDICTION_BAND: f64 = 6000.0;

const GAMMA_MIN: f64 = 0.25;
const GAMMA_MAX: f64 = 4.0;
const GAMMA_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    EmptyLog,
    TooFewPoints { needed: usize, got: usize },
    TooFewGrokkedRuns { needed: usize, got: usize },
    MalformedCsv { line: String },
    NonMonotonicSteps { at_step: u64 },
    NonFiniteValue { at_step: u64 },
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::EmptyLog => write!(f, "empty trajectory log"),
            DynamicsError::TooFewPoints { needed, got } => {
                write!(f, "power-law fit needs {needed} points, got {got}")
            }
            DynamicsError::TooFewGrokkedRuns { needed, got } => write!(
                f,
                "need {needed} grokked runs, got {got}; run more pilot seeds to \
                 completion and record the entropy at their grokking step first"
            ),
            DynamicsError::MalformedCsv { line } => write!(f, "malformed trajectory row: {line}"),
            DynamicsError::NonMonotonicSteps { at_step } => {
                write!(f, "trajectory steps not strictly increasing at {at_step}")
            }
            DynamicsError::NonFiniteValue { at_step } => {
                write!(f, "non-finite trajectory value at step {at_step}")
            }
        }
    }
}

impl core::error::Error for DynamicsError {}

/// One monitoring evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub train_loss: f64,
    pub param_norm: f64,
    /// Normalised spectral entropy H̃ of the probe covariance.
    pub entropy: f64,
    pub eff_rank: f64,
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "step,train_acc,test_acc,train_loss,param_norm,entropy,eff_rank";

/// Per-evaluation record of one training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub records: Vec<EvalRecord>,
}

impl TrajectoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Evaluation stride in steps (`None` with fewer than 2 records).
    pub fn stride(&self) -> Option<u64> {
        (self.records.len() >= 2).then(|| self.records[1].step - self.records[0].step)
    }

    /// Exact CSV encoding; floats print in shortest round-trip form, so
    /// parsing the text reproduces the in-memory log bit for bit.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRAJECTORY_CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.step, r.train_acc, r.test_acc, r.train_loss, r.param_norm, r.entropy, r.eff_rank
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, DynamicsError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(DynamicsError::EmptyLog)?;
        if header.trim() != TRAJECTORY_CSV_HEADER {
            return Err(DynamicsError::MalformedCsv {
                line: header.to_string(),
            });
        }
        let mut records = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(DynamicsError::MalformedCsv {
                    line: line.to_string(),
                });
            }
            let parse = |s: &str| -> Result<f64, DynamicsError> {
                s.parse::<f64>().map_err(|_| DynamicsError::MalformedCsv {
                    line: line.to_string(),
                })
            };
            records.push(EvalRecord {
                step: fields[0].parse().map_err(|_| DynamicsError::MalformedCsv {
                    line: line.to_string(),
                })?,
                train_acc: parse(fields[1])?,
                test_acc: parse(fields[2])?,
                train_loss: parse(fields[3])?,
                param_norm: parse(fields[4])?,
                entropy: parse(fields[5])?,
                eff_rank: parse(fields[6])?,
            });
        }
        let log = TrajectoryLog { records };
        log.validate()?;
        Ok(log)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        for w in self.records.windows(2) {
            if w[1].step <= w[0].step {
                return Err(DynamicsError::NonMonotonicSteps { at_step: w[1].step });
            }
        }
        for r in &self.records {
            let vals = [
                r.train_acc,
                r.test_acc,
                r.train_loss,
                r.param_norm,
                r.entropy,
                r.eff_rank,
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(DynamicsError::NonFiniteValue { at_step: r.step });
            }
        }
        Ok(())
    }
}

// ── Event detection ──────────────────────────────────────────────────────────

/// Grok and collapse events of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GrokEvents {
    pub t_grok: Option<u64>,
    pub t_collapse: Option<u64>,
    /// `H̃` at the grokking evaluation.
    pub h_at_grok: Option<f64>,
    /// `T_grok − T_collapse` when both exist (positive when collapse leads).
    pub lead_steps: Option<i64>,
}

pub fn detect_events(log: &TrajectoryLog, grok_threshold: f64) -> GrokEvents {
    let mut t_grok = None;
    let mut h_at_grok = None;
    for r in &log.records {
        if r.test_acc >= grok_threshold {
            t_grok = Some(r.step);
            h_at_grok = Some(r.entropy);
            break;
        }
    }
    let mut t_collapse = None;
    for i in COLLAPSE_WINDOW..log.records.len() {
        if log.records[i - COLLAPSE_WINDOW].entropy - log.records[i].entropy > COLLAPSE_DROP {
            t_collapse = Some(log.records[i].step);
            break;
        }
    }
    let lead_steps = match (t_grok, t_collapse) {
        (Some(g), Some(c)) => Some(g as i64 - c as i64),
        _ => None,
    };
    GrokEvents {
        t_grok,
        t_collapse,
        h_at_grok,
        lead_steps,
    }
}

/// `H̃*` estimate with a 95% percentile-bootstrap CI over per-run
/// `H̃(T_grok)` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEstimate {
    pub h_star: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n_runs: usize,
}

pub fn estimate_threshold(
    h_at_groks: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<ThresholdEstimate, DynamicsError> {
    if h_at_groks.len() < 3 {
        return Err(DynamicsError::TooFewGrokkedRuns {
            needed: 3,
            got: h_at_groks.len(),
        });
    }
    let ci = stats::bootstrap_ci_mean(h_at_groks, resamples, seed)
        .expect("non-empty by the check above");
    Ok(ThresholdEstimate {
        h_star: ci.estimate,
        ci_lower: ci.lower,
        ci_upper: ci.upper,
        n_runs: h_at_groks.len(),
    })
}

// ── Power-law fit ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub c1: f64,
    pub gamma: f64,
    pub c2: f64,
    pub h_star: f64,
    pub r2: f64,
    pub n_points: usize,
}

impl PowerLawFit {
    /// JSON with the fixed key set `c1, gamma, c2, h_star, r2, n_points`.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"c1\":{},\"gamma\":{},\"c2\":{},\"h_star\":{},\"r2\":{},\"n_points\":{}}}",
            self.c1, self.gamma, self.c2, self.h_star, self.r2, self.n_points
        )
    }
}

/// Entropy samples of a run that grokked, for fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct GrokkedTrajectory {
    /// `(step, H̃)` pairs at the evaluation cadence.
    pub samples: Vec<(u64, f64)>,
    pub t_grok: u64,
}

impl GrokkedTrajectory {
    pub fn from_log(log: &TrajectoryLog, events: &GrokEvents) -> Option<Self> {
        let t_grok = events.t_grok?;
        Some(GrokkedTrajectory {
            samples: log.records.iter().map(|r| (r.step, r.entropy)).collect(),
            t_grok,
        })
    }
}

/// Grid fit of `y = C1·x^γ + C2` over positive-gap points.
///
/// Points must be `(gap, ΔT)` with `gap > 0`. With a constant response the
/// mean predictor is already exact; R² is reported as 0 in that case.
pub fn fit_power_law_xy(points: &[(f64, f64)], h_star: f64) -> Result<PowerLawFit, DynamicsError> {
    if points.len() < 10 {
        return Err(DynamicsError::TooFewPoints {
            needed: 10,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let y_mean = sy / n;
    let sst: f64 = points.iter().map(|p| (p.1 - y_mean) * (p.1 - y_mean)).sum();

    let mut best: Option<(f64, f64, f64, f64)> = None; // (sse, gamma, c1, c2)
    let steps = ((GAMMA_MAX - GAMMA_MIN) / GAMMA_STEP + 0.5) as usize;
    let mut xs = alloc::vec![0.0f64; points.len()];
    for k in 0..=steps {
        let gamma = GAMMA_MIN + GAMMA_STEP * k as f64;
        for (x, p) in xs.iter_mut().zip(points) {
            *x = math::powf(p.0, gamma);
        }
        let sx: f64 = xs.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(points).map(|(x, p)| x * p.1).sum();
        let denom = n * sxx - sx * sx;
        let (c1, c2) = if denom.abs() < 1e-12 * sxx.max(1.0) {
            (0.0, y_mean)
        } else {
            let c1 = (n * sxy - sx * sy) / denom;
            (c1, (sy - c1 * sx) / n)
        };
        let sse: f64 = xs
            .iter()
            .zip(points)
            .map(|(x, p)| {
                let r = p.1 - c1 * x - c2;
                r * r
            })
            .sum();
        if best.map_or(true, |(b, _, _, _)| sse < b) {
            best = Some((sse, gamma, c1, c2));
        }
    }
    let (sse, gamma, c1, c2) = best.expect("grid non-empty");
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
    Ok(PowerLawFit {
        c1,
        gamma,
        c2,
        h_star,
        r2,
        n_points: points.len(),
    })
}

/// Collects `(gap, ΔT)` points from grokked trajectories and fits.
/// Uses evaluations at `t ≤ T_grok` with `H̃ > H̃*`.
pub fn fit_power_law(
    trajectories: &[GrokkedTrajectory],
    h_star: f64,
) -> Result<PowerLawFit, DynamicsError> {
    let mut points = Vec::new();
    for traj in trajectories {
        for &(t, h) in &traj.samples {
            if t <= traj.t_grok && h > h_star {
                points.push((h - h_star, (traj.t_grok - t) as f64));
            }
        }
    }
    fit_power_law_xy(&points, h_star)
}

/// Bootstrap CI for the fit R², resampling whole trajectories (seed-level
/// resampling, not point-level).
pub fn bootstrap_r2_ci(
    trajectories: &[GrokkedTrajectory],
    h_star: f64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64), DynamicsError> {
    if trajectories.is_empty() {
        return Err(DynamicsError::TooFewGrokkedRuns { needed: 1, got: 0 });
    }
    let mut rng = crate::rng::Rng::substream(seed, "r2-bootstrap");
    let mut r2s = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let pick: Vec<GrokkedTrajectory> = (0..trajectories.len())
            .map(|_| trajectories[rng.next_below(trajectories.len() as u64) as usize].clone())
            .collect();
        if let Ok(fit) = fit_power_law(&pick, h_star) {
            r2s.push(fit.r2);
        }
    }
    if r2s.is_empty() {
        return Err(DynamicsError::TooFewPoints { needed: 10, got: 0 });
    }
    r2s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let pos = p * (r2s.len() - 1) as f64;
        let lo = pos as usize;
        let frac = pos - lo as f64;
        if lo + 1 >= r2s.len() {
            r2s[r2s.len() - 1]
        } else {
            r2s[lo] * (1.0 - frac) + r2s[lo + 1] * frac
        }
    };
    Ok((q(0.025), q(0.975)))
}

// ── Online prediction ────────────────────────────────────────────────────────

/// Outcome of one online prediction query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    /// `H̃` is still above the activation gate `H̃* + 0.15`.
    NotYetActive,
    Active {
        predicted_step: f64,
        band_lower: f64,
        band_upper: f64,
    },
}

/// Forecast `T̂_grok = t + C1·gap^γ + C2` with the ±6,000-step band.
/// Entropy at or below `H̃*` clamps the gap to zero (grokking imminent).
pub fn predict_grok_time(step: u64, entropy: f64, fit: &PowerLawFit) -> Prediction {
    if entropy >= fit.h_star + PREDICTION_GATE {
        return Prediction::NotYetActive;
    }
    let gap = (entropy - fit.h_star).max(0.0);
    let predicted = step as f64 + fit.c1 * math::powf(gap, fit.gamma) + fit.c2;
    Prediction::Active {
        predicted_step: predicted,
        band_lower: predicted - PREDICTION_BAND,
        band_upper: predicted + PREDICTION_BAND,
    }
}

// ── Predictor comparison ─────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorRow {
    pub name: &'static str,
    pub r2: Option<f64>,
    pub rho: Option<f64>,
}

/// Fits the same power-law machinery to four candidate predictors of the
/// remaining time: a random baseline, the absolute parameter norm, the
/// norm gap to the grokking norm, and the entropy gap to `H̃*`.
pub fn compare_predictors(
    logs: &[(&TrajectoryLog, &GrokEvents)],
    h_star: f64,
    seed: u64,
) -> Result<Vec<PredictorRow>, DynamicsError> {
    let grokked: Vec<_> = logs
        .iter()
        .filter(|(_, e)| e.t_grok.is_some())
        .collect();
    if grokked.len() < 2 {
        return Err(DynamicsError::TooFewGrokkedRuns {
            needed: 2,
            got: grokked.len(),
        });
    }

    let mut rng = crate::rng::Rng::substream(seed, "predictor-random");
    let mut sets: [Vec<(f64, f64)>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (log, events) in &grokked {
        let t_grok = events.t_grok.unwrap();
        let norm_at_grok = log
            .records
            .iter()
            .find(|r| r.step == t_grok)
            .map(|r| r.param_norm)
            .unwrap_or(0.0);
        for r in &log.records {
            if r.step > t_grok {
                continue;
            }
            let dt = (t_grok - r.step) as f64;
            let rnd = rng.next_f64();
            if rnd > 0.0 {
                sets[0].push((rnd, dt));
            }
            if r.param_norm > 0.0 {
                sets[1].push((r.param_norm, dt));
            }
            let norm_gap = norm_at_grok - r.param_norm;
            if norm_gap > 0.0 {
                sets[2].push((norm_gap, dt));
            }
            let h_gap = r.entropy - h_star;
            if h_gap > 0.0 {
                sets[3].push((h_gap, dt));
            }
        }
    }

    let names = ["random", "abs-norm", "norm-gap", "entropy-gap"];
    let mut rows = Vec::with_capacity(4);
    for (name, points) in names.iter().zip(&sets) {
        let r2 = fit_power_law_xy(points, h_star).ok().map(|f| f.r2);
        let rho = if points.len() >= 3 {
            let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
            stats::pearson(&xs, &ys)
                .ok()
                .filter(|p| !p.degenerate)
                .map(|p| p.rho)
        } else {
            None
        };
        rows.push(PredictorRow { name, r2, rho });
    }
    Ok(rows)
}

// ── Leave-one-out forecasting ────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct LooPrediction {
    pub actual_t_grok: u64,
    pub predicted_t_grok: f64,
    /// Absolute percentage error.
    pub ape: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub per_run: Vec<LooPrediction>,
    pub mape: f64,
}

/// Fits on all-but-one run (threshold re-estimated on the held-in runs)
/// and predicts the held-out run's grok time from its last pre-grok
/// evaluation.
pub fn leave_one_out(
    logs: &[(&TrajectoryLog, &GrokEvents)],
    resamples: usize,
    seed: u64,
) -> Result<LooReport, DynamicsError> {
    let grokked: Vec<_> = logs.iter().filter(|(_, e)| e.t_grok.is_some()).collect();
    if grokked.len() < 4 {
        return Err(DynamicsError::TooFewGrokkedRuns {
            needed: 4,
            got: grokked.len(),
        });
    }
    let mut per_run = Vec::new();
    for hold in 0..grokked.len() {
        let mut h_vals = Vec::new();
        let mut trajs = Vec::new();
        for (i, (log, events)) in grokked.iter().enumerate() {
            if i == hold {
                continue;
            }
            h_vals.push(events.h_at_grok.unwrap());
            trajs.push(GrokkedTrajectory::from_log(log, events).unwrap());
        }
        let h_star = estimate_threshold(&h_vals, resamples, seed)?.h_star;
        let fit = fit_power_law(&trajs, h_star)?;

        let (log, events) = grokked[hold];
        let t_grok = events.t_grok.unwrap();
        // last evaluation strictly before the grok step
        let Some(at) = log.records.iter().rev().find(|r| r.step < t_grok) else {
            continue;
        };
        let predicted = match predict_grok_time(at.step, at.entropy, &fit) {
            Prediction::Active { predicted_step, .. } => predicted_step,
            // gate not yet open one eval before grokking: predict from the
            // raw formula anyway (gap is small, the gate is conservative)
            Prediction::NotYetActive => {
                at.step as f64
                    + fit.c1 * math::powf((at.entropy - fit.h_star).max(0.0), fit.gamma)
                    + fit.c2
            }
        };
        per_run.push(LooPrediction {
            actual_t_grok: t_grok,
            predicted_t_grok: predicted,
            ape: (predicted - t_grok as f64).abs() / t_grok as f64,
        });
    }
    let mape = per_run.iter().map(|p| p.ape).sum::<f64>() / per_run.len().max(1) as f64;
    Ok(LooReport { per_run, mape })
}

// ── Diagnostics ──────────────────────────────────────────────────────────────

/// Training-state label from the latest evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnosis {
    /// Norm expansion, entropy flat: keep training.
    PhaseI,
    /// Entropy started dropping (Φ > 0.01) while above threshold: activate
    /// the predictor.
    PhaseIIOnset,
    /// |H̃ − H̃*| < 0.02: grokking imminent.
    NearThreshold,
    /// Entropy below threshold with low test accuracy: the architecture may
    /// lack the inductive bias to exploit the collapsed subspace.
    CollapseWithoutGeneralisation,
    /// No meaningful entropy decline after 30k+ steps: unlikely to grok.
    Stagnant,
    /// Test accuracy already at the grok criterion.
    Generalised,
}

impl Diagnosis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Diagnosis::PhaseI => "phase-I",
            Diagnosis::PhaseIIOnset => "phase-II-onset",
            Diagnosis::NearThreshold => "near-threshold",
            Diagnosis::CollapseWithoutGeneralisation => "collapse-without-generalisation",
            Diagnosis::Stagnant => "stagnant",
            Diagnosis::Generalised => "generalised",
        }
    }

    pub fn recommendation(&self) -> &'static str {
        match self {
            Diagnosis::PhaseI => "continue training",
            Diagnosis::PhaseIIOnset => "activate the grok-time predictor",
            Diagnosis::NearThreshold => "grokking imminent",
            Diagnosis::CollapseWithoutGeneralisation => {
                "architecture may lack the inductive bias to generalise"
            }
            Diagnosis::Stagnant => {
                "increase weight decay, reduce the learning rate, or verify the task can grok"
            }
            Diagnosis::Generalised => "run has generalised",
        }
    }
}

const NEAR_THRESHOLD_BAND: f64 = 0.02;
const PHASE_II_PHI: f64 = 0.01;
const STAGNANT_MIN_STEPS: u64 = 30_000;

/// Entropy drop over the trailing window: `Φ(t) = H̃(t−5τ) − H̃(t)`.
pub fn rolling_drop(log: &TrajectoryLog) -> f64 {
    let n = log.records.len();
    if n == 0 {
        return 0.0;
    }
    let i0 = n.saturating_sub(1 + COLLAPSE_WINDOW);
    log.records[i0].entropy - log.records[n - 1].entropy
}

/// Classifies the latest state of a run. Precedence: generalised,
/// near-threshold (including a collapse with accuracy already rising),
/// collapse-without-generalisation, phase-II onset, stagnant, phase-I.
pub fn diagnose(
    log: &TrajectoryLog,
    h_star: f64,
    grok_threshold: f64,
) -> Result<Diagnosis, DynamicsError> {
    let last = log.records.last().ok_or(DynamicsError::EmptyLog)?;
    let phi = rolling_drop(log);
    let h = last.entropy;

    if last.test_acc >= grok_threshold {
        return Ok(Diagnosis::Generalised);
    }
    if (h - h_star).abs() < NEAR_THRESHOLD_BAND || (h < h_star && last.test_acc >= 0.5) {
        return Ok(Diagnosis::NearThreshold);
    }
    if h < h_star {
        return Ok(Diagnosis::CollapseWithoutGeneralisation);
    }
    if phi > PHASE_II_PHI {
        return Ok(Diagnosis::PhaseIIOnset);
    }
    let h_max = log
        .records
        .iter()
        .map(|r| r.entropy)
        .fold(f64::NEG_INFINITY, f64::max);
    if last.step >= STAGNANT_MIN_STEPS && h_max - h < COLLAPSE_DROP {
        return Ok(Diagnosis::Stagnant);
    }
    Ok(Diagnosis::PhaseI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(step: u64, test_acc: f64, entropy: f64) -> EvalRecord {
        EvalRecord {
            step,
            train_acc: 1.0,
            test_acc,
            train_loss: 0.1,
            param_norm: 50.0,
            entropy,
            eff_rank: crate::math::exp(entropy * crate::math::ln(128.0)),
        }
    }

    fn synthetic_log(n: usize, acc: impl Fn(usize) -> f64, h: impl Fn(usize) -> f64) -> TrajectoryLog {
        TrajectoryLog {
            records: (0..n)
                .map(|i| record(i as u64 * 200, acc(i), h(i)))
                .collect(),
        }
    }

    #[test]
    fn grok_detected_at_first_crossing() {
        let log = synthetic_log(20, |i| if i >= 8 { 0.995 } else { 0.01 }, |_| 0.7);
        let ev = detect_events(&log, 0.99);
        assert_eq!(ev.t_grok, Some(1600));
        assert_eq!(ev.h_at_grok, Some(0.7));
        assert_eq!(ev.t_collapse, None, "constant entropy never collapses");
    }

    #[test]
    fn collapse_detected_from_constructed_drop() {
        // H̃ flat at 0.8 through eval 10, then drops 0.012 per eval;
        // at eval 15: H̃[10] − H̃[15] = 0.06 > 0.05 ⇒ T_collapse = 3000.
        let log = synthetic_log(
            25,
            |_| 0.0,
            |i| {
                if i <= 10 {
                    0.8
                } else {
                    0.8 - 0.012 * (i as f64 - 10.0)
                }
            },
        );
        let ev = detect_events(&log, 0.99);
        assert_eq!(ev.t_collapse, Some(3000));
    }

    #[test]
    fn lead_time_sign() {
        let log = synthetic_log(
            30,
            |i| if i >= 20 { 1.0 } else { 0.0 },
            |i| 0.9 - 0.02 * i as f64,
        );
        let ev = detect_events(&log, 0.99);
        // collapse at i=5 (0.1 drop over 5 evals > 0.05), grok at i=20
        assert_eq!(ev.t_collapse, Some(1000));
        assert_eq!(ev.t_grok, Some(4000));
        assert_eq!(ev.lead_steps, Some(3000));
    }

    proptest! {
        #[test]
        fn detect_events_invariant_to_postgrok_appends(extra in 0usize..10) {
            let base = synthetic_log(
                25,
                |i| if i >= 12 { 0.999 } else { 0.02 },
                |i| 0.85 - 0.02 * i as f64,
            );
            let ev_base = detect_events(&base, 0.99);
            let mut extended = base.clone();
            for k in 0..extra {
                extended.records.push(record(5000 + 200 * k as u64, 1.0, 0.3));
            }
            let ev_ext = detect_events(&extended, 0.99);
            prop_assert_eq!(ev_base, ev_ext);
        }
    }

    #[test]
    fn threshold_estimate_small_sample() {
        let est = estimate_threshold(&[0.60, 0.61, 0.62], 10_000, 7).unwrap();
        assert!((est.h_star - 0.61).abs() < 1e-12);
        assert!(est.ci_lower >= 0.60 - 1e-12 && est.ci_upper <= 0.62 + 1e-12);

        let est = estimate_threshold(&[0.5, 0.5, 0.5, 0.5], 1000, 1).unwrap();
        assert_eq!(est.ci_lower, 0.5);
        assert_eq!(est.ci_upper, 0.5);

        assert!(matches!(
            estimate_threshold(&[0.6, 0.61], 100, 0),
            Err(DynamicsError::TooFewGrokkedRuns { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn power_law_recovers_noiseless_parameters() {
        let (c1, gamma) = (2.45e5, 1.65);
        let points: Vec<(f64, f64)> = (1..=50)
            .map(|i| {
                let gap = 0.01 * i as f64 * 0.8;
                (gap, c1 * crate::math::powf(gap, gamma))
            })
            .collect();
        let fit = fit_power_law_xy(&points, 0.61).unwrap();
        assert!((fit.gamma - gamma).abs() < 0.01 + 1e-12, "gamma {}", fit.gamma);
        assert!((fit.c1 - c1).abs() / c1 < 0.01, "c1 {}", fit.c1);
        assert!(fit.c2.abs() < 1.0, "c2 {}", fit.c2);
        assert!(fit.r2 > 0.999, "r2 {}", fit.r2);
    }

    #[test]
    fn power_law_point_prediction_matches_paper_constants() {
        // gap = 0.1 under C1 = 2.45e5, γ = 1.65 gives ΔT ≈ 5.49e3
        let dt = 2.45e5 * crate::math::powf(0.1, 1.65);
        assert!((dt - 5.49e3).abs() < 20.0, "ΔT = {dt}");
    }

    #[test]
    fn constant_response_has_zero_r2_and_tiny_c1() {
        let points: Vec<(f64, f64)> = (1..=30).map(|i| (0.01 * i as f64, 777.0)).collect();
        let fit = fit_power_law_xy(&points, 0.5).unwrap();
        assert!(fit.c1.abs() < 1e-6, "c1 {}", fit.c1);
        assert!(fit.r2.abs() < 1e-9, "r2 {}", fit.r2);
    }

    #[test]
    fn too_few_points_errors() {
        let points = [(0.1, 5.0); 9];
        assert!(matches!(
            fit_power_law_xy(&points, 0.6),
            Err(DynamicsError::TooFewPoints { needed: 10, got: 9 })
        ));
    }

    #[test]
    fn prediction_gate_and_zero_gap() {
        let fit = PowerLawFit {
            c1: 2.45e5,
            gamma: 1.65,
            c2: 100.0,
            h_star: 0.61,
            r2: 0.5,
            n_points: 100,
        };
        assert_eq!(
            predict_grok_time(1000, 0.61 + 0.15, &fit),
            Prediction::NotYetActive
        );
        // zero gap: T̂ = t + C2
        match predict_grok_time(1000, 0.61, &fit) {
            Prediction::Active {
                predicted_step,
                band_lower,
                band_upper,
            } => {
                assert!((predicted_step - 1100.0).abs() < 1e-9);
                assert!((band_upper - band_lower - 2.0 * PREDICTION_BAND).abs() < 1e-9);
            }
            _ => panic!("gate should be open"),
        }
        // gap 0.1 with paper constants: t + ≈5,490 + C2
        match predict_grok_time(1000, 0.71, &fit) {
            Prediction::Active { predicted_step, .. } => {
                assert!((predicted_step - (1000.0 + 5490.0 + 100.0)).abs() < 30.0);
            }
            _ => panic!("0.71 < 0.76 gate"),
        }
    }

    #[test]
    fn predicted_remaining_time_increases_with_gap() {
        let fit = PowerLawFit {
            c1: 1e4,
            gamma: 1.3,
            c2: 0.0,
            h_star: 0.6,
            r2: 1.0,
            n_points: 50,
        };
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=14 {
            let h = 0.6 + 0.01 * k as f64;
            if let Prediction::Active { predicted_step, .. } = predict_grok_time(0, h, &fit) {
                assert!(predicted_step > prev, "not increasing at gap {k}");
                prev = predicted_step;
            } else if k < 15 {
                assert_eq!(k, 15, "gate closed early at {k}");
            }
        }
    }

    #[test]
    fn fit_json_has_exact_keys() {
        let fit = PowerLawFit {
            c1: 245000.0,
            gamma: 1.65,
            c2: 0.0,
            h_star: 0.609,
            r2: 0.543,
            n_points: 1428,
        };
        assert_eq!(
            fit.to_json(),
            "{\"c1\":245000,\"gamma\":1.65,\"c2\":0,\"h_star\":0.609,\"r2\":0.543,\"n_points\":1428}"
        );
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let log = synthetic_log(12, |i| 0.1 * i as f64 / 12.0, |i| 0.9 - 0.031 * i as f64);
        let text = log.to_csv();
        let back = TrajectoryLog::from_csv(&text).unwrap();
        assert_eq!(log, back);
        let ev1 = detect_events(&log, 0.99);
        let ev2 = detect_events(&back, 0.99);
        assert_eq!(ev1, ev2);
    }

    #[test]
    fn csv_rejects_bad_header_and_rows() {
        assert!(TrajectoryLog::from_csv("nope\n1,2,3").is_err());
        let text = format!("{TRAJECTORY_CSV_HEADER}\n0,0.1,0.1,1.0,10.0,0.8\n");
        assert!(matches!(
            TrajectoryLog::from_csv(&text),
            Err(DynamicsError::MalformedCsv { .. })
        ));
    }

    #[test]
    fn ode_trajectories_fit_well() {
        // dH̃/dt = −k(H̃ − H̃*) ⇒ H̃(t) = H̃* + u0·e^{−kt}; the power-law fit
        // must describe such data with R² > 0.95.
        let (k, u0, eps, h_star) = (0.01, 0.2, 0.002, 0.6);
        let mut samples = Vec::new();
        let mut t_grok = None;
        let mut t = 0u64;
        loop {
            let u = u0 * crate::math::exp(-k * t as f64);
            samples.push((t, h_star + u));
            if u <= eps {
                t_grok = Some(t);
                break;
            }
            t += 10;
        }
        let traj = GrokkedTrajectory {
            samples,
            t_grok: t_grok.unwrap(),
        };
        let fit = fit_power_law(&[traj], h_star).unwrap();
        assert!(fit.r2 > 0.95, "R² = {}", fit.r2);
    }

    #[test]
    fn compare_predictors_synthetic_behaviour() {
        // Construct 3 seeds whose entropy decays smoothly to the threshold;
        // norms saturate early, so the entropy gap must dominate.
        let mut logs = Vec::new();
        for s in 0..3 {
            let records: Vec<EvalRecord> = (0..60)
                .map(|i| {
                    let t = i as u64 * 200;
                    let h = 0.6 + 0.3 * crate::math::exp(-0.0004 * (t as f64 + s as f64 * 150.0));
                    EvalRecord {
                        step: t,
                        train_acc: 1.0,
                        test_acc: if h < 0.62 { 1.0 } else { 0.0 },
                        train_loss: 0.01,
                        param_norm: 40.0 + 10.0 * (1.0 - crate::math::exp(-0.01 * t as f64)),
                        entropy: h,
                        eff_rank: 10.0,
                    }
                })
                .collect();
            logs.push(TrajectoryLog { records });
        }
        let events: Vec<GrokEvents> = logs.iter().map(|l| detect_events(l, 0.99)).collect();
        assert!(events.iter().all(|e| e.t_grok.is_some()));
        let pairs: Vec<(&TrajectoryLog, &GrokEvents)> =
            logs.iter().zip(events.iter()).collect();
        let rows = compare_predictors(&pairs, 0.6, 42).unwrap();
        assert_eq!(rows.len(), 4);
        let by_name = |n: &str| rows.iter().find(|r| r.name == n).unwrap().clone();
        let random = by_name("random");
        let h_gap = by_name("entropy-gap");
        assert!(random.r2.unwrap() < 0.05, "random R² {:?}", random.r2);
        assert!(
            h_gap.r2.unwrap() > 0.95,
            "entropy-gap R² {:?} should dominate on smooth data",
            h_gap.r2
        );
        assert!(h_gap.rho.unwrap() > 0.9);
    }

    #[test]
    fn perfectly_collinear_predictor_reaches_r2_one() {
        // ΔT = 3·gap exactly: γ = 1 in the grid, R² = 1
        let points: Vec<(f64, f64)> = (1..=40).map(|i| (i as f64 * 0.01, 3.0 * i as f64 * 0.01)).collect();
        let fit = fit_power_law_xy(&points, 0.0).unwrap();
        assert!((fit.gamma - 1.0).abs() < 1e-9);
        assert!(fit.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn diagnose_table_rows() {
        let h_star = 0.61;
        // Phase I: entropy far above threshold, flat
        let log = synthetic_log(20, |_| 0.02, |_| 0.85);
        assert_eq!(diagnose(&log, h_star, 0.99).unwrap(), Diagnosis::PhaseI);
        // Phase II onset: dropping but still above the near band
        let log = synthetic_log(30, |_| 0.02, |i| 0.9 - 0.004 * i as f64);
        assert_eq!(
            diagnose(&log, h_star, 0.99).unwrap(),
            Diagnosis::PhaseIIOnset
        );
        // Near threshold
        let log = synthetic_log(30, |_| 0.30, |_| 0.625);
        assert_eq!(
            diagnose(&log, h_star, 0.99).unwrap(),
            Diagnosis::NearThreshold
        );
        // Collapse without generalisation
        let log = synthetic_log(30, |_| 0.01, |i| 0.8 - 0.02 * i as f64);
        assert_eq!(
            diagnose(&log, h_star, 0.99).unwrap(),
            Diagnosis::CollapseWithoutGeneralisation
        );
        // Stagnant: > 30k steps, entropy never moved
        let log = synthetic_log(200, |_| 0.02, |_| 0.82);
        assert_eq!(diagnose(&log, h_star, 0.99).unwrap(), Diagnosis::Stagnant);
        // Generalised
        let log = synthetic_log(10, |_| 0.999, |_| 0.5);
        assert_eq!(diagnose(&log, h_star, 0.99).unwrap(), Diagnosis::Generalised);
    }

    #[test]
    fn leave_one_out_on_synthetic_family() {
        // Four seeds drawn from the same exponential-collapse family; the
        // held-out prediction should land close to the true grok step.
        let mut logs = Vec::new();
        for s in 0..4u64 {
            let k = 0.00035 + 0.00002 * s as f64;
            let records: Vec<EvalRecord> = (0..120)
                .map(|i| {
                    let t = i as u64 * 200;
                    let h = 0.6 + 0.25 * crate::math::exp(-k * t as f64);
                    record(t, if h <= 0.605 { 1.0 } else { 0.0 }, h)
                })
                .collect();
            logs.push(TrajectoryLog { records });
        }
        let events: Vec<GrokEvents> = logs.iter().map(|l| detect_events(l, 0.99)).collect();
        let pairs: Vec<(&TrajectoryLog, &GrokEvents)> = logs.iter().zip(events.iter()).collect();
        let report = leave_one_out(&pairs, 500, 5).unwrap();
        assert_eq!(report.per_run.len(), 4);
        assert!(report.mape < 0.25, "MAPE {}", report.mape);
    }
}
