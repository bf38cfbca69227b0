//! Group-theoretic datasets: modular arithmetic over Z/pZ and composition in
//! the permutation group S5, with deterministic train/test splits and fixed
//! probe sets.
//!
//! Modular tasks enumerate all p² ordered pairs `(a, b)` with label
//! `(a op b) mod p`; S5 enumerates all 120² ordered pairs of permutations
//! with label `rank(σ1 ∘ σ2)` (σ2 applied first). Sequences are
//! `[a, b, EQ]` where EQ is a dedicated token, so the vocabulary is
//! `p + 1` (or 121 for S5) while labels stay below `p` (or 120).
//!
//! Permutations are indexed by lexicographic rank of the permutation word,
//! rank 0 being the identity `[0,1,2,3,4]`.

use crate::math;
use crate::rng::Rng;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub const S5_ORDER: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub enum TaskError {
    FractionOutOfRange(f64),
    ModulusNotPrime(usize),
    ProbeSourceTooSmall { available: usize, needed: usize },
}

impl fmt::Display for TaskError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskError::FractionOutOfRange(x) => {
                write!(f, "train_fraction {x} must lie strictly inside (0, 1)")
            }
            TaskError::ModulusNotPrime(p) => write!(f, "modulus {p} is not prime"),
            TaskError::ProbeSourceTooSmall { available, needed } => {
                write!(f, "probe needs {needed} examples, source has {available}")
            }
        }
    }
}

impl core::error::Error for TaskError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    ModAdd,
    ModMul,
    ModSub,
    S5Compose,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::ModAdd => "mod-add",
            TaskKind::ModMul => "mod-mul",
            TaskKind::ModSub => "mod-sub",
            TaskKind::S5Compose => "s5-compose",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        match s {
            "mod-add" => Some(TaskKind::ModAdd),
            "mod-mul" => Some(TaskKind::ModMul),
            "mod-sub" => Some(TaskKind::ModSub),
            "s5-compose" => Some(TaskKind::S5Compose),
            _ => None,
        }
    }

    pub fn is_modular(&self) -> bool {
        !matches!(self, TaskKind::S5Compose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Prime modulus for the modular tasks; ignored for S5.
    pub modulus: usize,
    pub train_fraction: f64,
}

impl TaskSpec {
    /// Number of distinct input values (p, or 120 for S5).
    pub fn group_order(&self) -> usize {
        if self.kind.is_modular() {
            self.modulus
        } else {
            S5_ORDER
        }
    }

    /// Output classes: one per group element.
    pub fn num_classes(&self) -> usize {
        self.group_order()
    }

    /// Token vocabulary: group elements plus the EQ token.
    pub fn vocab_size(&self) -> usize {
        self.group_order() + 1
    }

    pub fn eq_token(&self) -> usize {
        self.group_order()
    }

    pub fn total_pairs(&self) -> usize {
        self.group_order() * self.group_order()
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(TaskError::FractionOutOfRange(self.train_fraction));
        }
        if self.kind.is_modular() && !is_prime(self.modulus) {
            return Err(TaskError::ModulusNotPrime(self.modulus));
        }
        Ok(())
    }
}

/// One `[a, b, EQ]` sequence with its class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example {
    pub tokens: [usize; 3],
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeSource {
    Train,
    Test,
}

impl ProbeSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProbeSource::Train => "train",
            ProbeSource::Test => "test",
        }
    }
}

/// Fixed sample used to estimate the representation covariance. Drawn once
/// per run and never resampled.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub examples: Vec<Example>,
    pub source: ProbeSource,
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

// ── S5 indexing ──────────────────────────────────────────────────────────────

/// Permutation word for a lexicographic rank in `0..120`.
pub fn perm_from_index(mut idx: usize) -> [u8; 5] {
    debug_assert!(idx < S5_ORDER);
    let mut pool: Vec<u8> = (0..5).collect();
    let mut out = [0u8; 5];
    let mut fact = 24; // 4!
    for (pos, slot) in out.iter_mut().enumerate() {
        let pick = idx / fact;
        idx %= fact;
        *slot = pool.remove(pick);
        if pos < 4 {
            fact /= 4 - pos;
        }
    }
    out
}

/// Lexicographic rank of a permutation word.
pub fn perm_to_index(p: &[u8; 5]) -> usize {
    let mut idx = 0;
    let mut fact = 24;
    for i in 0..5 {
        let smaller = p[i + 1..].iter().filter(|&&x| x < p[i]).count();
        idx += smaller * fact;
        if i < 4 {
            fact /= 4 - i;
        }
    }
    idx
}

/// Index of `σ1 ∘ σ2` (σ2 applied first, then σ1).
pub fn s5_compose(sigma1: usize, sigma2: usize) -> usize {
    let p1 = perm_from_index(sigma1);
    let p2 = perm_from_index(sigma2);
    let mut comp = [0u8; 5];
    for x in 0..5 {
        comp[x] = p1[p2[x] as usize];
    }
    perm_to_index(&comp)
}

fn label_for(spec: &TaskSpec, a: usize, b: usize, s5_perms: Option<&[[u8; 5]]>) -> usize {
    match spec.kind {
        TaskKind::ModAdd => (a + b) % spec.modulus,
        TaskKind::ModMul => (a * b) % spec.modulus,
        TaskKind::ModSub => (a + spec.modulus - b) % spec.modulus,
        TaskKind::S5Compose => {
            let perms = s5_perms.expect("s5 table prepared");
            let (p1, p2) = (&perms[a], &perms[b]);
            let mut comp = [0u8; 5];
            for x in 0..5 {
                comp[x] = p1[p2[x] as usize];
            }
            perm_to_index(&comp)
        }
    }
}

/// Enumerates every ordered pair for the task, in `(a, b)` row-major order.
pub fn full_enumeration(spec: &TaskSpec) -> Vec<Example> {
    let n = spec.group_order();
    let eq = spec.eq_token();
    let perms: Option<Vec<[u8; 5]>> = if spec.kind.is_modular() {
        None
    } else {
        Some((0..S5_ORDER).map(perm_from_index).collect())
    };
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            out.push(Example {
                tokens: [a, b, eq],
                label: label_for(spec, a, b, perms.as_deref()),
            });
        }
    }
    out
}

/// Deterministic split over the full enumeration.
///
/// `|train| = ⌊train_fraction · total⌋` (with a tiny epsilon so exact
/// products are not lost to float rounding); the shuffle comes from the
/// `(seed, "split")` substream.
pub fn generate(spec: &TaskSpec, seed: u64) -> Result<(Vec<Example>, Vec<Example>), TaskError> {
    spec.validate()?;
    let mut all = full_enumeration(spec);
    let total = all.len();
    let n_train = math::floor(spec.train_fraction * total as f64 + 1e-9) as usize;
    let mut rng = Rng::substream(seed, "split");
    rng.shuffle(&mut all);
    let test = all.split_off(n_train);
    Ok((all, test))
}

/// Draws `size` examples without replacement from the chosen source via the
/// `(seed, "probe-<source>")` substream.
pub fn make_probe(
    train: &[Example],
    test: &[Example],
    source: ProbeSource,
    seed: u64,
    size: usize,
) -> Result<ProbeSet, TaskError> {
    let pool = match source {
        ProbeSource::Train => train,
        ProbeSource::Test => test,
    };
    if pool.len() < size {
        return Err(TaskError::ProbeSourceTooSmall {
            available: pool.len(),
            needed: size,
        });
    }
    let label = match source {
        ProbeSource::Train => "probe-train",
        ProbeSource::Test => "probe-test",
    };
    let mut rng = Rng::substream(seed, label);
    let idx = rng.sample_indices(pool.len(), size);
    Ok(ProbeSet {
        examples: idx.into_iter().map(|i| pool[i]).collect(),
        source,
    })
}

/// CSV dump (`a,b,label`) for inspection.
pub fn dataset_csv(examples: &[Example]) -> String {
    let mut s = String::from("a,b,label\n");
    for e in examples {
        s.push_str(&format!("{},{},{}\n", e.tokens[0], e.tokens[1], e.label));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use proptest::prelude::*;

    fn spec(kind: TaskKind, p: usize, frac: f64) -> TaskSpec {
        TaskSpec {
            kind,
            modulus: p,
            train_fraction: frac,
        }
    }

    #[test]
    fn mod_add_97_frac_020_split_sizes() {
        let (train, test) = generate(&spec(TaskKind::ModAdd, 97, 0.20), 0).unwrap();
        assert_eq!(train.len(), 1881);
        assert_eq!(test.len(), 7528);
    }

    #[test]
    fn fraction_one_rejected_and_p5_counts() {
        assert!(matches!(
            generate(&spec(TaskKind::ModAdd, 5, 1.0), 0),
            Err(TaskError::FractionOutOfRange(_))
        ));
        let (train, test) = generate(&spec(TaskKind::ModAdd, 5, 0.8), 0).unwrap();
        assert_eq!(train.len(), 20);
        assert_eq!(test.len(), 5);
    }

    #[test]
    fn s5_frac_010_split_sizes() {
        let (train, test) = generate(&spec(TaskKind::S5Compose, 0, 0.10), 3).unwrap();
        assert_eq!(train.len(), 1440);
        assert_eq!(train.len() + test.len(), 14400);
    }

    #[test]
    fn non_prime_modulus_rejected() {
        assert!(matches!(
            generate(&spec(TaskKind::ModAdd, 9, 0.5), 0),
            Err(TaskError::ModulusNotPrime(9))
        ));
    }

    #[test]
    fn perm_rank_roundtrip_and_identity_rank_zero() {
        assert_eq!(perm_from_index(0), [0, 1, 2, 3, 4]);
        for i in 0..S5_ORDER {
            assert_eq!(perm_to_index(&perm_from_index(i)), i);
        }
        // lexicographic order: rank 1 swaps the last two
        assert_eq!(perm_from_index(1), [0, 1, 2, 4, 3]);
    }

    #[test]
    fn identity_composition_left_and_right() {
        for s in 0..S5_ORDER {
            assert_eq!(s5_compose(0, s), s);
            assert_eq!(s5_compose(s, 0), s);
        }
    }

    #[test]
    fn every_element_has_an_inverse() {
        for s in 0..S5_ORDER {
            let mut found = false;
            for t in 0..S5_ORDER {
                if s5_compose(s, t) == 0 {
                    assert_eq!(s5_compose(t, s), 0, "inverse must be two-sided");
                    found = true;
                    break;
                }
            }
            assert!(found, "no inverse for {s}");
        }
    }

    #[test]
    fn composition_is_closed_and_associative_sample() {
        for s in (0..S5_ORDER).step_by(7) {
            for t in (0..S5_ORDER).step_by(11) {
                let c = s5_compose(s, t);
                assert!(c < S5_ORDER);
                for u in (0..S5_ORDER).step_by(13) {
                    assert_eq!(
                        s5_compose(s5_compose(s, t), u),
                        s5_compose(s, s5_compose(t, u))
                    );
                }
            }
        }
    }

    #[test]
    fn non_commuting_fraction_is_94_percent() {
        // Brute force over all 14,400 ordered pairs.
        let mut non_commuting = 0usize;
        for s in 0..S5_ORDER {
            for t in 0..S5_ORDER {
                if s5_compose(s, t) != s5_compose(t, s) {
                    non_commuting += 1;
                }
            }
        }
        assert_eq!(non_commuting, 13_560); // 14,400 − 120·7 commuting pairs
        let frac = non_commuting as f64 / 14_400.0;
        assert!((frac - 0.94).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn class_balance_mod_add() {
        let s = spec(TaskKind::ModAdd, 41, 0.5);
        let all = full_enumeration(&s);
        let mut counts = alloc::vec![0usize; 41];
        for e in &all {
            counts[e.label] += 1;
        }
        assert!(counts.iter().all(|&c| c == 41));
    }

    #[test]
    fn labels_and_tokens_in_range() {
        for kind in [
            TaskKind::ModAdd,
            TaskKind::ModMul,
            TaskKind::ModSub,
            TaskKind::S5Compose,
        ] {
            let s = spec(kind, 7, 0.3);
            let all = full_enumeration(&s);
            assert_eq!(all.len(), s.total_pairs());
            for e in &all {
                assert!(e.label < s.num_classes());
                assert_eq!(e.tokens[2], s.eq_token());
                assert!(e.tokens[0] < s.group_order() && e.tokens[1] < s.group_order());
            }
        }
    }

    #[test]
    fn probe_is_subset_fixed_and_deterministic() {
        let s = spec(TaskKind::ModAdd, 41, 0.4);
        let (train, test) = generate(&s, 9).unwrap();
        let probe = make_probe(&train, &test, ProbeSource::Train, 9, 512).unwrap();
        assert_eq!(probe.examples.len(), 512);
        let train_set: BTreeSet<_> = train.iter().map(|e| e.tokens).collect();
        for e in &probe.examples {
            assert!(train_set.contains(&e.tokens), "probe must come from train");
        }
        let probe2 = make_probe(&train, &test, ProbeSource::Train, 9, 512).unwrap();
        assert_eq!(probe, probe2);
        // distinct examples (without replacement)
        let distinct: BTreeSet<_> = probe.examples.iter().map(|e| e.tokens).collect();
        assert_eq!(distinct.len(), 512);
    }

    #[test]
    fn probe_too_small_errors() {
        let s = spec(TaskKind::ModAdd, 5, 0.8);
        let (train, test) = generate(&s, 0).unwrap();
        assert!(matches!(
            make_probe(&train, &test, ProbeSource::Test, 0, 512),
            Err(TaskError::ProbeSourceTooSmall {
                available: 5,
                needed: 512
            })
        ));
    }

    #[test]
    fn dataset_csv_shape() {
        let s = spec(TaskKind::ModAdd, 5, 0.8);
        let (train, _) = generate(&s, 0).unwrap();
        let csv = dataset_csv(&train);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "a,b,label");
        assert_eq!(lines.len(), 21);
    }

    proptest! {
        /// train ∩ test = ∅ and train ∪ test = full enumeration, any task/seed.
        #[test]
        fn partition_property(seed in 0u64..40, kind_pick in 0usize..4, p_pick in 0usize..3) {
            let kind = [TaskKind::ModAdd, TaskKind::ModMul, TaskKind::ModSub, TaskKind::S5Compose][kind_pick];
            let p = [5, 7, 11][p_pick];
            let s = spec(kind, p, 0.37);
            let (train, test) = generate(&s, seed).unwrap();
            let all_pairs: BTreeSet<_> = full_enumeration(&s).iter().map(|e| e.tokens).collect();
            let train_set: BTreeSet<_> = train.iter().map(|e| e.tokens).collect();
            let test_set: BTreeSet<_> = test.iter().map(|e| e.tokens).collect();
            prop_assert!(train_set.is_disjoint(&test_set));
            prop_assert_eq!(train_set.len() + test_set.len(), all_pairs.len());
            let union: BTreeSet<_> = train_set.union(&test_set).cloned().collect();
            prop_assert_eq!(union, all_pairs);
        }
    }
}
