//! Sparse real-coefficient Pauli sums and the truncation strategies that act on them.

use std::collections::HashSet;
use std::fmt::Write as _;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::pauli::{PauliError, PauliWord};

/// Entries whose magnitude falls to or below this are dropped on insertion.
pub const DEFAULT_PRUNE_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparseError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("operator dump contains no terms")]
    EmptyDump,
    #[error("truncation policy invalid: {0}")]
    BadPolicy(String),
}

/// `Σ c_P P` with real `c_P`, keyed by word.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: FxHashMap<PauliWord, f64>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        PauliSum {
            n,
            terms: FxHashMap::default(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        PauliSum {
            n,
            terms: FxHashMap::with_capacity_and_hasher(cap, Default::default()),
        }
    }

    pub fn single(word: PauliWord, coeff: f64) -> Self {
        let mut s = PauliSum::new(word.num_qubits());
        if coeff != 0.0 {
            s.terms.insert(word, coeff);
        }
        s
    }

    /// Builds a sum by accumulating every `(word, coeff)` pair in order.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (PauliWord, f64)>,
    {
        let mut s = PauliSum::new(n);
        for (w, c) in terms {
            s.accumulate(w, c)?;
        }
        Ok(s)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, word: &PauliWord) -> f64 {
        self.terms.get(word).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliWord, f64)> + '_ {
        self.terms.iter().map(|(w, &c)| (w, c))
    }

    pub(crate) fn terms_mut(&mut self) -> &mut FxHashMap<PauliWord, f64> {
        &mut self.terms
    }

    /// Terms in ascending word order.
    pub fn sorted_terms(&self) -> Vec<(PauliWord, f64)> {
        let mut v: Vec<_> = self.terms.iter().map(|(w, &c)| (w.clone(), c)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    pub fn accumulate(&mut self, word: PauliWord, coeff: f64) -> Result<(), SparseError> {
        self.accumulate_with(word, coeff, DEFAULT_PRUNE_EPS)
    }

    pub fn accumulate_with(
        &mut self,
        word: PauliWord,
        coeff: f64,
        prune_eps: f64,
    ) -> Result<(), SparseError> {
        if word.num_qubits() != self.n {
            return Err(PauliError::LengthMismatch {
                left: self.n,
                right: word.num_qubits(),
            }
            .into());
        }
        self.add_unchecked(word, coeff, prune_eps);
        Ok(())
    }

    /// Returns the squared mass removed by pruning.
    #[inline]
    pub(crate) fn add_unchecked(&mut self, word: PauliWord, coeff: f64, prune_eps: f64) -> f64 {
        use std::collections::hash_map::Entry;
        match self.terms.entry(word) {
            Entry::Occupied(mut e) => {
                let v = *e.get() + coeff;
                if v.abs() <= prune_eps {
                    e.remove();
                    v * v
                } else {
                    *e.get_mut() = v;
                    0.0
                }
            }
            Entry::Vacant(e) => {
                if coeff.abs() <= prune_eps {
                    coeff * coeff
                } else {
                    e.insert(coeff);
                    0.0
                }
            }
        }
    }

    /// `Σ c²`.
    pub fn norm_squared(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum()
    }

    /// Normalized Hilbert–Schmidt norm `sqrt(Σ c²)`.
    pub fn pauli_norm2(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for c in self.terms.values_mut() {
            *c *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> PauliSum {
        let mut s = self.clone();
        s.scale(factor);
        s
    }

    /// Rescales so that `pauli_norm2` equals `target`. No-op on an empty sum.
    pub fn rescale_to_norm(&mut self, target: f64) {
        let norm = self.pauli_norm2();
        if norm > 0.0 {
            self.scale(target / norm);
        }
    }

    /// `self ⊗ other`, `self` on the low sites.
    pub fn tensor(&self, other: &PauliSum) -> Result<PauliSum, SparseError> {
        let mut out = PauliSum::with_capacity(self.n + other.n, self.len() * other.len());
        for (a, ca) in self.iter() {
            for (b, cb) in other.iter() {
                out.accumulate(a.tensor(b)?, ca * cb)?;
            }
        }
        Ok(out)
    }

    /// `self + factor · other`.
    pub fn add_scaled(&mut self, other: &PauliSum, factor: f64) -> Result<(), SparseError> {
        for (w, c) in other.iter() {
            self.accumulate(w.clone(), factor * c)?;
        }
        Ok(())
    }

    /// Largest `|c|`, 0 for an empty sum.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Sum of squared coefficients beyond the `k` largest.
    pub fn squared_tail(&self, k: usize) -> f64 {
        if k >= self.len() {
            return 0.0;
        }
        let mut sq: Vec<f64> = self.terms.values().map(|c| c * c).collect();
        sq.sort_unstable_by(|a, b| b.total_cmp(a));
        // ascending summation of the tail keeps small terms from being swamped
        sq[k..].iter().rev().sum()
    }

    /// Operator dump: one `<coefficient> <pauli-string>` line per term, sorted by word.
    pub fn to_dump(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        for (w, c) in self.sorted_terms() {
            let _ = writeln!(out, "{c:.16e} {w}");
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<PauliSum, SparseError> {
        let mut sum: Option<PauliSum> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(cs), Some(ws), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(SparseError::Parse {
                    line: line_no,
                    msg: "expected `<coefficient> <pauli-string>`".into(),
                });
            };
            let c: f64 = cs.parse().map_err(|_| SparseError::Parse {
                line: line_no,
                msg: format!("bad coefficient {cs:?}"),
            })?;
            let w: PauliWord = ws.parse().map_err(|e: PauliError| SparseError::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            let s = sum.get_or_insert_with(|| PauliSum::new(w.num_qubits()));
            if w.num_qubits() != s.num_qubits() {
                return Err(SparseError::Parse {
                    line: line_no,
                    msg: format!(
                        "word length {} differs from {}",
                        w.num_qubits(),
                        s.num_qubits()
                    ),
                });
            }
            s.accumulate_with(w, c, 0.0)?;
        }
        sum.ok_or(SparseError::EmptyDump)
    }

    /// Keeps the `k` largest-magnitude entries; returns the squared mass removed.
    pub fn truncate_top_k(&mut self, k: usize) -> f64 {
        assert!(k >= 1, "budget must be positive");
        if self.len() <= k {
            return 0.0;
        }
        let mut mags: Vec<f64> = self.terms.values().map(|c| c.abs()).collect();
        let (_, &mut threshold, _) = mags.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
        let above = mags.iter().filter(|&&m| m > threshold).count();
        let need = k - above;
        let tied: Vec<&PauliWord> = self
            .terms
            .iter()
            .filter(|(_, c)| c.abs() == threshold)
            .map(|(w, _)| w)
            .collect();
        let keep_tied: Option<HashSet<PauliWord>> = if tied.len() > need {
            let mut tied: Vec<PauliWord> = tied.into_iter().cloned().collect();
            tied.sort_unstable();
            tied.truncate(need);
            Some(tied.into_iter().collect())
        } else {
            None
        };
        self.retain_counting(|w, m| {
            m > threshold || (m == threshold && keep_tied.as_ref().is_none_or(|s| s.contains(w)))
        })
    }

    /// Approximate Top-K by power-of-two magnitude buckets relative to the current maximum.
    ///
    /// Bucket `b < buckets` holds `2^-(b+1)·cmax ≤ |c| < 2^-b·cmax` (the maximum itself lands
    /// in bucket 0); everything smaller shares one underflow bucket. Whole buckets are kept,
    /// largest first, until at least `k` entries are retained. If taking the boundary bucket
    /// whole would exceed `2k` entries, only its largest entries are taken, up to exactly `2k`.
    pub fn truncate_top_k_bucket(&mut self, k: usize, buckets: usize) -> f64 {
        assert!(
            k >= 1 && buckets >= 1,
            "budget and bucket count must be positive"
        );
        if self.len() <= k {
            return 0.0;
        }
        let cmax = self.max_abs();
        let bucket_of = |m: f64| magnitude_bucket(m, cmax, buckets);
        let mut counts = vec![0usize; buckets + 1];
        for c in self.terms.values() {
            counts[bucket_of(c.abs())] += 1;
        }
        let mut before = 0usize;
        let mut boundary = buckets;
        for (b, &cnt) in counts.iter().enumerate() {
            if before + cnt >= k {
                boundary = b;
                break;
            }
            before += cnt;
        }
        let cap = 2 * k;
        if before + counts[boundary] <= cap {
            return self.retain_counting(|_, m| bucket_of(m) <= boundary);
        }
        let mut edge: Vec<(f64, PauliWord)> = self
            .terms
            .iter()
            .filter(|(_, c)| bucket_of(c.abs()) == boundary)
            .map(|(w, c)| (c.abs(), w.clone()))
            .collect();
        edge.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        edge.truncate(cap - before);
        let keep: HashSet<PauliWord> = edge.into_iter().map(|(_, w)| w).collect();
        self.retain_counting(|w, m| {
            let b = bucket_of(m);
            b < boundary || (b == boundary && keep.contains(w))
        })
    }

    /// Drops every entry of weight `≥ max_weight`; returns the squared mass removed.
    pub fn truncate_weight(&mut self, max_weight: usize) -> f64 {
        let mut removed = 0.0;
        self.terms.retain(|w, c| {
            let keep = w.weight() < max_weight;
            if !keep {
                removed += *c * *c;
            }
            keep
        });
        removed
    }

    fn retain_counting<F: Fn(&PauliWord, f64) -> bool>(&mut self, keep: F) -> f64 {
        let mut removed = 0.0;
        self.terms.retain(|w, c| {
            let k = keep(w, c.abs());
            if !k {
                removed += *c * *c;
            }
            k
        });
        removed
    }
}

/// Bucket index of magnitude `m` relative to `cmax`; `buckets` is the underflow bucket.
pub fn magnitude_bucket(m: f64, cmax: f64, buckets: usize) -> usize {
    if m >= cmax {
        return 0;
    }
    if m <= 0.0 {
        return buckets;
    }
    let mut b = (cmax / m).log2().floor().max(0.0) as i64;
    // fix up rounding at exact powers of two: want 2^-(b+1)·cmax ≤ m < 2^-b·cmax
    while b > 0 && m * 2f64.powi(b as i32) >= cmax {
        b -= 1;
    }
    while m * 2f64.powi(b as i32 + 1) < cmax {
        b += 1;
    }
    (b as usize).min(buckets)
}

/// Which truncation runs after every Hamiltonian term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationKind {
    TopKExact {
        k: usize,
    },
    TopKBucket {
        k: usize,
        buckets: usize,
    },
    WeightCap {
        max_weight: usize,
    },
    /// Weight cap first, then exact Top-K.
    Combined {
        k: usize,
        max_weight: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub kind: TruncationKind,
    pub prune_eps: f64,
}

/// What a single truncation pass did.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TruncationOutcome {
    pub discarded: f64,
    /// Input was non-empty and nothing survived.
    pub degenerate: bool,
}

impl TruncationPolicy {
    pub fn top_k(k: usize) -> Self {
        TruncationPolicy {
            kind: TruncationKind::TopKExact { k },
            prune_eps: DEFAULT_PRUNE_EPS,
        }
    }

    /// Exact Top-K with an unreachable budget: only pruning applies.
    pub fn unbounded() -> Self {
        Self::top_k(usize::MAX)
    }

    pub fn bucket(k: usize, buckets: usize) -> Self {
        TruncationPolicy {
            kind: TruncationKind::TopKBucket { k, buckets },
            prune_eps: DEFAULT_PRUNE_EPS,
        }
    }

    pub fn weight_cap(max_weight: usize) -> Self {
        TruncationPolicy {
            kind: TruncationKind::WeightCap { max_weight },
            prune_eps: DEFAULT_PRUNE_EPS,
        }
    }

    pub fn combined(k: usize, max_weight: usize) -> Self {
        TruncationPolicy {
            kind: TruncationKind::Combined { k, max_weight },
            prune_eps: DEFAULT_PRUNE_EPS,
        }
    }

    pub fn with_prune_eps(mut self, eps: f64) -> Self {
        self.prune_eps = eps;
        self
    }

    pub fn validate(&self) -> Result<(), SparseError> {
        let bad = |m: &str| Err(SparseError::BadPolicy(m.to_string()));
        if self.prune_eps.is_nan() || self.prune_eps < 0.0 {
            return bad("prune_eps must be non-negative");
        }
        match self.kind {
            TruncationKind::TopKExact { k }
            | TruncationKind::TopKBucket { k, .. }
            | TruncationKind::Combined { k, .. }
                if k == 0 =>
            {
                bad("K must be at least 1")
            }
            TruncationKind::TopKBucket { buckets: 0, .. } => bad("bucket count must be at least 1"),
            TruncationKind::WeightCap { max_weight: 0 }
            | TruncationKind::Combined { max_weight: 0, .. } => {
                bad("weight threshold must be at least 1")
            }
            _ => Ok(()),
        }
    }

    /// Upper bound on the number of terms left after [`apply`](Self::apply).
    pub fn term_cap(&self) -> usize {
        match self.kind {
            TruncationKind::TopKExact { k } | TruncationKind::Combined { k, .. } => k,
            TruncationKind::TopKBucket { k, .. } => k.saturating_mul(2),
            TruncationKind::WeightCap { .. } => usize::MAX,
        }
    }

    pub fn apply(&self, sum: &mut PauliSum) -> TruncationOutcome {
        let was_empty = sum.is_empty();
        let discarded = match self.kind {
            TruncationKind::TopKExact { k } => sum.truncate_top_k(k),
            TruncationKind::TopKBucket { k, buckets } => sum.truncate_top_k_bucket(k, buckets),
            TruncationKind::WeightCap { max_weight } => sum.truncate_weight(max_weight),
            TruncationKind::Combined { k, max_weight } => {
                sum.truncate_weight(max_weight) + sum.truncate_top_k(k)
            }
        };
        TruncationOutcome {
            discarded,
            degenerate: !was_empty && sum.is_empty(),
        }
    }
}

pub fn top_k_exact(sum: &PauliSum, k: usize) -> PauliSum {
    let mut s = sum.clone();
    s.truncate_top_k(k);
    s
}

pub fn top_k_bucket(sum: &PauliSum, k: usize, buckets: usize) -> PauliSum {
    let mut s = sum.clone();
    s.truncate_top_k_bucket(k, buckets);
    s
}

/// Result of a weight cut; `degenerate` flags a non-empty input that lost every term.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTruncation {
    pub sum: PauliSum,
    pub degenerate: bool,
}

pub fn weight_truncate(sum: &PauliSum, max_weight: usize) -> WeightTruncation {
    let mut s = sum.clone();
    s.truncate_weight(max_weight);
    let degenerate = !sum.is_empty() && s.is_empty();
    WeightTruncation { sum: s, degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;
    use proptest::prelude::*;

    fn w(s: &str) -> PauliWord {
        s.parse().unwrap()
    }

    fn sum(n: usize, terms: &[(&str, f64)]) -> PauliSum {
        PauliSum::from_terms(n, terms.iter().map(|&(s, c)| (w(s), c))).unwrap()
    }

    #[test]
    fn accumulate_examples() {
        let mut s = sum(1, &[("X", 0.5)]);
        s.accumulate(w("X"), 0.25).unwrap();
        assert_eq!(s.get(&w("X")), 0.75);

        let mut s = sum(1, &[("X", 0.5)]);
        s.accumulate(w("X"), -0.5).unwrap();
        assert!(s.is_empty());

        let mut s = PauliSum::new(2);
        s.accumulate(w("ZZ"), 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.accumulate(w("ZZZ"), 1.0).is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(sum(1, &[("Z", 1.0)]).pauli_norm2(), 1.0);
        assert!((sum(1, &[("X", 0.6), ("Y", 0.8)]).pauli_norm2() - 1.0).abs() < 1e-15);
        assert_eq!(PauliSum::new(3).pauli_norm2(), 0.0);
    }

    #[test]
    fn top_k_examples() {
        let s = sum(1, &[("X", 0.9), ("Y", 0.5), ("Z", 0.1)]);
        assert_eq!(top_k_exact(&s, 2), sum(1, &[("X", 0.9), ("Y", 0.5)]));
        let one = sum(1, &[("X", 0.9)]);
        assert_eq!(top_k_exact(&one, 4), one);
        // ties broken lexicographically: Z=(0,1) < X=(1,0) < Y=(1,1)
        let tie = sum(1, &[("X", 0.5), ("Y", -0.5), ("Z", 0.5)]);
        assert_eq!(top_k_exact(&tie, 2), sum(1, &[("X", 0.5), ("Z", 0.5)]));
    }

    #[test]
    fn bucket_examples() {
        let s = sum(1, &[("X", 0.9), ("Y", 0.5), ("Z", 0.1)]);
        assert_eq!(top_k_bucket(&s, 2, 32), sum(1, &[("X", 0.9), ("Y", 0.5)]));
        assert_eq!(top_k_bucket(&s, 3, 32), s);

        // eight equal magnitudes land in one bucket; K=2 caps it at 4 by word order
        let terms: Vec<(PauliWord, f64)> = (0..8)
            .map(|k| {
                let word = PauliWord::from_sites(
                    3,
                    &[(0, Pauli::ALL[k % 4]), (1, Pauli::ALL[(k / 4) + 1])],
                )
                .unwrap();
                (word, 0.25)
            })
            .collect();
        let flat = PauliSum::from_terms(3, terms.clone()).unwrap();
        let got = top_k_bucket(&flat, 2, 8);
        assert_eq!(got.len(), 4);
        let mut words: Vec<_> = terms.into_iter().map(|(w, _)| w).collect();
        words.sort();
        for word in &words[..4] {
            assert_eq!(got.get(word), 0.25);
        }
    }

    #[test]
    fn bucket_boundaries_are_exact_powers_of_two() {
        assert_eq!(magnitude_bucket(1.0, 1.0, 10), 0);
        assert_eq!(magnitude_bucket(0.5, 1.0, 10), 0);
        assert_eq!(magnitude_bucket(0.4999999, 1.0, 10), 1);
        assert_eq!(magnitude_bucket(0.25, 1.0, 10), 1);
        assert_eq!(magnitude_bucket(0.125, 1.0, 10), 2);
        assert_eq!(magnitude_bucket(1e-9, 1.0, 10), 10);
        assert_eq!(magnitude_bucket(0.3, 0.6, 10), 0);
    }

    #[test]
    fn weight_truncation_examples() {
        let s = sum(2, &[("ZI", 0.6), ("XX", 0.8)]);
        let r = weight_truncate(&s, 2);
        assert_eq!(r.sum, sum(2, &[("ZI", 0.6)]));
        assert!(!r.degenerate);

        let s = sum(2, &[("ZI", 1.0)]);
        assert_eq!(weight_truncate(&s, 2).sum, s);

        let r = weight_truncate(&sum(2, &[("XX", 1.0)]), 1);
        assert!(r.sum.is_empty());
        assert!(r.degenerate);
    }

    #[test]
    fn squared_tail_examples() {
        let s = sum(
            2,
            &[
                ("XI", 0.5f64.sqrt()),
                ("YI", 0.3f64.sqrt()),
                ("ZI", 0.2f64.sqrt()),
            ],
        );
        assert!((s.squared_tail(1) - 0.5).abs() < 1e-15);
        assert_eq!(s.squared_tail(3), 0.0);
        assert!((s.squared_tail(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::top_k(0).validate().is_err());
        assert!(TruncationPolicy::bucket(4, 0).validate().is_err());
        assert!(TruncationPolicy::weight_cap(0).validate().is_err());
        assert!(TruncationPolicy::top_k(1)
            .with_prune_eps(-1.0)
            .validate()
            .is_err());
        assert!(TruncationPolicy::combined(8, 3).validate().is_ok());
    }

    #[test]
    fn dump_round_trip_and_errors() {
        let s = sum(3, &[("XYZ", 0.1), ("IIZ", -1.0 / 3.0)]);
        let text = s.to_dump(&["t = 0.5".into()]);
        assert!(text.starts_with("# t = 0.5\n"));
        assert_eq!(PauliSum::parse_dump(&text).unwrap(), s);
        assert!(matches!(
            PauliSum::parse_dump("0.1 XY\n0.2 XYZ"),
            Err(SparseError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            PauliSum::parse_dump("abc XY"),
            Err(SparseError::Parse { line: 1, .. })
        ));
        assert_eq!(
            PauliSum::parse_dump("# nothing\n"),
            Err(SparseError::EmptyDump)
        );
    }

    /// Random sums on 4 qubits with coefficient magnitudes from a small grid, so ties occur.
    fn arb_sum() -> impl Strategy<Value = PauliSum> {
        proptest::collection::vec((0usize..256, -8i32..=8, 0usize..3), 1..64).prop_map(|entries| {
            let mut s = PauliSum::new(4);
            for (idx, num, scale) in entries {
                let sites: Vec<_> = (0..4)
                    .map(|j| (j, Pauli::ALL[(idx >> (2 * j)) & 3]))
                    .collect();
                let word = PauliWord::from_sites(4, &sites).unwrap();
                let c = num as f64 / 8.0 * 10f64.powi(-(scale as i32));
                s.accumulate_with(word, c, 0.0).unwrap();
            }
            s.terms.retain(|_, c| *c != 0.0);
            s
        })
    }

    /// Brute force: sort everything by (|c| desc, word asc) and take a prefix.
    fn brute_top(s: &PauliSum, k: usize) -> PauliSum {
        let mut v = s.sorted_terms();
        v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        PauliSum::from_terms(s.num_qubits(), v).unwrap()
    }

    proptest! {
        #[test]
        fn top_k_matches_full_sort(s in arb_sum(), k in 1usize..70) {
            prop_assert_eq!(top_k_exact(&s, k), brute_top(&s, k));
        }

        #[test]
        fn top_k_plus_tail_is_total(s in arb_sum(), k in 1usize..70) {
            let kept = top_k_exact(&s, k).norm_squared();
            let total = s.norm_squared();
            prop_assert!((kept + s.squared_tail(k) - total).abs() <= 1e-12 * total.max(1e-300));
        }

        #[test]
        fn bucket_contains_half_budget_and_respects_size(s in arb_sum(), k in 1usize..70, b in 1usize..12) {
            let got = top_k_bucket(&s, k, b);
            let half = top_k_exact(&s, k.div_ceil(2));
            for (word, c) in half.iter() {
                prop_assert_eq!(got.get(word), c);
            }
            prop_assert!(got.len() >= k.min(s.len()));
            prop_assert!(got.len() <= 2 * k);
            prop_assert!(got.norm_squared() >= s.norm_squared() - s.squared_tail(k.min(got.len())) - 1e-12);
        }

        #[test]
        fn truncations_are_idempotent(s in arb_sum(), k in 1usize..70, b in 1usize..12, m in 1usize..5) {
            for policy in [
                TruncationPolicy::top_k(k),
                TruncationPolicy::bucket(k, b),
                TruncationPolicy::weight_cap(m),
                TruncationPolicy::combined(k, m),
            ] {
                let mut once = s.clone();
                policy.apply(&mut once);
                let mut twice = once.clone();
                let second = policy.apply(&mut twice);
                prop_assert_eq!(&once, &twice, "{:?}", policy);
                prop_assert_eq!(second.discarded, 0.0);
            }
        }

        #[test]
        fn discarded_mass_accounts_for_the_difference(s in arb_sum(), k in 1usize..70) {
            let mut t = s.clone();
            let out = TruncationPolicy::bucket(k, 6).apply(&mut t);
            prop_assert!((t.norm_squared() + out.discarded - s.norm_squared()).abs() < 1e-12);
        }
    }
}
