//! Randomized invariant suites shared by the `verify` command and the acceptance tests.
//!
//! Every suite is seeded and deterministic. A suite passes iff all of its checks
//! pass; failing checks carry a counterexample in their detail string.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analytics::{self, renyi_entropy};
use crate::hamiltonian::{build_xxz_chain, Boundary, Hamiltonian};
use crate::oracle;
use crate::pauli::{Pauli, PauliWord};
use crate::propagation::{
    backpropagate, conjugate_rotation, HeisenbergEvolution, ProductState, RunConfig,
};
use crate::sparse::{weight_truncate, PauliSum, TruncationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Oracle,
    Unitarity,
    OseProperties,
    TopKError,
    TailBound,
    XyStructure,
    Scrambling,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Algebra,
        Suite::Oracle,
        Suite::Unitarity,
        Suite::OseProperties,
        Suite::TopKError,
        Suite::TailBound,
        Suite::XyStructure,
        Suite::Scrambling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Oracle => "oracle",
            Suite::Unitarity => "unitarity",
            Suite::OseProperties => "ose-properties",
            Suite::TopKError => "topk-error",
            Suite::TailBound => "tail-bound",
            Suite::XyStructure => "xy-structure",
            Suite::Scrambling => "scrambling",
        }
    }

    /// Runs the suite at its default size.
    pub fn run(self, seed: u64) -> SuiteReport {
        match self {
            Suite::Algebra => algebra(),
            Suite::Oracle => oracle_equivalence(50, seed),
            Suite::Unitarity => unitarity(20, seed),
            Suite::OseProperties => ose_properties(200, seed),
            Suite::TopKError => topk_error(&evolved_operator_set(seed)),
            Suite::TailBound => tail_bound(&evolved_operator_set(seed)),
            Suite::XyStructure => xy_structure(50, 25, 200),
            Suite::Scrambling => scrambling(5, 4000, seed),
        }
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                format!("unknown suite {s:?} (expected one of {})", names.join(", "))
            })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub metrics: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        SuiteReport {
            suite,
            checks: Vec::new(),
            metrics: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), value));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn metric_value(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_pauli(rng: &mut impl Rng) -> Pauli {
    [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)]
}

/// Uniform random word of exactly `weight` non-identity sites.
pub fn random_word(rng: &mut impl Rng, n: usize, weight: usize) -> PauliWord {
    let sites: Vec<(usize, Pauli)> = sample(rng, n, weight.min(n))
        .into_iter()
        .map(|j| (j, random_pauli(rng)))
        .collect();
    PauliWord::from_sites(n, &sites).expect("sites in range")
}

/// Up to `terms` random words with Gaussian coefficients (absolute values when `nonneg`).
pub fn random_sum(rng: &mut impl Rng, n: usize, terms: usize, nonneg: bool) -> PauliSum {
    let mut sum = PauliSum::new(n);
    while sum.is_empty() {
        for _ in 0..terms {
            let weight = rng.random_range(0..=n);
            let word = random_word(rng, n, weight);
            let c = normal(rng);
            sum.accumulate(word, if nonneg { c.abs() } else { c })
                .expect("matching width");
        }
    }
    sum
}

/// Unit-norm random operator.
pub fn random_normalized_sum(rng: &mut impl Rng, n: usize, terms: usize, nonneg: bool) -> PauliSum {
    let mut s = random_sum(rng, n, terms, nonneg);
    s.rescale_to_norm(1.0);
    s
}

pub fn random_product_state(rng: &mut impl Rng, n: usize, pure: bool) -> ProductState {
    let bloch = (0..n)
        .map(|_| {
            let v = [normal(rng), normal(rng), normal(rng)];
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let r = if pure {
                1.0
            } else {
                rng.random::<f64>().cbrt()
            };
            v.map(|a| a * r / norm)
        })
        .collect();
    ProductState::new(bloch).expect("radius at most one")
}

/// Random XXZ chain or random sum of local Pauli words with weights in `[-1.5, 1.5]`.
pub fn random_hamiltonian(rng: &mut impl Rng, n: usize) -> Hamiltonian {
    if rng.random_bool(0.5) {
        let (jx, jy, jz) = (
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        );
        let boundary = if rng.random_bool(0.5) {
            Boundary::Open
        } else {
            Boundary::Periodic
        };
        return build_xxz_chain(n, jx, jy, jz, boundary).expect("n >= 2");
    }
    let count = n + rng.random_range(0..=n);
    let terms: Vec<(f64, PauliWord)> = (0..count)
        .map(|_| {
            let weight = rng.random_range(1..=n.min(3));
            (rng.random_range(-1.5..1.5), random_word(rng, n, weight))
        })
        .collect();
    Hamiltonian::new(n, terms).expect("non-identity words")
}

pub fn max_abs_difference(a: &PauliSum, b: &PauliSum) -> f64 {
    let one_side = a.iter().map(|(w, c)| (c - b.get(w)).abs());
    let other = b
        .iter()
        .filter(|(w, _)| a.get(w) == 0.0)
        .map(|(_, c)| c.abs());
    one_side.chain(other).fold(0.0, f64::max)
}

type Mat2 = [[Complex64; 2]; 2];

fn single_qubit_matrix(p: Pauli) -> Mat2 {
    let (o, z, i) = (
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 1.0),
    );
    match p {
        Pauli::I => [[o, z], [z, o]],
        Pauli::X => [[z, o], [o, z]],
        Pauli::Y => [[z, -i], [i, z]],
        Pauli::Z => [[o, z], [z, -o]],
    }
}

/// Dense matrix of a word, site 0 as the most significant tensor factor.
fn dense_word(w: &PauliWord) -> Vec<Vec<Complex64>> {
    let mut m = vec![vec![Complex64::new(1.0, 0.0)]];
    for j in 0..w.num_qubits() {
        let s = single_qubit_matrix(w.get(j));
        let d = m.len();
        let mut next = vec![vec![Complex64::new(0.0, 0.0); 2 * d]; 2 * d];
        for (r, row) in m.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                for (a, srow) in s.iter().enumerate() {
                    for (b, sv) in srow.iter().enumerate() {
                        next[2 * r + a][2 * c + b] = v * sv;
                    }
                }
            }
        }
        m = next;
    }
    m
}

fn matmul(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let d = a.len();
    (0..d)
        .map(|r| {
            (0..d)
                .map(|c| (0..d).map(|k| a[r][k] * b[k][c]).sum())
                .collect()
        })
        .collect()
}

fn all_words(n: usize) -> Vec<PauliWord> {
    (0..4usize.pow(n as u32))
        .map(|mut idx| {
            let sites: Vec<(usize, Pauli)> = (0..n)
                .map(|j| {
                    let p = Pauli::ALL[idx % 4];
                    idx /= 4;
                    (j, p)
                })
                .collect();
            PauliWord::from_sites(n, &sites).expect("small n")
        })
        .collect()
}

/// All 16×16 two-qubit products and commutators against explicit 4×4 matrices.
pub fn algebra() -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Algebra);
    let words = all_words(2);
    let dense: Vec<_> = words.iter().map(dense_word).collect();
    let mut product_failures = Vec::new();
    let mut commute_failures = Vec::new();
    for (a, da) in words.iter().zip(&dense) {
        for (b, db) in words.iter().zip(&dense) {
            let (r, k) = a.multiply(b).expect("same width");
            let (re, im) = k.to_complex();
            let phase = Complex64::new(re, im);
            let want = matmul(da, db);
            let got: Vec<Vec<Complex64>> = dense_word(&r)
                .iter()
                .map(|row| row.iter().map(|v| phase * v).collect())
                .collect();
            if want != got {
                product_failures.push(format!("{a}·{b}"));
            }
            let ba = matmul(db, da);
            let dense_commutes = want == ba;
            if a.commutes(b).expect("same width") != dense_commutes {
                commute_failures.push(format!("[{a},{b}]"));
            }
        }
    }
    let pairs = words.len() * words.len();
    report.metric("pairs", pairs as f64);
    report.check(
        "products",
        product_failures.is_empty(),
        summarize(&product_failures, pairs),
    );
    report.check(
        "commutators",
        commute_failures.is_empty(),
        summarize(&commute_failures, pairs),
    );
    report
}

fn summarize(failures: &[String], total: usize) -> String {
    if failures.is_empty() {
        format!("{total} cases")
    } else {
        let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
        format!(
            "{} of {total} failed, e.g. {}",
            failures.len(),
            shown.join(", ")
        )
    }
}

/// Untruncated engine against the dense oracle: expectation values on random
/// instances with `n ∈ 2..=8`, and full coefficient vectors for `n ≤ 6`.
pub fn oracle_equivalence(instances: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Oracle);
    let mut rng = rng(seed);
    let mut max_expectation: f64 = 0.0;
    let mut max_coefficient: f64 = 0.0;
    let mut expectation_failures = Vec::new();
    let mut coefficient_failures = Vec::new();
    let mut errors = Vec::new();
    for idx in 0..instances {
        let n = rng.random_range(2..=8);
        let h = random_hamiltonian(&mut rng, n);
        let pure = rng.random_bool(0.5);
        let state = random_product_state(&mut rng, n, pure);
        let terms = rng.random_range(1..=3);
        let obs = random_sum(&mut rng, n, terms, false);
        let steps = rng.random_range(1..=20);
        let time = rng.random_range(0.0..2.0);
        let cfg = RunConfig {
            record_every: steps,
            ..RunConfig::new(time, steps, TruncationPolicy::unbounded())
        };
        let engine = match backpropagate(&obs, &h, &cfg, &state) {
            Ok(run) => run,
            Err(e) => {
                errors.push(format!("instance {idx}: engine {e}"));
                continue;
            }
        };
        let value = engine
            .trajectory
            .last()
            .map(|r| r.value)
            .unwrap_or_default();
        match oracle::dense_trotter_expectation(&h, &state, &obs, time, steps) {
            Ok(dense) => {
                let diff = (value - dense).abs();
                max_expectation = max_expectation.max(diff);
                if diff > 1e-9 {
                    expectation_failures
                        .push(format!("instance {idx} (n={n}, N={steps}): |Δ|={diff:.3e}"));
                }
            }
            Err(e) => errors.push(format!("instance {idx}: oracle {e}")),
        }
        if n <= 6 {
            match oracle::dense_heisenberg_coefficients(&h, &obs, time, steps) {
                Ok(dense) => {
                    let diff = max_abs_difference(&engine.operator, &dense);
                    max_coefficient = max_coefficient.max(diff);
                    if diff > 1e-10 {
                        coefficient_failures
                            .push(format!("instance {idx} (n={n}): max |Δc|={diff:.3e}"));
                    }
                }
                Err(e) => errors.push(format!("instance {idx}: oracle {e}")),
            }
        }
    }
    report.metric("max_abs_expectation_diff", max_expectation);
    report.metric("max_abs_coefficient_diff", max_coefficient);
    report.check(
        "expectation_1e-9",
        expectation_failures.is_empty(),
        summarize(&expectation_failures, instances),
    );
    report.check(
        "coefficients_1e-10",
        coefficient_failures.is_empty(),
        summarize(&coefficient_failures, instances),
    );
    report.check(
        "no_errors",
        errors.is_empty(),
        summarize(&errors, instances),
    );
    report
}

/// Untruncated runs keep `Σc²` fixed to 1e-10 after every Trotter step.
pub fn unitarity(instances: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Unitarity);
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut steps_checked = 0usize;
    for idx in 0..instances {
        let n = rng.random_range(2..=8);
        let h = random_hamiltonian(&mut rng, n);
        let terms = rng.random_range(1..=4);
        let obs = random_normalized_sum(&mut rng, n, terms, false);
        let tau = rng.random_range(0.01..0.3);
        let start = obs.norm_squared();
        let mut evo = match HeisenbergEvolution::new(obs, &h, tau, TruncationPolicy::unbounded()) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("instance {idx}: {e}"));
                continue;
            }
        };
        for s in 1..=15 {
            if let Err(e) = evo.step() {
                failures.push(format!("instance {idx} step {s}: {e}"));
                break;
            }
            let drift = (evo.operator().norm_squared() - start).abs();
            worst = worst.max(drift);
            steps_checked += 1;
            if drift > 1e-10 {
                failures.push(format!(
                    "instance {idx} (n={n}) step {s}: drift {drift:.3e}"
                ));
                break;
            }
        }
    }
    // one large structured instance: XY chain of 50 sites, 200 steps
    let xy = build_xxz_chain(50, 1.0, 1.0, 0.0, Boundary::Open).expect("len >= 2");
    let z = PauliSum::single(
        PauliWord::single(50, 25, Pauli::Z).expect("site in range"),
        1.0,
    );
    let mut evo =
        HeisenbergEvolution::new(z, &xy, 0.05, TruncationPolicy::unbounded()).expect("valid run");
    for s in 1..=200 {
        evo.step().expect("untruncated run");
        let drift = (evo.operator().norm_squared() - 1.0).abs();
        worst = worst.max(drift);
        steps_checked += 1;
        if drift > 1e-10 {
            failures.push(format!("XY chain step {s}: drift {drift:.3e}"));
            break;
        }
    }
    report.metric("max_norm_squared_drift", worst);
    report.metric("steps_checked", steps_checked as f64);
    report.check(
        "norm_preserved_1e-10",
        failures.is_empty(),
        summarize(&failures, instances),
    );
    report
}

fn convex_weights(rng: &mut impl Rng, count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..count)
        .map(|_| -rng.random::<f64>().max(1e-12).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn random_small_operator(rng: &mut impl Rng) -> PauliSum {
    let n = rng.random_range(1..=3);
    let terms = rng.random_range(1..=6);
    random_normalized_sum(rng, n, terms, false)
}

fn random_mixture_part(rng: &mut impl Rng, n: usize, nonneg: bool) -> PauliSum {
    let terms = rng.random_range(1..=8);
    random_normalized_sum(rng, n, terms, nonneg)
}

fn mixture(parts: &[PauliSum], weights: &[f64]) -> PauliSum {
    let mut out = PauliSum::new(parts[0].num_qubits());
    for (p, w) in parts.iter().zip(weights) {
        out.add_scaled(p, *w).expect("same width");
    }
    out
}

/// Tensor additivity, Clifford invariance, concavity below α = 1/2 and
/// convexity of `exp(S^α)` for `1/2 ≤ α < 1`, each on `cases` random operators.
///
/// Concavity is a theorem only for mixtures of sign-coherent operators, so those
/// mixtures draw nonnegative coefficients.
pub fn ose_properties(cases: usize, seed: u64) -> SuiteReport {
    const TOL: f64 = 1e-9;
    let mut report = SuiteReport::new(Suite::OseProperties);
    let mut rng = rng(seed);
    let alphas = [0.25, 0.5, 0.75, 1.0];

    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for idx in 0..cases {
        let a = random_small_operator(&mut rng);
        let b = random_small_operator(&mut rng);
        let ab = a.tensor(&b).expect("small widths");
        let alpha = alphas[idx % alphas.len()];
        let gap =
            (renyi_entropy(&ab, alpha) - renyi_entropy(&a, alpha) - renyi_entropy(&b, alpha)).abs();
        worst = worst.max(gap);
        if gap > TOL {
            failures.push(format!("case {idx} α={alpha}: gap {gap:.3e}"));
        }
    }
    report.metric("additivity_max_gap", worst);
    report.check(
        "tensor_additivity",
        failures.is_empty(),
        summarize(&failures, cases),
    );

    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for idx in 0..cases {
        let n = rng.random_range(1..=5);
        let terms = rng.random_range(1..=10);
        let op = random_normalized_sum(&mut rng, n, terms, false);
        let weight = rng.random_range(1..=n);
        let generator = random_word(&mut rng, n, weight);
        let alpha = alphas[idx % alphas.len()];
        // 2wτ = π/2
        let rotated = conjugate_rotation(
            &op,
            &generator,
            1.0,
            std::f64::consts::FRAC_PI_4,
            &TruncationPolicy::unbounded(),
        )
        .expect("same width");
        let gap = (renyi_entropy(&rotated, alpha) - renyi_entropy(&op, alpha)).abs();
        worst = worst.max(gap);
        if gap > TOL || rotated.len() != op.len() {
            failures.push(format!("case {idx} generator {generator}: gap {gap:.3e}"));
        }
    }
    report.metric("clifford_max_gap", worst);
    report.check(
        "clifford_invariance",
        failures.is_empty(),
        summarize(&failures, cases),
    );

    let mut failures = Vec::new();
    for idx in 0..cases {
        let n = rng.random_range(1..=4);
        let count = rng.random_range(2..=4);
        let parts: Vec<PauliSum> = (0..count)
            .map(|_| random_mixture_part(&mut rng, n, true))
            .collect();
        let lambda = convex_weights(&mut rng, count);
        let alpha = rng.random_range(0.01..0.5);
        let mixed = renyi_entropy(&mixture(&parts, &lambda), alpha);
        let avg: f64 = parts
            .iter()
            .zip(&lambda)
            .map(|(p, l)| l * renyi_entropy(p, alpha))
            .sum();
        if mixed < avg - TOL {
            failures.push(format!("case {idx} α={alpha:.3}: {mixed:.6} < {avg:.6}"));
        }
    }
    report.check(
        "concavity_alpha_below_half",
        failures.is_empty(),
        summarize(&failures, cases),
    );

    let mut failures = Vec::new();
    for idx in 0..cases {
        let n = rng.random_range(1..=4);
        let count = rng.random_range(2..=4);
        let parts: Vec<PauliSum> = (0..count)
            .map(|_| random_mixture_part(&mut rng, n, false))
            .collect();
        let lambda = convex_weights(&mut rng, count);
        let alpha = rng.random_range(0.5..0.99);
        let mix = mixture(&parts, &lambda);
        if mix.is_empty() {
            continue;
        }
        let mixed = renyi_entropy(&mix, alpha).exp();
        let avg: f64 = parts
            .iter()
            .zip(&lambda)
            .map(|(p, l)| l * renyi_entropy(p, alpha).exp())
            .sum();
        if mixed > avg * (1.0 + TOL) + TOL {
            failures.push(format!("case {idx} α={alpha:.3}: {mixed:.6} > {avg:.6}"));
        }
    }
    report.check(
        "exp_convexity_alpha_from_half",
        failures.is_empty(),
        summarize(&failures, cases),
    );
    report
}

/// Exactly evolved operators from the dense oracle, `n ∈ {4, 6, 8}` at several times.
pub fn evolved_operator_set(seed: u64) -> Vec<PauliSum> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for n in [4usize, 6, 8] {
        let xxz = build_xxz_chain(n, 1.0, 1.0, 0.5, Boundary::Open).expect("n >= 2");
        let random = random_hamiltonian(&mut rng, n);
        for h in [&xxz, &random] {
            let site = rng.random_range(0..n);
            let obs = PauliSum::single(
                PauliWord::single(n, site, Pauli::Z).expect("site in range"),
                1.0,
            );
            for t in [0.5, 1.0, 2.0] {
                let steps = (t / 0.1f64).round() as usize;
                out.push(
                    oracle::dense_heisenberg_coefficients(h, &obs, t, steps).expect("n within cap"),
                );
            }
        }
    }
    out
}

fn log_grid(max: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = 1.0f64;
    while (k as usize) <= max {
        let v = k as usize;
        if ks.last() != Some(&v) {
            ks.push(v);
        }
        k *= 1.5;
    }
    ks
}

/// `‖O - Ô‖ ≤ sqrt(2 Δ(K))` for the rescaled Top-K approximant.
pub fn topk_error(operators: &[PauliSum]) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::TopKError);
    let mut failures = Vec::new();
    let mut cases = 0usize;
    let mut tightest: f64 = 0.0;
    for (idx, op) in operators.iter().enumerate() {
        for k in log_grid(op.len()) {
            cases += 1;
            let r = analytics::truncation_error(op, k).expect("k >= 1");
            if r.bound > 0.0 {
                tightest = tightest.max(r.exact / r.bound);
            }
            if r.exact > r.bound + 1e-12 {
                failures.push(format!(
                    "operator {idx} K={k}: {:.3e} > {:.3e}",
                    r.exact, r.bound
                ));
            }
        }
    }
    report.metric("cases", cases as f64);
    report.metric("max_error_to_bound_ratio", tightest);
    report.check(
        "error_within_bound",
        failures.is_empty(),
        summarize(&failures, cases),
    );
    report
}

/// `ln Δ(K) ≤ delta_bound(S^α, K, α)` for α ∈ {1/4, 1/2, 3/4}.
pub fn tail_bound(operators: &[PauliSum]) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::TailBound);
    let mut failures = Vec::new();
    let mut cases = 0usize;
    let mut min_slack = f64::INFINITY;
    for (idx, op) in operators.iter().enumerate() {
        for alpha in [0.25, 0.5, 0.75] {
            let s = renyi_entropy(op, alpha);
            for k in log_grid(op.len()) {
                cases += 1;
                let tail = op.squared_tail(k);
                if tail == 0.0 {
                    continue;
                }
                let bound = analytics::delta_bound(s, k as f64, alpha).expect("valid alpha and k");
                min_slack = min_slack.min(bound - tail.ln());
                if tail.ln() > bound + 1e-12 {
                    failures.push(format!(
                        "operator {idx} α={alpha} K={k}: ln Δ={:.4} > {bound:.4}",
                        tail.ln()
                    ));
                }
            }
        }
    }
    report.metric("cases", cases as f64);
    report.metric("min_log_slack", min_slack);
    report.check(
        "tail_within_bound",
        failures.is_empty(),
        summarize(&failures, cases),
    );
    report
}

/// Untruncated XY propagation of `Z_site` on an open chain of length `len`
/// (τ = 0.05, canonical term order), checked after each step `1..=max_steps`.
pub fn xy_structure(len: usize, site: usize, max_steps: usize) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::XyStructure);
    let tau = 0.05;
    let h = build_xxz_chain(len, 1.0, 1.0, 0.0, Boundary::Open).expect("len >= 2");
    let obs = PauliSum::single(
        PauliWord::single(len, site, Pauli::Z).expect("site in range"),
        1.0,
    );
    let mut evo = HeisenbergEvolution::new(obs.clone(), &h, tau, TruncationPolicy::unbounded())
        .expect("valid run");

    let mut family: Option<String> = None;
    let mut cone: (Option<String>, usize, usize) = (None, 0, 0);
    let mut count: (Option<String>, usize, usize) = (None, 0, 0);
    let mut counts = Vec::with_capacity(max_steps);
    for s in 1..=max_steps {
        if let Err(e) = evo.step() {
            report.check("run", false, format!("step {s}: {e}"));
            return report;
        }
        let r = analytics::xy_structure_check(evo.operator(), site, s);
        counts.push(r.count);
        if let (None, Some(w)) = (&family, &r.family_witness) {
            family = Some(format!("step {s}: {w}"));
        }
        if let Some(w) = &r.light_cone_witness {
            if cone.0.is_none() {
                cone.0 = Some(format!("step {s}: {w}"));
            }
            cone.1 += 1;
            cone.2 = s;
        }
        if !r.count_ok() {
            if count.0.is_none() {
                count.0 = Some(format!(
                    "step {s}: {} terms > {}",
                    r.count,
                    r.count_bound.unwrap_or_default()
                ));
            }
            count.1 += 1;
            count.2 = s;
        }
    }
    let describe = |(first, failing, last): (Option<String>, usize, usize)| match first {
        None => format!("{max_steps} steps"),
        Some(f) => {
            format!("{failing} of {max_steps} steps fail, first at {f}, last failing step {last}")
        }
    };
    report.check(
        "family",
        family.is_none(),
        family.unwrap_or_else(|| format!("{max_steps} steps")),
    );
    report.check("light_cone", cone.0.is_none(), describe(cone));
    report.check("count_bound", count.0.is_none(), describe(count));
    if let Some(&last) = counts.last() {
        report.metric("final_count", last as f64);
        // log-log slope of count(s) over steps 10..40, before finite-size saturation; 1 is linear
        if counts.len() >= 40 {
            let exponent = (counts[39] as f64 / counts[9] as f64).ln() / 4f64.ln();
            report.metric("growth_exponent_10_40", exponent);
        }
    }
    for s in [1, 10, 50, 100, 200] {
        if s <= counts.len() {
            report.metric(&format!("count_step_{s}"), counts[s - 1] as f64);
        }
    }

    let interacting = build_xxz_chain(len, 1.0, 1.0, 0.5, Boundary::Open).expect("len >= 2");
    let mut evo = HeisenbergEvolution::new(
        obs.clone(),
        &interacting,
        tau,
        TruncationPolicy::unbounded(),
    )
    .expect("valid run");
    let mut witness = None;
    for s in 1..=max_steps.min(5) {
        evo.step().expect("untruncated run");
        if let Some(w) = analytics::xy_structure_check(evo.operator(), site, s).family_witness {
            witness = Some(format!("step {s}: {w}"));
            break;
        }
    }
    report.check(
        "interacting_witness",
        witness.is_some(),
        witness.unwrap_or_else(|| "no witness for Jz=0.5".into()),
    );

    let periodic = build_xxz_chain(len, 1.0, 1.0, 0.0, Boundary::Periodic).expect("len >= 2");
    let mut evo = HeisenbergEvolution::new(obs, &periodic, tau, TruncationPolicy::unbounded())
        .expect("valid run");
    let mut first_outside = None;
    for s in 1..=max_steps.min(len) {
        evo.step().expect("untruncated run");
        if analytics::xy_structure_check(evo.operator(), site, s)
            .family_witness
            .is_some()
        {
            first_outside = Some(s);
            break;
        }
    }
    report.notes.push(match first_outside {
        Some(s) => format!("periodic chain: terms leave the five-pattern family at step {s}"),
        None => "periodic chain: all terms stay in the five-pattern family".into(),
    });
    report
}

/// Renormalized weight truncation of random `n = 6` operators at `M ∈ {2, 3, 4}`
/// against the Haar-product Monte-Carlo estimate, allowing four standard errors.
pub fn scrambling(operators: usize, samples: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Scrambling);
    let mut rng = rng(seed);
    let mut failures = Vec::new();
    let mut cases = 0usize;
    let mut max_ratio: f64 = 0.0;
    for idx in 0..operators {
        let op = random_normalized_sum(&mut rng, 6, 40, false);
        for m in [2usize, 3, 4] {
            cases += 1;
            let mut approx = weight_truncate(&op, m).sum;
            approx.rescale_to_norm(op.pauli_norm2());
            let bound = analytics::weight_truncation_bound(&op, m);
            let mc_seed = seed.wrapping_add((idx * 16 + m) as u64);
            match oracle::local_scrambling_mc(&op, &approx, samples, mc_seed) {
                Ok((mean, se)) => {
                    max_ratio = max_ratio.max(mean / bound);
                    if mean > bound + 4.0 * se {
                        failures.push(format!(
                            "operator {idx} M={m}: {mean:.4e} > {bound:.4e} + 4·{se:.2e}"
                        ));
                    }
                }
                Err(e) => failures.push(format!("operator {idx} M={m}: {e}")),
            }
        }
    }
    report.metric("cases", cases as f64);
    report.metric("max_mean_to_bound_ratio", max_ratio);
    report.check(
        "mean_within_bound",
        failures.is_empty(),
        summarize(&failures, cases),
    );
    report
}
