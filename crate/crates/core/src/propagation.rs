//! Trotterized Heisenberg-picture back-propagation of sparse Pauli observables.
//!
//! Each Trotter step conjugates the observable by `exp(-i w_i P_i τ)` for every
//! Hamiltonian term in list order, truncating after each term. A word that
//! commutes with `P_i` passes through; an anticommuting word `W` becomes
//! `cos(2wτ) W + i sin(2wτ) P_i W`, which is real because `P_i W = ±i Q`.
//! After `s` steps the operator is the Heisenberg-evolved observable at time
//! `sτ`, so one run yields the whole trajectory.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::analytics;
use crate::hamiltonian::Hamiltonian;
use crate::pauli::{Pauli, PauliWord, Phase};
use crate::sparse::{PauliSum, SparseError, TruncationPolicy};

/// Norm ratios below this abort the run.
pub const NORM_UNDERFLOW: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("dimension mismatch: {what} has {got} qubits, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("observable has no terms")]
    EmptyObservable,
    #[error("operator collapsed to zero at step {step}, hamiltonian term {term}")]
    Collapsed { step: usize, term: usize },
    #[error("norm ratio {ratio:e} underflowed at step {step}")]
    NormUnderflow { step: usize, ratio: f64 },
    #[error("rotation produced an imaginary coefficient (phase i^{0})")]
    NonRealResidue(u8),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid product state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// Per-site Bloch vectors `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of a product state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    bloch: Vec<[f64; 3]>,
}

impl ProductState {
    pub fn new(bloch: Vec<[f64; 3]>) -> Result<Self, PropagationError> {
        if bloch.is_empty() {
            return Err(PropagationError::InvalidState("no sites".into()));
        }
        for (j, b) in bloch.iter().enumerate() {
            let r2: f64 = b.iter().map(|v| v * v).sum();
            if !r2.is_finite() || r2 > 1.0 + 1e-12 {
                return Err(PropagationError::InvalidState(format!(
                    "site {j} Bloch vector {b:?} has norm > 1"
                )));
            }
        }
        Ok(ProductState { bloch })
    }

    /// `|↑↓↑↓…⟩`, spin up (`⟨Z⟩ = +1`) on even sites.
    pub fn neel(n: usize) -> Self {
        let bloch = (0..n)
            .map(|j| [0.0, 0.0, if j % 2 == 0 { 1.0 } else { -1.0 }])
            .collect();
        ProductState { bloch }
    }

    pub fn uniform(n: usize, b: [f64; 3]) -> Result<Self, PropagationError> {
        Self::new(vec![b; n])
    }

    pub fn num_qubits(&self) -> usize {
        self.bloch.len()
    }

    pub fn bloch(&self) -> &[[f64; 3]] {
        &self.bloch
    }

    /// Single-site expectation of `p` at `site`.
    #[inline]
    pub fn single(&self, site: usize, p: Pauli) -> f64 {
        match p {
            Pauli::I => 1.0,
            Pauli::X => self.bloch[site][0],
            Pauli::Y => self.bloch[site][1],
            Pauli::Z => self.bloch[site][2],
        }
    }
}

/// `tr(O ρ)` for `ρ = ⊗_j ρ_j`: each word contributes `c ∏_j ⟨P_j⟩_{ρ_j}`.
pub fn expectation_product_state(
    sum: &PauliSum,
    state: &ProductState,
) -> Result<f64, PropagationError> {
    if sum.num_qubits() != state.num_qubits() {
        return Err(PropagationError::DimensionMismatch {
            what: "state",
            got: state.num_qubits(),
            expected: sum.num_qubits(),
        });
    }
    Ok(sum
        .iter()
        .map(|(w, c)| {
            let mut v = c;
            for (site, p) in w.support() {
                v *= state.single(site, p);
                if v == 0.0 {
                    break;
                }
            }
            v
        })
        .sum())
}

/// Conjugates every term by `exp(-i θ/2 · generator)` in place, with `θ = 2wτ`.
///
/// Returns the squared mass dropped by `prune_eps`.
pub(crate) fn rotate_in_place(
    sum: &mut PauliSum,
    generator: &PauliWord,
    cos: f64,
    sin: f64,
    prune_eps: f64,
) -> Result<f64, PropagationError> {
    if sin == 0.0 {
        return Ok(0.0);
    }
    let mut spawned: Vec<(PauliWord, f64)> = Vec::new();
    let mut any_small = false;
    for (word, c) in sum.terms_mut().iter_mut() {
        if !generator.anticommutes_unchecked(word) {
            continue;
        }
        let (q, k) = generator.multiply_unchecked(word);
        // i·(P W) = i·i^k·Q
        let sign = (Phase::I * k)
            .as_real_sign()
            .ok_or(PropagationError::NonRealResidue(k.exponent()))?;
        spawned.push((q, sign * sin * *c));
        *c *= cos;
        any_small |= c.abs() <= prune_eps;
    }
    let mut pruned = 0.0;
    if any_small {
        sum.terms_mut().retain(|_, c| {
            let keep = c.abs() > prune_eps;
            if !keep {
                pruned += *c * *c;
            }
            keep
        });
    }
    for (q, v) in spawned {
        pruned += sum.add_unchecked(q, v, prune_eps);
    }
    Ok(pruned)
}

/// One Hamiltonian-term conjugation followed by the policy's truncation.
pub fn conjugate_rotation(
    sum: &PauliSum,
    generator: &PauliWord,
    weight: f64,
    tau: f64,
    policy: &TruncationPolicy,
) -> Result<PauliSum, PropagationError> {
    if generator.num_qubits() != sum.num_qubits() {
        return Err(PropagationError::DimensionMismatch {
            what: "generator",
            got: generator.num_qubits(),
            expected: sum.num_qubits(),
        });
    }
    let mut out = sum.clone();
    let theta = 2.0 * weight * tau;
    rotate_in_place(
        &mut out,
        generator,
        theta.cos(),
        theta.sin(),
        policy.prune_eps,
    )?;
    policy.apply(&mut out);
    Ok(out)
}

/// Inputs of a propagation run; `τ = time / steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub time: f64,
    pub steps: usize,
    pub policy: TruncationPolicy,
    pub record_every: usize,
    /// Rescale to the initial norm after every step instead of only at the end.
    pub rescale_each_step: bool,
    /// Attach OSE samples (α = 1/2 and Shannon) of the normalized operator to each record.
    pub record_ose: bool,
}

impl RunConfig {
    pub fn new(time: f64, steps: usize, policy: TruncationPolicy) -> Self {
        RunConfig {
            time,
            steps,
            policy,
            record_every: 1,
            rescale_each_step: false,
            record_ose: false,
        }
    }

    /// Steps chosen as `round(time / tau)`, at least one.
    pub fn from_time_step(time: f64, tau: f64, policy: TruncationPolicy) -> Self {
        let steps = if tau > 0.0 {
            (time / tau).round().max(1.0) as usize
        } else {
            1
        };
        Self::new(time, steps, policy)
    }

    pub fn tau(&self) -> f64 {
        self.time / self.steps as f64
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        let bad = |m: &str| Err(PropagationError::InvalidConfig(m.to_string()));
        if !self.time.is_finite() || self.time < 0.0 {
            return bad("t must be finite and non-negative");
        }
        if self.steps == 0 {
            return bad("N must be at least 1");
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1");
        }
        self.policy.validate()?;
        Ok(())
    }

    /// Whether a trajectory record is emitted after `step`.
    pub fn records_at(&self, step: usize) -> bool {
        step.is_multiple_of(self.record_every) || step == self.steps
    }
}

/// Snapshot after a completed Trotter step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Completed Trotter steps.
    pub step: usize,
    pub time: f64,
    /// Expectation of the norm-rescaled operator.
    pub value: f64,
    pub terms: usize,
    /// Cumulative squared coefficient mass removed by truncation and pruning.
    pub discarded_mass: f64,
    /// `‖Ô_s‖ / ‖O‖` before rescaling.
    pub norm_ratio: f64,
    /// `(S^{1/2}, S^{Shannon})` when requested.
    pub ose: Option<(f64, f64)>,
}

/// Step-by-step Heisenberg evolution of one observable.
#[derive(Debug, Clone)]
pub struct HeisenbergEvolution<'h> {
    hamiltonian: &'h Hamiltonian,
    policy: TruncationPolicy,
    tau: f64,
    rotations: Vec<(f64, f64)>,
    operator: PauliSum,
    initial_norm: f64,
    steps_done: usize,
    discarded: f64,
    rescale_each_step: bool,
}

impl<'h> HeisenbergEvolution<'h> {
    pub fn new(
        observable: PauliSum,
        hamiltonian: &'h Hamiltonian,
        tau: f64,
        policy: TruncationPolicy,
    ) -> Result<Self, PropagationError> {
        if observable.is_empty() {
            return Err(PropagationError::EmptyObservable);
        }
        if observable.num_qubits() != hamiltonian.num_qubits() {
            return Err(PropagationError::DimensionMismatch {
                what: "observable",
                got: observable.num_qubits(),
                expected: hamiltonian.num_qubits(),
            });
        }
        policy.validate()?;
        let rotations = hamiltonian
            .terms()
            .iter()
            .map(|t| {
                let theta = 2.0 * t.weight * tau;
                (theta.cos(), theta.sin())
            })
            .collect();
        let initial_norm = observable.pauli_norm2();
        Ok(HeisenbergEvolution {
            hamiltonian,
            policy,
            tau,
            rotations,
            operator: observable,
            initial_norm,
            steps_done: 0,
            discarded: 0.0,
            rescale_each_step: false,
        })
    }

    pub fn rescale_each_step(mut self, on: bool) -> Self {
        self.rescale_each_step = on;
        self
    }

    /// Applies one full Trotter step.
    pub fn step(&mut self) -> Result<(), PropagationError> {
        let step = self.steps_done + 1;
        for (i, (term, &(cos, sin))) in self
            .hamiltonian
            .terms()
            .iter()
            .zip(&self.rotations)
            .enumerate()
        {
            self.discarded += rotate_in_place(
                &mut self.operator,
                &term.word,
                cos,
                sin,
                self.policy.prune_eps,
            )?;
            let out = self.policy.apply(&mut self.operator);
            self.discarded += out.discarded;
            if self.operator.is_empty() {
                return Err(PropagationError::Collapsed { step, term: i });
            }
        }
        let ratio = self.norm_ratio();
        if ratio < NORM_UNDERFLOW {
            return Err(PropagationError::NormUnderflow { step, ratio });
        }
        if self.rescale_each_step {
            self.operator.rescale_to_norm(self.initial_norm);
        }
        self.steps_done = step;
        Ok(())
    }

    pub fn operator(&self) -> &PauliSum {
        &self.operator
    }

    pub fn into_operator(self) -> PauliSum {
        self.operator
    }

    /// Current operator scaled back to the initial norm.
    pub fn rescaled_operator(&self) -> PauliSum {
        let mut op = self.operator.clone();
        op.rescale_to_norm(self.initial_norm);
        op
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn time(&self) -> f64 {
        self.steps_done as f64 * self.tau
    }

    pub fn discarded_mass(&self) -> f64 {
        self.discarded
    }

    pub fn initial_norm(&self) -> f64 {
        self.initial_norm
    }

    pub fn norm_ratio(&self) -> f64 {
        self.operator.pauli_norm2() / self.initial_norm
    }

    /// Expectation of the rescaled operator in `state`.
    pub fn rescaled_expectation(&self, state: &ProductState) -> Result<f64, PropagationError> {
        let raw = expectation_product_state(&self.operator, state)?;
        Ok(raw / self.norm_ratio())
    }

    /// Trajectory record for the current step; OSE samples use the unit-norm operator.
    pub fn record(
        &self,
        state: &ProductState,
        with_ose: bool,
    ) -> Result<TrajectoryRecord, PropagationError> {
        let ose = if with_ose {
            let mut normalized = self.operator.clone();
            normalized.rescale_to_norm(1.0);
            let half = analytics::renyi_entropy(&normalized, 0.5);
            let shannon = analytics::renyi_entropy(&normalized, 1.0);
            Some((half, shannon))
        } else {
            None
        };
        Ok(TrajectoryRecord {
            step: self.steps_done,
            time: self.time(),
            value: self.rescaled_expectation(state)?,
            terms: self.operator.len(),
            discarded_mass: self.discarded,
            norm_ratio: self.norm_ratio(),
            ose,
        })
    }
}

/// Final operator (rescaled to the input norm) and the recorded trajectory.
#[derive(Debug, Clone)]
pub struct Backpropagation {
    pub operator: PauliSum,
    pub trajectory: Vec<TrajectoryRecord>,
}

/// Runs the full back-propagation of `observable` and records the trajectory in `state`.
pub fn backpropagate(
    observable: &PauliSum,
    hamiltonian: &Hamiltonian,
    cfg: &RunConfig,
    state: &ProductState,
) -> Result<Backpropagation, PropagationError> {
    cfg.validate()?;
    check_state(state, hamiltonian)?;
    let mut evo = HeisenbergEvolution::new(observable.clone(), hamiltonian, cfg.tau(), cfg.policy)?
        .rescale_each_step(cfg.rescale_each_step);
    let mut trajectory = Vec::new();
    for step in 1..=cfg.steps {
        evo.step()?;
        if cfg.records_at(step) {
            trajectory.push(evo.record(state, cfg.record_ose)?);
        }
    }
    Ok(Backpropagation {
        operator: evo.rescaled_operator(),
        trajectory,
    })
}

fn check_state(state: &ProductState, hamiltonian: &Hamiltonian) -> Result<(), PropagationError> {
    if state.num_qubits() != hamiltonian.num_qubits() {
        return Err(PropagationError::DimensionMismatch {
            what: "state",
            got: state.num_qubits(),
            expected: hamiltonian.num_qubits(),
        });
    }
    Ok(())
}

/// How the staggered magnetization is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MagnetizationMode {
    /// Every `Z_l` propagated on its own with budget `K`.
    #[default]
    PerSite,
    /// The signed sum propagated as one operator under a single budget.
    Joint,
}

impl FromStr for MagnetizationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_site" => Ok(MagnetizationMode::PerSite),
            "joint" => Ok(MagnetizationMode::Joint),
            other => Err(format!(
                "unknown mode {other:?} (expected per_site or joint)"
            )),
        }
    }
}

impl fmt::Display for MagnetizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MagnetizationMode::PerSite => "per_site",
            MagnetizationMode::Joint => "joint",
        })
    }
}

/// `m_z = (1/L) Σ_l (-1)^l ⟨S^z_l⟩` as one operator, `S^z = Z/2`, `+` on even sites.
pub fn staggered_observable(len: usize) -> Result<PauliSum, PropagationError> {
    let mut o = PauliSum::new(len);
    for l in 0..len {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        o.accumulate(
            PauliWord::single(len, l, Pauli::Z).map_err(SparseError::from)?,
            sign / (2.0 * len as f64),
        )?;
    }
    Ok(o)
}

/// Staggered-magnetization time series, one record per recorded step.
pub fn staggered_magnetization(
    hamiltonian: &Hamiltonian,
    state: &ProductState,
    cfg: &RunConfig,
    mode: MagnetizationMode,
) -> Result<Vec<TrajectoryRecord>, PropagationError> {
    cfg.validate()?;
    check_state(state, hamiltonian)?;
    let len = hamiltonian.num_qubits();
    match mode {
        MagnetizationMode::Joint => {
            Ok(backpropagate(&staggered_observable(len)?, hamiltonian, cfg, state)?.trajectory)
        }
        MagnetizationMode::PerSite => {
            let per_site: Vec<Vec<TrajectoryRecord>> = (0..len)
                .into_par_iter()
                .map(|l| {
                    let z = PauliSum::single(
                        PauliWord::single(len, l, Pauli::Z).map_err(SparseError::from)?,
                        1.0,
                    );
                    let single = RunConfig {
                        record_ose: false,
                        ..cfg.clone()
                    };
                    Ok(backpropagate(&z, hamiltonian, &single, state)?.trajectory)
                })
                .collect::<Result<_, PropagationError>>()?;
            let records = per_site[0].len();
            let combined = (0..records)
                .map(|r| {
                    let head = &per_site[0][r];
                    let mut value = 0.0;
                    let mut terms = 0;
                    let mut discarded = 0.0;
                    let mut norm_sq = 0.0;
                    for (l, traj) in per_site.iter().enumerate() {
                        let rec = &traj[r];
                        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                        value += sign * rec.value;
                        terms += rec.terms;
                        discarded += rec.discarded_mass;
                        norm_sq += rec.norm_ratio * rec.norm_ratio;
                    }
                    TrajectoryRecord {
                        step: head.step,
                        time: head.time,
                        value: value / (2.0 * len as f64),
                        terms,
                        discarded_mass: discarded,
                        norm_ratio: (norm_sq / len as f64).sqrt(),
                        ose: None,
                    }
                })
                .collect();
            Ok(combined)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_xxz_chain, Boundary};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn w(s: &str) -> PauliWord {
        s.parse().unwrap()
    }

    fn sum(terms: &[(&str, f64)]) -> PauliSum {
        let n = terms[0].0.len();
        PauliSum::from_terms(n, terms.iter().map(|&(s, c)| (w(s), c))).unwrap()
    }

    fn close(a: &PauliSum, b: &PauliSum, tol: f64) -> bool {
        a.iter().all(|(w, c)| (b.get(w) - c).abs() <= tol)
            && b.iter().all(|(w, c)| (a.get(w) - c).abs() <= tol)
    }

    #[test]
    fn rotation_about_z_turns_x_toward_y() {
        // e^{iθZ/2} X e^{-iθZ/2} = cos θ X − sin θ Y
        let p = TruncationPolicy::unbounded();
        let got =
            conjugate_rotation(&sum(&[("X", 1.0)]), &w("Z"), 1.0, FRAC_PI_4 / 2.0, &p).unwrap();
        assert!(close(
            &got,
            &sum(&[("X", SQRT_2 / 2.0), ("Y", -SQRT_2 / 2.0)]),
            1e-15
        ));

        let got = conjugate_rotation(&sum(&[("Z", 1.0)]), &w("Z"), 1.0, 0.37, &p).unwrap();
        assert_eq!(got, sum(&[("Z", 1.0)]));

        let got =
            conjugate_rotation(&sum(&[("X", 1.0)]), &w("Z"), 1.0, FRAC_PI_2 / 2.0, &p).unwrap();
        assert_eq!(got, sum(&[("Y", -1.0)]));
    }

    #[test]
    fn rotation_applies_truncation() {
        let got = conjugate_rotation(
            &sum(&[("XI", 1.0)]),
            &w("ZI"),
            1.0,
            0.1,
            &TruncationPolicy::top_k(1),
        )
        .unwrap();
        assert_eq!(got.len(), 1);
        assert!(got.get(&w("XI")) > 0.9);
    }

    #[test]
    fn single_xx_step_closed_form() {
        let h = Hamiltonian::new(2, [(1.0, w("XX"))]).unwrap();
        for t in [0.0, 0.3, 1.1, 2.5] {
            let cfg = RunConfig::new(t, 1, TruncationPolicy::unbounded());
            let out =
                backpropagate(&sum(&[("ZI", 1.0)]), &h, &cfg, &ProductState::neel(2)).unwrap();
            let want = sum(&[("ZI", (2.0 * t).cos()), ("YX", (2.0 * t).sin())]);
            let want = PauliSum::from_terms(2, want.iter().map(|(w, c)| (w.clone(), c))).unwrap();
            assert!(
                close(&out.operator, &want, 1e-14),
                "t={t}: {:?}",
                out.operator
            );
            assert!((out.trajectory[0].value - (2.0 * t).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn commuting_observable_is_untouched() {
        let h = build_xxz_chain(4, 0.0, 0.0, 0.8, Boundary::Open).unwrap();
        let o = sum(&[("ZZII", 1.0)]);
        let cfg = RunConfig::new(3.0, 17, TruncationPolicy::unbounded());
        let out = backpropagate(&o, &h, &cfg, &ProductState::neel(4)).unwrap();
        assert_eq!(out.operator, o);
        assert_eq!(out.trajectory.len(), 17);
        assert!(out
            .trajectory
            .iter()
            .all(|r| r.value == -1.0 && r.terms == 1));
    }

    #[test]
    fn product_state_expectations() {
        let neel = ProductState::neel(4);
        assert_eq!(
            expectation_product_state(&sum(&[("ZIII", 1.0)]), &neel).unwrap(),
            1.0
        );
        assert_eq!(
            expectation_product_state(&sum(&[("XIII", 1.0)]), &neel).unwrap(),
            0.0
        );
        assert_eq!(
            expectation_product_state(&sum(&[("ZIII", 0.5), ("IZII", 0.5)]), &neel).unwrap(),
            0.0
        );
        let tilted = ProductState::new(vec![[0.6, 0.0, 0.8], [0.0, -1.0, 0.0]]).unwrap();
        let v = expectation_product_state(&sum(&[("XY", 2.0), ("ZI", 1.0)]), &tilted).unwrap();
        assert!((v - (0.8 - 2.0 * 0.6)).abs() < 1e-15);
        assert!(expectation_product_state(&sum(&[("ZI", 1.0)]), &neel).is_err());
        assert!(ProductState::new(vec![[1.0, 1.0, 0.0]]).is_err());
    }

    #[test]
    fn staggered_magnetization_starts_at_one_half() {
        let h = build_xxz_chain(6, 1.0, 1.0, 0.5, Boundary::Open).unwrap();
        let cfg = RunConfig::new(0.0, 1, TruncationPolicy::unbounded());
        for mode in [MagnetizationMode::PerSite, MagnetizationMode::Joint] {
            let rec = staggered_magnetization(&h, &ProductState::neel(6), &cfg, mode).unwrap();
            assert_eq!(rec.len(), 1);
            assert!((rec[0].value - 0.5).abs() < 1e-15);
            assert_eq!(rec[0].time, 0.0);
        }
    }

    #[test]
    fn two_site_magnetization_matches_closed_form() {
        // H = XX on two sites from Néel: ⟨Z_0⟩ = cos 2t, ⟨Z_1⟩ = −cos 2t
        let h = Hamiltonian::new(2, [(1.0, w("XX"))]).unwrap();
        let mut cfg = RunConfig::new(2.0, 40, TruncationPolicy::unbounded());
        cfg.record_every = 5;
        for mode in [MagnetizationMode::PerSite, MagnetizationMode::Joint] {
            let rec = staggered_magnetization(&h, &ProductState::neel(2), &cfg, mode).unwrap();
            assert_eq!(rec.len(), 8);
            for r in rec {
                assert!((r.value - 0.5 * (2.0 * r.time).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norm_is_monotone_and_exact_without_truncation() {
        let h = build_xxz_chain(8, 1.0, 0.7, 0.5, Boundary::Periodic).unwrap();
        let o = sum(&[("IIIZIIII", 1.0)]);
        let mut exact =
            HeisenbergEvolution::new(o.clone(), &h, 0.07, TruncationPolicy::unbounded()).unwrap();
        let mut cut = HeisenbergEvolution::new(o, &h, 0.07, TruncationPolicy::top_k(64)).unwrap();
        let mut prev = 1.0;
        for _ in 0..12 {
            exact.step().unwrap();
            cut.step().unwrap();
            assert!((exact.operator().pauli_norm2() - 1.0).abs() < 1e-12);
            let r = cut.norm_ratio();
            assert!(r <= prev + 1e-15 && r > 0.0);
            assert!((r * r + cut.discarded_mass() - 1.0).abs() < 1e-12);
            prev = r;
        }
    }

    #[test]
    fn clifford_angles_permute_terms() {
        // w τ = π/4 everywhere gives 2wτ = π/2
        let h = build_xxz_chain(5, 1.0, 1.0, 1.0, Boundary::Open).unwrap();
        let o = sum(&[("IZIII", 0.6), ("XIIIY", -0.8)]);
        let mut evo =
            HeisenbergEvolution::new(o.clone(), &h, FRAC_PI_4, TruncationPolicy::unbounded())
                .unwrap();
        for _ in 0..6 {
            evo.step().unwrap();
            let op = evo.operator();
            assert_eq!(op.len(), 2);
            let mut mags: Vec<f64> = op.iter().map(|(_, c)| c.abs()).collect();
            mags.sort_by(f64::total_cmp);
            assert!((mags[0] - 0.6).abs() < 1e-12 && (mags[1] - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn collapse_and_bad_inputs_are_reported() {
        let h = Hamiltonian::new(2, [(1.0, w("XX"))]).unwrap();
        let cfg = RunConfig::new(1.0, 3, TruncationPolicy::weight_cap(1));
        let err =
            backpropagate(&sum(&[("ZI", 1.0)]), &h, &cfg, &ProductState::neel(2)).unwrap_err();
        assert_eq!(err, PropagationError::Collapsed { step: 1, term: 0 });

        let cfg = RunConfig::new(1.0, 3, TruncationPolicy::unbounded());
        assert_eq!(
            backpropagate(&PauliSum::new(2), &h, &cfg, &ProductState::neel(2)).unwrap_err(),
            PropagationError::EmptyObservable
        );
        assert!(matches!(
            backpropagate(&sum(&[("ZII", 1.0)]), &h, &cfg, &ProductState::neel(3)),
            Err(PropagationError::DimensionMismatch { .. })
        ));
        let bad = RunConfig::new(1.0, 0, TruncationPolicy::unbounded());
        assert!(matches!(
            bad.validate(),
            Err(PropagationError::InvalidConfig(_))
        ));
    }

    #[test]
    fn records_follow_record_every_and_always_include_last() {
        let h = build_xxz_chain(3, 1.0, 1.0, 0.0, Boundary::Open).unwrap();
        let mut cfg = RunConfig::from_time_step(1.0, 0.1, TruncationPolicy::unbounded());
        assert_eq!(cfg.steps, 10);
        cfg.record_every = 3;
        cfg.record_ose = true;
        let out = backpropagate(&sum(&[("IZI", 1.0)]), &h, &cfg, &ProductState::neel(3)).unwrap();
        let steps: Vec<usize> = out.trajectory.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![3, 6, 9, 10]);
        assert!(out.trajectory.iter().all(|r| r.ose.is_some()));
    }

    #[test]
    fn rescaling_restores_norm() {
        let h = build_xxz_chain(6, 1.0, 1.0, 0.5, Boundary::Open).unwrap();
        let o = sum(&[("IIZIII", 2.0)]);
        let cfg = RunConfig::new(2.0, 20, TruncationPolicy::top_k(16));
        let out = backpropagate(&o, &h, &cfg, &ProductState::neel(6)).unwrap();
        assert!((out.operator.pauli_norm2() - 2.0).abs() < 1e-12);
        assert!(out.trajectory.last().unwrap().norm_ratio < 1.0);
        assert!(out.operator.len() <= 16);
    }
}
