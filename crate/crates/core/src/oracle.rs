//! Dense reference implementations for small systems.
//!
//! Nothing here goes through the sparse engine's Pauli multiplication: Pauli
//! words act on computational basis states through their bit masks,
//! `P|b⟩ = i^{|x∧z|} (-1)^{|z∧b|} |b ⊕ x⟩` (site `j` is bit `j` of `b`).
//!
//! Gate order matches the engine. The engine conjugates the observable by the
//! Hamiltonian terms in list order, so on the state side each Trotter step
//! applies `exp(-i w_j τ P_j)` in reverse list order.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::Hamiltonian;
use crate::pauli::{Pauli, PauliWord};
use crate::propagation::ProductState;
use crate::sparse::PauliSum;

/// Pure product states are simulated as state vectors up to this size.
pub const MAX_QUBITS_PURE: usize = 12;
/// Mixed product states need a density matrix.
pub const MAX_QUBITS_MIXED: usize = 10;
/// Full `4^n` coefficient extraction.
pub const MAX_QUBITS_DECOMPOSITION: usize = 8;
pub const MAX_QUBITS_SCRAMBLING: usize = 10;

/// Coefficients below this are dropped from dense decompositions.
const DECOMPOSITION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{what} is limited to {cap} qubits, got {n}")]
    TooManyQubits {
        what: &'static str,
        n: usize,
        cap: usize,
    },
    #[error("{what} acts on {got} qubits, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("evolved operator has imaginary Pauli coefficient {0:e}")]
    NonHermitian(f64),
}

fn check_cap(what: &'static str, n: usize, cap: usize) -> Result<(), OracleError> {
    if n > cap {
        Err(OracleError::TooManyQubits { what, n, cap })
    } else {
        Ok(())
    }
}

fn check_dim(what: &'static str, got: usize, expected: usize) -> Result<(), OracleError> {
    if got != expected {
        Err(OracleError::DimensionMismatch {
            what,
            got,
            expected,
        })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Masks {
    x: usize,
    z: usize,
    /// `i^{|x∧z|}`
    base: Complex64,
}

impl Masks {
    fn new(x: usize, z: usize) -> Self {
        let base = match (x & z).count_ones() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Masks { x, z, base }
    }

    fn from_word(w: &PauliWord) -> Self {
        let (mut x, mut z) = (0usize, 0usize);
        for (site, p) in w.support() {
            match p {
                Pauli::X => x |= 1 << site,
                Pauli::Z => z |= 1 << site,
                Pauli::Y => {
                    x |= 1 << site;
                    z |= 1 << site;
                }
                Pauli::I => {}
            }
        }
        Masks::new(x, z)
    }

    /// `P|b⟩ = phase · |b ⊕ x⟩`.
    #[inline]
    fn phase(&self, b: usize) -> Complex64 {
        if (self.z & b).count_ones() % 2 == 1 {
            -self.base
        } else {
            self.base
        }
    }
}

struct Gate {
    masks: Masks,
    cos: f64,
    sin: f64,
}

fn gates(h: &Hamiltonian, tau: f64) -> Vec<Gate> {
    h.terms()
        .iter()
        .map(|t| {
            let a = t.weight * tau;
            Gate {
                masks: Masks::from_word(&t.word),
                cos: a.cos(),
                sin: a.sin(),
            }
        })
        .collect()
}

const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);
const PLUS_I: Complex64 = Complex64::new(0.0, 1.0);

/// `ψ ← (cos·I - i sin·P) ψ`
fn gate_on_vector(g: &Gate, psi: &mut [Complex64]) {
    let x = g.masks.x;
    let old = psi.to_vec();
    for (b, out) in psi.iter_mut().enumerate() {
        let k = b ^ x;
        *out = g.cos * old[b] + MINUS_I * g.sin * g.masks.phase(k) * old[k];
    }
}

/// Row-major square matrix of side `dim`.
struct Dense {
    dim: usize,
    a: Vec<Complex64>,
}

impl Dense {
    fn zeros(dim: usize) -> Self {
        Dense {
            dim,
            a: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// `M ← G M` (`left_adjoint = false`) or `M ← G† M`.
    fn mul_left(&mut self, g: &Gate, left_adjoint: bool) {
        let d = self.dim;
        let old = self.a.clone();
        self.a.par_chunks_mut(d).enumerate().for_each(|(r, row)| {
            let k = r ^ g.masks.x;
            // G[r,k] = -i sin φ_k, G†[r,k] = conj(G[k,r]) = i sin conj(φ_r)
            let off = if left_adjoint {
                PLUS_I * g.sin * g.masks.phase(r).conj()
            } else {
                MINUS_I * g.sin * g.masks.phase(k)
            };
            let (src_r, src_k) = (&old[r * d..(r + 1) * d], &old[k * d..(k + 1) * d]);
            for c in 0..d {
                row[c] = g.cos * src_r[c] + off * src_k[c];
            }
        });
    }

    /// `M ← M G` (`right_adjoint = false`) or `M ← M G†`.
    fn mul_right(&mut self, g: &Gate, right_adjoint: bool) {
        let d = self.dim;
        let offs: Vec<Complex64> = (0..d)
            .map(|c| {
                let k = c ^ g.masks.x;
                // G[k,c] = -i sin φ_c, G†[k,c] = conj(G[c,k]) = i sin conj(φ_k)
                if right_adjoint {
                    PLUS_I * g.sin * g.masks.phase(k).conj()
                } else {
                    MINUS_I * g.sin * g.masks.phase(c)
                }
            })
            .collect();
        self.a.par_chunks_mut(d).for_each(|row| {
            let old = row.to_vec();
            for c in 0..d {
                row[c] = g.cos * old[c] + offs[c] * old[c ^ g.masks.x];
            }
        });
    }

    fn from_sum(sum: &PauliSum) -> Self {
        let d = 1usize << sum.num_qubits();
        let mut m = Dense::zeros(d);
        for (w, c) in sum.iter() {
            let p = Masks::from_word(w);
            for k in 0..d {
                m.a[(k ^ p.x) * d + k] += c * p.phase(k);
            }
        }
        m
    }

    /// `tr(P M) = Σ_k φ_k M[k, k ⊕ x]`.
    fn trace_with(&self, p: &Masks) -> Complex64 {
        let d = self.dim;
        (0..d).map(|k| p.phase(k) * self.a[k * d + (k ^ p.x)]).sum()
    }
}

fn single_qubit_density(b: [f64; 3]) -> [[Complex64; 2]; 2] {
    let h = 0.5;
    [
        [
            Complex64::new(h * (1.0 + b[2]), 0.0),
            Complex64::new(h * b[0], -h * b[1]),
        ],
        [
            Complex64::new(h * b[0], h * b[1]),
            Complex64::new(h * (1.0 - b[2]), 0.0),
        ],
    ]
}

/// Spinor with the given unit Bloch vector.
fn single_qubit_spinor(b: [f64; 3]) -> [Complex64; 2] {
    let up = (0.5 * (1.0 + b[2])).sqrt();
    if up < 1e-300 {
        return [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    }
    let denom = (2.0 * (1.0 + b[2])).sqrt();
    [
        Complex64::new(up, 0.0),
        Complex64::new(b[0] / denom, b[1] / denom),
    ]
}

fn is_pure(state: &ProductState) -> bool {
    state
        .bloch()
        .iter()
        .all(|b| ((b[0] * b[0] + b[1] * b[1] + b[2] * b[2]) - 1.0).abs() < 1e-12)
}

enum DenseState {
    Pure(Vec<Complex64>),
    Mixed(Dense),
}

impl DenseState {
    fn new(state: &ProductState) -> Result<Self, OracleError> {
        let n = state.num_qubits();
        let d = 1usize << n;
        if is_pure(state) {
            check_cap("pure-state oracle", n, MAX_QUBITS_PURE)?;
            let spinors: Vec<[Complex64; 2]> = state
                .bloch()
                .iter()
                .map(|&b| single_qubit_spinor(b))
                .collect();
            let psi = (0..d)
                .map(|b| (0..n).map(|j| spinors[j][(b >> j) & 1]).product())
                .collect();
            Ok(DenseState::Pure(psi))
        } else {
            check_cap("mixed-state oracle", n, MAX_QUBITS_MIXED)?;
            let rhos: Vec<_> = state
                .bloch()
                .iter()
                .map(|&b| single_qubit_density(b))
                .collect();
            let mut m = Dense::zeros(d);
            for r in 0..d {
                for c in 0..d {
                    m.a[r * d + c] = (0..n)
                        .map(|j| rhos[j][(r >> j) & 1][(c >> j) & 1])
                        .product();
                }
            }
            Ok(DenseState::Mixed(m))
        }
    }

    fn trotter_step(&mut self, gates: &[Gate]) {
        for g in gates.iter().rev() {
            match self {
                DenseState::Pure(psi) => gate_on_vector(g, psi),
                DenseState::Mixed(rho) => {
                    rho.mul_left(g, false);
                    rho.mul_right(g, true);
                }
            }
        }
    }

    fn expectation(&self, obs: &[(Masks, f64)]) -> f64 {
        let total: Complex64 = match self {
            DenseState::Pure(psi) => obs
                .iter()
                .map(|(p, c)| {
                    let v: Complex64 = (0..psi.len())
                        .map(|k| psi[k ^ p.x].conj() * p.phase(k) * psi[k])
                        .sum();
                    *c * v
                })
                .sum(),
            DenseState::Mixed(rho) => obs.iter().map(|(p, c)| *c * rho.trace_with(p)).sum(),
        };
        total.re
    }
}

/// `(step, time, ⟨O(t)⟩)` rows from the dense Trotter evolution.
///
/// Rows are emitted at step 0, every `record_every` steps, and at the final step.
pub fn dense_trotter_trajectory(
    h: &Hamiltonian,
    state: &ProductState,
    observable: &PauliSum,
    time: f64,
    steps: usize,
    record_every: usize,
) -> Result<Vec<(usize, f64, f64)>, OracleError> {
    let n = h.num_qubits();
    check_dim("state", state.num_qubits(), n)?;
    check_dim("observable", observable.num_qubits(), n)?;
    let mut dense = DenseState::new(state)?;
    let tau = if steps == 0 { 0.0 } else { time / steps as f64 };
    let gates = gates(h, tau);
    let obs: Vec<(Masks, f64)> = observable
        .iter()
        .map(|(w, c)| (Masks::from_word(w), c))
        .collect();
    let every = record_every.max(1);
    let mut rows = vec![(0, 0.0, dense.expectation(&obs))];
    for s in 1..=steps {
        dense.trotter_step(&gates);
        if s % every == 0 || s == steps {
            rows.push((s, s as f64 * tau, dense.expectation(&obs)));
        }
    }
    Ok(rows)
}

/// `⟨O(t)⟩` after `steps` Trotter steps of size `time / steps`.
pub fn dense_trotter_expectation(
    h: &Hamiltonian,
    state: &ProductState,
    observable: &PauliSum,
    time: f64,
    steps: usize,
) -> Result<f64, OracleError> {
    let rows = dense_trotter_trajectory(h, state, observable, time, steps, steps.max(1))?;
    Ok(rows.last().map(|r| r.2).unwrap_or_default())
}

/// Exact Pauli decomposition of the Trotter-evolved observable, `c_P = tr(P O(t)) / 2^n`.
pub fn dense_heisenberg_coefficients(
    h: &Hamiltonian,
    observable: &PauliSum,
    time: f64,
    steps: usize,
) -> Result<PauliSum, OracleError> {
    let n = h.num_qubits();
    check_cap("dense decomposition", n, MAX_QUBITS_DECOMPOSITION)?;
    check_dim("observable", observable.num_qubits(), n)?;
    let mut m = Dense::from_sum(observable);
    let tau = if steps == 0 { 0.0 } else { time / steps as f64 };
    let gates = gates(h, tau);
    for _ in 0..steps {
        for g in &gates {
            m.mul_left(g, true);
            m.mul_right(g, false);
        }
    }
    decompose(&m, n)
}

fn decompose(m: &Dense, n: usize) -> Result<PauliSum, OracleError> {
    let d = 1usize << n;
    let scale = 1.0 / d as f64;
    let coeffs: Vec<(usize, usize, Complex64)> = (0..d)
        .into_par_iter()
        .flat_map_iter(|x| {
            (0..d).filter_map(move |z| {
                let c = m.trace_with(&Masks::new(x, z)) * scale;
                (c.norm() > DECOMPOSITION_FLOOR).then_some((x, z, c))
            })
        })
        .collect();
    let mut out = PauliSum::with_capacity(n, coeffs.len());
    for (x, z, c) in coeffs {
        if c.im.abs() > 1e-9 {
            return Err(OracleError::NonHermitian(c.im));
        }
        let sites: Vec<(usize, Pauli)> = (0..n)
            .filter_map(|j| {
                let p = Pauli::from_bits((x >> j) & 1 == 1, (z >> j) & 1 == 1);
                (p != Pauli::I).then_some((j, p))
            })
            .collect();
        let word = PauliWord::from_sites(n, &sites).expect("n within decomposition cap");
        out.accumulate_with(word, c.re, 0.0)
            .expect("matching qubit count");
    }
    Ok(out)
}

/// Monte-Carlo estimate of `E_ρ |⟨Ô⟩_ρ - ⟨O⟩_ρ|²` over `ρ = V|0⟩⟨0|V†`, `V` a product of
/// independent Haar single-qubit unitaries. Returns `(mean, standard error)`.
///
/// Sample `i` draws from its own ChaCha stream, so results do not depend on the thread count.
pub fn local_scrambling_mc(
    exact: &PauliSum,
    approx: &PauliSum,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), OracleError> {
    let n = exact.num_qubits();
    check_cap("scrambling check", n, MAX_QUBITS_SCRAMBLING)?;
    check_dim("approximant", approx.num_qubits(), n)?;
    if samples < 2 {
        return Err(OracleError::TooFewSamples(samples));
    }
    let mut diff: Vec<(PauliWord, f64)> = approx
        .iter()
        .map(|(w, c)| (w.clone(), c - exact.get(w)))
        .collect();
    diff.extend(
        exact
            .iter()
            .filter(|(w, _)| approx.get(w) == 0.0)
            .map(|(w, c)| (w.clone(), -c)),
    );
    let diff: Vec<(Vec<(usize, Pauli)>, f64)> = diff
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|(w, c)| (w.support().collect(), c))
        .collect();

    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let bloch: Vec<[f64; 3]> = (0..n).map(|_| haar_bloch(&mut rng)).collect();
            let e: f64 = diff
                .iter()
                .map(|(sup, c)| {
                    c * sup
                        .iter()
                        .map(|&(j, p)| match p {
                            Pauli::X => bloch[j][0],
                            Pauli::Y => bloch[j][1],
                            Pauli::Z => bloch[j][2],
                            Pauli::I => 1.0,
                        })
                        .product::<f64>()
                })
                .sum();
            e * e
        })
        .collect();
    let m = samples as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}

/// Bloch vector of `V|0⟩` for Haar `V`: first column from a normalized complex Gaussian pair.
fn haar_bloch(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let a = Complex64::new(g[0], g[1]);
    let b = Complex64::new(g[2], g[3]);
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / norm, b / norm);
    let ab = a.conj() * b;
    [2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr()]
}
