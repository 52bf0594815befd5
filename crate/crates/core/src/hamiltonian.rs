//! Ordered Pauli-sum Hamiltonians. The term order is the Trotter order.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::pauli::{Pauli, PauliError, PauliWord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error("chain length must be at least 2, got {0}")]
    ChainTooShort(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("hamiltonian has no terms")]
    Empty,
    #[error("term {0} is the identity word")]
    IdentityTerm(usize),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

impl FromStr for Boundary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open" | "obc" => Ok(Boundary::Open),
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            other => Err(format!(
                "unknown boundary {other:?} (expected open or periodic)"
            )),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub weight: f64,
    pub word: PauliWord,
}

/// `H = Σ_i w_i P_i`, applied in list order within each Trotter step.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n: usize,
    terms: Vec<HamiltonianTerm>,
}

impl Hamiltonian {
    /// Zero weights are dropped; identity words are rejected.
    pub fn new(
        n: usize,
        terms: impl IntoIterator<Item = (f64, PauliWord)>,
    ) -> Result<Self, HamiltonianError> {
        let mut out = Vec::new();
        for (idx, (weight, word)) in terms.into_iter().enumerate() {
            if word.num_qubits() != n {
                return Err(PauliError::LengthMismatch {
                    left: n,
                    right: word.num_qubits(),
                }
                .into());
            }
            if word.is_identity() {
                return Err(HamiltonianError::IdentityTerm(idx));
            }
            if weight != 0.0 {
                out.push(HamiltonianTerm { weight, word });
            }
        }
        if out.is_empty() {
            return Err(HamiltonianError::Empty);
        }
        Ok(Hamiltonian { n, terms: out })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Comma-separated `weight*word` list, echoed into output headers.
    pub fn order_summary(&self, max_terms: usize) -> String {
        let mut s = String::new();
        for (i, t) in self.terms.iter().take(max_terms).enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}*{}", t.weight, compact_word(&t.word));
        }
        if self.terms.len() > max_terms {
            let _ = write!(s, ",... ({} terms)", self.terms.len());
        }
        s
    }

    /// File form: `<weight> <pauli-string>` per line, weights with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            let _ = writeln!(s, "{:.16e} {}", t.weight, t.word);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, HamiltonianError> {
        let mut n: Option<usize> = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |msg: String| HamiltonianError::Parse { line, msg };
            let mut parts = trimmed.split_whitespace();
            let (Some(ws), Some(ps), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err("expected `<weight> <pauli-string>`".into()));
            };
            let weight: f64 = ws.parse().map_err(|_| err(format!("bad weight {ws:?}")))?;
            if !weight.is_finite() {
                return Err(err("weight is not finite".into()));
            }
            if weight == 0.0 {
                return Err(err("zero weight".into()));
            }
            let word: PauliWord = ps.parse().map_err(|e: PauliError| err(e.to_string()))?;
            if word.is_identity() {
                return Err(err("identity word".into()));
            }
            match n {
                None => n = Some(word.num_qubits()),
                Some(m) if m != word.num_qubits() => {
                    return Err(err(format!(
                        "word length {} differs from {}",
                        word.num_qubits(),
                        m
                    )));
                }
                _ => {}
            }
            terms.push(HamiltonianTerm { weight, word });
        }
        let Some(n) = n else {
            return Err(HamiltonianError::Empty);
        };
        Ok(Hamiltonian { n, terms })
    }
}

fn compact_word(w: &PauliWord) -> String {
    let sup: Vec<String> = w
        .support()
        .map(|(j, p)| format!("{}{}", p.as_char(), j))
        .collect();
    sup.join("")
}

/// XXZ-type chain `Σ Jx X_i X_{i+1} + Jy Y_i Y_{i+1} + Jz Z_i Z_{i+1}`.
///
/// Terms come bond by bond (`i = 0..L-2`, then the wrap bond `(L-1, 0)` when periodic),
/// `XX`, `YY`, `ZZ` within a bond; zero couplings are omitted.
pub fn build_xxz_chain(
    len: usize,
    jx: f64,
    jy: f64,
    jz: f64,
    boundary: Boundary,
) -> Result<Hamiltonian, HamiltonianError> {
    if len < 2 {
        return Err(HamiltonianError::ChainTooShort(len));
    }
    let mut bonds: Vec<(usize, usize)> = (0..len - 1).map(|i| (i, i + 1)).collect();
    // a 2-site ring would just double the single bond
    if boundary == Boundary::Periodic && len > 2 {
        bonds.push((len - 1, 0));
    }
    let mut terms = Vec::with_capacity(3 * bonds.len());
    for (a, b) in bonds {
        for (j, p) in [(jx, Pauli::X), (jy, Pauli::Y), (jz, Pauli::Z)] {
            if j != 0.0 {
                terms.push((j, PauliWord::from_sites(len, &[(a, p), (b, p)])?));
            }
        }
    }
    Hamiltonian::new(len, terms)
}
