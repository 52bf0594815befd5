//! Operator-complexity measures and truncation-error bounds.
//!
//! Entropies are in nats. The operator stabilizer Rényi entropy of
//! `O = Σ c_P P` is `S^α(O) = (1/(1-α)) ln Σ_P |c_P|^{2α}`, the Rényi entropy
//! of the squared Pauli coefficients.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::pauli::{Pauli, PauliWord};
use crate::sparse::PauliSum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("entropy of an empty operator is undefined")]
    EmptyOperator,
    #[error("alpha = {0} outside the allowed range")]
    AlphaOutOfRange(f64),
    #[error("budget K must be at least 1")]
    BadBudget,
    #[error("target error must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("required budget exceeds representable range (ln K = {ln_k:.4})")]
    BudgetOverflow { ln_k: f64 },
}

/// `S^α` of one operator; `alpha == 1.0` is the Shannon limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OseResult {
    pub alpha: f64,
    pub value: f64,
}

/// Rényi entropy of the squared coefficients, without input checks or the normalization warning.
///
/// For `alpha == 1` returns `-Σ p ln p + ln Σc²` with `p = c²/Σc²`, which equals
/// the `α → 1` limit whenever `Σc² = 1`.
pub fn renyi_entropy(sum: &PauliSum, alpha: f64) -> f64 {
    let logs: Vec<f64> = sum.iter().map(|(_, c)| (c * c).ln()).collect();
    if alpha == 1.0 {
        let total = log_sum_exp(logs.iter().copied());
        let h: f64 = logs
            .iter()
            .map(|&l| {
                let lp = l - total;
                -lp.exp() * lp
            })
            .sum();
        return h + total;
    }
    log_sum_exp(logs.iter().map(|&l| alpha * l)) / (1.0 - alpha)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Operator stabilizer Rényi entropy for `0 < alpha ≤ 1`.
pub fn ose(sum: &PauliSum, alpha: f64) -> Result<OseResult, AnalyticsError> {
    if sum.is_empty() {
        return Err(AnalyticsError::EmptyOperator);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AnalyticsError::AlphaOutOfRange(alpha));
    }
    let norm_sq = sum.norm_squared();
    if (norm_sq - 1.0).abs() > 1e-6 {
        log::warn!("OSE of an operator with Σc² = {norm_sq:.6} (not normalized)");
    }
    Ok(OseResult {
        alpha,
        value: renyi_entropy(sum, alpha),
    })
}

fn check_open_alpha(alpha: f64) -> Result<(), AnalyticsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(AnalyticsError::AlphaOutOfRange(alpha))
    }
}

/// Upper bound on `ln Δ(K)`: `((1-α)/α)(S - ln K) + ln(α/(1-α))`.
pub fn delta_bound(entropy: f64, k: f64, alpha: f64) -> Result<f64, AnalyticsError> {
    check_open_alpha(alpha)?;
    if k.is_nan() || k < 1.0 {
        return Err(AnalyticsError::BadBudget);
    }
    Ok((1.0 - alpha) / alpha * (entropy - k.ln()) + (alpha / (1.0 - alpha)).ln())
}

/// Smallest integer `K` with `K ≥ e^S (2α/((1-α)ε²))^{α/(1-α)}`, at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPrescription {
    pub k: u64,
    /// Natural log of the unrounded right-hand side.
    pub ln_k: f64,
}

pub fn k_prescription(
    entropy: f64,
    epsilon: f64,
    alpha: f64,
) -> Result<KPrescription, AnalyticsError> {
    check_open_alpha(alpha)?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(AnalyticsError::BadEpsilon(epsilon));
    }
    let ln_k =
        entropy + alpha / (1.0 - alpha) * (2.0 * alpha / ((1.0 - alpha) * epsilon * epsilon)).ln();
    // u64::MAX ≈ e^44.36
    if !ln_k.is_finite() || ln_k >= (u64::MAX as f64).ln() {
        return Err(AnalyticsError::BudgetOverflow { ln_k });
    }
    let k = ln_k.exp().ceil().max(1.0) as u64;
    Ok(KPrescription { k, ln_k })
}

/// Bound calculations for one `(S, K, α)` point, optionally with a target error.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub k: u64,
    pub alpha: f64,
    pub entropy: f64,
    pub ln_delta_bound: f64,
    pub epsilon: Option<f64>,
    pub k_required: Option<u64>,
}

pub fn bound_report(
    entropy: f64,
    k: u64,
    alpha: f64,
    epsilon: Option<f64>,
) -> Result<BoundReport, AnalyticsError> {
    let ln_delta_bound = delta_bound(entropy, k as f64, alpha)?;
    let k_required = epsilon
        .map(|e| k_prescription(entropy, e, alpha).map(|p| p.k))
        .transpose()?;
    Ok(BoundReport {
        k,
        alpha,
        entropy,
        ln_delta_bound,
        epsilon,
        k_required,
    })
}

/// Error of the norm-rescaled Top-K approximant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationErrorReport {
    /// `‖O - Ô‖_{Pauli,2}`.
    pub exact: f64,
    /// `sqrt(2 Δ(K))`.
    pub bound: f64,
}

/// Uses `‖O - Ô‖² = 2‖O‖(‖O‖ - sqrt(‖O‖² - Δ))` for `Ô` the Top-K terms rescaled to `‖O‖`.
pub fn truncation_error(sum: &PauliSum, k: usize) -> Result<TruncationErrorReport, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::BadBudget);
    }
    let tail = sum.squared_tail(k);
    let norm_sq = sum.norm_squared();
    let norm = norm_sq.sqrt();
    let kept = (norm_sq - tail).max(0.0).sqrt();
    // norm - kept, written to avoid cancellation
    let gap = if norm > 0.0 {
        tail / (norm + kept)
    } else {
        0.0
    };
    Ok(TruncationErrorReport {
        exact: (2.0 * norm * gap).sqrt(),
        bound: (2.0 * tail).sqrt(),
    })
}

/// Right-hand side of the local-scrambling weight-truncation bound:
/// `(2/3)^M ‖O‖² + Σ_{wt(P) ≥ M} c_P²`.
pub fn weight_truncation_bound(sum: &PauliSum, max_weight: usize) -> f64 {
    let heavy: f64 = sum
        .iter()
        .filter(|(w, _)| w.weight() >= max_weight)
        .map(|(_, c)| c * c)
        .sum();
    (2.0f64 / 3.0).powi(max_weight as i32) * sum.norm_squared() + heavy
}

/// Outcome of the free-fermion structure check on an evolved `Z_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct XyStructureReport {
    pub site: usize,
    pub steps: usize,
    pub count: usize,
    /// `2s + 4s(2s-1)`, absent for `s = 0`.
    pub count_bound: Option<usize>,
    /// First word (in word order) outside the `Z_m` / `X…Y`-string family.
    pub family_witness: Option<PauliWord>,
    /// First word with support outside `[l-s, l+s]`.
    pub light_cone_witness: Option<PauliWord>,
}

impl XyStructureReport {
    pub fn family_ok(&self) -> bool {
        self.family_witness.is_none()
    }

    pub fn light_cone_ok(&self) -> bool {
        self.light_cone_witness.is_none()
    }

    pub fn count_ok(&self) -> bool {
        self.count_bound.is_none_or(|b| self.count <= b)
    }

    pub fn passed(&self) -> bool {
        self.family_ok() && self.light_cone_ok() && self.count_ok()
    }
}

/// `Z_m`, or `A_a Z_{a+1} … Z_{b-1} B_b` with `A, B ∈ {X, Y}` and `a < b`.
pub fn in_xy_family(word: &PauliWord) -> bool {
    let sup: Vec<(usize, Pauli)> = word.support().collect();
    match sup.as_slice() {
        [(_, Pauli::Z)] => true,
        [(a, pa), .., (b, pb)] => {
            let end_ok = |p: &Pauli| matches!(p, Pauli::X | Pauli::Y);
            end_ok(pa)
                && end_ok(pb)
                && sup.len() == b - a + 1
                && sup[1..sup.len() - 1].iter().all(|(_, p)| *p == Pauli::Z)
        }
        _ => false,
    }
}

pub fn xy_structure_check(sum: &PauliSum, site: usize, steps: usize) -> XyStructureReport {
    let lo = site.saturating_sub(steps);
    let hi = site.saturating_add(steps);
    let mut family_witness: Option<PauliWord> = None;
    let mut light_cone_witness: Option<PauliWord> = None;
    let keep_min = |slot: &mut Option<PauliWord>, w: &PauliWord| {
        if slot.as_ref().is_none_or(|cur| w < cur) {
            *slot = Some(w.clone());
        }
    };
    for (w, _) in sum.iter() {
        if !in_xy_family(w) {
            keep_min(&mut family_witness, w);
        }
        if w.support().any(|(j, _)| j < lo || j > hi) {
            keep_min(&mut light_cone_witness, w);
        }
    }
    let count_bound = (steps >= 1).then(|| 2 * steps + 4 * steps * (2 * steps - 1));
    XyStructureReport {
        site,
        steps,
        count: sum.len(),
        count_bound,
        family_witness,
        light_cone_witness,
    }
}

/// One log₂ magnitude bin of the squared coefficients: `lo ≤ c² < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    /// Summed `c²` in the bin.
    pub mass: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distributions {
    /// Ascending in magnitude.
    pub coefficients: Vec<HistogramBin>,
    /// Hamming weight → summed `c²`.
    pub weights: BTreeMap<usize, f64>,
    pub terms: usize,
}

pub fn distributions(sum: &PauliSum) -> Distributions {
    let mut bins: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
    for (w, c) in sum.iter() {
        let sq = c * c;
        if sq > 0.0 {
            let e = log2_floor(sq);
            let slot = bins.entry(e).or_default();
            slot.0 += sq;
            slot.1 += 1;
        }
        *weights.entry(w.weight()).or_default() += sq;
    }
    let coefficients = bins
        .into_iter()
        .map(|(e, (mass, count))| HistogramBin {
            lo: 2f64.powi(e),
            hi: 2f64.powi(e + 1),
            mass,
            count,
        })
        .collect();
    Distributions {
        coefficients,
        weights,
        terms: sum.len(),
    }
}

fn log2_floor(v: f64) -> i32 {
    let mut e = v.log2().floor() as i32;
    if 2f64.powi(e) > v {
        e -= 1;
    } else if 2f64.powi(e + 1) <= v {
        e += 1;
    }
    e
}
