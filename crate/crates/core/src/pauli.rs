//! Phase-exact Pauli words in the binary symplectic representation.
//!
//! A word on `n` qubits is a pair of bit strings `(x, z)`. The operator it
//! denotes is `P(x, z) = ∏_j i^{x_j z_j} X_j^{x_j} Z_j^{z_j}`, so every word
//! is Hermitian and `(1, 1)` on a site is exactly `Y`. Bits are packed
//! little-endian by site into `u64` words, X half first, then Z half.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use smallvec::SmallVec;
use thiserror::Error;

/// Qubit-count ceiling for the default build.
pub const MAX_QUBITS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PauliError {
    #[error("qubit count mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid Pauli character {ch:?} at position {pos}")]
    InvalidChar { ch: char, pos: usize },
    #[error("qubit count must be between 1 and {MAX_QUBITS}, got {0}")]
    BadQubitCount(usize),
    #[error("site {site} out of range for {n} qubits")]
    SiteOutOfRange { site: usize, n: usize },
}

/// Single-site Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    #[inline]
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    #[inline]
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(ch: char) -> Option<Self> {
        match ch {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Multiplicative phase `i^k`, `k` reduced mod 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn new(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    #[inline]
    pub fn exponent(self) -> u8 {
        self.0
    }

    /// `(re, im)` of `i^k`.
    pub fn to_complex(self) -> (f64, f64) {
        match self.0 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    }

    /// `±1` for real phases, `None` for `±i`.
    #[inline]
    pub fn as_real_sign(self) -> Option<f64> {
        match self.0 {
            0 => Some(1.0),
            2 => Some(-1.0),
            _ => None,
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) & 3)
    }
}

#[inline]
fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// An `n`-qubit Pauli word under the Hermitian phase convention.
#[derive(Clone)]
pub struct PauliWord {
    n: u32,
    bits: SmallVec<[u64; 4]>,
}

impl PauliWord {
    pub fn identity(n: usize) -> Result<Self, PauliError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(PauliError::BadQubitCount(n));
        }
        Ok(PauliWord {
            n: n as u32,
            bits: SmallVec::from_elem(0, 2 * words_for(n)),
        })
    }

    /// Word with the given single-site operators, identity elsewhere.
    pub fn from_sites(n: usize, sites: &[(usize, Pauli)]) -> Result<Self, PauliError> {
        let mut w = Self::identity(n)?;
        for &(site, p) in sites {
            w.set(site, p)?;
        }
        Ok(w)
    }

    pub fn single(n: usize, site: usize, p: Pauli) -> Result<Self, PauliError> {
        Self::from_sites(n, &[(site, p)])
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    #[inline]
    fn half(&self) -> usize {
        self.bits.len() / 2
    }

    #[inline]
    pub fn x_words(&self) -> &[u64] {
        &self.bits[..self.half()]
    }

    #[inline]
    pub fn z_words(&self) -> &[u64] {
        &self.bits[self.half()..]
    }

    pub fn get(&self, site: usize) -> Pauli {
        assert!(site < self.num_qubits(), "site {site} out of range");
        let (w, b) = (site / 64, site % 64);
        let x = self.x_words()[w] >> b & 1 == 1;
        let z = self.z_words()[w] >> b & 1 == 1;
        Pauli::from_bits(x, z)
    }

    pub fn set(&mut self, site: usize, p: Pauli) -> Result<(), PauliError> {
        if site >= self.num_qubits() {
            return Err(PauliError::SiteOutOfRange {
                site,
                n: self.num_qubits(),
            });
        }
        let half = self.half();
        let (w, b) = (site / 64, site % 64);
        let (x, z) = p.bits();
        let mask = 1u64 << b;
        self.bits[w] = (self.bits[w] & !mask) | if x { mask } else { 0 };
        self.bits[half + w] = (self.bits[half + w] & !mask) | if z { mask } else { 0 };
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Number of sites carrying a non-identity factor.
    pub fn weight(&self) -> usize {
        let half = self.half();
        (0..half)
            .map(|i| (self.bits[i] | self.bits[half + i]).count_ones() as usize)
            .sum()
    }

    /// Non-identity sites in ascending order.
    pub fn support(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        let half = self.half();
        (0..half).flat_map(move |i| {
            let x = self.bits[i];
            let z = self.bits[half + i];
            let mut occ = x | z;
            std::iter::from_fn(move || {
                if occ == 0 {
                    return None;
                }
                let b = occ.trailing_zeros();
                occ &= occ - 1;
                let p = Pauli::from_bits(x >> b & 1 == 1, z >> b & 1 == 1);
                Some((i * 64 + b as usize, p))
            })
        })
    }

    fn check_len(&self, other: &PauliWord) -> Result<(), PauliError> {
        if self.n != other.n {
            return Err(PauliError::LengthMismatch {
                left: self.num_qubits(),
                right: other.num_qubits(),
            });
        }
        Ok(())
    }

    /// `true` iff the two words commute.
    pub fn commutes(&self, other: &PauliWord) -> Result<bool, PauliError> {
        self.check_len(other)?;
        Ok(!self.anticommutes_unchecked(other))
    }

    /// Parity of the symplectic product. Lengths must already agree.
    #[inline]
    pub(crate) fn anticommutes_unchecked(&self, other: &PauliWord) -> bool {
        let half = self.half();
        let (a, b) = (&self.bits, &other.bits);
        let mut acc = 0u32;
        for i in 0..half {
            acc ^= ((a[i] & b[half + i]) ^ (a[half + i] & b[i])).count_ones();
        }
        acc & 1 == 1
    }

    /// `self · other = i^k · P(r)`; returns `(r, i^k)`.
    pub fn multiply(&self, other: &PauliWord) -> Result<(PauliWord, Phase), PauliError> {
        self.check_len(other)?;
        Ok(self.multiply_unchecked(other))
    }

    #[inline]
    pub(crate) fn multiply_unchecked(&self, other: &PauliWord) -> (PauliWord, Phase) {
        // P(x1,z1) P(x2,z2) = i^{x1·z1 + x2·z2 + 2 z1·x2 - x3·z3} P(x3,z3)
        let half = self.half();
        let (a, b) = (&self.bits, &other.bits);
        let mut bits: SmallVec<[u64; 4]> = SmallVec::with_capacity(a.len());
        bits.extend(a.iter().zip(b.iter()).map(|(p, q)| p ^ q));
        let mut k: i64 = 0;
        for i in 0..half {
            let (x1, z1, x2, z2) = (a[i], a[half + i], b[i], b[half + i]);
            let (x3, z3) = (bits[i], bits[half + i]);
            k += (x1 & z1).count_ones() as i64;
            k += (x2 & z2).count_ones() as i64;
            k += 2 * (z1 & x2).count_ones() as i64;
            k -= (x3 & z3).count_ones() as i64;
        }
        (PauliWord { n: self.n, bits }, Phase::new(k))
    }

    /// Tensor product `self ⊗ other`, `self` on the low sites.
    pub fn tensor(&self, other: &PauliWord) -> Result<PauliWord, PauliError> {
        let n = self.num_qubits() + other.num_qubits();
        let mut w = PauliWord::identity(n)?;
        for (site, p) in self.support() {
            w.set(site, p)?;
        }
        for (site, p) in other.support() {
            w.set(self.num_qubits() + site, p)?;
        }
        Ok(w)
    }

    /// Sites reordered by `site -> n-1-site`.
    pub fn mirrored(&self) -> PauliWord {
        let n = self.num_qubits();
        let mut w = PauliWord::identity(n).expect("valid length");
        for (site, p) in self.support() {
            w.set(n - 1 - site, p).expect("in range");
        }
        w
    }
}

impl PartialEq for PauliWord {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.bits == other.bits
    }
}

impl Eq for PauliWord {}

impl Hash for PauliWord {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for &w in &self.bits {
            state.write_u64(w);
        }
    }
}

/// Lexicographic on the `x` bit string (site 0 first), then on `z`.
impl Ord for PauliWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp(&other.n).then_with(|| {
            self.bits
                .iter()
                .zip(other.bits.iter())
                .map(|(a, b)| a.reverse_bits().cmp(&b.reverse_bits()))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

impl PartialOrd for PauliWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.num_qubits())
            .map(|j| self.get(j).as_char())
            .collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliWord({self})")
    }
}

impl FromStr for PauliWord {
    type Err = PauliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().collect();
        let mut w = PauliWord::identity(chars.len())?;
        for (pos, &ch) in chars.iter().enumerate() {
            let p = Pauli::from_char(ch).ok_or(PauliError::InvalidChar { ch, pos })?;
            if p != Pauli::I {
                w.set(pos, p)?;
            }
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> PauliWord {
        s.parse().unwrap()
    }

    #[test]
    fn commutation_examples() {
        assert!(!w("X").commutes(&w("Z")).unwrap());
        assert!(w("XX").commutes(&w("ZZ")).unwrap());
        assert!(w("ZI").commutes(&w("ZZ")).unwrap());
    }

    #[test]
    fn multiply_examples() {
        assert_eq!(w("X").multiply(&w("Z")).unwrap(), (w("Y"), Phase::MINUS_I));
        assert_eq!(w("Z").multiply(&w("X")).unwrap(), (w("Y"), Phase::I));
        assert_eq!(w("YX").multiply(&w("YX")).unwrap(), (w("II"), Phase::ONE));
    }

    #[test]
    fn weight_examples() {
        assert_eq!(w("IIII").weight(), 0);
        assert_eq!(w("XIZI").weight(), 2);
        assert_eq!(w("YYY").weight(), 3);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            w("XY").commutes(&w("XYZ")),
            Err(PauliError::LengthMismatch { left: 2, right: 3 })
        ));
        assert!(w("XY").multiply(&w("XYZ")).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(
            "XQ".parse::<PauliWord>(),
            Err(PauliError::InvalidChar { ch: 'Q', pos: 1 })
        ));
        assert!("".parse::<PauliWord>().is_err());
    }

    #[test]
    fn lexicographic_order_is_site_major() {
        // x-strings compared first, site 0 most significant
        assert!(w("Z") < w("X"));
        assert!(w("X") < w("Y"));
        assert!(w("IX") < w("XI"));
        let mut wide = PauliWord::identity(130).unwrap();
        let mut wide2 = wide.clone();
        wide.set(129, Pauli::X).unwrap();
        wide2.set(0, Pauli::X).unwrap();
        assert!(wide < wide2);
    }

    #[test]
    fn support_crosses_word_boundary() {
        let p =
            PauliWord::from_sites(130, &[(3, Pauli::X), (64, Pauli::Y), (129, Pauli::Z)]).unwrap();
        let sup: Vec<_> = p.support().collect();
        assert_eq!(sup, vec![(3, Pauli::X), (64, Pauli::Y), (129, Pauli::Z)]);
        assert_eq!(p.weight(), 3);
        assert_eq!(p.mirrored().get(126), Pauli::X);
    }

    fn arb_word(n: usize) -> impl Strategy<Value = PauliWord> {
        proptest::collection::vec(0usize..4, n).prop_map(move |v| {
            let sites: Vec<_> = v
                .iter()
                .enumerate()
                .map(|(i, &k)| (i, Pauli::ALL[k]))
                .collect();
            PauliWord::from_sites(sites.len(), &sites).unwrap()
        })
    }

    proptest! {
        #[test]
        fn string_round_trip(p in (1usize..150).prop_flat_map(arb_word)) {
            let s = p.to_string();
            prop_assert_eq!(s.parse::<PauliWord>().unwrap(), p);
        }

        #[test]
        fn commutation_matches_product_phases(
            (p, q) in (1usize..100).prop_flat_map(|n| (arb_word(n), arb_word(n)))
        ) {
            let (r1, k1) = p.multiply(&q).unwrap();
            let (r2, k2) = q.multiply(&p).unwrap();
            prop_assert_eq!(&r1, &r2);
            let diff = (k1.exponent() + 4 - k2.exponent()) % 4;
            if p.commutes(&q).unwrap() {
                prop_assert_eq!(diff, 0);
            } else {
                prop_assert_eq!(diff, 2);
                // −i·i^k must be real for the rotation rule to keep coefficients real
                prop_assert_eq!(k1.exponent() % 2, 1);
            }
        }

        #[test]
        fn tensor_weight_adds((p, q) in (arb_word(5), arb_word(70))) {
            let t = p.tensor(&q).unwrap();
            prop_assert_eq!(t.weight(), p.weight() + q.weight());
            prop_assert_eq!(t.num_qubits(), 75);
        }
    }

    #[test]
    fn two_qubit_products_are_associative() {
        let all: Vec<PauliWord> = (0..16)
            .map(|k| {
                PauliWord::from_sites(2, &[(0, Pauli::ALL[k % 4]), (1, Pauli::ALL[k / 4])]).unwrap()
            })
            .collect();
        for a in &all {
            for b in &all {
                for c in &all {
                    let (ab, k_ab) = a.multiply(b).unwrap();
                    let (abc, k1) = ab.multiply(c).unwrap();
                    let (bc, k_bc) = b.multiply(c).unwrap();
                    let (abc2, k2) = a.multiply(&bc).unwrap();
                    assert_eq!(abc, abc2);
                    assert_eq!(k_ab * k1, k_bc * k2);
                }
            }
        }
    }
}
