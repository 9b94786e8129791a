//! Symbolic algebra of n-qubit Pauli strings and real-weighted Pauli sums.
//!
//! A [`PauliString`] is stored as a pair of bitmasks (X part, Z part) so that
//! products and commutation checks cost O(1) word operations. Qubit 1 is the
//! leftmost letter in text form and the most significant bit of a
//! computational-basis index; this convention is shared by the whole crate.
//!
//! A [`PauliSum`] keeps real coefficients only (it always materializes to a
//! Hermitian matrix); products of sums, which can pick up imaginary weights,
//! are returned as a [`ComplexPauliSum`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dense::DenseOperator;
use crate::error::{Result, SwtError};
use crate::policy::{NumericPolicy, COEFFICIENT_DROP};

/// Scalar phase picked up by a product of two Pauli strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl Phase {
    /// Phase corresponding to `i^exponent`.
    pub fn from_i_exponent(exponent: u32) -> Self {
        match exponent % 4 {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn as_complex(self) -> Complex64 {
        match self {
            Phase::PlusOne => Complex64::new(1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::PlusOne | Phase::MinusOne)
    }
}

/// One letter of a Pauli string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliLetter::I,
            (true, false) => PauliLetter::X,
            (true, true) => PauliLetter::Y,
            (false, true) => PauliLetter::Z,
        }
    }

    fn as_char(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Pauli operators, without a scalar weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x_bits: u64,
    z_bits: u64,
}

const MAX_QUBITS: usize = 64;

impl PauliString {
    /// The identity string on `n_qubits`.
    pub fn identity(n_qubits: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n_qubits));
        Self { n_qubits, x_bits: 0, z_bits: 0 }
    }

    /// Build from per-qubit letters, qubit 1 first.
    pub fn from_letters(letters: &[PauliLetter]) -> Result<Self> {
        if letters.is_empty() || letters.len() > MAX_QUBITS {
            return Err(SwtError::Invalid(format!(
                "Pauli string must have between 1 and {MAX_QUBITS} letters, got {}",
                letters.len()
            )));
        }
        let n = letters.len();
        let mut s = Self::identity(n);
        for (idx, letter) in letters.iter().enumerate() {
            s.set_letter(idx + 1, *letter);
        }
        Ok(s)
    }

    /// Single non-identity letter at `qubit` (1-based) on an otherwise-identity string.
    pub fn single(n_qubits: usize, qubit: usize, letter: PauliLetter) -> Self {
        let mut s = Self::identity(n_qubits);
        s.set_letter(qubit, letter);
        s
    }

    /// Two non-identity letters on an otherwise-identity string.
    pub fn two_site(n_qubits: usize, a: usize, b: usize, letter: PauliLetter) -> Self {
        let mut s = Self::identity(n_qubits);
        s.set_letter(a, letter);
        s.set_letter(b, letter);
        s
    }

    fn bit(&self, qubit: usize) -> u64 {
        debug_assert!(qubit >= 1 && qubit <= self.n_qubits);
        1u64 << (self.n_qubits - qubit)
    }

    fn set_letter(&mut self, qubit: usize, letter: PauliLetter) {
        let bit = self.bit(qubit);
        let (x, z) = match letter {
            PauliLetter::I => (false, false),
            PauliLetter::X => (true, false),
            PauliLetter::Y => (true, true),
            PauliLetter::Z => (false, true),
        };
        if x {
            self.x_bits |= bit;
        } else {
            self.x_bits &= !bit;
        }
        if z {
            self.z_bits |= bit;
        } else {
            self.z_bits &= !bit;
        }
    }

    pub fn letter(&self, qubit: usize) -> PauliLetter {
        let bit = self.bit(qubit);
        PauliLetter::from_bits(self.x_bits & bit != 0, self.z_bits & bit != 0)
    }

    pub fn letters(&self) -> String {
        (1..=self.n_qubits).map(|q| self.letter(q).as_char()).collect()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        (self.x_bits | self.z_bits).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x_bits == 0 && self.z_bits == 0
    }

    /// Raw `(x, z)` bitmasks; bit `n - q` carries qubit q.
    pub fn bit_masks(&self) -> (u64, u64) {
        (self.x_bits, self.z_bits)
    }

    /// 1-based qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        (1..=self.n_qubits)
            .filter(|&q| self.x_bits & self.bit(q) != 0 || self.z_bits & self.bit(q) != 0)
            .collect()
    }

    fn check_same_size(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(SwtError::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(())
    }

    /// Product of two strings: `phase * product = self * other` exactly.
    ///
    /// Each letter is `i^(x z) X^x Z^z`; collecting the reordering signs gives
    /// an accumulated power of `i` computed from popcounts.
    pub fn product(&self, other: &Self) -> Result<(Phase, Self)> {
        self.check_same_size(other)?;
        let x = self.x_bits ^ other.x_bits;
        let z = self.z_bits ^ other.z_bits;
        let exponent = (self.x_bits & self.z_bits).count_ones()
            + (other.x_bits & other.z_bits).count_ones()
            + 2 * (self.z_bits & other.x_bits).count_ones()
            // subtracting the product's own i^(xz) normalization, mod 4
            + 3 * (x & z).count_ones();
        let product = Self { n_qubits: self.n_qubits, x_bits: x, z_bits: z };
        Ok((Phase::from_i_exponent(exponent), product))
    }

    /// True when the two strings commute.
    pub fn commutes_with(&self, other: &Self) -> bool {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        let anti = (self.x_bits & other.z_bits).count_ones()
            + (self.z_bits & other.x_bits).count_ones();
        anti.is_multiple_of(2)
    }

    /// The single nonzero entry of the string's matrix in column `col`:
    /// returns `(row, value)` with `row = col XOR x_bits`.
    pub fn column_action(&self, col: usize) -> (usize, Complex64) {
        let row = col ^ self.x_bits as usize;
        let y_exponent = (self.x_bits & self.z_bits).count_ones();
        let sign_flips = (self.z_bits & col as u64).count_ones();
        let value =
            Phase::from_i_exponent(y_exponent + 2 * sign_flips).as_complex();
        (row, value)
    }

    /// Dense `2^n x 2^n` matrix of the string.
    pub fn to_dense(&self, policy: &NumericPolicy) -> Result<DenseOperator> {
        if self.n_qubits > policy.dense_qubit_cap {
            return Err(SwtError::ResourceCap {
                qubits: self.n_qubits,
                cap: policy.dense_qubit_cap,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut op = DenseOperator::zeros(self.n_qubits);
        for col in 0..dim {
            let (row, value) = self.column_action(col);
            op.set(row, col, value);
        }
        Ok(op)
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic order on letters (I < X < Y < Z), qubit 1 first. This is the
/// canonical term order used for merging and serialization.
impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        for q in 1..=self.n_qubits {
            match self.letter(q).cmp(&other.letter(q)) {
                Ordering::Equal => continue,
                unequal => return unequal,
            }
        }
        Ordering::Equal
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.letters())
    }
}

impl FromStr for PauliString {
    type Err = SwtError;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Result<Vec<PauliLetter>> = s
            .chars()
            .map(|c| match c {
                'I' => Ok(PauliLetter::I),
                'X' => Ok(PauliLetter::X),
                'Y' => Ok(PauliLetter::Y),
                'Z' => Ok(PauliLetter::Z),
                other => Err(SwtError::Parse(format!("unknown Pauli letter '{other}'"))),
            })
            .collect();
        Self::from_letters(&letters?)
    }
}

/// Real-weighted sum of Pauli strings, kept in canonical form: terms sorted,
/// duplicates merged, coefficients below the drop tolerance removed.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn empty(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    /// Build and normalize from raw terms.
    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (f64, PauliString)>,
    ) -> Result<Self> {
        let mut raw = Vec::new();
        for (coeff, string) in terms {
            if string.n_qubits() != n_qubits {
                return Err(SwtError::DimensionMismatch {
                    left: n_qubits,
                    right: string.n_qubits(),
                });
            }
            if !coeff.is_finite() {
                return Err(SwtError::Invalid("non-finite coefficient".into()));
            }
            raw.push((coeff, string));
        }
        let mut sum = Self { n_qubits, terms: raw };
        sum.normalize();
        Ok(sum)
    }

    fn normalize(&mut self) {
        self.terms.sort_by_key(|term| term.1);
        let mut merged: Vec<(f64, PauliString)> = Vec::with_capacity(self.terms.len());
        for (coeff, string) in self.terms.drain(..) {
            match merged.last_mut() {
                Some((c, s)) if *s == string => *c += coeff,
                _ => merged.push((coeff, string)),
            }
        }
        merged.retain(|(c, _)| c.abs() >= COEFFICIENT_DROP);
        self.terms = merged;
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of coefficients (used when the identity contribution is factored out).
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(c, s)| (c * factor, *s)).collect(),
        };
        out.normalize();
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(SwtError::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::from_terms(self.n_qubits, terms)
    }

    /// The sum `K` with `[A, B] = i K`; `K` has real coefficients because `A`
    /// and `B` do. Pairs of commuting strings contribute nothing.
    pub fn hermitian_commutator(&self, other: &Self) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(SwtError::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        let mut terms = Vec::new();
        for (ca, sa) in &self.terms {
            for (cb, sb) in &other.terms {
                if sa.commutes_with(sb) {
                    continue;
                }
                let (phase, product) = sa.product(sb)?;
                // anticommuting Hermitian strings multiply to an
                // anti-Hermitian string: phase is +/- i, and
                // [sa, sb] = 2 phase product = i (2 im(phase)) product
                let weight = match phase {
                    Phase::PlusI => 2.0,
                    Phase::MinusI => -2.0,
                    _ => unreachable!("anticommuting product must carry phase +/-i"),
                };
                terms.push((ca * cb * weight, product));
            }
        }
        Self::from_terms(self.n_qubits, terms)
    }

    /// Full operator product; coefficients are complex in general.
    pub fn product(&self, other: &Self) -> Result<ComplexPauliSum> {
        if self.n_qubits != other.n_qubits {
            return Err(SwtError::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        let mut terms = Vec::new();
        for (ca, sa) in &self.terms {
            for (cb, sb) in &other.terms {
                let (phase, product) = sa.product(sb)?;
                terms.push((phase.as_complex() * (ca * cb), product));
            }
        }
        ComplexPauliSum::from_terms(self.n_qubits, terms)
    }

    /// Dense Hermitian matrix of the sum.
    pub fn to_dense(&self, policy: &NumericPolicy) -> Result<DenseOperator> {
        if self.n_qubits > policy.dense_qubit_cap {
            return Err(SwtError::ResourceCap {
                qubits: self.n_qubits,
                cap: policy.dense_qubit_cap,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut op = DenseOperator::zeros(self.n_qubits);
        for (coeff, string) in &self.terms {
            let c = Complex64::new(*coeff, 0.0);
            for col in 0..dim {
                let (row, value) = string.column_action(col);
                op.add_assign_entry(row, col, c * value);
            }
        }
        Ok(op)
    }
}

/// Text form: one `<coefficient> <letters>` line per term, canonical order.
/// Emitting and re-parsing a canonical sum is byte-stable.
impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, (coeff, string)) in self.terms.iter().enumerate() {
            if idx > 0 {
                writeln!(f)?;
            }
            write!(f, "{:?} {}", coeff, string)?;
        }
        Ok(())
    }
}

impl FromStr for PauliSum {
    type Err = SwtError;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut n_qubits = None;
        for line in s.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (coeff_text, letters) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| SwtError::Parse(format!("malformed term line '{line}'")))?;
            let coeff: f64 = coeff_text
                .parse()
                .map_err(|_| SwtError::Parse(format!("bad coefficient '{coeff_text}'")))?;
            let string: PauliString = letters.trim().parse()?;
            match n_qubits {
                None => n_qubits = Some(string.n_qubits()),
                Some(n) if n != string.n_qubits() => {
                    return Err(SwtError::DimensionMismatch {
                        left: n,
                        right: string.n_qubits(),
                    })
                }
                _ => {}
            }
            terms.push((coeff, string));
        }
        let n = n_qubits.ok_or_else(|| SwtError::Parse("empty Pauli sum text".into()))?;
        Self::from_terms(n, terms)
    }
}

/// Pauli sum with complex weights, produced by operator products.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPauliSum {
    n_qubits: usize,
    terms: Vec<(Complex64, PauliString)>,
}

impl ComplexPauliSum {
    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (Complex64, PauliString)>,
    ) -> Result<Self> {
        let mut raw = Vec::new();
        for (coeff, string) in terms {
            if string.n_qubits() != n_qubits {
                return Err(SwtError::DimensionMismatch {
                    left: n_qubits,
                    right: string.n_qubits(),
                });
            }
            raw.push((coeff, string));
        }
        let mut sum = Self { n_qubits, terms: raw };
        sum.normalize();
        Ok(sum)
    }

    fn normalize(&mut self) {
        self.terms.sort_by_key(|term| term.1);
        let mut merged: Vec<(Complex64, PauliString)> = Vec::with_capacity(self.terms.len());
        for (coeff, string) in self.terms.drain(..) {
            match merged.last_mut() {
                Some((c, s)) if *s == string => *c += coeff,
                _ => merged.push((coeff, string)),
            }
        }
        merged.retain(|(c, _)| c.norm() >= COEFFICIENT_DROP);
        self.terms = merged;
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(Complex64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when every coefficient has imaginary part below `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.terms.iter().all(|(c, _)| c.im.abs() <= tol)
    }

    /// Convert to a real-weighted sum, rejecting imaginary parts above `tol`.
    pub fn into_real(self, tol: f64) -> Result<PauliSum> {
        if !self.is_real(tol) {
            let worst = self
                .terms
                .iter()
                .map(|(c, _)| c.im.abs())
                .fold(0.0, f64::max);
            return Err(SwtError::Invalid(format!(
                "sum has imaginary coefficients up to {worst:.3e}"
            )));
        }
        PauliSum::from_terms(self.n_qubits, self.terms.into_iter().map(|(c, s)| (c.re, s)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::NumericPolicy;
    use proptest::prelude::*;

    fn s(text: &str) -> PauliString {
        text.parse().unwrap()
    }

    #[test]
    fn single_qubit_products() {
        let (phase, product) = s("X").product(&s("Y")).unwrap();
        assert_eq!(phase, Phase::PlusI);
        assert_eq!(product, s("Z"));

        let (phase, product) = s("Y").product(&s("X")).unwrap();
        assert_eq!(phase, Phase::MinusI);
        assert_eq!(product, s("Z"));

        let (phase, product) = s("Z").product(&s("X")).unwrap();
        assert_eq!(phase, Phase::PlusI);
        assert_eq!(product, s("Y"));
    }

    #[test]
    fn involution_squares_to_identity() {
        let (phase, product) = s("XZ").product(&s("XZ")).unwrap();
        assert_eq!(phase, Phase::PlusOne);
        assert!(product.is_identity());
    }

    #[test]
    fn product_matches_dense_oracle() {
        let policy = NumericPolicy::default();
        let a = s("XY");
        let b = s("YX");
        let (phase, product) = a.product(&b).unwrap();
        let lhs = a.to_dense(&policy).unwrap().dot(&b.to_dense(&policy).unwrap());
        let rhs = product.to_dense(&policy).unwrap().scaled(phase.as_complex());
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn product_rejects_size_mismatch() {
        let err = s("X").product(&s("XX")).unwrap_err();
        assert!(matches!(err, SwtError::DimensionMismatch { .. }));
    }

    #[test]
    fn commutator_of_z_and_x() {
        let a = PauliSum::from_terms(1, [(1.0, s("Z"))]).unwrap();
        let b = PauliSum::from_terms(1, [(1.0, s("X"))]).unwrap();
        let k = a.hermitian_commutator(&b).unwrap();
        assert_eq!(k.terms(), &[(2.0, s("Y"))]);
    }

    #[test]
    fn commuting_strings_give_empty_commutator() {
        let a = PauliSum::from_terms(2, [(1.5, s("ZZ"))]).unwrap();
        let b = PauliSum::from_terms(2, [(0.5, s("XX")), (2.0, s("II"))]).unwrap();
        assert!(a.hermitian_commutator(&b).unwrap().is_empty());
    }

    #[test]
    fn commutator_is_antisymmetric() {
        let a = PauliSum::from_terms(2, [(1.0, s("XI")), (0.7, s("ZY"))]).unwrap();
        let b = PauliSum::from_terms(2, [(0.3, s("ZX")), (1.1, s("YY"))]).unwrap();
        let ab = a.hermitian_commutator(&b).unwrap();
        let ba = b.hermitian_commutator(&a).unwrap();
        assert_eq!(ab, ba.scaled(-1.0));
    }

    #[test]
    fn z_squared_is_identity() {
        let z = PauliSum::from_terms(1, [(1.0, s("Z"))]).unwrap();
        let sq = z.product(&z).unwrap();
        assert_eq!(sq.terms().len(), 1);
        assert_eq!(sq.terms()[0].1, s("I"));
        assert!((sq.terms()[0].0 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn chain_hamiltonian_square_matches_dense() {
        let policy = NumericPolicy::default();
        let h0 = crate::model::heisenberg_h0(4).unwrap();
        let squared = h0.product(&h0).unwrap();
        assert!(squared.is_real(1e-12));
        let dense_direct = h0.to_dense(&policy).unwrap();
        let dense_squared = squared
            .into_real(1e-12)
            .unwrap()
            .to_dense(&policy)
            .unwrap();
        assert!(dense_squared.max_abs_diff(&dense_direct.dot(&dense_direct)) < 1e-12);
    }

    #[test]
    fn complex_product_is_flagged() {
        let a = PauliSum::from_terms(1, [(2.0, s("X"))]).unwrap();
        let b = PauliSum::from_terms(1, [(3.0, s("Y"))]).unwrap();
        let p = a.product(&b).unwrap();
        assert!(!p.is_real(1e-12));
        assert_eq!(p.terms()[0].1, s("Z"));
        assert!((p.terms()[0].0 - Complex64::new(0.0, 6.0)).norm() < 1e-15);
    }

    #[test]
    fn zz_dense_is_diagonal_signed() {
        let policy = NumericPolicy::default();
        let sum = PauliSum::from_terms(2, [(1.0, s("ZZ"))]).unwrap();
        let dense = sum.to_dense(&policy).unwrap();
        let expected = [1.0, -1.0, -1.0, 1.0];
        for (k, want) in expected.iter().enumerate() {
            assert!((dense.get(k, k) - Complex64::new(*want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn identity_sum_dense() {
        let policy = NumericPolicy::default();
        let sum = PauliSum::from_terms(2, [(1.0, s("II"))]).unwrap();
        let dense = sum.to_dense(&policy).unwrap();
        assert!(dense.max_abs_diff(&DenseOperator::identity(2)) < 1e-15);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let policy = NumericPolicy { dense_qubit_cap: 3, ..NumericPolicy::default() };
        let sum = PauliSum::from_terms(4, [(1.0, s("XXXX"))]).unwrap();
        assert!(matches!(
            sum.to_dense(&policy),
            Err(SwtError::ResourceCap { qubits: 4, cap: 3 })
        ));
    }

    #[test]
    fn normalization_merges_and_drops() {
        let sum = PauliSum::from_terms(
            2,
            [(1.0, s("XY")), (2.0, s("XY")), (1e-13, s("ZZ")), (0.5, s("IX"))],
        )
        .unwrap();
        assert_eq!(sum.terms(), &[(0.5, s("IX")), (3.0, s("XY"))]);
    }

    #[test]
    fn text_round_trip_is_byte_stable() {
        let sum = PauliSum::from_terms(
            4,
            [(2.0, s("IXXI")), (-0.25, s("ZIIZ")), (1e-3, s("YYII"))],
        )
        .unwrap();
        let text = sum.to_string();
        let reparsed: PauliSum = text.parse().unwrap();
        assert_eq!(reparsed.to_string(), text);
        assert_eq!(reparsed, sum);
    }

    #[test]
    fn real_sums_materialize_hermitian() {
        let policy = NumericPolicy::default();
        let sum = PauliSum::from_terms(
            3,
            [(0.7, s("XYZ")), (-1.2, s("IYI")), (0.05, s("ZZX"))],
        )
        .unwrap();
        let dense = sum.to_dense(&policy).unwrap();
        assert!(dense.hermiticity_deviation() < 1e-15);
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        proptest::collection::vec(0u8..4, n).prop_map(move |codes| {
            let letters: Vec<PauliLetter> = codes
                .iter()
                .map(|c| match c {
                    0 => PauliLetter::I,
                    1 => PauliLetter::X,
                    2 => PauliLetter::Y,
                    _ => PauliLetter::Z,
                })
                .collect();
            PauliString::from_letters(&letters).unwrap()
        })
    }

    proptest! {
        #[test]
        fn triple_products_match_dense(a in arb_string(3), b in arb_string(3), c in arb_string(3)) {
            let policy = NumericPolicy::default();
            let (p1, ab) = a.product(&b).unwrap();
            let (p2, abc) = ab.product(&c).unwrap();
            let dense = a
                .to_dense(&policy).unwrap()
                .dot(&b.to_dense(&policy).unwrap())
                .dot(&c.to_dense(&policy).unwrap());
            let reconstructed = abc
                .to_dense(&policy).unwrap()
                .scaled(p1.as_complex() * p2.as_complex());
            prop_assert!(dense.max_abs_diff(&reconstructed) < 1e-12);
        }

        #[test]
        fn commutation_matches_dense(a in arb_string(3), b in arb_string(3)) {
            let policy = NumericPolicy::default();
            let da = a.to_dense(&policy).unwrap();
            let db = b.to_dense(&policy).unwrap();
            let comm = da.dot(&db).sub(&db.dot(&da));
            prop_assert_eq!(a.commutes_with(&b), comm.max_abs() < 1e-12);
        }

        #[test]
        fn normalization_is_idempotent(coeffs in proptest::collection::vec(-2.0f64..2.0, 1..6)) {
            let strings = ["XX", "YZ", "IZ", "ZI", "XY", "YY"];
            let terms: Vec<(f64, PauliString)> = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| (*c, s(strings[k % strings.len()])))
                .collect();
            let once = PauliSum::from_terms(2, terms).unwrap();
            let twice = PauliSum::from_terms(2, once.terms().to_vec()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
