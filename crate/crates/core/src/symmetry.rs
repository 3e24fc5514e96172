//! N-particle states as finite sums of labelled products of single-particle modes.
//!
//! A [`ProductTerm`] assigns one mode to each Hilbert-space slot: position `j`
//! of the assignment is the mode carried by particle label `j`. States are kept
//! in a canonical form (assignments sorted lexicographically, equal assignments
//! merged, negligible coefficients dropped) so that states can be compared term
//! by term.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::RwLock;
use thiserror::Error;

use crate::wavepacket::{self, Grid, WavePacket, WavepacketError};

/// Coefficients with modulus below this are dropped during canonicalisation.
pub const ZERO_TOL: f64 = 1e-14;

/// Largest matrix accepted by [`permanent`].
pub const MAX_PERMANENT_ORDER: usize = 20;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetryError {
    #[error("not a permutation of 0..{n}: {perm:?}")]
    BadPermutation { perm: Vec<usize>, n: usize },
    #[error("size mismatch: expected {expected}, got {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("coefficients not normalized: |alpha|^2 + |beta|^2 = {0}")]
    NotNormalized(f64),
    #[error("matrix is {rows}x{cols}, not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("permanent of order {0} exceeds the limit of {MAX_PERMANENT_ORDER}")]
    TooLarge(usize),
    #[error("overlap table is not a Gram matrix: {0}")]
    InvalidGram(String),
    #[error(transparent)]
    Wavepacket(#[from] WavepacketError),
}

/// Index into a table of registered single-particle modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeId(pub usize);

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Append-only registry of modes; ids stay valid for the table's lifetime.
#[derive(Debug, Default)]
pub struct ModeTable<M> {
    modes: RwLock<Vec<M>>,
}

impl<M: Clone> ModeTable<M> {
    pub fn new() -> Self {
        Self { modes: RwLock::new(Vec::new()) }
    }

    pub fn register(&self, mode: M) -> ModeId {
        let mut modes = self.modes.write().expect("mode table lock poisoned");
        modes.push(mode);
        ModeId(modes.len() - 1)
    }

    pub fn get(&self, id: ModeId) -> Option<M> {
        self.modes.read().expect("mode table lock poisoned").get(id.0).cloned()
    }

    pub fn len(&self) -> usize {
        self.modes.read().expect("mode table lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<M> {
        self.modes.read().expect("mode table lock poisoned").clone()
    }
}

/// Single-particle inner product `<a|b>` (antilinear in `a`).
///
/// The same trait carries matrix elements `<a|o|b>` of a single-particle
/// operator `o`; [`scalar_product`] then yields `<A|o x o x ... x o|B>`.
pub trait OverlapProvider {
    fn overlap(&self, a: ModeId, b: ModeId) -> Complex64;
}

impl<F> OverlapProvider for F
where
    F: Fn(ModeId, ModeId) -> Complex64,
{
    fn overlap(&self, a: ModeId, b: ModeId) -> Complex64 {
        self(a, b)
    }
}

/// Every mode orthogonal to every other.
#[derive(Debug, Clone, Copy, Default)]
pub struct Orthonormal;

impl OverlapProvider for Orthonormal {
    fn overlap(&self, a: ModeId, b: ModeId) -> Complex64 {
        if a == b {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// Overlaps read from a Hermitian Gram matrix with unit diagonal.
/// Modes outside the table are orthonormal to everything else.
#[derive(Debug, Clone)]
pub struct GramOverlap {
    gram: Array2<Complex64>,
}

impl GramOverlap {
    pub fn new(gram: Array2<Complex64>) -> Result<Self, SymmetryError> {
        let (rows, cols) = gram.dim();
        if rows != cols {
            return Err(SymmetryError::NotSquare { rows, cols });
        }
        for i in 0..rows {
            if (gram[[i, i]] - 1.0).norm() > NORMALIZATION_TOL {
                return Err(SymmetryError::InvalidGram(format!("diagonal entry {i} is {}", gram[[i, i]])));
            }
            for j in 0..i {
                if (gram[[i, j]] - gram[[j, i]].conj()).norm() > NORMALIZATION_TOL {
                    return Err(SymmetryError::InvalidGram(format!("entries ({i},{j}) and ({j},{i}) not conjugate")));
                }
            }
        }
        Ok(Self { gram })
    }

    /// Pairwise quadrature overlaps of Gaussian packets at time `t`; mode `i` is `packets[i]`.
    pub fn from_packets(packets: &[WavePacket], t: f64, grid: &Grid) -> Result<Self, SymmetryError> {
        let n = packets.len();
        let mut gram = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let s = wavepacket::overlap(&packets[i], &packets[j], t, grid)?;
                gram[[i, j]] = s;
                gram[[j, i]] = s.conj();
            }
        }
        // Normalise away the quadrature error on the diagonal.
        for i in 0..n {
            let d = gram[[i, i]].re.sqrt();
            for j in 0..n {
                gram[[i, j]] /= d;
                gram[[j, i]] /= d;
            }
        }
        Self::new(gram)
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.gram
    }
}

impl OverlapProvider for GramOverlap {
    fn overlap(&self, a: ModeId, b: ModeId) -> Complex64 {
        let n = self.gram.nrows();
        if a.0 < n && b.0 < n {
            self.gram[[a.0, b.0]]
        } else {
            Orthonormal.overlap(a, b)
        }
    }
}

/// A bijection of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self, SymmetryError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(SymmetryError::BadPermutation { perm: images, n });
            }
        }
        Ok(Self(images))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut v: Vec<usize> = (0..n).collect();
        v.swap(a, b);
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Self(inv)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    /// +1 for even permutations, -1 for odd ones.
    pub fn sign(&self) -> i32 {
        let mut visited = vec![false; self.0.len()];
        let mut transpositions = 0;
        for start in 0..self.0.len() {
            let mut len = 0;
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                i = self.0[i];
                len += 1;
            }
            if len > 0 {
                transpositions += len - 1;
            }
        }
        if transpositions % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// All `n!` permutations in lexicographic order.
    pub fn all(n: usize) -> Vec<Self> {
        let mut current: Vec<usize> = (0..n).collect();
        let mut out = vec![Self(current.clone())];
        while next_permutation(&mut current) {
            out.push(Self(current.clone()));
        }
        out
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductTerm {
    pub coeff: Complex64,
    /// `modes[j]` is the mode occupying Hilbert-space slot `j`.
    pub modes: Vec<ModeId>,
}

impl ProductTerm {
    pub fn new(coeff: Complex64, modes: Vec<ModeId>) -> Self {
        Self { coeff, modes }
    }
}

/// Canonical sum of product terms over `n` slots. The empty sum is the zero state.
#[derive(Debug, Clone, PartialEq)]
pub struct NParticleState {
    n: usize,
    terms: Vec<ProductTerm>,
}

impl NParticleState {
    pub fn new(n: usize, terms: Vec<ProductTerm>) -> Result<Self, SymmetryError> {
        if let Some(bad) = terms.iter().find(|t| t.modes.len() != n) {
            return Err(SymmetryError::SizeMismatch { expected: n, found: bad.modes.len() });
        }
        Ok(Self::canonical(n, terms.into_iter().map(|t| (t.modes, t.coeff))))
    }

    pub fn zero(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    /// Single product with unit coefficient.
    pub fn product(modes: &[ModeId]) -> Self {
        Self { n: modes.len(), terms: vec![ProductTerm::new(Complex64::new(1.0, 0.0), modes.to_vec())] }
    }

    fn canonical(n: usize, terms: impl IntoIterator<Item = (Vec<ModeId>, Complex64)>) -> Self {
        let mut merged: BTreeMap<Vec<ModeId>, Complex64> = BTreeMap::new();
        for (modes, coeff) in terms {
            *merged.entry(modes).or_default() += coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() >= ZERO_TOL)
            .map(|(modes, coeff)| ProductTerm { coeff, modes })
            .collect();
        Self { n, terms }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[ProductTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of a given assignment (zero when absent).
    pub fn coeff(&self, modes: &[ModeId]) -> Complex64 {
        self.terms
            .binary_search_by(|t| t.modes.as_slice().cmp(modes))
            .map(|i| self.terms[i].coeff)
            .unwrap_or_default()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::canonical(self.n, self.terms.iter().map(|t| (t.modes.clone(), t.coeff * factor)))
    }

    pub fn add(&self, other: &Self) -> Result<Self, SymmetryError> {
        self.check_n(other.n)?;
        let all = self.terms.iter().chain(&other.terms).map(|t| (t.modes.clone(), t.coeff));
        Ok(Self::canonical(self.n, all))
    }

    /// Term-for-term comparison of canonical forms.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.n != other.n {
            return false;
        }
        let diff = self.terms.iter().map(|t| (t.modes.clone(), t.coeff)).chain(
            other.terms.iter().map(|t| (t.modes.clone(), -t.coeff)),
        );
        let mut merged: BTreeMap<Vec<ModeId>, Complex64> = BTreeMap::new();
        for (m, c) in diff {
            *merged.entry(m).or_default() += c;
        }
        merged.values().all(|c| c.norm() <= tol)
    }

    /// True when every coefficient is invariant under every reordering of its assignment.
    pub fn coefficients_symmetric(&self, tol: f64) -> bool {
        Permutation::all(self.n)
            .iter()
            .all(|p| permute_labels(self, p).map(|s| s.approx_eq(self, tol)).unwrap_or(false))
    }

    fn check_n(&self, n: usize) -> Result<(), SymmetryError> {
        if self.n == n {
            Ok(())
        } else {
            Err(SymmetryError::SizeMismatch { expected: self.n, found: n })
        }
    }
}

fn check_perm(s: &NParticleState, perm: &Permutation) -> Result<(), SymmetryError> {
    if perm.len() != s.n {
        return Err(SymmetryError::BadPermutation { perm: perm.images().to_vec(), n: s.n });
    }
    Ok(())
}

fn relabel(modes: &[ModeId], perm: &Permutation) -> Vec<ModeId> {
    let mut out = modes.to_vec();
    for (j, &m) in modes.iter().enumerate() {
        out[perm.apply(j)] = m;
    }
    out
}

/// Permute Hilbert-space labels: the mode in slot `j` moves to slot `perm(j)`.
pub fn permute_labels(s: &NParticleState, perm: &Permutation) -> Result<NParticleState, SymmetryError> {
    check_perm(s, perm)?;
    Ok(NParticleState::canonical(s.n, s.terms.iter().map(|t| (relabel(&t.modes, perm), t.coeff))))
}

/// Permute function parameters: slot `j` receives the mode formerly in slot `perm(j)`.
pub fn permute_parameters(s: &NParticleState, perm: &Permutation) -> Result<NParticleState, SymmetryError> {
    check_perm(s, perm)?;
    Ok(NParticleState::canonical(
        s.n,
        s.terms.iter().map(|t| (perm.images().iter().map(|&k| t.modes[k]).collect(), t.coeff)),
    ))
}

fn project(s: &NParticleState, signed: bool) -> NParticleState {
    let perms = Permutation::all(s.n);
    let mut merged: BTreeMap<Vec<ModeId>, Complex64> = BTreeMap::new();
    // Accumulate integer multiples of each coefficient first and divide once,
    // so that cancelling contributions cancel exactly.
    for t in &s.terms {
        for p in &perms {
            let weight = if signed { p.sign() as f64 } else { 1.0 };
            *merged.entry(relabel(&t.modes, p)).or_default() += t.coeff * weight;
        }
    }
    let norm = perms.len() as f64;
    NParticleState::canonical(s.n, merged.into_iter().map(|(m, c)| (m, c / norm)))
}

/// Symmetrizer `(1/n!) sum_P P`, an idempotent projector.
pub fn symmetrize(s: &NParticleState) -> NParticleState {
    project(s, false)
}

/// Antisymmetrizer `(1/n!) sum_P sgn(P) P`.
pub fn antisymmetrize(s: &NParticleState) -> NParticleState {
    project(s, true)
}

/// `<a|b> = sum conj(c_a) c_b prod_j <a_j|b_j>`.
pub fn scalar_product(
    a: &NParticleState,
    b: &NParticleState,
    ov: &impl OverlapProvider,
) -> Result<Complex64, SymmetryError> {
    a.check_n(b.n)?;
    let mut total = Complex64::new(0.0, 0.0);
    for ta in &a.terms {
        for tb in &b.terms {
            let mut prod = ta.coeff.conj() * tb.coeff;
            for (&ma, &mb) in ta.modes.iter().zip(&tb.modes) {
                prod *= ov.overlap(ma, mb);
            }
            total += prod;
        }
    }
    Ok(total)
}

pub fn norm(s: &NParticleState, ov: &impl OverlapProvider) -> f64 {
    scalar_product(s, s, ov).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0)
}

fn check_normalized(alpha: Complex64, beta: Complex64) -> Result<(), SymmetryError> {
    let total = alpha.norm_sqr() + beta.norm_sqr();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(SymmetryError::NotNormalized(total));
    }
    Ok(())
}

/// `alpha phi(1) eta(2) + beta eta(1) phi(2)`: the exchange-degenerate pair.
pub fn exchange_superposition(
    phi: ModeId,
    eta: ModeId,
    alpha: Complex64,
    beta: Complex64,
) -> Result<NParticleState, SymmetryError> {
    check_normalized(alpha, beta)?;
    NParticleState::new(
        2,
        vec![ProductTerm::new(alpha, vec![phi, eta]), ProductTerm::new(beta, vec![eta, phi])],
    )
}

/// Expectation of a symmetric operator in the exchange-degenerate pair from its
/// direct `<phi eta|O|phi eta>` and exchange `<phi eta|O|eta phi>` elements.
pub fn interference_value(
    alpha: Complex64,
    beta: Complex64,
    direct: Complex64,
    exchange: Complex64,
) -> Result<Complex64, SymmetryError> {
    check_normalized(alpha, beta)?;
    let weight = alpha.norm_sqr() + beta.norm_sqr();
    let cross = 2.0 * (alpha.conj() * beta).re;
    Ok(direct * weight + exchange * cross)
}

/// Direct and exchange elements of a separable operator `o x o` between `phi eta` products.
pub fn direct_and_exchange(phi: ModeId, eta: ModeId, op: &impl OverlapProvider) -> (Complex64, Complex64) {
    let direct = op.overlap(phi, phi) * op.overlap(eta, eta);
    let exchange = op.overlap(phi, eta) * op.overlap(eta, phi);
    (direct, exchange)
}

/// `M[i][j] = <a_i|b_j>`.
pub fn overlap_matrix(
    a_modes: &[ModeId],
    b_modes: &[ModeId],
    ov: &impl OverlapProvider,
) -> Result<Array2<Complex64>, SymmetryError> {
    if a_modes.len() != b_modes.len() {
        return Err(SymmetryError::SizeMismatch { expected: a_modes.len(), found: b_modes.len() });
    }
    let n = a_modes.len();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| ov.overlap(a_modes[i], b_modes[j])))
}

fn square_order(m: &Array2<Complex64>) -> Result<usize, SymmetryError> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(SymmetryError::NotSquare { rows, cols });
    }
    Ok(rows)
}

/// Permanent by Ryser's inclusion-exclusion formula, visiting column subsets in
/// Gray-code order so each step updates the row sums by one column.
pub fn permanent(m: &Array2<Complex64>) -> Result<Complex64, SymmetryError> {
    let n = square_order(m)?;
    if n > MAX_PERMANENT_ORDER {
        return Err(SymmetryError::TooLarge(n));
    }
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut in_subset = vec![false; n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut subset_size = 0usize;
    for k in 1u64..(1u64 << n) {
        let col = k.trailing_zeros() as usize;
        let entering = !in_subset[col];
        in_subset[col] = entering;
        if entering {
            subset_size += 1;
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += m[[i, col]];
            }
        } else {
            subset_size -= 1;
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= m[[i, col]];
            }
        }
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |acc, &s| acc * s);
        if (n - subset_size).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    Ok(total)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &Array2<Complex64>) -> Result<Complex64, SymmetryError> {
    let n = square_order(m)?;
    let mut a = m.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[[i, k]].norm().total_cmp(&a[[j, k]].norm()))
            .expect("non-empty pivot range");
        if a[[pivot, k]].norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if pivot != k {
            for j in 0..n {
                a.swap([k, j], [pivot, j]);
            }
            det = -det;
        }
        let p = a[[k, k]];
        det *= p;
        for i in k + 1..n {
            let factor = a[[i, k]] / p;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in k + 1..n {
                let v = a[[k, j]];
                a[[i, j]] -= factor * v;
            }
        }
    }
    Ok(det)
}

/// Sign of the exchange term in a transition amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExchangeSign {
    Plus,
    Minus,
}

impl ExchangeSign {
    pub fn factor(self) -> f64 {
        match self {
            ExchangeSign::Plus => 1.0,
            ExchangeSign::Minus => -1.0,
        }
    }
}

fn swap_pair(s: &NParticleState) -> Result<NParticleState, SymmetryError> {
    if s.n != 2 {
        return Err(SymmetryError::SizeMismatch { expected: 2, found: s.n });
    }
    permute_labels(s, &Permutation::transposition(2, 0, 1))
}

/// Transition amplitude with only the final state (anti)symmetrized and no
/// normalisation: `<b(1,2) ± b(2,1) | a(1,2)>`.
pub fn feynman_amplitude(
    b: &NParticleState,
    a: &NParticleState,
    sign: ExchangeSign,
    ov: &impl OverlapProvider,
) -> Result<Complex64, SymmetryError> {
    b.check_n(a.n)?;
    let b_sym = b.add(&swap_pair(b)?.scale(sign.factor().into()))?;
    scalar_product(&b_sym, a, ov)
}

/// Textbook amplitude with both states (anti)symmetrized and `1/sqrt 2` on each.
pub fn standard_amplitude(
    b: &NParticleState,
    a: &NParticleState,
    sign: ExchangeSign,
    ov: &impl OverlapProvider,
) -> Result<Complex64, SymmetryError> {
    b.check_n(a.n)?;
    let c = Complex64::new(sign.factor(), 0.0);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let b_sym = b.add(&swap_pair(b)?.scale(c))?.scale(h);
    let a_sym = a.add(&swap_pair(a)?.scale(c))?.scale(h);
    scalar_product(&b_sym, &a_sym, ov)
}

/// Versioned JSON form of a state: `{"schema": 1, "n": .., "terms": [{"coeff": [re, im], "modes": [..]}]}`.
///
/// Modes are either non-negative integers or string labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    #[serde(default = "StateDocument::current_schema")]
    pub schema: u32,
    pub n: usize,
    pub terms: Vec<TermDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDocument {
    pub coeff: [f64; 2],
    pub modes: Vec<ModeLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeLabel {
    Index(u64),
    Name(String),
}

impl StateDocument {
    pub const SCHEMA: u32 = 1;

    fn current_schema() -> u32 {
        Self::SCHEMA
    }

    /// Resolve labels to mode ids in order of first appearance.
    pub fn to_state(&self) -> Result<(NParticleState, Vec<ModeLabel>), SymmetryError> {
        let mut labels: Vec<ModeLabel> = Vec::new();
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let modes = t
                .modes
                .iter()
                .map(|l| {
                    let idx = labels.iter().position(|x| x == l).unwrap_or_else(|| {
                        labels.push(l.clone());
                        labels.len() - 1
                    });
                    ModeId(idx)
                })
                .collect();
            terms.push(ProductTerm::new(Complex64::new(t.coeff[0], t.coeff[1]), modes));
        }
        Ok((NParticleState::new(self.n, terms)?, labels))
    }

    pub fn from_state(state: &NParticleState, labels: &[ModeLabel]) -> Self {
        let label = |m: ModeId| labels.get(m.0).cloned().unwrap_or(ModeLabel::Index(m.0 as u64));
        Self {
            schema: Self::SCHEMA,
            n: state.n(),
            terms: state
                .terms()
                .iter()
                .map(|t| TermDocument { coeff: [t.coeff.re, t.coeff.im], modes: t.modes.iter().map(|&m| label(m)).collect() })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const PHI: ModeId = ModeId(0);
    const ETA: ModeId = ModeId(1);
    const ZETA: ModeId = ModeId(2);

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_permutations_leave_state_unchanged() {
        let s = NParticleState::new(
            3,
            vec![ProductTerm::new(c(0.5, 0.1), vec![PHI, ETA, ZETA]), ProductTerm::new(c(-0.2, 0.0), vec![ZETA, PHI, PHI])],
        )
        .unwrap();
        let id = Permutation::identity(3);
        assert_eq!(permute_labels(&s, &id).unwrap(), s);
        assert_eq!(permute_parameters(&s, &id).unwrap(), s);
    }

    #[test]
    fn label_swap_moves_modes() {
        let s = NParticleState::product(&[PHI, ETA]);
        let swapped = permute_labels(&s, &Permutation::transposition(2, 0, 1)).unwrap();
        assert_eq!(swapped, NParticleState::product(&[ETA, PHI]));
    }

    #[test]
    fn three_cycle_has_order_three() {
        let s = NParticleState::product(&[PHI, ETA, ZETA]);
        let cycle = Permutation::new(vec![1, 2, 0]).unwrap();
        let mut t = s.clone();
        for _ in 0..3 {
            t = permute_labels(&t, &cycle).unwrap();
        }
        assert_eq!(t, s);
        assert_ne!(permute_labels(&s, &cycle).unwrap(), s);
    }

    #[test]
    fn bad_permutations_are_rejected() {
        assert!(matches!(Permutation::new(vec![0, 0, 1]), Err(SymmetryError::BadPermutation { .. })));
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        let s = NParticleState::product(&[PHI, ETA]);
        assert!(permute_labels(&s, &Permutation::identity(3)).is_err());
    }

    #[test]
    fn labels_and_parameters_are_dual_on_single_products() {
        let s = NParticleState::product(&[PHI, ETA, ZETA, PHI]);
        for p in Permutation::all(4) {
            assert_eq!(permute_labels(&s, &p).unwrap(), permute_parameters(&s, &p.inverse()).unwrap());
        }
    }

    #[test]
    fn sign_and_count_of_permutations() {
        let all = Permutation::all(4);
        assert_eq!(all.len(), 24);
        assert_eq!(all.iter().filter(|p| p.sign() == 1).count(), 12);
        assert_eq!(Permutation::transposition(5, 1, 3).sign(), -1);
        assert_eq!(Permutation::new(vec![1, 2, 0]).unwrap().sign(), 1);
    }

    #[test]
    fn symmetrize_pair() {
        let s = symmetrize(&NParticleState::product(&[PHI, ETA]));
        assert_eq!(s.terms().len(), 2);
        assert_eq!(s.coeff(&[PHI, ETA]), c(0.5, 0.0));
        assert_eq!(s.coeff(&[ETA, PHI]), c(0.5, 0.0));
        let a = antisymmetrize(&NParticleState::product(&[PHI, ETA]));
        assert_eq!(a.coeff(&[ETA, PHI]), c(-0.5, 0.0));
    }

    #[test]
    fn equal_modes_have_no_antisymmetric_part() {
        assert!(antisymmetrize(&NParticleState::product(&[PHI, PHI])).is_zero());
    }

    #[test]
    fn scalar_product_of_orthonormal_product() {
        let s = NParticleState::product(&[PHI, ETA]);
        assert_eq!(scalar_product(&s, &s, &Orthonormal).unwrap(), c(1.0, 0.0));
        let t = NParticleState::product(&[PHI, ETA, ZETA]);
        assert!(matches!(scalar_product(&s, &t, &Orthonormal), Err(SymmetryError::SizeMismatch { .. })));
    }

    #[test]
    fn exchange_superposition_cases() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plain = exchange_superposition(PHI, ETA, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(plain, NParticleState::product(&[PHI, ETA]));

        let sym = exchange_superposition(PHI, ETA, c(r, 0.0), c(r, 0.0)).unwrap();
        let expected = symmetrize(&NParticleState::product(&[PHI, ETA])).scale(c(2f64.sqrt(), 0.0));
        assert!(sym.approx_eq(&expected, 1e-15));

        let anti = exchange_superposition(PHI, ETA, c(r, 0.0), c(-r, 0.0)).unwrap();
        let expected = antisymmetrize(&NParticleState::product(&[PHI, ETA])).scale(c(2f64.sqrt(), 0.0));
        assert!(anti.approx_eq(&expected, 1e-15));

        assert!(matches!(exchange_superposition(PHI, ETA, c(1.0, 0.0), c(1.0, 0.0)), Err(SymmetryError::NotNormalized(_))));
    }

    #[test]
    fn interference_cases() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in [(c(1.0, 0.0), c(0.0, 0.0)), (c(r, 0.0), c(0.0, r)), (c(0.6, 0.0), c(0.0, 0.8))] {
            assert_relative_eq!(interference_value(a, b, c(1.0, 0.0), c(0.0, 0.0)).unwrap().re, 1.0);
        }
        let e = c(0.3, 0.0);
        assert_relative_eq!(interference_value(c(r, 0.0), c(r, 0.0), c(1.0, 0.0), e).unwrap().re, 1.3, epsilon = 1e-15);
        let v = interference_value(c(r, 0.0), c(0.0, r), c(0.7, 0.0), e).unwrap();
        assert_relative_eq!(v.re, 0.7, epsilon = 1e-15);
        assert!(interference_value(c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0), e).is_err());
    }

    #[test]
    fn overlap_matrix_of_orthonormal_list() {
        let m = overlap_matrix(&[PHI, ETA, ZETA], &[PHI, ETA, ZETA], &Orthonormal).unwrap();
        assert_eq!(m, Array2::from_diag(&ndarray::arr1(&[c(1.0, 0.0); 3])));
        let one = overlap_matrix(&[PHI], &[ETA], &|_: ModeId, _: ModeId| c(0.25, -0.5)).unwrap();
        assert_eq!(one[[0, 0]], c(0.25, -0.5));
        assert!(overlap_matrix(&[PHI], &[PHI, ETA], &Orthonormal).is_err());
    }

    #[test]
    fn two_by_two_permanent_and_determinant() {
        let m = ndarray::arr2(&[[c(1.0, 2.0), c(3.0, 0.0)], [c(0.0, -1.0), c(4.0, 1.0)]]);
        let (a, b, cc, d) = (m[[0, 0]], m[[0, 1]], m[[1, 0]], m[[1, 1]]);
        assert!((permanent(&m).unwrap() - (a * d + b * cc)).norm() < 1e-14);
        assert!((determinant(&m).unwrap() - (a * d - b * cc)).norm() < 1e-14);
    }

    #[test]
    fn identity_permanent_and_determinant() {
        for n in 1..7 {
            let m = Array2::from_diag(&ndarray::Array1::from_elem(n, c(1.0, 0.0)));
            assert_eq!(permanent(&m).unwrap(), c(1.0, 0.0));
            assert_eq!(determinant(&m).unwrap(), c(1.0, 0.0));
        }
    }

    #[test]
    fn matrix_shape_errors() {
        let rect = Array2::<Complex64>::zeros((2, 3));
        assert!(matches!(permanent(&rect), Err(SymmetryError::NotSquare { .. })));
        assert!(matches!(determinant(&rect), Err(SymmetryError::NotSquare { .. })));
        let big = Array2::<Complex64>::zeros((21, 21));
        assert!(matches!(permanent(&big), Err(SymmetryError::TooLarge(21))));
    }

    #[test]
    fn feynman_amplitude_simple_cases() {
        let ab = NParticleState::product(&[PHI, ETA]);
        assert_eq!(feynman_amplitude(&ab, &ab, ExchangeSign::Plus, &Orthonormal).unwrap(), c(1.0, 0.0));
        let aa = NParticleState::product(&[PHI, PHI]);
        assert_eq!(feynman_amplitude(&aa, &aa, ExchangeSign::Minus, &Orthonormal).unwrap(), c(0.0, 0.0));
        let three = NParticleState::product(&[PHI, ETA, ZETA]);
        assert!(feynman_amplitude(&three, &three, ExchangeSign::Plus, &Orthonormal).is_err());
    }

    #[test]
    fn gram_overlap_validation() {
        let bad = ndarray::arr2(&[[c(1.0, 0.0), c(0.2, 0.1)], [c(0.2, 0.1), c(1.0, 0.0)]]);
        assert!(matches!(GramOverlap::new(bad), Err(SymmetryError::InvalidGram(_))));
        let good = ndarray::arr2(&[[c(1.0, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(1.0, 0.0)]]);
        let g = GramOverlap::new(good).unwrap();
        assert_eq!(g.overlap(ETA, PHI), c(0.2, -0.1));
        assert_eq!(g.overlap(ZETA, ZETA), c(1.0, 0.0));
    }

    #[test]
    fn mode_table_is_append_only() {
        let table = ModeTable::new();
        let a = table.register("phi");
        let b = table.register("eta");
        assert_eq!((a, b), (ModeId(0), ModeId(1)));
        assert_eq!(table.get(b), Some("eta"));
        assert_eq!(table.get(ModeId(5)), None);
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn document_round_trip_with_labels() {
        let json = r#"{"schema":1,"n":2,"terms":[{"coeff":[1.0,0.0],"modes":["phi","eta"]}]}"#;
        let doc: StateDocument = serde_json::from_str(json).unwrap();
        let (state, labels) = doc.to_state().unwrap();
        let sym = symmetrize(&state);
        let out = StateDocument::from_state(&sym, &labels);
        assert_eq!(out.terms.len(), 2);
        assert_eq!(out.terms[1].modes, vec![ModeLabel::Name("eta".into()), ModeLabel::Name("phi".into())]);
        let bad = r#"{"n":3,"terms":[{"coeff":[1.0,0.0],"modes":[0,1]}]}"#;
        let doc: StateDocument = serde_json::from_str(bad).unwrap();
        assert!(doc.to_state().is_err());
    }
}
