//! Exact state counting for particles distributed over quantum cells.
//!
//! A region holding `n` particles in `g` cells admits
//!
//! * `C(n + g - 1, n)` Bose arrangements (decompositions of `n` into `g`
//!   non-negative parts),
//! * `C(g, n)` Fermi arrangements (choices of `n` occupied cells),
//! * `g^n / n!` in the corrected Boltzmann count, the common `n << g` limit.
//!
//! Counts are exact big integers/rationals; entropies are reals.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

/// Largest `n + g` accepted by the enumeration oracle.
pub const ORACLE_LIMIT: u64 = 24;

/// Above this factorial argument entropies switch from exact integers to log-gamma.
const EXACT_LOG_LIMIT: u64 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CountingError {
    #[error("Pauli violation: {n} fermions in {g} cells")]
    PauliViolation { n: u64, g: u64 },
    #[error("region needs at least one cell")]
    NoCells,
    #[error("n + g = {0} exceeds the enumeration limit {ORACLE_LIMIT}")]
    TooLarge(u64),
    #[error("no enumeration oracle for {0:?} counting")]
    NoOracle(CellStatistics),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("a region set needs at least one region")]
    EmptyRegionSet,
    #[error("Boltzmann constant must be positive, got {0}")]
    InvalidConstant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatistics {
    Bose,
    Fermi,
    Boltzmann,
}

/// `n` particles in a region of `g` quantum cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupancyRegion {
    n: u64,
    g: u64,
}

impl OccupancyRegion {
    pub fn new(n: u64, g: u64) -> Result<Self, CountingError> {
        if g == 0 {
            return Err(CountingError::NoCells);
        }
        Ok(Self { n, g })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn g(&self) -> u64 {
        self.g
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // acc * (n - i) is always divisible by (i + 1) at this point.
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

pub fn bose_w(r: OccupancyRegion) -> BigUint {
    binomial(r.n + r.g - 1, r.n)
}

pub fn fermi_w(r: OccupancyRegion) -> Result<BigUint, CountingError> {
    if r.n > r.g {
        return Err(CountingError::PauliViolation { n: r.n, g: r.g });
    }
    Ok(binomial(r.g, r.n))
}

/// `g^n / n!` as an exact rational.
pub fn boltzmann_w(r: OccupancyRegion) -> BigRational {
    let numer = BigUint::from(r.g).pow(r.n as u32);
    let denom: BigUint = (1..=r.n).map(BigUint::from).product();
    BigRational::new(numer.into(), denom.into())
}

/// Exact count for any of the three statistics, as a rational.
pub fn count(r: OccupancyRegion, stat: CellStatistics) -> Result<BigRational, CountingError> {
    let as_ratio = |v: BigUint| BigRational::from_integer(v.into());
    match stat {
        CellStatistics::Bose => Ok(as_ratio(bose_w(r))),
        CellStatistics::Fermi => fermi_w(r).map(as_ratio),
        CellStatistics::Boltzmann => Ok(boltzmann_w(r)),
    }
}

/// First-order factors `(1 + n(n-1)/2g, 1 - n(n-1)/2g)` relating the Bose and
/// Fermi counts to the Boltzmann count when `n << g`.
pub fn limit_correction(r: OccupancyRegion) -> (f64, f64) {
    let d = (r.n as f64) * (r.n as f64 - 1.0).max(0.0) / (2.0 * r.g as f64);
    (1.0 + d, 1.0 - d)
}

/// `w * n! / g^n`: the count relative to the Boltzmann count.
pub fn boltzmann_ratio(r: OccupancyRegion, stat: CellStatistics) -> Result<f64, CountingError> {
    let ratio = count(r, stat)? / boltzmann_w(r);
    Ok(ratio.to_f64().unwrap_or(f64::NAN))
}

fn check_oracle(r: OccupancyRegion) -> Result<(), CountingError> {
    if r.n + r.g > ORACLE_LIMIT {
        return Err(CountingError::TooLarge(r.n + r.g));
    }
    Ok(())
}

/// Visit every decomposition of `n` into `g` non-negative parts.
pub fn for_each_bose_arrangement(n: u64, g: u64, visit: &mut impl FnMut(&[u64])) {
    fn go(remaining: u64, cells_left: u64, parts: &mut Vec<u64>, visit: &mut impl FnMut(&[u64])) {
        if cells_left == 1 {
            parts.push(remaining);
            visit(parts);
            parts.pop();
            return;
        }
        for k in 0..=remaining {
            parts.push(k);
            go(remaining - k, cells_left - 1, parts, visit);
            parts.pop();
        }
    }
    if g == 0 {
        return;
    }
    go(n, g, &mut Vec::with_capacity(g as usize), visit);
}

/// Visit every set of `n` occupied cells out of `g`, as an occupation bit list.
pub fn for_each_fermi_arrangement(n: u64, g: u64, visit: &mut impl FnMut(&[u64])) {
    fn go(to_place: u64, cells_left: u64, cells: &mut Vec<u64>, visit: &mut impl FnMut(&[u64])) {
        if cells_left == 0 {
            if to_place == 0 {
                visit(cells);
            }
            return;
        }
        if to_place > cells_left {
            return;
        }
        cells.push(0);
        go(to_place, cells_left - 1, cells, visit);
        cells.pop();
        if to_place > 0 {
            cells.push(1);
            go(to_place - 1, cells_left - 1, cells, visit);
            cells.pop();
        }
    }
    go(n, g, &mut Vec::with_capacity(g as usize), visit);
}

/// Count by explicit enumeration of arrangements; no factorials involved.
pub fn oracle_count(r: OccupancyRegion, stat: CellStatistics) -> Result<BigUint, CountingError> {
    check_oracle(r)?;
    let mut total = 0u64;
    match stat {
        CellStatistics::Bose => for_each_bose_arrangement(r.n, r.g, &mut |_| total += 1),
        CellStatistics::Fermi => for_each_fermi_arrangement(r.n, r.g, &mut |_| total += 1),
        CellStatistics::Boltzmann => return Err(CountingError::NoOracle(stat)),
    }
    Ok(BigUint::from(total))
}

/// Bose arrangements listed explicitly, in lexicographic order.
pub fn bose_arrangements(r: OccupancyRegion) -> Result<Vec<Vec<u64>>, CountingError> {
    check_oracle(r)?;
    let mut out = Vec::new();
    for_each_bose_arrangement(r.n, r.g, &mut |p| out.push(p.to_vec()));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexFraction {
    /// `1 - g! / ((g - n)! g^n)`.
    pub exact: f64,
    /// `n (n - 1) / 2g`.
    pub asymptote: f64,
}

/// Fraction of the `g^n` index tuples in which some index repeats.
pub fn multi_index_fraction(n: u64, g: u64) -> Result<MultiIndexFraction, CountingError> {
    if n == 0 || n > g {
        return Err(CountingError::DomainError(format!("need 1 <= n <= g, got n = {n}, g = {g}")));
    }
    // 1 - prod_{k<n} (1 - k/g), summed in log space to avoid cancellation.
    let log_distinct: f64 = (1..n).map(|k| (-(k as f64) / g as f64).ln_1p()).sum();
    Ok(MultiIndexFraction {
        exact: -log_distinct.exp_m1(),
        asymptote: (n as f64) * (n as f64 - 1.0) / (2.0 * g as f64),
    })
}

fn ln_big(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits < 1000 {
        return v.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    (v >> shift).to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln w` for one region.
pub fn ln_count(r: OccupancyRegion, stat: CellStatistics) -> Result<f64, CountingError> {
    let (n, g) = (r.n, r.g);
    match stat {
        CellStatistics::Bose if n + g - 1 <= EXACT_LOG_LIMIT => Ok(ln_big(&bose_w(r))),
        CellStatistics::Bose => Ok(ln_factorial(n + g - 1) - ln_factorial(n) - ln_factorial(g - 1)),
        CellStatistics::Fermi if n > g => Err(CountingError::PauliViolation { n, g }),
        CellStatistics::Fermi if g <= EXACT_LOG_LIMIT => Ok(ln_big(&fermi_w(r)?)),
        CellStatistics::Fermi => Ok(ln_factorial(g) - ln_factorial(n) - ln_factorial(g - n)),
        CellStatistics::Boltzmann => Ok(n as f64 * (g as f64).ln() - ln_factorial(n)),
    }
}

/// Regions of phase space together with the Boltzmann constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    regions: Vec<OccupancyRegion>,
    k: f64,
}

impl RegionSet {
    pub fn new(regions: Vec<OccupancyRegion>, k: f64) -> Result<Self, CountingError> {
        if regions.is_empty() {
            return Err(CountingError::EmptyRegionSet);
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(CountingError::InvalidConstant(k));
        }
        Ok(Self { regions, k })
    }

    pub fn regions(&self) -> &[OccupancyRegion] {
        &self.regions
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn total_particles(&self) -> u64 {
        self.regions.iter().map(|r| r.n).sum()
    }
}

/// `S = k ln prod_i w_i`.
pub fn entropy(rs: &RegionSet, stat: CellStatistics) -> Result<f64, CountingError> {
    let mut total = 0.0;
    for &r in &rs.regions {
        total += ln_count(r, stat)?;
    }
    Ok(rs.k * total)
}

/// `-k ln N!`.
pub fn gibbs_correction(n: u64, k: f64) -> f64 {
    -k * ln_factorial(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEntropy {
    /// Distinguishable particles: `k ln (N! prod g_i^n_i / n_i!)`.
    pub uncorrected: f64,
    /// After adding `-k ln N!`; equals the Boltzmann-count entropy.
    pub corrected: f64,
}

pub fn classical_entropy(rs: &RegionSet) -> Result<ClassicalEntropy, CountingError> {
    let n = rs.total_particles();
    let corrected = entropy(rs, CellStatistics::Boltzmann)?;
    Ok(ClassicalEntropy { uncorrected: corrected - gibbs_correction(n, rs.k), corrected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn region(n: u64, g: u64) -> OccupancyRegion {
        OccupancyRegion::new(n, g).unwrap()
    }

    fn ratio(num: u64, den: u64) -> BigRational {
        BigRational::new(num.into(), den.into())
    }

    #[test]
    fn bose_examples() {
        assert_eq!(bose_w(region(0, 7)), BigUint::from(1u32));
        assert_eq!(bose_w(region(2, 3)), BigUint::from(6u32));
        assert_eq!(bose_w(region(3, 2)), BigUint::from(4u32));
    }

    #[test]
    fn fermi_examples() {
        assert_eq!(fermi_w(region(5, 5)).unwrap(), BigUint::from(1u32));
        assert_eq!(fermi_w(region(2, 3)).unwrap(), BigUint::from(3u32));
        assert_eq!(fermi_w(region(3, 2)), Err(CountingError::PauliViolation { n: 3, g: 2 }));
    }

    #[test]
    fn boltzmann_examples() {
        assert_eq!(boltzmann_w(region(0, 9)), ratio(1, 1));
        assert_eq!(boltzmann_w(region(2, 4)), ratio(8, 1));
        assert_eq!(boltzmann_w(region(3, 3)), ratio(9, 2));
    }

    #[test]
    fn zero_cells_rejected() {
        assert_eq!(OccupancyRegion::new(1, 0), Err(CountingError::NoCells));
    }

    #[test]
    fn limit_correction_examples() {
        let r = region(2, 1000);
        let (bose, fermi) = limit_correction(r);
        assert_relative_eq!(bose, 1.001, epsilon = 1e-15);
        assert_relative_eq!(fermi, 0.999, epsilon = 1e-15);
        assert_relative_eq!(boltzmann_ratio(r, CellStatistics::Bose).unwrap(), 1.001, epsilon = 1e-15);
        assert_eq!(limit_correction(region(1, 17)), (1.0, 1.0));
        let r = region(5, 10_000);
        assert!((boltzmann_ratio(r, CellStatistics::Bose).unwrap() - limit_correction(r).0).abs() < 1e-5);
        assert!((boltzmann_ratio(r, CellStatistics::Fermi).unwrap() - limit_correction(r).1).abs() < 1e-5);
    }

    #[test]
    fn bose_listing_for_two_in_three() {
        let listed = bose_arrangements(region(2, 3)).unwrap();
        let expected: Vec<Vec<u64>> =
            vec![vec![0, 0, 2], vec![0, 1, 1], vec![0, 2, 0], vec![1, 0, 1], vec![1, 1, 0], vec![2, 0, 0]];
        assert_eq!(listed, expected);
        assert_eq!(oracle_count(region(2, 3), CellStatistics::Bose).unwrap(), BigUint::from(6u32));
    }

    #[test]
    fn oracle_agrees_on_small_regions() {
        for g in 1..=8 {
            for n in 0..=8 {
                assert_eq!(oracle_count(region(n, g), CellStatistics::Bose).unwrap(), bose_w(region(n, g)));
            }
        }
        for g in 1..=10 {
            for n in 0..=g {
                assert_eq!(oracle_count(region(n, g), CellStatistics::Fermi).unwrap(), fermi_w(region(n, g)).unwrap());
            }
        }
    }

    #[test]
    fn oracle_guards() {
        assert_eq!(oracle_count(region(20, 5), CellStatistics::Bose), Err(CountingError::TooLarge(25)));
        assert!(matches!(oracle_count(region(1, 2), CellStatistics::Boltzmann), Err(CountingError::NoOracle(_))));
        assert_eq!(oracle_count(region(3, 2), CellStatistics::Fermi).unwrap(), BigUint::zero());
    }

    #[test]
    fn multi_index_examples() {
        let f = multi_index_fraction(1, 50).unwrap();
        assert_eq!(f.exact, 0.0);
        for g in [2, 7, 1000] {
            let f = multi_index_fraction(2, g).unwrap();
            assert_relative_eq!(f.exact, 1.0 / g as f64, max_relative = 1e-14);
            assert_relative_eq!(f.asymptote, 1.0 / g as f64);
        }
        // 1 - (999/1000)(998/1000)
        let f = multi_index_fraction(3, 1000).unwrap();
        assert_relative_eq!(f.exact, 0.002998, max_relative = 1e-12);
        assert_relative_eq!(f.asymptote, 0.003);
        assert!(multi_index_fraction(4, 3).is_err());
        assert!(multi_index_fraction(0, 3).is_err());
    }

    #[test]
    fn entropy_examples() {
        let one = RegionSet::new(vec![region(0, 4)], 1.0).unwrap();
        assert_eq!(entropy(&one, CellStatistics::Bose).unwrap(), 0.0);
        let rs = RegionSet::new(vec![region(2, 3)], 1.0).unwrap();
        assert_relative_eq!(entropy(&rs, CellStatistics::Bose).unwrap(), 6f64.ln(), epsilon = 1e-15);
        let a = RegionSet::new(vec![region(3, 9)], 2.0).unwrap();
        let b = RegionSet::new(vec![region(40, 70)], 2.0).unwrap();
        let ab = RegionSet::new(vec![region(3, 9), region(40, 70)], 2.0).unwrap();
        for stat in [CellStatistics::Bose, CellStatistics::Fermi, CellStatistics::Boltzmann] {
            let sum = entropy(&a, stat).unwrap() + entropy(&b, stat).unwrap();
            assert_relative_eq!(entropy(&ab, stat).unwrap(), sum, max_relative = 1e-14);
        }
        let bad = RegionSet::new(vec![region(3, 2)], 1.0).unwrap();
        assert!(matches!(entropy(&bad, CellStatistics::Fermi), Err(CountingError::PauliViolation { .. })));
    }

    #[test]
    fn log_gamma_branch_matches_exact_logs() {
        for (n, g) in [(15, 30), (60, 90), (100, 400)] {
            let r = region(n, g);
            assert_relative_eq!(ln_count(r, CellStatistics::Bose).unwrap(), ln_big(&bose_w(r)), max_relative = 1e-12);
            assert_relative_eq!(ln_count(r, CellStatistics::Fermi).unwrap(), ln_big(&fermi_w(r).unwrap()), max_relative = 1e-12);
        }
    }

    #[test]
    fn gibbs_examples() {
        assert_eq!(gibbs_correction(0, 1.0), 0.0);
        assert_eq!(gibbs_correction(1, 1.0), 0.0);
        assert_relative_eq!(gibbs_correction(3, 1.0), -6f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(gibbs_correction(3, 1.0), -1.791759469228055, epsilon = 1e-12);
        let n = 1_000_000f64;
        let stirling = n * n.ln() - n;
        assert!(((-gibbs_correction(1_000_000, 1.0) - stirling) / stirling).abs() < 1e-5);
    }

    #[test]
    fn classical_correction_links_both_entropies() {
        let rs = RegionSet::new(vec![region(3, 10), region(5, 12)], 1.0).unwrap();
        let c = classical_entropy(&rs).unwrap();
        assert_relative_eq!(c.uncorrected - c.corrected, ln_factorial(8), max_relative = 1e-14);
        assert_relative_eq!(c.corrected, entropy(&rs, CellStatistics::Boltzmann).unwrap());
    }
}
