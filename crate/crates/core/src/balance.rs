//! Populations of s-fold condensed wavepackets and their detailed balance.
//!
//! `p(s, eps) d eps` is the mean number of packets in the energy bin at `eps`
//! that each carry `s` quanta. Two kinds of packets exchange quanta through
//! collision channels: a kind-1 packet at `eps1_i` hands `n` quanta to one at
//! `eps1_f` while a kind-2 packet at `eps2_i` hands `n'` quanta to one at
//! `eps2_f`, with `n (eps1_i - eps1_f) = n' (eps2_f - eps2_i)`. Detailed
//! balance
//!
//! ```text
//! p(s,e1i) p(r,e1f) q(s',e2i) q(r',e2f) = p(s-n,e1i) p(r+n,e1f) q(s'-n',e2i) q(r'+n',e2f)
//! ```
//!
//! holds for every slot tuple exactly when `p(s, eps) = a(eps) exp(-(b eps - c) s)`.
//!
//! [`Relaxer`] evolves arbitrary populations by mass-action kinetics on the
//! channels: every slot tuple fires forwards and backwards at rate `lambda`
//! times the product of the occupation fractions `x = p d eps / g`. The rule
//! conserves packets per bin and quanta per kind, its fixed points are the
//! balanced populations, and `sum_bins [g ln g - sum_s P ln P]` never decreases.

use crate::distributions::{Level, Statistics};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Default cap on the condensation order of Bose packets.
pub const DEFAULT_S_MAX: usize = 64;

/// Default relaxation rate `lambda`.
pub const DEFAULT_RATE: f64 = 0.1;

/// Tolerance on per-bin packet totals, relative to `max(1, g)`.
pub const PACKET_TOLERANCE: f64 = 1e-9;

/// Largest probability mass allowed beyond `s_max` in a stationary population.
pub const TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bin or slot off grid: {0}")]
    OffGrid(String),
    #[error("order overflow: slot {slot} + {shift} exceeds s_max = {s_max}")]
    OrderOverflow { slot: usize, shift: usize, s_max: usize },
    #[error("order underflow: slot {slot} < {shift}")]
    OrderUnderflow { slot: usize, shift: usize },
    #[error("divergent series: b eps - c = {exponent} <= 0 in bin {bin}")]
    DivergentSeries { bin: usize, exponent: f64 },
    #[error("truncated tail too heavy in bin {bin}: {tail:e} of the packets lie beyond s_max")]
    TruncatedTail { bin: usize, tail: f64 },
    #[error("channel violates energy conservation by {mismatch}")]
    EnergyMismatch { mismatch: f64 },
    #[error("packet total in bin {bin} drifted to {total}, expected {expected}")]
    InvariantViolation { bin: usize, total: f64, expected: f64 },
    #[error("no convergence after {sweeps} sweeps: max residual {residual:e}")]
    NonConvergence { sweeps: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    One,
    Two,
}

/// Energy bin: centre, width `d eps` and packet capacity `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBin {
    pub energy: f64,
    pub width: f64,
    pub modes: f64,
}

/// Energy bins for momentum shells, using `d eps = (p c^2 / eps) dp`.
pub fn bins_from_levels(levels: &[Level], c: f64) -> Vec<EnergyBin> {
    levels
        .iter()
        .map(|l| EnergyBin { energy: l.energy, width: l.p * c * c / l.energy * l.dp, modes: l.modes })
        .collect()
}

/// `count` bins at `e0, e0 + de, ...`, all of width `de` and capacity `modes`.
pub fn uniform_bins(e0: f64, de: f64, count: usize, modes: f64) -> Vec<EnergyBin> {
    (0..count).map(|i| EnergyBin { energy: e0 + de * i as f64, width: de, modes }).collect()
}

/// The table `p(s, eps)` of one packet kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensatePopulation {
    kind: Kind,
    statistics: Statistics,
    bins: Vec<EnergyBin>,
    s_max: usize,
    /// Row-major, `bins.len()` rows of `s_max + 1` densities.
    table: Vec<f64>,
}

impl CondensatePopulation {
    pub fn new(
        kind: Kind,
        statistics: Statistics,
        bins: Vec<EnergyBin>,
        s_max: usize,
        table: Vec<f64>,
    ) -> Result<Self, BalanceError> {
        let pop = Self::unchecked(kind, statistics, bins, s_max, table)?;
        pop.check_packets(PACKET_TOLERANCE)?;
        Ok(pop)
    }

    fn unchecked(
        kind: Kind,
        statistics: Statistics,
        bins: Vec<EnergyBin>,
        s_max: usize,
        table: Vec<f64>,
    ) -> Result<Self, BalanceError> {
        let invalid = |m: String| Err(BalanceError::InvalidPopulation(m));
        if bins.is_empty() {
            return invalid("no energy bins".into());
        }
        if s_max == 0 {
            return invalid("s_max must be at least 1".into());
        }
        if statistics == Statistics::Fermi && s_max != 1 {
            return invalid(format!("Fermi packets carry 0 or 1 quanta, got s_max = {s_max}"));
        }
        for (i, b) in bins.iter().enumerate() {
            if !(b.energy.is_finite() && b.width > 0.0 && b.width.is_finite() && b.modes > 0.0 && b.modes.is_finite()) {
                return invalid(format!("bin {i} needs finite energy, positive width and positive capacity"));
            }
        }
        if bins.windows(2).any(|w| w[0].energy >= w[1].energy) {
            return invalid("bin energies must be strictly increasing".into());
        }
        if table.len() != bins.len() * (s_max + 1) {
            return invalid(format!("table has {} entries, expected {}", table.len(), bins.len() * (s_max + 1)));
        }
        if table.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("densities must be finite and non-negative".into());
        }
        Ok(Self { kind, statistics, bins, s_max, table })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn bins(&self) -> &[EnergyBin] {
        &self.bins
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    /// Density `p(s, eps_bin)`.
    pub fn p(&self, bin: usize, s: usize) -> f64 {
        self.table[bin * (self.s_max + 1) + s]
    }

    /// Packet count `p(s, eps_bin) d eps`.
    pub fn packets(&self, bin: usize, s: usize) -> f64 {
        self.p(bin, s) * self.bins[bin].width
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        let w = self.s_max + 1;
        &self.table[bin * w..(bin + 1) * w]
    }

    pub fn set_p(&mut self, bin: usize, s: usize, value: f64) {
        self.table[bin * (self.s_max + 1) + s] = value;
    }

    pub fn packets_per_bin(&self) -> Vec<f64> {
        (0..self.bins.len()).map(|b| self.row(b).iter().sum::<f64>() * self.bins[b].width).collect()
    }

    fn check_packets(&self, tolerance: f64) -> Result<(), BalanceError> {
        for (bin, total) in self.packets_per_bin().into_iter().enumerate() {
            let expected = self.bins[bin].modes;
            if (total - expected).abs() > tolerance * expected.max(1.0) {
                return Err(BalanceError::InvariantViolation { bin, total, expected });
            }
        }
        Ok(())
    }

    /// Occupation fractions `p d eps / g`, row-major like the table.
    fn fractions(&self) -> Vec<f64> {
        let w = self.s_max + 1;
        let mut x = self.table.clone();
        for (b, bin) in self.bins.iter().enumerate() {
            for v in &mut x[b * w..(b + 1) * w] {
                *v *= bin.width / bin.modes;
            }
        }
        x
    }

    fn set_fractions(&mut self, x: &[f64]) {
        let w = self.s_max + 1;
        for (b, bin) in self.bins.iter().enumerate() {
            for (p, v) in self.table[b * w..(b + 1) * w].iter_mut().zip(&x[b * w..(b + 1) * w]) {
                *p = v * bin.modes / bin.width;
            }
        }
    }
}

/// `p(s, eps) = a(eps) exp(-(b eps - c) s)` on `0..=s_max`, normalised per bin.
///
/// No convergence requirement: any sign of `b eps - c` is accepted.
pub fn geometric_population(
    kind: Kind,
    statistics: Statistics,
    bins: Vec<EnergyBin>,
    b: f64,
    c: f64,
    s_max: usize,
) -> Result<CondensatePopulation, BalanceError> {
    if !(b.is_finite() && c.is_finite()) {
        return Err(BalanceError::InvalidParameter("b and c must be finite".into()));
    }
    let w = s_max + 1;
    let mut table = vec![0.0; bins.len() * w];
    for (i, bin) in bins.iter().enumerate() {
        let weights = geometric_weights(b * bin.energy - c, s_max);
        for (s, v) in weights.into_iter().enumerate() {
            table[i * w + s] = v * bin.modes / bin.width;
        }
    }
    CondensatePopulation::new(kind, statistics, bins, s_max, table)
}

/// Normalised `exp(-x s)` for `s = 0..=s_max`, computed from the largest term.
fn geometric_weights(x: f64, s_max: usize) -> Vec<f64> {
    let peak = if x >= 0.0 { 0.0 } else { -x * s_max as f64 };
    let mut w: Vec<f64> = (0..=s_max).map(|s| (-x * s as f64 - peak).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// The stationary population with `b = 1/kT` and `c = mu/kT`.
///
/// Bose packets need `b eps - c > 0` in every bin and a cap `s_max` beyond
/// which the untruncated geometric series holds less than [`TAIL_TOLERANCE`]
/// of the packets. Fermi packets use `s_max = 1`.
pub fn stationary_population(
    kind: Kind,
    statistics: Statistics,
    bins: Vec<EnergyBin>,
    b: f64,
    c: f64,
    s_max: usize,
) -> Result<CondensatePopulation, BalanceError> {
    if !(b.is_finite() && b > 0.0) {
        return Err(BalanceError::InvalidParameter(format!("b must be positive, got {b}")));
    }
    let s_max = match statistics {
        Statistics::Fermi => 1,
        Statistics::Bose => {
            for (bin, e) in bins.iter().enumerate() {
                let exponent = b * e.energy - c;
                if exponent <= 0.0 {
                    return Err(BalanceError::DivergentSeries { bin, exponent });
                }
                // Fraction of the infinite series beyond s_max.
                let tail = (-exponent * (s_max + 1) as f64).exp();
                if tail > TAIL_TOLERANCE {
                    return Err(BalanceError::TruncatedTail { bin, tail });
                }
            }
            s_max
        }
    };
    geometric_population(kind, statistics, bins, b, c, s_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quanta {
    pub per_bin: Vec<f64>,
    pub total: f64,
}

/// `sum_s s p(s, eps) d eps` per bin and over all bins.
pub fn total_quanta(pop: &CondensatePopulation) -> Quanta {
    let per_bin: Vec<f64> = (0..pop.bins.len())
        .map(|b| pop.row(b).iter().enumerate().map(|(s, p)| s as f64 * p).sum::<f64>() * pop.bins[b].width)
        .collect();
    let total = per_bin.iter().sum();
    Quanta { per_bin, total }
}

/// `k sum_bins [ln g! - sum_s ln (p(s) d eps)!]` with real factorials.
pub fn packet_entropy(pop: &CondensatePopulation, k: f64) -> Result<f64, BalanceError> {
    pop.check_packets(1e-6)?;
    let mut total = 0.0;
    for (b, bin) in pop.bins.iter().enumerate() {
        total += ln_gamma(bin.modes + 1.0);
        for s in 0..=pop.s_max {
            total -= ln_gamma(pop.packets(b, s) + 1.0);
        }
    }
    Ok(k * total)
}

/// Stirling form of [`packet_entropy`]: `k sum_bins [g ln g - sum_s P ln P]`.
///
/// This is the Lyapunov function of [`Relaxer`].
pub fn packet_entropy_stirling(pop: &CondensatePopulation, k: f64) -> Result<f64, BalanceError> {
    pop.check_packets(1e-6)?;
    let xlnx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
    let mut total = 0.0;
    for (b, bin) in pop.bins.iter().enumerate() {
        total += xlnx(bin.modes);
        for s in 0..=pop.s_max {
            total -= xlnx(pop.packets(b, s));
        }
    }
    Ok(k * total)
}

/// A collision: kind 1 moves `n` quanta from bin `first.0` to `first.1`,
/// kind 2 moves `n_prime` quanta from bin `second.0` to `second.1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CollisionChannel {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub n: usize,
    pub n_prime: usize,
}

impl CollisionChannel {
    pub fn new(first: (usize, usize), second: (usize, usize), n: usize, n_prime: usize) -> Self {
        Self { first, second, n, n_prime }
    }

    pub fn is_identity(&self) -> bool {
        self.n == 0 && self.n_prime == 0
    }

    /// Energy conservation within half the narrowest bin width involved.
    pub fn check(&self, pop1: &CondensatePopulation, pop2: &CondensatePopulation) -> Result<(), BalanceError> {
        let bin = |pop: &CondensatePopulation, i: usize| {
            pop.bins.get(i).copied().ok_or_else(|| BalanceError::OffGrid(format!("bin {i} of {}", pop.bins.len())))
        };
        let (a, b) = (bin(pop1, self.first.0)?, bin(pop1, self.first.1)?);
        let (c, d) = (bin(pop2, self.second.0)?, bin(pop2, self.second.1)?);
        if self.is_identity() {
            return Ok(());
        }
        if self.n > 0 && self.first.0 == self.first.1 || self.n_prime > 0 && self.second.0 == self.second.1 {
            return Err(BalanceError::InvalidParameter("a transfer needs distinct bins".into()));
        }
        let mismatch = self.n as f64 * (a.energy - b.energy) - self.n_prime as f64 * (d.energy - c.energy);
        let half_bin = 0.5 * [a.width, b.width, c.width, d.width].into_iter().fold(f64::INFINITY, f64::min);
        if mismatch.abs() > half_bin {
            return Err(BalanceError::EnergyMismatch { mismatch });
        }
        Ok(())
    }
}

/// Every channel that lowers a kind-1 packet by one bin while raising a kind-2
/// packet by one bin, with single-quantum transfers, when the two energy steps
/// agree within half a bin width.
pub fn ladder_channels(pop1: &CondensatePopulation, pop2: &CondensatePopulation) -> Vec<CollisionChannel> {
    let mut out = Vec::new();
    for i in 1..pop1.bins.len() {
        for j in 0..pop2.bins.len() - 1 {
            let ch = CollisionChannel::new((i, i - 1), (j, j + 1), 1, 1);
            if ch.check(pop1, pop2).is_ok() {
                out.push(ch);
            }
        }
    }
    out
}

/// Slot indices `(s, r, s', r')` of one balance equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slots {
    pub s: usize,
    pub r: usize,
    pub s_prime: usize,
    pub r_prime: usize,
}

/// Both sides of one balance equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceTerms {
    pub lhs: f64,
    pub rhs: f64,
}

impl BalanceTerms {
    pub fn difference(&self) -> f64 {
        self.lhs - self.rhs
    }

    /// `(lhs - rhs) / max(lhs, rhs)`; zero when both sides vanish.
    pub fn relative(&self) -> f64 {
        let scale = self.lhs.max(self.rhs);
        if scale == 0.0 {
            0.0
        } else {
            self.difference() / scale
        }
    }
}

/// Both sides of the balance equation for channel `ch` at `slots`.
pub fn balance_residual(
    pop1: &CondensatePopulation,
    pop2: &CondensatePopulation,
    ch: &CollisionChannel,
    slots: Slots,
) -> Result<BalanceTerms, BalanceError> {
    ch.check(pop1, pop2)?;
    let within = |pop: &CondensatePopulation, slot: usize| {
        if slot > pop.s_max {
            Err(BalanceError::OffGrid(format!("slot {slot} beyond s_max = {}", pop.s_max)))
        } else {
            Ok(())
        }
    };
    let lose = |slot: usize, shift: usize| {
        slot.checked_sub(shift).ok_or(BalanceError::OrderUnderflow { slot, shift })
    };
    let gain = |pop: &CondensatePopulation, slot: usize, shift: usize| {
        if slot + shift > pop.s_max {
            Err(BalanceError::OrderOverflow { slot, shift, s_max: pop.s_max })
        } else {
            Ok(slot + shift)
        }
    };
    for (pop, slot) in [(pop1, slots.s), (pop1, slots.r), (pop2, slots.s_prime), (pop2, slots.r_prime)] {
        within(pop, slot)?;
    }
    let (s_lo, r_hi) = (lose(slots.s, ch.n)?, gain(pop1, slots.r, ch.n)?);
    let (s2_lo, r2_hi) = (lose(slots.s_prime, ch.n_prime)?, gain(pop2, slots.r_prime, ch.n_prime)?);
    let (i, f) = ch.first;
    let (i2, f2) = ch.second;
    Ok(BalanceTerms {
        lhs: pop1.p(i, slots.s) * pop1.p(f, slots.r) * pop2.p(i2, slots.s_prime) * pop2.p(f2, slots.r_prime),
        rhs: pop1.p(i, s_lo) * pop1.p(f, r_hi) * pop2.p(i2, s2_lo) * pop2.p(f2, r2_hi),
    })
}

/// Extremes of `ln v[s] - ln v[s - n]` over `s = n..=s_max`.
///
/// A zero entry makes the range unbounded unless its partner vanishes too.
fn log_step_range(row: &[f64], n: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in n..row.len() {
        let (top, bottom) = (row[s], row[s - n]);
        let d = match (top > 0.0, bottom > 0.0) {
            (true, true) => top.ln() - bottom.ln(),
            (false, false) => continue,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
        };
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Largest relative residual of channel `ch` over all admissible slot tuples.
///
/// `ln(lhs/rhs)` splits into one term per bin, so the extremes follow from
/// per-bin extremes. Returns a value in `[0, 1]`.
pub fn channel_residual(
    pop1: &CondensatePopulation,
    pop2: &CondensatePopulation,
    ch: &CollisionChannel,
) -> Result<f64, BalanceError> {
    ch.check(pop1, pop2)?;
    if ch.is_identity() || ch.n > pop1.s_max || ch.n_prime > pop2.s_max {
        return Ok(0.0);
    }
    Ok(residual_from_ranges(
        log_step_range(pop1.row(ch.first.0), ch.n),
        log_step_range(pop1.row(ch.first.1), ch.n),
        log_step_range(pop2.row(ch.second.0), ch.n_prime),
        log_step_range(pop2.row(ch.second.1), ch.n_prime),
    ))
}

/// `ln(lhs/rhs) = d_i(s) - d_f(r + n) + d_i2(s') - d_f2(r' + n')` with `d` the
/// log step of each bin.
fn residual_from_ranges(i: (f64, f64), f: (f64, f64), i2: (f64, f64), f2: (f64, f64)) -> f64 {
    if [i, f, i2, f2].iter().any(|r| r.0 > r.1) {
        // A bin with no populated slot pair contributes no equation.
        return 0.0;
    }
    let hi = i.1 - f.0 + i2.1 - f2.0;
    let lo = i.0 - f.1 + i2.0 - f2.1;
    let worst = hi.abs().max(lo.abs());
    if worst.is_nan() {
        return 1.0;
    }
    -(-worst).exp_m1()
}

pub fn max_residual(
    pop1: &CondensatePopulation,
    pop2: &CondensatePopulation,
    channels: &[CollisionChannel],
) -> Result<f64, BalanceError> {
    let mut worst: f64 = 0.0;
    for ch in channels {
        worst = worst.max(channel_residual(pop1, pop2, ch)?);
    }
    Ok(worst)
}

/// Least-squares slope of `ln p(s, eps_bin)` against `s` over populated slots.
pub fn log_slope(pop: &CondensatePopulation, bin: usize) -> Option<f64> {
    let points: Vec<(f64, f64)> = pop
        .row(bin)
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(s, p)| (s as f64, p.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    Some(sxy / sxx)
}

/// Move packets along random channels and slot tuples, conserving packets per
/// bin, quanta per kind and total energy.
///
/// Each move shifts `strength` (in `(0, 1)`) times the smallest of the four
/// source packet counts; slots are drawn from `0..=min(s_max, max_slot)`.
pub fn perturb<R: Rng + ?Sized>(
    pop1: &mut CondensatePopulation,
    pop2: &mut CondensatePopulation,
    channels: &[CollisionChannel],
    moves: usize,
    strength: f64,
    max_slot: usize,
    rng: &mut R,
) -> Result<(), BalanceError> {
    if !(strength > 0.0 && strength < 1.0) {
        return Err(BalanceError::InvalidParameter(format!("strength must lie in (0, 1), got {strength}")));
    }
    let usable: Vec<CollisionChannel> = channels
        .iter()
        .copied()
        .filter(|c| !c.is_identity() && c.n <= pop1.s_max && c.n_prime <= pop2.s_max)
        .collect();
    for ch in &usable {
        ch.check(pop1, pop2)?;
    }
    if usable.is_empty() {
        return Ok(());
    }
    let top1 = pop1.s_max.min(max_slot.max(1));
    let top2 = pop2.s_max.min(max_slot.max(1));
    for _ in 0..moves {
        let ch = usable[rng.random_range(0..usable.len())];
        let s = rng.random_range(ch.n..=top1.max(ch.n));
        let r = rng.random_range(0..=pop1.s_max - ch.n).min(top1);
        let s2 = rng.random_range(ch.n_prime..=top2.max(ch.n_prime));
        let r2 = rng.random_range(0..=pop2.s_max - ch.n_prime).min(top2);
        let (i, f) = ch.first;
        let (i2, f2) = ch.second;
        let amount = strength
            * [pop1.packets(i, s), pop1.packets(f, r), pop2.packets(i2, s2), pop2.packets(f2, r2)]
                .into_iter()
                .fold(f64::INFINITY, f64::min);
        let shift = |pop: &mut CondensatePopulation, bin: usize, from: usize, to: usize| {
            let w = pop.bins[bin].width;
            let (a, b) = (pop.p(bin, from) - amount / w, pop.p(bin, to) + amount / w);
            pop.set_p(bin, from, a);
            pop.set_p(bin, to, b);
        };
        shift(pop1, i, s, s - ch.n);
        shift(pop1, f, r, r + ch.n);
        shift(pop2, i2, s2, s2 - ch.n_prime);
        shift(pop2, f2, r2, r2 + ch.n_prime);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxOptions {
    pub steps: usize,
    pub seed: u64,
    pub rate: f64,
    pub tol: f64,
    pub k: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self { steps: 10_000, seed: 0, rate: DEFAULT_RATE, tol: 1e-10, k: 1.0 }
    }
}

/// Diagnostics after one sweep over all channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub max_residual: f64,
    /// Stirling-form packet entropy of both kinds.
    pub entropy: f64,
    /// Quanta of both kinds.
    pub total_quanta: f64,
}

/// Deterministic mass-action relaxation of two populations.
#[derive(Debug, Clone)]
pub struct Relaxer {
    first: CondensatePopulation,
    second: CondensatePopulation,
    x1: Vec<f64>,
    x2: Vec<f64>,
    channels: Vec<CollisionChannel>,
    order: Vec<usize>,
    rng: ChaCha8Rng,
    options: RelaxOptions,
    sweeps: usize,
}

impl Relaxer {
    pub fn new(
        first: CondensatePopulation,
        second: CondensatePopulation,
        channels: &[CollisionChannel],
        options: RelaxOptions,
    ) -> Result<Self, BalanceError> {
        if !(options.rate > 0.0 && options.rate <= 1.0) {
            return Err(BalanceError::InvalidParameter(format!("rate must lie in (0, 1], got {}", options.rate)));
        }
        if !(options.tol >= 0.0 && options.k > 0.0) {
            return Err(BalanceError::InvalidParameter("tol must be non-negative and k positive".into()));
        }
        for ch in channels {
            ch.check(&first, &second)?;
        }
        let channels: Vec<CollisionChannel> = channels
            .iter()
            .copied()
            .filter(|c| !c.is_identity() && c.n <= first.s_max && c.n_prime <= second.s_max)
            .collect();
        let (x1, x2) = (first.fractions(), second.fractions());
        Ok(Self {
            order: (0..channels.len()).collect(),
            first,
            second,
            x1,
            x2,
            channels,
            rng: ChaCha8Rng::seed_from_u64(options.seed),
            options,
            sweeps: 0,
        })
    }

    pub fn populations(&self) -> (CondensatePopulation, CondensatePopulation) {
        let (mut a, mut b) = (self.first.clone(), self.second.clone());
        a.set_fractions(&self.x1);
        b.set_fractions(&self.x2);
        (a, b)
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Largest relative residual over all channels.
    pub fn max_residual(&self) -> f64 {
        let (w1, w2) = (self.first.s_max + 1, self.second.s_max + 1);
        let ranges = |x: &[f64], w: usize, bins: usize, n: usize| -> Vec<(f64, f64)> {
            (0..bins).map(|b| log_step_range(&x[b * w..(b + 1) * w], n)).collect()
        };
        // Channels usually share transfer counts; cache ranges per count.
        type Ranges = Vec<(f64, f64)>;
        let mut cache: Vec<((usize, usize), Ranges, Ranges)> = Vec::new();
        let mut worst: f64 = 0.0;
        for ch in &self.channels {
            let key = (ch.n, ch.n_prime);
            let idx = match cache.iter().position(|(k, _, _)| *k == key) {
                Some(i) => i,
                None => {
                    cache.push((
                        key,
                        ranges(&self.x1, w1, self.first.bins.len(), ch.n),
                        ranges(&self.x2, w2, self.second.bins.len(), ch.n_prime),
                    ));
                    cache.len() - 1
                }
            };
            let (_, r1, r2) = &cache[idx];
            let r = residual_from_ranges(r1[ch.first.0], r1[ch.first.1], r2[ch.second.0], r2[ch.second.1]);
            worst = worst.max(r);
        }
        worst
    }

    pub fn record(&self) -> SweepRecord {
        let (a, b) = self.populations();
        let k = self.options.k;
        let entropy = stirling_unchecked(&a, k) + stirling_unchecked(&b, k);
        SweepRecord {
            sweep: self.sweeps,
            max_residual: self.max_residual(),
            entropy,
            total_quanta: total_quanta(&a).total + total_quanta(&b).total,
        }
    }

    /// One pass over every channel in a freshly shuffled order.
    pub fn sweep(&mut self) -> SweepRecord {
        self.order.shuffle(&mut self.rng);
        for k in 0..self.order.len() {
            let ch = self.channels[self.order[k]];
            self.fire(&ch);
        }
        self.sweeps += 1;
        self.record()
    }

    fn fire(&mut self, ch: &CollisionChannel) {
        let (w1, w2) = (self.first.s_max + 1, self.second.s_max + 1);
        let (n, m) = (ch.n, ch.n_prime);
        let (i, f) = ch.first;
        let (i2, f2) = ch.second;
        let g = [
            self.first.bins[i].modes,
            self.first.bins[f].modes,
            self.second.bins[i2].modes,
            self.second.bins[f2].modes,
        ];
        let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
        let lambda = self.options.rate * g_min;

        let row = |x: &[f64], b: usize, w: usize| x[b * w..(b + 1) * w].to_vec();
        let (xi, xf) = (row(&self.x1, i, w1), row(&self.x1, f, w1));
        let (yi, yf) = (row(&self.x2, i2, w2), row(&self.x2, f2, w2));
        // Forward: slot s of a losing bin drops by the transfer, slot r of a gaining bin rises.
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        let (fi, bi) = (sum(&xi[n..]), sum(&xi[..w1 - n]));
        let (ff, bf) = (sum(&xf[..w1 - n]), sum(&xf[n..]));
        let (fyi, byi) = (sum(&yi[m..]), sum(&yi[..w2 - m]));
        let (fyf, byf) = (sum(&yf[..w2 - m]), sum(&yf[m..]));

        let apply = |x: &mut [f64], b: usize, w: usize, shift: usize, losing: bool, fwd: f64, bwd: f64, gb: f64| {
            let r = &mut x[b * w..(b + 1) * w];
            let src = r.to_vec();
            for t in 0..w - shift {
                // Slot pair (t + shift, t): forward empties the upper slot of a losing bin.
                let (upper, lower) = (src[t + shift], src[t]);
                let net = if losing { upper * fwd - lower * bwd } else { lower * fwd - upper * bwd };
                let dx = lambda * net / gb;
                if losing {
                    r[t + shift] -= dx;
                    r[t] += dx;
                } else {
                    r[t] -= dx;
                    r[t + shift] += dx;
                }
            }
        };
        apply(&mut self.x1, i, w1, n, true, ff * fyi * fyf, bf * byi * byf, g[0]);
        apply(&mut self.x1, f, w1, n, false, fi * fyi * fyf, bi * byi * byf, g[1]);
        apply(&mut self.x2, i2, w2, m, true, fi * ff * fyf, bi * bf * byf, g[2]);
        apply(&mut self.x2, f2, w2, m, false, fi * ff * fyi, bi * bf * byi, g[3]);
    }
}

fn stirling_unchecked(pop: &CondensatePopulation, k: f64) -> f64 {
    let xlnx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
    let mut total = 0.0;
    for (b, bin) in pop.bins.iter().enumerate() {
        total += xlnx(bin.modes) - (0..=pop.s_max).map(|s| xlnx(pop.packets(b, s))).sum::<f64>();
    }
    k * total
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub first: CondensatePopulation,
    pub second: CondensatePopulation,
    /// One record per sweep; entry 0 describes the start.
    pub history: Vec<SweepRecord>,
}

/// Sweep until the maximum residual drops below `options.tol`.
pub fn relax(
    pop1: &CondensatePopulation,
    pop2: &CondensatePopulation,
    channels: &[CollisionChannel],
    options: RelaxOptions,
) -> Result<Relaxation, BalanceError> {
    let mut relaxer = Relaxer::new(pop1.clone(), pop2.clone(), channels, options)?;
    let mut history = vec![relaxer.record()];
    while history.last().is_some_and(|r| r.max_residual > options.tol) {
        if relaxer.sweeps() >= options.steps {
            let residual = history.last().map_or(f64::NAN, |r| r.max_residual);
            return Err(BalanceError::NonConvergence { sweeps: relaxer.sweeps(), residual });
        }
        history.push(relaxer.sweep());
    }
    let (first, second) = relaxer.populations();
    Ok(Relaxation { first, second, history })
}
