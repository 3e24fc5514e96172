//! Bose-Einstein and Fermi-Dirac occupation spectra.
//!
//! `N dp = g_p / (exp((eps - mu)/kT) +- 1)` with `g_p = 4 pi V p^2 dp / h^3`
//! and `eps = sqrt(p^2 c^2 + (m c^2)^2)`. Two independent routes are offered:
//! the closed form with a chemical potential fixed by [`solve_mu`], and
//! [`max_entropy_occupancies`], which maximizes the continuous (Stirling)
//! relaxation of `ln prod w_i` under fixed particle number and energy without
//! ever evaluating the closed form.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Iteration cap shared by the root finders here.
pub const MAX_ITERATIONS: usize = 200;

/// Target relative particle-number error of [`solve_mu`].
pub const MU_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("Bose pole: eps = {eps} <= mu = {mu}")]
    BosePole { eps: f64, mu: f64 },
    #[error("saturation exceeded: the grid holds at most {max} bosons at resolvable mu, {target} requested")]
    SaturationExceeded { target: f64, max: f64 },
    #[error("no bracket: {0}")]
    NoBracket(String),
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Bose,
    Fermi,
}

impl Statistics {
    /// The `+-1` in the denominator.
    pub fn sign(self) -> f64 {
        match self {
            Statistics::Bose => -1.0,
            Statistics::Fermi => 1.0,
        }
    }
}

/// An ideal gas in a box. Units default to `c = h = k = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasSpec {
    pub volume: f64,
    pub temperature: f64,
    pub mass: f64,
    pub c: f64,
    pub h: f64,
    pub k: f64,
    pub statistics: Statistics,
}

impl GasSpec {
    pub fn new(volume: f64, temperature: f64, mass: f64, statistics: Statistics) -> Result<Self, DistributionError> {
        Self::with_units(volume, temperature, mass, statistics, 1.0, 1.0, 1.0)
    }

    pub fn with_units(
        volume: f64,
        temperature: f64,
        mass: f64,
        statistics: Statistics,
        c: f64,
        h: f64,
        k: f64,
    ) -> Result<Self, DistributionError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(volume) {
            return Err(DistributionError::InvalidParameter("volume must be positive"));
        }
        if !positive(temperature) {
            return Err(DistributionError::InvalidParameter("temperature must be positive"));
        }
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(DistributionError::InvalidParameter("mass must be non-negative"));
        }
        if !(positive(c) && positive(h) && positive(k)) {
            return Err(DistributionError::InvalidParameter("c, h and k must be positive"));
        }
        Ok(Self { volume, temperature, mass, c, h, k, statistics })
    }

    pub fn kt(&self) -> f64 {
        self.k * self.temperature
    }
}

/// Uniform bins of `|p|` over `[p_min, p_max]`, sampled at bin centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    p_min: f64,
    p_max: f64,
    bins: usize,
}

impl MomentumGrid {
    pub const MIN_BINS: usize = 8;

    pub fn new(p_min: f64, p_max: f64, bins: usize) -> Result<Self, DistributionError> {
        if !(p_min.is_finite() && p_max.is_finite() && 0.0 <= p_min && p_min < p_max) {
            return Err(DistributionError::InvalidParameter("need 0 <= p_min < p_max"));
        }
        if bins < Self::MIN_BINS {
            return Err(DistributionError::InvalidParameter("need at least 8 bins"));
        }
        Ok(Self { p_min, p_max, bins })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.p_min + (i as f64 + 0.5) * self.dp()
    }

    pub fn levels(&self, spec: &GasSpec) -> Vec<Level> {
        let dp = self.dp();
        (0..self.bins)
            .map(|i| {
                let p = self.center(i);
                Level { p, dp, energy: dispersion(p, spec), modes: mode_count(p, dp, spec) }
            })
            .collect()
    }
}

/// One momentum shell: its energy and mode count `g_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub p: f64,
    pub dp: f64,
    pub energy: f64,
    pub modes: f64,
}

impl Level {
    /// A bare level for toy spectra.
    pub fn bare(energy: f64, modes: f64) -> Self {
        Self { p: 0.0, dp: 0.0, energy, modes }
    }
}

pub fn dispersion(p: f64, spec: &GasSpec) -> f64 {
    let rest = spec.mass * spec.c * spec.c;
    (p * spec.c).hypot(rest)
}

pub fn mode_count(p: f64, dp: f64, spec: &GasSpec) -> f64 {
    4.0 * PI * spec.volume * p * p * dp / spec.h.powi(3)
}

/// Mean occupation per mode, `1 / (exp((eps - mu)/kT) +- 1)`.
pub fn occupancy(eps: f64, mu: f64, spec: &GasSpec) -> Result<f64, DistributionError> {
    occupancy_per_mode(eps, mu, spec.kt(), spec.statistics)
}

pub fn occupancy_per_mode(eps: f64, mu: f64, kt: f64, stat: Statistics) -> Result<f64, DistributionError> {
    let x = (eps - mu) / kt;
    match stat {
        Statistics::Bose if x <= 0.0 => Err(DistributionError::BosePole { eps, mu }),
        Statistics::Bose => Ok(1.0 / x.exp_m1()),
        Statistics::Fermi if x >= 0.0 => {
            let e = (-x).exp();
            Ok(e / (1.0 + e))
        }
        Statistics::Fermi => Ok(1.0 / (x.exp() + 1.0)),
    }
}

/// `g_p` times the per-mode occupancy.
pub fn bin_occupancy(level: &Level, mu: f64, spec: &GasSpec) -> Result<f64, DistributionError> {
    Ok(level.modes * occupancy(level.energy, mu, spec)?)
}

pub fn closed_form_occupancies(levels: &[Level], mu: f64, spec: &GasSpec) -> Result<Vec<f64>, DistributionError> {
    levels.iter().map(|l| bin_occupancy(l, mu, spec)).collect()
}

fn total_number(levels: &[Level], mu: f64, kt: f64, stat: Statistics) -> Result<f64, DistributionError> {
    let mut n = 0.0;
    for l in levels {
        n += l.modes * occupancy_per_mode(l.energy, mu, kt, stat)?;
    }
    Ok(n)
}

/// Highest usable Bose chemical potential: at least `1e-12 kT` below the
/// lowest level, and far enough that one ulp of `mu` moves `N` by no more
/// than twice [`MU_TOLERANCE`], so the nearest double to any target below
/// the cap is within tolerance. Nearer the pole that is not guaranteed.
fn bose_cap(levels: &[Level], eps_min: f64, kt: f64) -> Result<f64, DistributionError> {
    let resolution = |mu: f64| -> Result<f64, DistributionError> {
        let (mut n, mut slope) = (0.0, 0.0);
        for l in levels {
            let occ = occupancy_per_mode(l.energy, mu, kt, Statistics::Bose)?;
            n += l.modes * occ;
            slope += l.modes * occ * (1.0 + occ) / kt;
        }
        Ok(slope * mu.abs().max(f64::MIN_POSITIVE) * f64::EPSILON / n)
    };
    let mut gap = 1e-12 * kt;
    while resolution(eps_min - gap)? > 2.0 * MU_TOLERANCE {
        gap *= 1.25;
    }
    Ok(eps_min - gap)
}

/// Largest Bose particle number [`solve_mu_levels`] accepts on `levels`.
pub fn bose_capacity(levels: &[Level], kt: f64) -> Result<f64, DistributionError> {
    let occupied: Vec<Level> = levels.iter().copied().filter(|l| l.modes > 0.0).collect();
    if occupied.is_empty() {
        return Err(DistributionError::NoBracket("no level carries any modes".into()));
    }
    let eps_min = min_energy(&occupied);
    total_number(&occupied, bose_cap(&occupied, eps_min, kt)?, kt, Statistics::Bose)
}

fn min_energy(levels: &[Level]) -> f64 {
    levels.iter().map(|l| l.energy).fold(f64::INFINITY, f64::min)
}

fn max_energy(levels: &[Level]) -> f64 {
    levels.iter().map(|l| l.energy).fold(f64::NEG_INFINITY, f64::max)
}

/// Chemical potential with `sum_i g_i n(eps_i, mu) = n_target` on `grid`.
pub fn solve_mu(n_target: f64, spec: &GasSpec, grid: &MomentumGrid) -> Result<f64, DistributionError> {
    solve_mu_levels(n_target, &grid.levels(spec), spec.kt(), spec.statistics)
}

/// [`solve_mu`] on an explicit list of levels.
pub fn solve_mu_levels(n_target: f64, levels: &[Level], kt: f64, stat: Statistics) -> Result<f64, DistributionError> {
    if !(n_target.is_finite() && n_target > 0.0) {
        return Err(DistributionError::InvalidParameter("target particle number must be positive"));
    }
    if !(kt.is_finite() && kt > 0.0) {
        return Err(DistributionError::InvalidParameter("kT must be positive"));
    }
    let occupied: Vec<Level> = levels.iter().copied().filter(|l| l.modes > 0.0).collect();
    if occupied.is_empty() {
        return Err(DistributionError::NoBracket("no level carries any modes".into()));
    }
    let total_modes: f64 = occupied.iter().map(|l| l.modes).sum();
    if stat == Statistics::Fermi && n_target >= total_modes {
        return Err(DistributionError::NoBracket(format!(
            "{n_target} fermions do not fit into {total_modes} modes"
        )));
    }
    let count = |mu: f64| total_number(&occupied, mu, kt, stat);
    let eps_min = min_energy(&occupied);

    let mut hi = match stat {
        Statistics::Bose => {
            let hi = bose_cap(&occupied, eps_min, kt)?;
            let max = count(hi)?;
            if max < n_target {
                return Err(DistributionError::SaturationExceeded { target: n_target, max });
            }
            hi
        }
        Statistics::Fermi => {
            let mut step = kt;
            let mut hi = max_energy(&occupied) + step;
            while count(hi)? < n_target {
                step *= 2.0;
                hi += step;
                if !hi.is_finite() {
                    return Err(DistributionError::NoBracket("upper bracket diverged".into()));
                }
            }
            hi
        }
    };
    let mut step = kt;
    let mut lo = eps_min - step;
    while count(lo)? > n_target {
        step *= 2.0;
        lo = eps_min - step;
        if !lo.is_finite() {
            return Err(DistributionError::NoBracket("lower bracket diverged".into()));
        }
    }

    let rel = |n: f64| (n - n_target) / n_target;
    let (mut f_lo, mut f_hi) = (rel(count(lo)?), rel(count(hi)?));
    // Bisection to a coarse tolerance, then secant steps kept inside the bracket.
    for iteration in 0..MAX_ITERATIONS {
        let coarse = iteration < MAX_ITERATIONS / 2 && (f_hi - f_lo).abs() > 1e-4;
        let mut mu = if coarse { 0.5 * (lo + hi) } else { hi - f_hi * (hi - lo) / (f_hi - f_lo) };
        if !(mu > lo && mu < hi) {
            mu = 0.5 * (lo + hi);
        }
        let f = rel(count(mu)?);
        if f.abs() <= MU_TOLERANCE {
            return Ok(mu);
        }
        if f < 0.0 {
            lo = mu;
            f_lo = f;
        } else {
            hi = mu;
            f_hi = f;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(kt) {
            let best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
            if best.1.abs() <= MU_TOLERANCE {
                return Ok(best.0);
            }
            return Err(DistributionError::NoConvergence { iterations: iteration + 1, residual: best.1.abs() });
        }
    }
    Err(DistributionError::NoConvergence { iterations: MAX_ITERATIONS, residual: f_lo.abs().min(f_hi.abs()) })
}

/// Continuous entropy per level, `s(n)/k`, in its Stirling form.
pub fn level_entropy(n: f64, g: f64, stat: Statistics) -> f64 {
    let xlnx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
    match stat {
        Statistics::Bose => xlnx(n + g) - xlnx(n) - xlnx(g),
        Statistics::Fermi => xlnx(g) - xlnx(n) - xlnx(g - n),
    }
}

/// Solve `s'(n) = y` for one level, with `n = g e^{-t}`.
///
/// Bose: `s'(n) = ln(1 + g/n) = softplus(t)`. Fermi: `s'(n) = ln(g/n - 1) =
/// ln(expm1(t))` with `t > 0`. Both are increasing in `t`; the root is found
/// by a bracketed Newton iteration.
fn stationary_level(y: f64, g: f64, stat: Statistics) -> Option<f64> {
    type Curve = fn(f64) -> f64;
    let (value, slope): (Curve, Curve) = match stat {
        Statistics::Bose => (
            |t: f64| t.max(0.0) + (-t.abs()).exp().ln_1p(),
            |t: f64| 1.0 / (1.0 + (-t).exp()),
        ),
        Statistics::Fermi => (|t: f64| t.exp_m1().ln(), |t: f64| -1.0 / (-t).exp_m1()),
    };
    if stat == Statistics::Bose && y <= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    while value(lo) > y {
        lo = if stat == Statistics::Bose { lo - 2.0 * lo.abs().max(1.0) } else { 0.5 * lo };
        if lo == 0.0 || !lo.is_finite() {
            return None;
        }
    }
    while value(hi) < y {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let f = value(t) - y;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - f / slope(t);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            t = next;
            break;
        }
        t = next;
    }
    Some(g * (-t).exp())
}

/// Second derivative `s''(n)`; negative on the domain.
fn entropy_curvature(n: f64, g: f64, stat: Statistics) -> f64 {
    match stat {
        Statistics::Bose => -g / (n * (n + g)),
        Statistics::Fermi => -g / (n * (g - n)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntropySolution {
    /// Per-level occupancies `n_i`.
    pub occupancies: Vec<f64>,
    /// Multiplier of the particle-number constraint.
    pub alpha: f64,
    /// Multiplier of the energy constraint; absent when only one level exists.
    pub beta: Option<f64>,
    /// `1 / (k beta)`.
    pub temperature: Option<f64>,
    /// `-alpha / beta`.
    pub mu: Option<f64>,
    pub iterations: usize,
}

fn occupancies_at(alpha: f64, beta: f64, levels: &[Level], stat: Statistics) -> Option<Vec<f64>> {
    levels.iter().map(|l| stationary_level(alpha + beta * l.energy, l.modes, stat)).collect()
}

/// Maximize `sum_i s(n_i)` subject to `sum n_i = n_target`, `sum n_i eps_i = e_target`.
///
/// Stationarity gives `s'(n_i) = alpha + beta eps_i`; each `n_i` is found
/// numerically and the multipliers by a damped Newton iteration.
pub fn max_entropy_occupancies(
    spec: &GasSpec,
    grid: &MomentumGrid,
    n_target: f64,
    e_target: f64,
) -> Result<MaxEntropySolution, DistributionError> {
    max_entropy_levels(&grid.levels(spec), spec.statistics, spec.k, n_target, e_target)
}

pub fn max_entropy_levels(
    levels: &[Level],
    stat: Statistics,
    k: f64,
    n_target: f64,
    e_target: f64,
) -> Result<MaxEntropySolution, DistributionError> {
    let infeasible = |m: String| Err(DistributionError::Infeasible(m));
    if levels.is_empty() || levels.iter().any(|l| !(l.modes > 0.0 && l.energy.is_finite())) {
        return infeasible("every level needs a finite energy and positive mode count".into());
    }
    if !(n_target.is_finite() && n_target > 0.0 && e_target.is_finite()) {
        return infeasible("particle number must be positive and energy finite".into());
    }
    let total_modes: f64 = levels.iter().map(|l| l.modes).sum();
    if stat == Statistics::Fermi && n_target >= total_modes {
        return infeasible(format!("{n_target} fermions exceed {total_modes} modes"));
    }
    let scale = e_target.abs().max(n_target * min_energy(levels).abs()).max(f64::MIN_POSITIVE);

    if levels.len() == 1 {
        let l = levels[0];
        if (e_target - n_target * l.energy).abs() > 1e-12 * scale {
            return infeasible("a single level fixes E = N eps".into());
        }
        let alpha = match stat {
            Statistics::Bose => (l.modes / n_target).ln_1p(),
            Statistics::Fermi => (l.modes / n_target - 1.0).ln(),
        };
        return Ok(MaxEntropySolution {
            occupancies: vec![n_target],
            alpha,
            beta: None,
            temperature: None,
            mu: None,
            iterations: 0,
        });
    }

    let (eps_min, eps_max) = (min_energy(levels), max_energy(levels));
    let mean = e_target / n_target;
    if !(eps_min < mean && mean < eps_max) {
        return infeasible(format!("mean energy {mean} must lie strictly inside ({eps_min}, {eps_max})"));
    }
    if stat == Statistics::Fermi {
        let (lo, hi) = fermi_energy_range(levels, n_target);
        if !(lo < e_target && e_target < hi) {
            return infeasible(format!("fermion energy {e_target} must lie strictly inside ({lo}, {hi})"));
        }
    }

    // alpha + beta eps_i > 0 on every level keeps Bose occupancies finite.
    let admissible = |alpha: f64, beta: f64| {
        stat == Statistics::Fermi || (alpha + beta * eps_min > 0.0 && alpha + beta * eps_max > 0.0)
    };
    let residual = |alpha: f64, beta: f64| -> Option<(Vec<f64>, f64, f64)> {
        if !admissible(alpha, beta) {
            return None;
        }
        let n = occupancies_at(alpha, beta, levels, stat)?;
        let total: f64 = n.iter().sum();
        let energy: f64 = n.iter().zip(levels).map(|(n, l)| n * l.energy).sum();
        Some((n, (total - n_target) / n_target, (energy - e_target) / scale))
    };

    let beta0 = 1.0 / (mean - eps_min);
    let alpha0 = initial_alpha(levels, stat, beta0, n_target, eps_min)?;
    let (mut alpha, mut beta) = (alpha0, beta0);
    let Some((mut n, mut r1, mut r2)) = residual(alpha, beta) else {
        return Err(DistributionError::NoConvergence { iterations: 0, residual: f64::INFINITY });
    };
    for iteration in 1..=MAX_ITERATIONS {
        let norm = r1.hypot(r2);
        if norm <= 1e-14 {
            let mu = -alpha / beta;
            return Ok(MaxEntropySolution {
                occupancies: n,
                alpha,
                beta: Some(beta),
                temperature: Some(1.0 / (k * beta)),
                mu: Some(mu),
                iterations: iteration - 1,
            });
        }
        // dn_i/dalpha = 1/s'', dn_i/dbeta = eps_i/s''.
        let (mut j11, mut j12, mut j22) = (0.0, 0.0, 0.0);
        for (ni, l) in n.iter().zip(levels) {
            let inv = 1.0 / entropy_curvature(*ni, l.modes, stat);
            j11 += inv;
            j12 += inv * l.energy;
            j22 += inv * l.energy * l.energy;
        }
        let (a11, a12) = (j11 / n_target, j12 / n_target);
        let (a21, a22) = (j12 / scale, j22 / scale);
        let det = a11 * a22 - a12 * a21;
        if det == 0.0 || !det.is_finite() {
            return Err(DistributionError::NoConvergence { iterations: iteration, residual: norm });
        }
        let d_alpha = -(a22 * r1 - a12 * r2) / det;
        let d_beta = -(a11 * r2 - a21 * r1) / det;
        let mut step = 1.0;
        loop {
            if let Some((n_new, s1, s2)) = residual(alpha + step * d_alpha, beta + step * d_beta) {
                if s1.hypot(s2) < norm || step < 1e-3 {
                    alpha += step * d_alpha;
                    beta += step * d_beta;
                    (n, r1, r2) = (n_new, s1, s2);
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(DistributionError::NoConvergence { iterations: iteration, residual: norm });
            }
        }
    }
    Err(DistributionError::NoConvergence { iterations: MAX_ITERATIONS, residual: r1.hypot(r2) })
}

/// Lowest and highest energies of `n` fermions packed into the levels.
fn fermi_energy_range(levels: &[Level], n: f64) -> (f64, f64) {
    let mut sorted: Vec<Level> = levels.to_vec();
    sorted.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let fill = |order: &mut dyn Iterator<Item = &Level>| {
        let (mut left, mut e) = (n, 0.0);
        for l in order {
            let take = left.min(l.modes);
            e += take * l.energy;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        e
    };
    (fill(&mut sorted.iter()), fill(&mut sorted.iter().rev()))
}

/// Bisection on `alpha` with `beta` held fixed so that the particle number matches.
fn initial_alpha(
    levels: &[Level],
    stat: Statistics,
    beta: f64,
    n_target: f64,
    eps_min: f64,
) -> Result<f64, DistributionError> {
    let count = |alpha: f64| -> Option<f64> { Some(occupancies_at(alpha, beta, levels, stat)?.iter().sum()) };
    let floor = match stat {
        Statistics::Bose => -beta * eps_min.min(max_energy(levels)),
        Statistics::Fermi => f64::NEG_INFINITY,
    };
    // Particle number decreases with alpha.
    let mut hi = floor.max(0.0) + 1.0;
    let mut widen = 1.0;
    while count(hi).is_none_or(|c| c > n_target) {
        widen *= 2.0;
        hi += widen;
        if !hi.is_finite() {
            return Err(DistributionError::NoConvergence { iterations: 0, residual: f64::INFINITY });
        }
    }
    let mut lo = if floor.is_finite() { floor } else { hi - 1.0 };
    let mut widen = 1.0;
    while !floor.is_finite() && count(lo).is_some_and(|c| c < n_target) {
        widen *= 2.0;
        lo -= widen;
    }
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match count(mid) {
            Some(c) if c < n_target => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(hi)
}
