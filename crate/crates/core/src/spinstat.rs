//! Exchange phase of two spinor modes under one-sense rotation.
//!
//! A spin-component eigenfunction depends on the azimuthal angle `chi` as
//! `exp(i m chi)`. Exchanging the external parameters of two modes leaves
//! their angles behind; restoring the angles by rotating each mode
//! counterclockwise (the only sense admitted) multiplies the exchanged product by
//!
//! ```text
//! F = exp(-i m d1) exp(-i m d2),   d1 + d2 = 2 pi
//! ```
//!
//! where `d1` and `d2` are the counterclockwise distances `chi_a -> chi_b`
//! and `chi_b -> chi_a`. Hence `F = exp(-2 pi i m) = (-1)^(2m) = (-1)^(2s)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fmt;
use thiserror::Error;

use crate::symmetry::{ModeId, ModeTable, NParticleState, OverlapProvider, ProductTerm, SymmetryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpinError {
    #[error("invalid spin: {0}")]
    InvalidSpin(String),
    #[error("angles coincide at {0}; the exchange rotation is undefined")]
    DegenerateAngles(f64),
    #[error("spin mismatch: {0}")]
    SpinMismatch(String),
    #[error("unknown mode {0}")]
    UnknownMode(ModeId),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
}

/// A multiple of one half, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const fn from_twice(twice: i32) -> Self {
        Self(twice)
    }

    pub const fn from_int(n: i32) -> Self {
        Self(2 * n)
    }

    /// Parses `1`, `-3`, `1/2`, `-3/2`, `0.5` and the like.
    pub fn parse(text: &str) -> Result<Self, SpinError> {
        let text = text.trim();
        let bad = || SpinError::InvalidSpin(format!("`{text}` is not a multiple of 1/2"));
        if let Some((num, den)) = text.split_once('/') {
            let num: i32 = num.trim().parse().map_err(|_| bad())?;
            return match den.trim() {
                "2" => Ok(Self(num)),
                "1" => Ok(Self(2 * num)),
                _ => Err(bad()),
            };
        }
        let value: f64 = text.parse().map_err(|_| bad())?;
        let twice = 2.0 * value;
        if twice.fract() != 0.0 || twice.abs() > i32::MAX as f64 {
            return Err(bad());
        }
        Ok(Self(twice as i32))
    }

    pub fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_half_odd(self) -> bool {
        self.0.rem_euclid(2) == 1
    }
}

impl std::ops::Neg for HalfInt {
    type Output = Self;

    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_half_odd() {
            write!(f, "{}/2", self.0)
        } else {
            write!(f, "{}", self.0 / 2)
        }
    }
}

/// Maps an angle into `[0, 2 pi)`.
pub fn normalize_angle(chi: f64) -> f64 {
    let r = chi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Counterclockwise angular distance from `from` to `to`, in `(0, 2 pi]`.
pub fn ccw_distance(from: f64, to: f64) -> f64 {
    let d = normalize_angle(to) - normalize_angle(from);
    if d > 0.0 {
        d
    } else {
        d + TAU
    }
}

/// Phase `exp(i m d)` picked up by rotating a component-`m` eigenfunction
/// counterclockwise from `chi_from` to `chi_to`. Coinciding angles mean a full turn.
pub fn rotation_phase(m: HalfInt, chi_from: f64, chi_to: f64) -> Complex64 {
    Complex64::from_polar(1.0, m.value() * ccw_distance(chi_from, chi_to))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangePhase {
    /// `F`, the product of the two restoration factors.
    pub factor: Complex64,
    /// `exp(-i m d1)`, restoring the first slot from `chi_a` to `chi_b`.
    pub first: Complex64,
    /// `exp(-i m d2)`, restoring the second slot from `chi_b` to `chi_a`.
    pub second: Complex64,
}

impl ExchangePhase {
    /// `F` as the nearest of `+1` / `-1`.
    pub fn sign(&self) -> i32 {
        if self.factor.re >= 0.0 {
            1
        } else {
            -1
        }
    }
}

pub fn exchange_phase(m: HalfInt, chi_a: f64, chi_b: f64) -> Result<ExchangePhase, SpinError> {
    let (a, b) = (normalize_angle(chi_a), normalize_angle(chi_b));
    if a == b {
        return Err(SpinError::DegenerateAngles(a));
    }
    let first = rotation_phase(m, a, b).conj();
    let second = rotation_phase(m, b, a).conj();
    Ok(ExchangePhase { factor: first * second, first, second })
}

/// Spin part of a single-particle mode together with an opaque external payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinorMode {
    spin: HalfInt,
    m: HalfInt,
    chi: f64,
    payload: ModeId,
}

impl SpinorMode {
    pub fn new(spin: HalfInt, m: HalfInt, chi: f64, payload: ModeId) -> Result<Self, SpinError> {
        if spin.twice() < 0 {
            return Err(SpinError::InvalidSpin(format!("spin {spin} is negative")));
        }
        if m.twice().abs() > spin.twice() || (spin.twice() - m.twice()).rem_euclid(2) != 0 {
            return Err(SpinError::InvalidSpin(format!("m = {m} is not on the ladder of s = {spin}")));
        }
        if !chi.is_finite() {
            return Err(SpinError::InvalidSpin("angle must be finite".into()));
        }
        Ok(Self { spin, m, chi: normalize_angle(chi), payload })
    }

    pub fn spin(&self) -> HalfInt {
        self.spin
    }

    pub fn m(&self) -> HalfInt {
        self.m
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn payload(&self) -> ModeId {
        self.payload
    }
}

fn lookup(table: &ModeTable<SpinorMode>, id: ModeId) -> Result<SpinorMode, SpinError> {
    table.get(id).ok_or(SpinError::UnknownMode(id))
}

fn pair_phase(a: &SpinorMode, b: &SpinorMode) -> Result<ExchangePhase, SpinError> {
    if a.spin != b.spin || a.m != b.m {
        return Err(SpinError::SpinMismatch(format!(
            "(s, m) = ({}, {}) vs ({}, {})",
            a.spin, a.m, b.spin, b.m
        )));
    }
    exchange_phase(a.m, a.chi, b.chi)
}

/// `(a(1) b(2) + F b(1) a(2)) / sqrt 2`: parameter exchange completed by
/// one-sense rotation, with the plus sign as the only superposition postulate.
pub fn exchanged_pair_state(
    table: &ModeTable<SpinorMode>,
    a: ModeId,
    b: ModeId,
) -> Result<NParticleState, SpinError> {
    let phase = pair_phase(&lookup(table, a)?, &lookup(table, b)?)?;
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Ok(NParticleState::new(
        2,
        vec![ProductTerm::new(h, vec![a, b]), ProductTerm::new(h * phase.factor, vec![b, a])],
    )?)
}

/// The same construction applied term by term to a two-particle state whose
/// terms each pair two modes of equal `(s, m)`.
pub fn exchanged_state(table: &ModeTable<SpinorMode>, state: &NParticleState) -> Result<NParticleState, SpinError> {
    if state.n() != 2 {
        return Err(SymmetryError::SizeMismatch { expected: 2, found: state.n() }.into());
    }
    let mut out = NParticleState::zero(2);
    for term in state.terms() {
        let pair = exchanged_pair_state(table, term.modes[0], term.modes[1])?;
        out = out.add(&pair.scale(term.coeff))?;
    }
    Ok(out)
}

/// Inner product of spinor modes: payload overlap times the spin part
/// `delta_{s s'} delta_{m m'} exp(i m (chi_b - chi_a))`.
pub struct SpinorOverlap<P> {
    modes: Vec<SpinorMode>,
    payload: P,
}

impl<P: OverlapProvider> SpinorOverlap<P> {
    pub fn new(table: &ModeTable<SpinorMode>, payload: P) -> Self {
        Self { modes: table.snapshot(), payload }
    }
}

impl<P: OverlapProvider> OverlapProvider for SpinorOverlap<P> {
    fn overlap(&self, a: ModeId, b: ModeId) -> Complex64 {
        let (Some(ma), Some(mb)) = (self.modes.get(a.0), self.modes.get(b.0)) else {
            return Complex64::new(0.0, 0.0);
        };
        if ma.spin != mb.spin || ma.m != mb.m {
            return Complex64::new(0.0, 0.0);
        }
        let spin_part = Complex64::from_polar(1.0, ma.m.value() * (mb.chi - ma.chi));
        self.payload.overlap(ma.payload, mb.payload) * spin_part
    }
}
