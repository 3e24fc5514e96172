//! Browser bindings: packet density, closed-form versus maximum-entropy
//! spectra, and the exchange phase. Each export returns a JSON string.
//!
//! The `*_json` functions hold the logic and run natively; the exported
//! wrappers only turn their errors into JavaScript exceptions.

use idstat::distributions::{
    closed_form_occupancies, max_entropy_occupancies, solve_mu, GasSpec, MomentumGrid, Statistics,
};
use idstat::spinstat::{exchange_phase, HalfInt};
use idstat::wavepacket::{Grid, WavePacket};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct DensityCurve {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Serialize)]
pub struct Spectra {
    pub p: Vec<f64>,
    pub eps: Vec<f64>,
    pub closed: Vec<f64>,
    pub maxent: Vec<f64>,
    pub mu: f64,
    pub maxent_temperature: Option<f64>,
    /// Largest relative gap between the two routes.
    pub max_rel_gap: f64,
}

#[derive(Debug, Serialize)]
pub struct Phase {
    pub spin: String,
    pub factor: [f64; 2],
    pub first: [f64; 2],
    pub second: [f64; 2],
    pub sign: i32,
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// `|psi(x, t)|^2` of a packet starting narrowest at `t = 0` from `x = 0`.
pub fn packet_density_json(
    mass: f64,
    sigma: f64,
    k0: f64,
    t: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> Result<String, String> {
    let packet = WavePacket::new(mass, sigma, 0.0, 0.0, k0).map_err(|e| e.to_string())?;
    let grid = Grid::new(x_min, x_max, points).map_err(|e| e.to_string())?;
    let x: Vec<f64> = grid.points().collect();
    let density = x.iter().map(|&x| packet.density(x, t)).collect();
    to_json(&DensityCurve { x, density, center: packet.center(t), width: packet.density_width(t) })
}

/// Occupancies on `bins` momentum bins over `[0, p_max]` from the closed form
/// at the solved chemical potential and from entropy maximisation at the same
/// particle number and energy.
pub fn spectra_json(fermi: bool, temperature: f64, particles: f64, p_max: f64, bins: usize) -> Result<String, String> {
    let stat = if fermi { Statistics::Fermi } else { Statistics::Bose };
    let spec = GasSpec::new(1.0, temperature, 1.0, stat).map_err(|e| e.to_string())?;
    let grid = MomentumGrid::new(0.0, p_max, bins).map_err(|e| e.to_string())?;
    let levels = grid.levels(&spec);
    let mu = solve_mu(particles, &spec, &grid).map_err(|e| e.to_string())?;
    let closed = closed_form_occupancies(&levels, mu, &spec).map_err(|e| e.to_string())?;
    let energy: f64 = closed.iter().zip(&levels).map(|(n, l)| n * l.energy).sum();
    let sol = max_entropy_occupancies(&spec, &grid, particles, energy).map_err(|e| e.to_string())?;
    let max_rel_gap = closed
        .iter()
        .zip(&sol.occupancies)
        .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    to_json(&Spectra {
        p: levels.iter().map(|l| l.p).collect(),
        eps: levels.iter().map(|l| l.energy).collect(),
        closed,
        maxent: sol.occupancies,
        mu,
        maxent_temperature: sol.temperature,
        max_rel_gap,
    })
}

/// Exchange phase for spin `twice_spin / 2` at its top magnetic number.
pub fn exchange_phase_json(twice_spin: i32, chi_a: f64, chi_b: f64) -> Result<String, String> {
    if twice_spin < 0 {
        return Err(format!("spin must be non-negative, got {twice_spin}/2"));
    }
    let spin = HalfInt::from_twice(twice_spin);
    let p = exchange_phase(spin, chi_a, chi_b).map_err(|e| e.to_string())?;
    to_json(&Phase {
        spin: spin.to_string(),
        factor: [p.factor.re, p.factor.im],
        first: [p.first.re, p.first.im],
        second: [p.second.re, p.second.im],
        sign: p.sign(),
    })
}

#[wasm_bindgen]
pub fn packet_density(
    mass: f64,
    sigma: f64,
    k0: f64,
    t: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> Result<String, JsError> {
    packet_density_json(mass, sigma, k0, t, x_min, x_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn spectra(fermi: bool, temperature: f64, particles: f64, p_max: f64, bins: usize) -> Result<String, JsError> {
    spectra_json(fermi, temperature, particles, p_max, bins).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn phase(twice_spin: i32, chi_a: f64, chi_b: f64) -> Result<String, JsError> {
    exchange_phase_json(twice_spin, chi_a, chi_b).map_err(|e| JsError::new(&e))
}
