//! Free one-dimensional Gaussian wavepacket.
//!
//! The packet is parametrised by its mass `m0`, its width `sigma` at the
//! minimum-width time `t0`, its centre `x0` at `t0` and its centre
//! wavenumber `k0`. The amplitude is
//!
//! ```text
//! psi(x, t) = (2 / (pi sigma^2 (1 + A^2)))^(1/4)
//!             * exp(-y^2 / (sigma^2 (1 + A^2)))
//!             * exp(i [A y^2 / (sigma^2 (1 + A^2)) - atan(A)/2
//!                      + k0 (x - x0) - hbar k0^2 (t - t0) / (2 m0)])
//! ```
//!
//! with `y = x - x0 - hbar k0 (t - t0) / m0` and the spreading factor
//! `A(t) = 2 hbar (t - t0) / (m0 sigma^2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Density above which a grid boundary is considered to cut the packet.
pub const BOUNDARY_DENSITY_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WavepacketError {
    #[error("invalid packet parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("grid too narrow: density {density:e} at boundary x = {x}")]
    GridTooNarrow { x: f64, density: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    mass: f64,
    sigma: f64,
    x0: f64,
    t0: f64,
    k0: f64,
    hbar: f64,
}

impl WavePacket {
    /// Packet in natural units (`hbar = 1`).
    pub fn new(mass: f64, sigma: f64, x0: f64, t0: f64, k0: f64) -> Result<Self, WavepacketError> {
        Self::with_hbar(mass, sigma, x0, t0, k0, 1.0)
    }

    pub fn with_hbar(
        mass: f64,
        sigma: f64,
        x0: f64,
        t0: f64,
        k0: f64,
        hbar: f64,
    ) -> Result<Self, WavepacketError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(WavepacketError::InvalidParameter("mass must be positive and finite"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(WavepacketError::InvalidParameter("sigma must be positive and finite"));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(WavepacketError::InvalidParameter("hbar must be positive and finite"));
        }
        if !(x0.is_finite() && t0.is_finite() && k0.is_finite()) {
            return Err(WavepacketError::InvalidParameter("x0, t0 and k0 must be finite"));
        }
        Ok(Self { mass, sigma, x0, t0, k0, hbar })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `A(t) = 2 hbar (t - t0) / (m0 sigma^2)`; zero at the minimum-width time.
    pub fn spreading_factor(&self, t: f64) -> f64 {
        2.0 * self.hbar * (t - self.t0) / (self.mass * self.sigma * self.sigma)
    }

    /// Group velocity `hbar k0 / m0`.
    pub fn velocity(&self) -> f64 {
        self.hbar * self.k0 / self.mass
    }

    /// Position of the density maximum at time `t`.
    pub fn center(&self, t: f64) -> f64 {
        self.x0 + self.velocity() * (t - self.t0)
    }

    /// 1/e half-width of the density, `sigma sqrt(1 + A^2) / sqrt(2)`.
    pub fn density_width(&self, t: f64) -> f64 {
        let a = self.spreading_factor(t);
        self.sigma * (1.0 + a * a).sqrt() / 2f64.sqrt()
    }

    /// Complex amplitude at `(x, t)`.
    pub fn evaluate(&self, x: f64, t: f64) -> Complex64 {
        let a = self.spreading_factor(t);
        let spread = self.sigma * self.sigma * (1.0 + a * a);
        let y = x - self.center(t);
        let modulus = (2.0 / (PI * spread)).powf(0.25) * (-y * y / spread).exp();
        let phase = a * y * y / spread - 0.5 * a.atan() + self.k0 * (x - self.x0)
            - self.hbar * self.k0 * self.k0 * (t - self.t0) / (2.0 * self.mass);
        Complex64::from_polar(modulus, phase)
    }

    /// Probability density `|psi(x, t)|^2`.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        let a = self.spreading_factor(t);
        let spread = self.sigma * self.sigma * (1.0 + a * a);
        let y = x - self.center(t);
        (2.0 / (PI * spread)).sqrt() * (-2.0 * y * y / spread).exp()
    }

    /// Error unless the density at both grid ends is below [`BOUNDARY_DENSITY_LIMIT`].
    pub fn check_grid(&self, grid: &Grid, t: f64) -> Result<(), WavepacketError> {
        for x in [grid.x_min(), grid.x_max()] {
            let density = self.density(x, t);
            if density > BOUNDARY_DENSITY_LIMIT {
                return Err(WavepacketError::GridTooNarrow { x, density });
            }
        }
        Ok(())
    }
}

/// Uniform quadrature grid on `[x_min, x_max]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self, WavepacketError> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(WavepacketError::InvalidGrid("need finite x_min < x_max"));
        }
        if n_points < Self::MIN_POINTS {
            return Err(WavepacketError::InvalidGrid("need at least 16 points"));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    /// Grid centred on `center` extending `half_extent` each way with the given spacing
    /// (rounded down so the spacing is at most `spacing`).
    pub fn with_spacing(center: f64, half_extent: f64, spacing: f64) -> Result<Self, WavepacketError> {
        if !(spacing > 0.0 && half_extent > 0.0) {
            return Err(WavepacketError::InvalidGrid("spacing and extent must be positive"));
        }
        let intervals = (2.0 * half_extent / spacing).ceil() as usize;
        Self::new(center - half_extent, center + half_extent, intervals + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    /// Trapezoid rule over the grid.
    pub fn integrate<T>(&self, f: impl Fn(f64) -> T) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        let last = self.n_points - 1;
        let mut acc = T::default();
        for i in 0..self.n_points {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            acc = acc + f(self.point(i)) * w;
        }
        acc * self.spacing()
    }
}

/// `integral |psi|^2 dx` over the grid.
pub fn norm(p: &WavePacket, t: f64, grid: &Grid) -> Result<f64, WavepacketError> {
    p.check_grid(grid, t)?;
    Ok(grid.integrate(|x| p.density(x, t)))
}

/// Quadrature approximation of `<p1|p2> = integral conj(psi1) psi2 dx`.
pub fn overlap(p1: &WavePacket, p2: &WavePacket, t: f64, grid: &Grid) -> Result<Complex64, WavepacketError> {
    p1.check_grid(grid, t)?;
    p2.check_grid(grid, t)?;
    Ok(grid.integrate(|x| p1.evaluate(x, t).conj() * p2.evaluate(x, t)))
}

/// Residual of the free Schrodinger equation for an arbitrary amplitude,
/// `|| i hbar d_t psi + hbar^2/(2m) d_xx psi ||_2 / ||psi||_2` on the grid interior.
///
/// Both derivatives are centred differences; the time step is `dx^2 m / hbar`.
pub fn free_residual(
    psi: impl Fn(f64, f64) -> Complex64,
    mass: f64,
    hbar: f64,
    grid: &Grid,
    t: f64,
) -> f64 {
    let dx = grid.spacing();
    let dt = dx * dx * mass / hbar;
    let kinetic = hbar * hbar / (2.0 * mass);
    let i_hbar = Complex64::new(0.0, hbar);

    let mut residual2 = 0.0;
    let mut norm2 = 0.0;
    let mut left = psi(grid.point(0), t);
    let mut here = psi(grid.point(1), t);
    for i in 1..grid.len() - 1 {
        let x = grid.point(i);
        let right = psi(grid.point(i + 1), t);
        let d_xx = (right - here * 2.0 + left) / (dx * dx);
        let d_t = (psi(x, t + dt) - psi(x, t - dt)) / (2.0 * dt);
        let r = i_hbar * d_t + d_xx * kinetic;
        residual2 += r.norm_sqr();
        norm2 += here.norm_sqr();
        left = here;
        here = right;
    }
    (residual2 / norm2).sqrt()
}

/// [`free_residual`] of the packet itself, after checking that the grid covers it.
pub fn schrodinger_residual(p: &WavePacket, grid: &Grid, t: f64) -> Result<f64, WavepacketError> {
    p.check_grid(grid, t)?;
    Ok(free_residual(|x, s| p.evaluate(x, s), p.mass, p.hbar, grid, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> WavePacket {
        WavePacket::new(1.0, 1.0, 0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn spreading_factor_values() {
        let p = WavePacket::new(1.0, 2f64.sqrt(), 0.3, 1.5, 0.0).unwrap();
        assert_eq!(p.spreading_factor(1.5), 0.0);
        assert_relative_eq!(p.spreading_factor(2.5), 1.0, epsilon = 1e-15);
        let q = WavePacket::new(2.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(q.spreading_factor(3.0), 3.0, epsilon = 1e-15);
        assert_relative_eq!(q.spreading_factor(-3.0), -3.0, epsilon = 1e-15);
    }

    #[test]
    fn amplitude_at_center() {
        let p = unit();
        let v = p.evaluate(0.0, 0.0);
        assert_relative_eq!(v.re, (2.0 / PI).powf(0.25), epsilon = 1e-15);
        assert_relative_eq!(v.re, 0.8932438417380023, epsilon = 1e-12);
        assert_eq!(v.im, 0.0);
        let wide = WavePacket::new(1.0, 3.0, 0.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(wide.evaluate(0.0, 0.0).re, (2.0 / (PI * 9.0)).powf(0.25), epsilon = 1e-15);
    }

    #[test]
    fn modulus_even_about_center() {
        let p = WavePacket::new(1.3, 0.7, 2.0, 1.0, 0.0).unwrap();
        for d in [0.1, 0.4, 1.1] {
            assert_relative_eq!(p.evaluate(2.0 + d, 1.0).norm(), p.evaluate(2.0 - d, 1.0).norm(), epsilon = 1e-15);
        }
    }

    #[test]
    fn center_moves_with_group_velocity() {
        let p = WavePacket::new(1.0, 1.0, 0.0, 0.0, 2.0).unwrap();
        assert_eq!(p.center(0.0), 0.0);
        assert_relative_eq!(p.center(3.0), 6.0);
        let still = WavePacket::new(1.0, 1.0, 4.0, 0.0, 0.0).unwrap();
        assert_eq!(still.center(17.0), 4.0);
    }

    #[test]
    fn density_matches_modulus_squared_and_decays() {
        let p = WavePacket::new(0.8, 1.2, 0.5, 0.0, 1.5).unwrap();
        for &(x, t) in &[(0.0, 0.0), (1.0, 0.3), (-2.0, 2.0)] {
            assert_relative_eq!(p.density(x, t), p.evaluate(x, t).norm_sqr(), max_relative = 1e-13);
        }
        assert!(p.density(30.0, 0.0) < 1e-12);
    }

    #[test]
    fn norm_is_conserved() {
        let p = WavePacket::new(1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        for t in [0.0, 0.5, 2.0, 5.0] {
            let width = p.density_width(t);
            let grid = Grid::with_spacing(p.center(t), 10.0 * width, width / 20.0).unwrap();
            assert!((norm(&p, t, &grid).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let p = unit();
        let grid = Grid::new(-2.0, 2.0, 64).unwrap();
        assert!(matches!(norm(&p, 0.0, &grid), Err(WavepacketError::GridTooNarrow { .. })));
        assert!(matches!(overlap(&p, &p, 0.0, &grid), Err(WavepacketError::GridTooNarrow { .. })));
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1.0, 0.0, 32).is_err());
        assert!(Grid::new(0.0, 1.0, 15).is_err());
        let g = Grid::new(-1.0, 1.0, 21).unwrap();
        assert_relative_eq!(g.spacing(), 0.1);
        assert_eq!(g.points().count(), 21);
    }

    #[test]
    fn bad_parameters() {
        assert!(WavePacket::new(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(WavePacket::new(1.0, -1.0, 0.0, 0.0, 0.0).is_err());
        assert!(WavePacket::new(1.0, 1.0, f64::NAN, 0.0, 0.0).is_err());
        assert!(WavePacket::with_hbar(1.0, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }
}
