//! Quick oracle checks wired to `idstat selftest`.

use crate::config::{Config, OutputFormat};
use crate::{emit_csv, emit_json, real, CliError};
use idstat::balance::{ladder_channels, max_residual, stationary_population, uniform_bins, Kind};
use idstat::counting::{count, oracle_count, CellStatistics, OccupancyRegion};
use idstat::distributions::{closed_form_occupancies, solve_mu, GasSpec, MomentumGrid, Statistics};
use idstat::spinstat::{exchange_phase, HalfInt};
use idstat::symmetry::{
    antisymmetrize, determinant, feynman_amplitude, permanent, standard_amplitude, ExchangeSign, GramOverlap, ModeId,
    NParticleState, Permutation,
};
use idstat::Complex64;
use ndarray::Array2;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::io::Write;

struct Outcome {
    name: &'static str,
    cases: usize,
    /// Largest deviation seen; zero for exact checks.
    worst: f64,
    pass: bool,
}

type Check = fn(&mut ChaCha8Rng) -> Outcome;

const CHECKS: [Check; 7] = [counting, pauli, matrix_functions, spin_phase, feynman, mu_round_trip, stationary_balance];

pub(crate) fn run(config: &Config, out: &mut dyn Write) -> Result<u8, CliError> {
    let seed = crate::resolve_seed(None, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcomes: Vec<Outcome> = CHECKS.iter().map(|c| c(&mut rng)).collect();
    let status = |o: &Outcome| if o.pass { "pass" } else { "fail" };
    match config.output_format {
        OutputFormat::Csv => emit_csv(
            out,
            "check,cases,worst,status",
            outcomes.iter().map(|o| format!("{},{},{},{}", o.name, o.cases, real(o.worst), status(o))),
        )?,
        OutputFormat::Json => {
            let rows: Vec<_> = outcomes
                .iter()
                .map(|o| json!({"check": o.name, "cases": o.cases, "worst": o.worst, "status": status(o)}))
                .collect();
            emit_json(out, &rows)?
        }
    }
    Ok(if outcomes.iter().all(|o| o.pass) { 0 } else { 1 })
}

fn counting(_: &mut ChaCha8Rng) -> Outcome {
    let mut cases = 0;
    let mut pass = true;
    for g in 1..=12u64 {
        for n in 0..=(16 - g) {
            let r = OccupancyRegion::new(n, g).expect("g > 0");
            for stat in [CellStatistics::Bose, CellStatistics::Fermi] {
                if stat == CellStatistics::Fermi && n > g {
                    continue;
                }
                cases += 1;
                let exact = count(r, stat).ok();
                let oracle = oracle_count(r, stat).ok().map(|o| BigRational::from_integer(BigInt::from(o)));
                pass &= exact.is_some() && exact == oracle;
            }
        }
    }
    Outcome { name: "counting-oracle", cases, worst: 0.0, pass }
}

fn pauli(_: &mut ChaCha8Rng) -> Outcome {
    let mut cases = 0;
    let mut pass = true;
    for n in 2..=4usize {
        // Every assignment of n particles to n - 1 modes repeats at least one mode.
        let total = (n - 1).pow(n as u32);
        for code in 0..total {
            let modes: Vec<ModeId> = (0..n).map(|k| ModeId(code / (n - 1).pow(k as u32) % (n - 1))).collect();
            cases += 1;
            pass &= antisymmetrize(&NParticleState::product(&modes)).is_zero();
        }
    }
    Outcome { name: "pauli-exclusion", cases, worst: 0.0, pass }
}

fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
    Array2::from_shape_fn((n, n), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn matrix_functions(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=6 {
        let perms = Permutation::all(n);
        for _ in 0..10 {
            let m = random_matrix(n, rng);
            let (mut perm, mut det) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for p in &perms {
                let prod: Complex64 = p.images().iter().enumerate().map(|(i, &j)| m[[i, j]]).product();
                perm += prod;
                det += prod * p.sign() as f64;
            }
            let fast = (permanent(&m), determinant(&m));
            let (Ok(fp), Ok(fd)) = fast else {
                worst = f64::INFINITY;
                continue;
            };
            worst = worst.max((fp - perm).norm() / perm.norm().max(1.0)).max((fd - det).norm() / det.norm().max(1.0));
            cases += 1;
        }
    }
    Outcome { name: "permanent-determinant", cases, worst, pass: worst <= 1e-10 }
}

fn spin_phase(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for twice in 0..=5 {
        let expected = if twice % 2 == 0 { 1.0 } else { -1.0 };
        for _ in 0..20 {
            let m = HalfInt::from_twice(twice - 2 * rng.random_range(0..=twice));
            let (a, b) = (rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU));
            let dev = match exchange_phase(m, a, b) {
                Ok(p) => (p.factor - expected).norm(),
                Err(_) => continue,
            };
            worst = worst.max(dev);
            cases += 1;
        }
    }
    Outcome { name: "spin-statistics", cases, worst, pass: worst <= 1e-12 }
}

fn random_gram(rng: &mut ChaCha8Rng) -> Option<GramOverlap> {
    let vectors: Vec<Vec<Complex64>> = (0..4)
        .map(|_| {
            let v: Vec<Complex64> =
                (0..3).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let len = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|c| c / len).collect()
        })
        .collect();
    let m = Array2::from_shape_fn((4, 4), |(i, j)| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a.conj() * b).sum()
        }
    });
    GramOverlap::new(m).ok()
}

fn feynman(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for _ in 0..100 {
        let Some(ov) = random_gram(rng) else {
            worst = f64::INFINITY;
            continue;
        };
        let mut pick = || ModeId(rng.random_range(0..4));
        let a = NParticleState::product(&[pick(), pick()]);
        let b = NParticleState::product(&[pick(), pick()]);
        for sign in [ExchangeSign::Plus, ExchangeSign::Minus] {
            match (feynman_amplitude(&b, &a, sign, &ov), standard_amplitude(&b, &a, sign, &ov)) {
                (Ok(f), Ok(g)) => worst = worst.max((f - g).norm()),
                _ => worst = f64::INFINITY,
            }
            cases += 1;
        }
    }
    Outcome { name: "feynman-equivalence", cases, worst, pass: worst <= 1e-12 }
}

fn mu_round_trip(rng: &mut ChaCha8Rng) -> Outcome {
    let grid = MomentumGrid::new(0.0, 10.0, 64).expect("valid grid");
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for stat in [Statistics::Bose, Statistics::Fermi] {
        for _ in 0..10 {
            let t = rng.random_range(0.5..3.0);
            let mu = rng.random_range(-2.0..-0.05);
            let Ok(spec) = GasSpec::new(1.0, t, 1.0, stat) else { continue };
            let levels = grid.levels(&spec);
            let n: f64 = match closed_form_occupancies(&levels, mu, &spec) {
                Ok(o) => o.iter().sum(),
                Err(_) => continue,
            };
            let err = match solve_mu(n, &spec, &grid).and_then(|m| closed_form_occupancies(&levels, m, &spec)) {
                Ok(o) => (o.iter().sum::<f64>() - n).abs() / n,
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(err);
            cases += 1;
        }
    }
    Outcome { name: "mu-round-trip", cases, worst, pass: worst <= 1e-10 }
}

fn stationary_balance(_: &mut ChaCha8Rng) -> Outcome {
    let bins = uniform_bins(1.0, 0.25, 8, 10.0);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for stat in [Statistics::Bose, Statistics::Fermi] {
        let pops = stationary_population(Kind::One, stat, bins.clone(), 1.5, 0.2, 48)
            .and_then(|one| Ok((one, stationary_population(Kind::Two, stat, bins.clone(), 1.5, -0.4, 48)?)));
        worst = match pops.and_then(|(one, two)| max_residual(&one, &two, &ladder_channels(&one, &two))) {
            Ok(r) => worst.max(r),
            Err(_) => f64::INFINITY,
        };
        cases += 1;
    }
    Outcome { name: "stationary-balance", cases, worst, pass: worst <= 1e-12 }
}
