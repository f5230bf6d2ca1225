use crate::error::{Error, Result};
use crate::geom::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Radii scanned for the circle branch, and angular samples per circle.
pub const SV_RADII: usize = 256;
pub const SV_ANGLES: usize = 512;
/// Relative slack on the energy threshold.
pub const SV_SLACK: f64 = 0.05;

#[derive(Clone, Debug, Serialize)]
pub struct SvReport {
    pub nu: f64,
    pub m: f64,
    /// Measured `|{v ≥ 3M/4} ∩ B₁| / |B₁|`.
    pub superlevel_fraction: f64,
    pub hypothesis_met: bool,
    /// `∫_{B₁∖B_a} |∇v|² ≥ (1 − slack)·M²ν/(512π²)`, `a = √(ν/2)`.
    pub energy_branch: bool,
    pub energy: f64,
    pub energy_threshold: f64,
    /// Some scanned circle `∂B_s`, `s ∈ (a, 1)`, has `v ≥ 5M/8`.
    pub circle_branch: bool,
    /// Radius with the largest circle minimum, and that minimum.
    pub best_radius: f64,
    pub best_circle_min: f64,
    /// Hypothesis met but neither branch holds.
    pub violation: bool,
}

fn polar(r: f64, k: usize) -> Vec2 {
    Vec2::polar(r, 2.0 * PI * (k as f64 + 0.5) / SV_ANGLES as f64)
}

/// `|{v ≥ 3M/4} ∩ B₁| / |B₁|` on the polar midpoint grid; errors unless `0 ≤ v ≤ M`.
pub fn disk_superlevel_fraction(v: &(dyn Fn(Vec2) -> f64 + Sync), m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("need M > 0, got {m}")));
    }
    let dr = 1.0 / SV_RADII as f64;
    let dth = 2.0 * PI / SV_ANGLES as f64;
    let rows: Vec<(f64, bool)> = (0..SV_RADII)
        .into_par_iter()
        .map(|i| {
            let r = (i as f64 + 0.5) * dr;
            let mut mass = 0.0;
            let mut ok = true;
            for k in 0..SV_ANGLES {
                let val = v(polar(r, k));
                ok &= val.is_finite() && val >= -1e-12 * m && val <= m * (1.0 + 1e-12);
                if val >= 0.75 * m {
                    mass += r * dr * dth;
                }
            }
            (mass, ok)
        })
        .collect();
    if rows.iter().any(|r| !r.1) {
        return Err(Error::Precondition("v must take values in [0, M] on the unit disk".into()));
    }
    Ok(rows.iter().map(|r| r.0).sum::<f64>() / PI)
}

/// Energy-or-circle dichotomy for a scalar `0 ≤ v ≤ M` on the unit disk.
pub fn sv_dichotomy(v: &(dyn Fn(Vec2) -> f64 + Sync), nu: f64, m: f64) -> Result<SvReport> {
    if !(nu > 0.0 && nu <= 1.0 && m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < ν ≤ 1 and M > 0, got ν = {nu}, M = {m}")));
    }
    let superlevel_fraction = disk_superlevel_fraction(v, m)?;
    let dth = 2.0 * PI / SV_ANGLES as f64;
    let a = (nu / 2.0).sqrt();
    let threshold = m * m * nu / (512.0 * PI * PI);
    let mut rep = SvReport {
        nu,
        m,
        superlevel_fraction,
        hypothesis_met: superlevel_fraction >= nu,
        energy_branch: false,
        energy: 0.0,
        energy_threshold: threshold,
        circle_branch: false,
        best_radius: f64::NAN,
        best_circle_min: f64::NEG_INFINITY,
        violation: false,
    };
    if !rep.hypothesis_met {
        return Ok(rep);
    }

    let ds = (1.0 - a) / SV_RADII as f64;
    let circles: Vec<(f64, f64, f64)> = (0..SV_RADII)
        .into_par_iter()
        .map(|i| {
            let s = a + (i as f64 + 0.5) * ds;
            let mut min = f64::INFINITY;
            let mut energy = 0.0;
            let e = 1e-6;
            for k in 0..SV_ANGLES {
                let x = polar(s, k);
                min = min.min(v(x));
                let gx = (v(x + Vec2::new(e, 0.0)) - v(x - Vec2::new(e, 0.0))) / (2.0 * e);
                let gy = (v(x + Vec2::new(0.0, e)) - v(x - Vec2::new(0.0, e))) / (2.0 * e);
                energy += (gx * gx + gy * gy) * s * ds * dth;
            }
            (s, min, energy)
        })
        .collect();
    for &(s, min, e) in &circles {
        rep.energy += e;
        if min > rep.best_circle_min {
            rep.best_circle_min = min;
            rep.best_radius = s;
        }
    }
    rep.circle_branch = rep.best_circle_min >= 0.625 * m;
    rep.energy_branch = rep.energy >= (1.0 - SV_SLACK) * threshold;
    rep.violation = !rep.circle_branch && !rep.energy_branch;
    Ok(rep)
}

/// Random trigonometric polynomial squashed into `[0, M]`: `v = M(1 + tanh s)/2`.
#[derive(Clone, Debug, Serialize)]
pub struct RandomSmooth {
    pub m: f64,
    pub offset: f64,
    /// `(amplitude, wave vector, phase)` per mode.
    pub modes: Vec<(f64, Vec2, f64)>,
}

impl RandomSmooth {
    pub fn draw<R: Rng>(rng: &mut R, m: f64) -> Self {
        let n = rng.random_range(2..=6);
        let gain = rng.random_range(1.0..4.0);
        let modes = (0..n)
            .map(|_| {
                let w = Vec2::polar(rng.random_range(0.5..5.0), rng.random_range(0.0..2.0 * PI));
                (gain * rng.random_range(-1.0..1.0), w, rng.random_range(0.0..2.0 * PI))
            })
            .collect();
        RandomSmooth { m, offset: rng.random_range(-1.5..1.5), modes }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        let s = self.offset + self.modes.iter().map(|&(a, w, ph)| a * (w.dot(x) + ph).cos()).sum::<f64>();
        0.5 * self.m * (1.0 + s.tanh())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SvSuiteReport {
    pub cases: usize,
    /// Draws discarded because `{v ≥ 3M/4}` was empty on the scan.
    pub discarded: usize,
    pub energy_branch: usize,
    pub circle_branch: usize,
    pub violations: usize,
    pub reports: Vec<SvReport>,
}

/// Runs the dichotomy on `cases` seeded random fields, each with `ν` set to its measured
/// superlevel fraction.
pub fn sv_suite(cases: usize, seed: u64, m: f64) -> Result<SvSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SvSuiteReport { cases, discarded: 0, energy_branch: 0, circle_branch: 0, violations: 0, reports: Vec::new() };
    while out.reports.len() < cases {
        let f = RandomSmooth::draw(&mut rng, m);
        let v = |x: Vec2| f.eval(x);
        let nu = disk_superlevel_fraction(&v, m)?;
        if nu <= 0.0 {
            out.discarded += 1;
            continue;
        }
        let r = sv_dichotomy(&v, nu.min(1.0), m)?;
        out.energy_branch += r.energy_branch as usize;
        out.circle_branch += r.circle_branch as usize;
        out.violations += r.violation as usize;
        out.reports.push(r);
    }
    Ok(out)
}
