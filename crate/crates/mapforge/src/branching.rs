//! Spatial branching process on the integer line and its bounded two-leg counterpart.
//!
//! Each individual has `k` children with probability `(1-p) p^k`, and every
//! child moves by -1, 0 or +1 independently and uniformly. A walk that reaches
//! a wall (position -1, or L+1 for an interval) counts as an escape. The
//! probability of dying out without escaping is `(1-p) R_n` at `g = p(1-p)/3`,
//! where `R_n` solves `R_n = 1/(1 - g(R_{n+1}+R_n+R_{n-1}))` with `R_{-1} = 0`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bijections::sample_rng;
use crate::geodesic::{exact_rn_quartic_f64, GeodesicError};

#[derive(Debug, Error)]
pub enum BranchingError {
    #[error("offspring parameter {0} is outside [0, 1)")]
    BadProbability(f64),
    #[error("start position {0} lies outside the allowed region")]
    BadStart(i64),
    #[error("no nome reproduces g = {0} for L = {1}")]
    OutOfRange(f64, usize),
    #[error("Newton iteration did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Walls {
    Lower,
    Interval(usize),
}

#[derive(Clone, Debug)]
pub struct BranchingConfig {
    pub p: f64,
    pub walls: Walls,
    pub start: i64,
    pub max_generations: usize,
    /// Runs whose population exceeds this are censored too.
    pub max_population: usize,
    pub seed: u64,
}

impl BranchingConfig {
    pub fn new(p: f64, walls: Walls, start: i64, seed: u64) -> Self {
        BranchingConfig { p, walls, start, max_generations: 100_000, max_population: 1_000_000, seed }
    }

    pub fn validate(&self) -> Result<(), BranchingError> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(BranchingError::BadProbability(self.p));
        }
        let inside = match self.walls {
            Walls::Lower => self.start >= 0,
            Walls::Interval(l) => self.start >= 0 && self.start <= l as i64,
        };
        if !inside {
            return Err(BranchingError::BadStart(self.start));
        }
        Ok(())
    }

    /// `g = p(1-p)/3`.
    pub fn coupling(&self) -> f64 {
        self.p * (1.0 - self.p) / 3.0
    }

    fn crosses(&self, x: i64) -> bool {
        match self.walls {
            Walls::Lower => x < 0,
            Walls::Interval(l) => x < 0 || x > l as i64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Extinct,
    Escaped,
    Censored,
}

/// One run, generation by generation.
pub fn simulate_run<R: Rng>(cfg: &BranchingConfig, rng: &mut R) -> Outcome {
    let mut current = vec![cfg.start];
    let mut next = Vec::new();
    for _ in 0..cfg.max_generations {
        if current.is_empty() {
            return Outcome::Extinct;
        }
        next.clear();
        for &x in &current {
            while rng.gen::<f64>() < cfg.p {
                let y = x + rng.gen_range(-1i64..=1);
                if cfg.crosses(y) {
                    return Outcome::Escaped;
                }
                next.push(y);
            }
        }
        if next.len() > cfg.max_population {
            return Outcome::Censored;
        }
        std::mem::swap(&mut current, &mut next);
    }
    if current.is_empty() {
        Outcome::Extinct
    } else {
        Outcome::Censored
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub samples: usize,
    pub extinct: usize,
    pub escaped: usize,
    pub censored: usize,
    /// Fraction of runs showing the event of interest.
    pub value: f64,
    pub stderr: f64,
}

fn tally(cfg: &BranchingConfig, samples: usize) -> (usize, usize, usize) {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i as u64);
            match simulate_run(cfg, &mut rng) {
                Outcome::Extinct => (1, 0, 0),
                Outcome::Escaped => (0, 1, 0),
                Outcome::Censored => (0, 0, 1),
            }
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2))
}

fn estimate(samples: usize, hits: usize, extinct: usize, escaped: usize, censored: usize) -> Estimate {
    let n = samples.max(1) as f64;
    let value = hits as f64 / n;
    Estimate { samples, extinct, escaped, censored, value, stderr: (value * (1.0 - value) / n).sqrt() }
}

/// Monte Carlo probability of extinction without crossing a wall.
pub fn simulate_extinction(cfg: &BranchingConfig, samples: usize) -> Result<Estimate, BranchingError> {
    cfg.validate()?;
    let (ext, esc, cen) = tally(cfg, samples);
    Ok(estimate(samples, ext, ext, esc, cen))
}

/// Monte Carlo probability of escaping the allowed region.
pub fn simulate_escape(cfg: &BranchingConfig, samples: usize) -> Result<Estimate, BranchingError> {
    cfg.validate()?;
    let (ext, esc, cen) = tally(cfg, samples);
    Ok(estimate(samples, esc, ext, esc, cen))
}

/// `E_n = (1-p) R_n(g)` for the half-line.
pub fn exact_extinction(n: usize, p: f64) -> Result<f64, BranchingError> {
    if !(0.0..0.5).contains(&p) {
        return Err(BranchingError::BadProbability(p));
    }
    let g = p * (1.0 - p) / 3.0;
    Ok((1.0 - p) * exact_rn_quartic_f64(n as f64, g)?)
}

/// Generating function `W` of the unconstrained genealogy: `W = (1-p)/(1-pW)`.
pub fn total_extinction(p: f64) -> f64 {
    if p <= 0.5 {
        1.0
    } else {
        (1.0 - p) / p
    }
}

fn bounded_residuals(r: &[f64], g: f64) -> Vec<f64> {
    let at = |n: isize| if n < 0 || n as usize >= r.len() { 0.0 } else { r[n as usize] };
    (0..r.len() as isize)
        .map(|n| r[n as usize] * (1.0 - g * (at(n + 1) + at(n) + at(n - 1))) - 1.0)
        .collect()
}

fn newton_step(r: &mut [f64], g: f64) -> f64 {
    let m = r.len();
    let f = bounded_residuals(r, g);
    let at = |n: isize| if n < 0 || n as usize >= m { 0.0 } else { r[n as usize] };
    // Tridiagonal Jacobian, solved by the Thomas algorithm.
    let mut diag: Vec<f64> = (0..m as isize).map(|n| 1.0 - g * (at(n + 1) + 2.0 * at(n) + at(n - 1))).collect();
    let off: Vec<f64> = r.iter().map(|&x| -g * x).collect();
    let mut rhs: Vec<f64> = f.iter().map(|x| -x).collect();
    for i in 1..m {
        let w = off[i] / diag[i - 1];
        diag[i] -= w * off[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut dx = vec![0.0; m];
    for i in (0..m).rev() {
        let upper = if i + 1 < m { off[i] * dx[i + 1] } else { 0.0 };
        dx[i] = (rhs[i] - upper) / diag[i];
    }
    for (x, d) in r.iter_mut().zip(&dx) {
        *x += d;
    }
    bounded_residuals(r, g).iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// `R_0..R_L` with `R_{-1} = R_{L+1} = 0`, continued from `R_n = 1` at `g = 0`.
pub fn bounded_rn_newton(l: usize, g: f64) -> Result<Vec<f64>, BranchingError> {
    let mut r = vec![1.0; l + 1];
    let steps = 20;
    let mut res = 0.0;
    for s in 1..=steps {
        let gs = g * s as f64 / steps as f64;
        for _ in 0..50 {
            res = newton_step(&mut r, gs);
            if res < 1e-14 {
                break;
            }
        }
        if !res.is_finite() || r.iter().any(|x| !x.is_finite()) {
            return Err(BranchingError::NoConvergence(res));
        }
    }
    if res > 1e-12 {
        return Err(BranchingError::NoConvergence(res));
    }
    Ok(r)
}

/// Exact escape probability from `[0, L]`: `1 - (1-p) R_n^(L)`.
pub fn escape_exact(n: usize, l: usize, p: f64) -> Result<f64, BranchingError> {
    if !(0.0..=0.5).contains(&p) {
        return Err(BranchingError::BadProbability(p));
    }
    if n > l {
        return Err(BranchingError::BadStart(n as i64));
    }
    let r = bounded_rn_newton(l, p * (1.0 - p) / 3.0)?;
    Ok(1.0 - (1.0 - p) * r[n])
}

/// `max_n |R_n - 1/(1 - g(R_{n+1}+R_n+R_{n-1}))|` over `0..=L`.
pub fn bounded_residual(r: &[f64], g: f64) -> f64 {
    let at = |n: isize| if n < 0 || n as usize >= r.len() { 0.0 } else { r[n as usize] };
    (0..r.len() as isize)
        .map(|n| (r[n as usize] - 1.0 / (1.0 - g * (at(n + 1) + at(n) + at(n - 1)))).abs())
        .fold(0.0, f64::max)
}

fn theta_terms(q: f64) -> impl Iterator<Item = f64> {
    std::iter::successors(Some(q), move |&x| Some(x * q)).take_while(|&x| x > 1e-17)
}

/// `θ_1(z)` in product form, without the constant `2i`: `(sign, ln|θ_1|)`.
fn log_theta(z: f64, q: f64) -> (f64, f64) {
    let s = (PI * z).sin();
    let c = (2.0 * PI * z).cos();
    let tail: f64 = theta_terms(q).map(|x| (x * (x - 2.0 * c)).ln_1p()).sum();
    (s.signum(), s.abs().ln() + tail)
}

/// `θ_1'(z)/θ_1(z)`.
fn theta_log_derivative(z: f64, q: f64) -> f64 {
    let s = (2.0 * PI * z).sin();
    let c = (2.0 * PI * z).cos();
    PI / (PI * z).tan() + theta_terms(q).map(|x| 4.0 * PI * x * s / (1.0 - 2.0 * x * c + x * x)).sum::<f64>()
}

/// `ln θ_1'(0)`, same normalization as `log_theta`.
fn log_theta_prime0(q: f64) -> f64 {
    PI.ln() + 2.0 * theta_terms(q).map(|x| (-x).ln_1p()).sum::<f64>()
}

/// Bounded solution built from `u_n = θ_1((n+1)/(L+5))`.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaSolution {
    pub l: usize,
    pub q: f64,
    pub alpha: f64,
    pub r: f64,
    pub g: f64,
    /// `R_{-1}, R_0, ..., R_{L+1}`.
    pub rn: Vec<f64>,
}

impl ThetaSolution {
    pub fn at_nome(l: usize, q: f64) -> ThetaSolution {
        let alpha = 1.0 / (l as f64 + 5.0);
        let k = theta_log_derivative(alpha, q) - 0.5 * theta_log_derivative(2.0 * alpha, q);
        let lu = |n: i64| log_theta((n + 1) as f64 * alpha, q);
        let log_r = (4.0 * k).ln() + lu(0).1 + lu(1).1 - log_theta_prime0(q) - lu(2).1;
        let r = log_r.exp();
        let rn: Vec<f64> = (-1..=l as i64 + 1)
            .map(|n| {
                let (a, b, c, d) = (lu(n), lu(n + 3), lu(n + 1), lu(n + 2));
                a.0 * b.0 * c.0 * d.0 * (log_r + a.1 + b.1 - c.1 - d.1).exp()
            })
            .collect();
        // The recursion at n = 0, where R_{-1} = 0, fixes g.
        let g = (1.0 - 1.0 / rn[1]) / (rn[1] + rn[2]);
        ThetaSolution { l, q, alpha, r, g, rn }
    }

    pub fn interior(&self) -> &[f64] {
        &self.rn[1..self.rn.len() - 1]
    }

    pub fn residual(&self) -> f64 {
        bounded_residual(self.interior(), self.g)
    }
}

/// Largest coupling reachable by the theta family at this `L`.
pub fn theta_g_max(l: usize) -> f64 {
    ThetaSolution::at_nome(l, 1e-300).g
}

/// Solve `g(q) = g` on the nome, then return the bounded solution.
pub fn theta_bounded_rn(l: usize, g: f64) -> Result<ThetaSolution, BranchingError> {
    let f = |q: f64| ThetaSolution::at_nome(l, q).g - g;
    // g(q) decreases from its q -> 0 value to 0 as q -> 1.
    let mut lo = 0.0;
    if !(g > 0.0 && f(lo) > 0.0) {
        return Err(BranchingError::OutOfRange(g, l));
    }
    let mut hi = 0.5;
    while f(hi) > 0.0 {
        lo = hi;
        hi = 1.0 - 0.5 * (1.0 - hi);
        if 1.0 - hi < 1e-5 {
            return Err(BranchingError::OutOfRange(g, l));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    // Newton polish with a centered difference.
    let mut q = 0.5 * (lo + hi);
    for _ in 0..8 {
        let h = 1e-7 * q.max(1e-3);
        let d = (f(q + h) - f(q - h)) / (2.0 * h);
        let step = f(q) / d;
        let next = (q - step).clamp(lo, hi);
        if (next - q).abs() < 1e-16 {
            break;
        }
        q = next;
    }
    Ok(ThetaSolution::at_nome(l, q))
}

/// Weierstrass `℘` with real period `λ`, evaluated through its `q`-series.
#[derive(Clone, Debug)]
pub struct Weierstrass {
    pub lambda: f64,
    pub nome: f64,
    k: f64,
}

impl Weierstrass {
    pub fn new(lambda: f64, nome: f64) -> Self {
        Weierstrass { lambda, nome, k: PI / lambda }
    }

    fn lambert(&self, power: i32) -> impl Iterator<Item = (f64, f64)> + '_ {
        let q = self.nome;
        (1..)
            .map(move |m: i32| (m as f64, q.powi(m)))
            .take_while(|&(_, x)| x > 1e-18)
            .map(move |(m, x)| (m, m.powi(power) * x / (1.0 - x)))
    }

    pub fn g2(&self) -> f64 {
        let s: f64 = self.lambert(3).map(|(_, t)| t).sum();
        4.0 / 3.0 * self.k.powi(4) * (1.0 + 240.0 * s)
    }

    pub fn g3(&self) -> f64 {
        let s: f64 = self.lambert(5).map(|(_, t)| t).sum();
        8.0 / 27.0 * self.k.powi(6) * (1.0 - 504.0 * s)
    }

    /// Real nome giving `g2 = target` at period `λ`.
    pub fn with_g2(lambda: f64, target: f64) -> Result<Self, BranchingError> {
        let f = |q: f64| Weierstrass::new(lambda, q).g2() - target;
        let (mut lo, mut hi) = (0.0, 0.999);
        if f(lo) > 0.0 || f(hi) < 0.0 {
            return Err(BranchingError::OutOfRange(target, 0));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Weierstrass::new(lambda, 0.5 * (lo + hi)))
    }

    pub fn p(&self, z: f64) -> f64 {
        let v = self.k * z;
        let csc2 = 1.0 / v.sin().powi(2);
        let s: f64 = self.lambert(1).map(|(m, t)| t * (1.0 - (2.0 * m * v).cos())).sum();
        self.k * self.k * (csc2 - 1.0 / 3.0 + 8.0 * s)
    }

    pub fn p_second(&self, z: f64) -> f64 {
        let v = self.k * z;
        let csc2 = 1.0 / v.sin().powi(2);
        let s: f64 = self.lambert(3).map(|(m, t)| t * (2.0 * m * v).cos()).sum();
        self.k.powi(4) * (6.0 * csc2 * csc2 - 4.0 * csc2 + 32.0 * s)
    }
}

/// Largest `|U'' - 3U^2 + 3|` for `U = 2℘` with `g2 = 3`, over `[0.2, 0.8 λ]`.
pub fn weierstrass_scaling_check(lambda: f64, points: usize) -> Result<f64, BranchingError> {
    let w = Weierstrass::with_g2(lambda, 3.0)?;
    let mut worst: f64 = 0.0;
    for i in 0..points {
        let z = 0.2 + (0.8 * lambda - 0.2) * i as f64 / (points - 1).max(1) as f64;
        let u = 2.0 * w.p(z);
        let upp = 2.0 * w.p_second(z);
        worst = worst.max((upp - 3.0 * u * u + 3.0).abs());
    }
    Ok(worst)
}

/// Infinite-period profile `1 + 3/sinh^2(√(3/2) r)`.
pub fn scaling_half_line(r: f64) -> f64 {
    1.0 + 3.0 / (1.5f64.sqrt() * r).sinh().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extinction_closed_form() {
        assert!((exact_extinction(0, 0.3).unwrap() - 6.0 / 7.0).abs() < 1e-14);
        // E_n climbs to the unconstrained value 1 far from the wall.
        let far = exact_extinction(200, 0.3).unwrap();
        assert!((far - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generating_function_identity() {
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let w = total_extinction(p);
            assert!((w - (1.0 - p) / (1.0 - p * w)).abs() < 1e-14, "p = {p}");
        }
    }

    #[test]
    fn newton_solves_bounded_system() {
        for l in 0..10 {
            let r = bounded_rn_newton(l, 0.07).unwrap();
            assert!(bounded_residual(&r, 0.07) < 1e-12);
            for n in 0..=l {
                assert!((r[n] - r[l - n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wide_interval_recovers_half_line() {
        let p = 0.3;
        let s = escape_exact(0, 80, p).unwrap();
        assert!((s - (1.0 - exact_extinction(0, p).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn theta_matches_newton() {
        for l in 0..=8 {
            let gmax = theta_g_max(l);
            for g in [0.01, 0.05, 0.07] {
                if g >= gmax {
                    continue;
                }
                let th = theta_bounded_rn(l, g).unwrap();
                assert!((th.g - g).abs() < 1e-13, "L = {l}, g = {g}");
                assert!(th.residual() < 1e-9, "L = {l}, g = {g}: {}", th.residual());
                assert!(th.rn[0].abs() < 1e-10 && th.rn[l + 2].abs() < 1e-10);
                let nw = bounded_rn_newton(l, g).unwrap();
                for (a, b) in th.interior().iter().zip(&nw) {
                    assert!((a - b).abs() < 1e-8, "L = {l}, g = {g}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn theta_range() {
        // The reachable couplings grow toward the critical 1/12.
        let g: Vec<f64> = (0..8).map(theta_g_max).collect();
        assert!(g.windows(2).all(|w| w[0] < w[1]) && g[7] < 1.0 / 12.0);
        assert!(matches!(theta_bounded_rn(2, 0.083), Err(BranchingError::OutOfRange(..))));
    }

    #[test]
    fn weierstrass_equation() {
        assert!(weierstrass_scaling_check(3.0, 200).unwrap() < 1e-8);
        let w = Weierstrass::with_g2(3.0, 3.0).unwrap();
        // Second derivative against a finite difference.
        let (z, h) = (1.1, 1e-4);
        let fd = (w.p(z + h) - 2.0 * w.p(z) + w.p(z - h)) / (h * h);
        assert!((fd - w.p_second(z)).abs() < 1e-5 * fd.abs().max(1.0));
    }

    #[test]
    fn long_period_approaches_half_line_profile() {
        let w = Weierstrass::with_g2(16.0, 3.0).unwrap();
        // Two roots merge at e = 1/2, so g3 = -8 e^3.
        assert!((w.g3() + 1.0).abs() < 1e-3, "g3 = {}", w.g3());
        for r in [0.3, 0.7, 1.5, 3.0] {
            let u = 2.0 * w.p(r);
            assert!((u - scaling_half_line(r)).abs() < 1e-3, "r = {r}: {u}");
        }
    }

    #[test]
    fn simulation_is_reproducible_and_close() {
        let cfg = BranchingConfig::new(0.3, Walls::Lower, 0, 11);
        let a = simulate_extinction(&cfg, 20_000).unwrap();
        let b = simulate_extinction(&cfg, 20_000).unwrap();
        assert_eq!((a.extinct, a.escaped), (b.extinct, b.escaped));
        assert_eq!(a.censored, 0);
        assert!((a.value - 6.0 / 7.0).abs() < 4.0 * a.stderr);
    }

    #[test]
    fn interval_escape_matches_newton() {
        let cfg = BranchingConfig::new(0.4, Walls::Interval(3), 1, 5);
        let est = simulate_escape(&cfg, 20_000).unwrap();
        let exact = escape_exact(1, 3, 0.4).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.stderr, "{} vs {exact}", est.value);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(BranchingConfig::new(1.0, Walls::Lower, 0, 0).validate().is_err());
        assert!(BranchingConfig::new(0.2, Walls::Interval(2), 3, 0).validate().is_err());
        assert!(BranchingConfig::new(0.2, Walls::Lower, -1, 0).validate().is_err());
    }
}
