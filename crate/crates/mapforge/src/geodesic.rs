//! Two-leg generating functions refined by the geodesic distance between the legs.
//!
//! `R_n` counts planar two-leg graphs with the legs at distance at most `n`.
//! It solves `R_n = 1 + Σ_k g_k <n-1|Q^(k-1)|n>` and, when odd valences are
//! present, `S_n = Σ_k g_k <n|Q^(k-1)|n>`, where `Q|n> = |n+1> + S_n|n> + R_n|n-1>`
//! and every weight with a negative index vanishes.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::planar::{r_even_fixed_point, solve_one_cut, PlanarError, Potential};
use crate::series::{fixed_point_solve, rat, rint, Coeff, Rat, SeriesError, TruncSeries};

#[derive(Debug, Error)]
pub enum GeodesicError {
    #[error("distance must be positive, got {0}")]
    DomainError(f64),
    #[error("coupling {0} is outside 0 <= g < 1/12")]
    OutOfOneCut(f64),
    #[error(transparent)]
    Planar(#[from] PlanarError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `R_n`, `S_n` for `0 <= n <= n_max`, plus the bulk limits they converge to.
#[derive(Clone, Debug)]
pub struct GeodesicSeries {
    pub r: Vec<TruncSeries<Rat>>,
    pub s: Vec<TruncSeries<Rat>>,
    pub bulk_r: TruncSeries<Rat>,
    pub bulk_s: TruncSeries<Rat>,
    /// Number of negative indices forced to zero, `floor(d/2) - 1`.
    pub boundary: usize,
    pub order: usize,
}

impl GeodesicSeries {
    pub fn n_max(&self) -> usize {
        self.r.len() - 1
    }

    pub fn r_at(&self, n: i64) -> TruncSeries<Rat> {
        if n < 0 {
            TruncSeries::zero("g", self.order)
        } else {
            self.r[n as usize].clone()
        }
    }

    /// Two legs at distance exactly `n`: `R_n - R_{n-1}`.
    pub fn g_at(&self, n: i64) -> TruncSeries<Rat> {
        self.r_at(n).sub_ref(&self.r_at(n - 1))
    }
}

struct Window<'a> {
    r: &'a [TruncSeries<Rat>],
    s: &'a [TruncSeries<Rat>],
    bulk_r: &'a TruncSeries<Rat>,
    bulk_s: &'a TruncSeries<Rat>,
}

impl Window<'_> {
    fn r(&self, h: i64) -> Option<&TruncSeries<Rat>> {
        if h < 0 {
            None
        } else {
            Some(self.r.get(h as usize).unwrap_or(self.bulk_r))
        }
    }

    fn s(&self, h: i64) -> Option<&TruncSeries<Rat>> {
        if h < 0 {
            None
        } else {
            Some(self.s.get(h as usize).unwrap_or(self.bulk_s))
        }
    }

    /// `<to|Q^steps|from>` as a sum over height paths.
    fn element(&self, from: i64, to: i64, steps: usize, order: usize) -> TruncSeries<Rat> {
        let mut amp: BTreeMap<i64, TruncSeries<Rat>> = BTreeMap::new();
        amp.insert(from, TruncSeries::one("g", order));
        for left in (0..steps).rev() {
            let mut next: BTreeMap<i64, TruncSeries<Rat>> = BTreeMap::new();
            let mut push = |h: i64, t: TruncSeries<Rat>| {
                if (h - to).unsigned_abs() as usize <= left {
                    let e = next.entry(h).or_insert_with(|| TruncSeries::zero("g", order));
                    *e = e.add_ref(&t);
                }
            };
            for (&h, a) in &amp {
                push(h + 1, a.clone());
                if let Some(s) = self.s(h) {
                    if s.coeffs().iter().any(|c| !c.is_zero()) {
                        push(h, a.mul_ref(s));
                    }
                }
                if let Some(r) = self.r(h) {
                    push(h - 1, a.mul_ref(r));
                }
            }
            amp = next;
        }
        amp.remove(&to).unwrap_or_else(|| TruncSeries::zero("g", order))
    }
}

/// Order-by-order solve of the distance-refined recursion.
pub fn solve_rn_series(v: &Potential, n_max: usize, order: usize) -> GeodesicSeries {
    let bulk = solve_one_cut(v, order);
    let d = v.degree();
    let reach = ((d - 1) / 2).max(1);
    // R_n at order p only sees indices up to n + p * reach, so the tail never leaks in
    let top = n_max + order * reach + 1;
    let odd = !v.is_even();
    let mut r = vec![TruncSeries::one("g", order); top + 1];
    let mut s = vec![TruncSeries::zero("g", order); top + 1];
    for _ in 0..=order + 1 {
        let w = Window { r: &r, s: &s, bulk_r: &bulk.r, bulk_s: &bulk.s };
        let next: Vec<(TruncSeries<Rat>, TruncSeries<Rat>)> = (0..=top as i64)
            .into_par_iter()
            .map(|n| {
                let mut rn = TruncSeries::zero("g", order);
                let mut sn = TruncSeries::zero("g", order);
                for (&k, c) in &v.couplings {
                    rn = rn.add_ref(&w.element(n, n - 1, k - 1, order).scale(c));
                    if odd {
                        sn = sn.add_ref(&w.element(n, n, k - 1, order).scale(c));
                    }
                }
                (TruncSeries::one("g", order).add_ref(&rn.shift(1)), sn.shift(1))
            })
            .collect();
        let (nr, ns): (Vec<_>, Vec<_>) = next.into_iter().unzip();
        if nr == r && ns == s {
            break;
        }
        r = nr;
        s = ns;
    }
    r.truncate(n_max + 1);
    s.truncate(n_max + 1);
    GeodesicSeries { r, s, bulk_r: bulk.r, bulk_s: bulk.s, boundary: d / 2 - 1, order }
}

/// Quartic `R` and root `x` of `x + 1/x + 4 = 1/(gR)` in the variable `t = g / scale`.
pub(crate) fn quartic_r_x<C: Coeff>(scale: &Rat, order: usize) -> Result<(TruncSeries<C>, TruncSeries<C>), SeriesError> {
    let three_s = scale * rint(3);
    let r = fixed_point_solve(
        |r: &TruncSeries<C>| TruncSeries::one("g", order).add_ref(&r.mul_ref(r).shift(1).scale(&three_s)),
        C::unity(),
        "g",
        order,
    )?;
    let gr = r.shift(1).scale(scale);
    let x = fixed_point_solve(
        |x: &TruncSeries<C>| {
            let inner = TruncSeries::one("g", order).add_ref(&x.scale(&rint(4))).add_ref(&x.mul_ref(x));
            gr.mul_ref(&inner)
        },
        C::nil(),
        "g",
        order,
    )?;
    Ok((r, x))
}

pub(crate) fn soliton<C: Coeff>(r: &TruncSeries<C>, x: &TruncSeries<C>, n: usize) -> Result<TruncSeries<C>, SeriesError> {
    let order = r.order();
    let one = TruncSeries::<C>::one("g", order);
    let f = |k: usize| one.sub_ref(&x.powi(k as u32));
    let num = f(n + 1).mul_ref(&f(n + 4));
    let den = f(n + 2).mul_ref(&f(n + 3));
    Ok(r.mul_ref(&num.div(&den)?))
}

/// Closed form `R (1-x^{n+1})(1-x^{n+4}) / ((1-x^{n+2})(1-x^{n+3}))` expanded in `g`.
pub fn exact_rn_quartic_series(n: usize, order: usize) -> Result<TruncSeries<Rat>, GeodesicError> {
    let (r, x) = quartic_r_x::<Rat>(&Rat::one(), order)?;
    Ok(soliton(&r, &x, n)?)
}

/// Characteristic root `x` of the quartic linearized recursion, as a series.
pub fn char_root_series(order: usize) -> Result<TruncSeries<Rat>, GeodesicError> {
    Ok(quartic_r_x::<Rat>(&Rat::one(), order)?.1)
}

/// Numeric `(R, x)` at `g`, with `|x| < 1`.
pub fn quartic_r_x_f64(g: f64) -> Result<(f64, f64), GeodesicError> {
    if !(0.0..1.0 / 12.0).contains(&g) {
        return Err(GeodesicError::OutOfOneCut(g));
    }
    if g == 0.0 {
        return Ok((1.0, 0.0));
    }
    let r = (1.0 - (1.0 - 12.0 * g).sqrt()) / (6.0 * g);
    let b = 1.0 / (g * r) - 4.0;
    let x = 2.0 / (b + (b * b - 4.0).sqrt());
    Ok((r, x))
}

/// Closed form for `R_n` at a numeric coupling.
pub fn exact_rn_quartic_f64(n: f64, g: f64) -> Result<f64, GeodesicError> {
    let (r, x) = quartic_r_x_f64(g)?;
    let p = |k: f64| 1.0 - x.powf(n + k);
    Ok(r * p(1.0) * p(4.0) / (p(2.0) * p(3.0)))
}

/// `f(x, y) = x y (1 - g x - g y) - x - y`, conserved along the quartic recursion.
pub fn integral_of_motion(x: &TruncSeries<Rat>, y: &TruncSeries<Rat>) -> TruncSeries<Rat> {
    let order = x.order().min(y.order());
    let gx = x.shift(1).truncate(order);
    let gy = y.shift(1).truncate(order);
    let one = TruncSeries::one("g", order);
    x.mul_ref(y).mul_ref(&one.sub_ref(&gx).sub_ref(&gy)).sub_ref(x).sub_ref(y)
}

pub fn integral_of_motion_f64(x: f64, y: f64, g: f64) -> f64 {
    x * y * (1.0 - g * x - g * y) - x - y
}

/// `B_n(A) = [g^A] R_n / [g^A] R_0`, exact.
pub fn fixed_area_ratio(n: usize, area: usize) -> Result<Rat, GeodesicError> {
    assert!(area >= 1, "fixed-area ratios need a positive area");
    let (r, x) = quartic_r_x::<Rat>(&Rat::one(), area)?;
    let num = soliton(&r, &x, n)?.coeff(area);
    let den = soliton(&r, &x, 0)?.coeff(area);
    assert!(!den.is_zero());
    Ok(num / den)
}

/// Float `B_n(A)` for several `n`, expanding in `12 g` so coefficients stay bounded.
pub fn fixed_area_ratios_f64(ns: &[usize], area: usize) -> Result<Vec<f64>, GeodesicError> {
    assert!(area >= 1, "fixed-area ratios need a positive area");
    let (r, x) = quartic_r_x::<f64>(&rat(1, 12), area)?;
    let den = soliton(&r, &x, 0)?.coeff(area);
    ns.iter().map(|&n| Ok(soliton(&r, &x, n)?.coeff(area) / den)).collect()
}

/// Large-area limit of `B_n`.
pub fn b_n_limit(n: u64) -> Rat {
    let n = Rat::from_integer(n.into());
    let one = Rat::one();
    let poly = rint(140) + rint(270) * &n + rint(179) * &n * &n + rint(50) * n.clone() * &n * &n
        + rint(5) * n.clone() * &n * &n * &n;
    rat(3, 280) * (&n + &one) * (&n + rint(4)) / ((&n + rint(2)) * (&n + rint(3))) * poly
}

/// `(F, G)` with `F(r) = 3 / sinh^2(sqrt(3/2) r)` and `G = -F'`.
pub fn continuum_two_point(r: f64) -> Result<(f64, f64), GeodesicError> {
    if r <= 0.0 || r.is_nan() {
        return Err(GeodesicError::DomainError(r));
    }
    let k = 1.5f64.sqrt();
    let sh = (k * r).sinh();
    let f = 3.0 / (sh * sh);
    let g = 3.0 * 6f64.sqrt() * (k * r).cosh() / (sh * sh * sh);
    Ok((f, g))
}

/// Five-point residual of `F'' - 3F^2 - 6F` at `r`: `(absolute, relative to |F''| + 3F^2 + 6F)`.
///
/// The stencil's own truncation error grows like `h^4 r^-8` near the origin,
/// so only the relative residual is uniformly small on a grid reaching small `r`.
pub fn ode_residual(r: f64, h: f64) -> Result<(f64, f64), GeodesicError> {
    let f = |x: f64| continuum_two_point(x).map(|p| p.0);
    let d2 = (-f(r + 2.0 * h)? + 16.0 * f(r + h)? - 30.0 * f(r)? + 16.0 * f(r - h)? - f(r - 2.0 * h)?) / (12.0 * h * h);
    let v = f(r)?;
    let res = (d2 - 3.0 * v * v - 6.0 * v).abs();
    Ok((res, res / (d2.abs() + 3.0 * v * v + 6.0 * v)))
}

/// Coupling `g = (1 - eps^4)/12` approaching criticality.
pub fn critical_coupling(eps: f64) -> f64 {
    (1.0 - eps.powi(4)) / 12.0
}

/// Rows `(r, n, scaled discrete value, F(n eps))` on a grid, with `n = round(r/eps)`.
pub fn discrete_vs_continuum(eps: f64, rs: &[f64]) -> Result<Vec<(f64, u64, f64, f64)>, GeodesicError> {
    let g = critical_coupling(eps);
    let (bulk, _) = quartic_r_x_f64(g)?;
    rs.iter()
        .map(|&r| {
            let n = (r / eps).round() as u64;
            let rn = exact_rn_quartic_f64(n as f64, g)?;
            let scaled = (bulk - rn) / (eps * eps * bulk);
            let (f, _) = continuum_two_point(n as f64 * eps)?;
            Ok((r, n, scaled, f))
        })
        .collect()
}

/// Largest `|(R - R_n)/(eps^2 R) - F(n eps)|` over the grid.
pub fn discrete_to_continuum_check(eps: f64, rs: &[f64]) -> Result<f64, GeodesicError> {
    Ok(discrete_vs_continuum(eps, rs)?.iter().map(|(_, _, a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Evenly spaced grid on `[lo, hi]` with `points` entries.
pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64).collect()
}

/// Quartic `R` through `order`, exposed for checks against the bulk limit.
pub fn quartic_bulk(order: usize) -> Result<TruncSeries<Rat>, GeodesicError> {
    Ok(r_even_fixed_point(&Potential::quartic(), order)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_low_orders() {
        let gs = solve_rn_series(&Potential::quartic(), 3, 6);
        assert_eq!(gs.r[0], TruncSeries::from_ints("g", &[1, 2, 9, 54, 378, 2916, 24057]));
        let r1 = exact_rn_quartic_series(1, 6).unwrap();
        assert_eq!(gs.r[1], r1);
        // hand iteration of R_1 = 1 + g R_1 (R_2 + R_1 + R_0): 1 + 3g + 17g^2
        assert_eq!(r1.coeff(2), rint(17));
        assert_eq!(gs.boundary, 1);
    }

    #[test]
    fn two_routes_agree() {
        let gs = solve_rn_series(&Potential::quartic(), 6, 12);
        for n in 0..=6 {
            assert_eq!(gs.r[n], exact_rn_quartic_series(n, 12).unwrap(), "n={n}");
        }
    }

    #[test]
    fn stabilization_and_monotonicity() {
        let order = 12;
        let gs = solve_rn_series(&Potential::quartic(), 14, order);
        let bulk = quartic_bulk(order).unwrap();
        for n in 0..=14i64 {
            let gap = bulk.sub_ref(&gs.r_at(n));
            for k in 0..=(n as usize).min(order) {
                assert!(gap.coeff(k).is_zero(), "n={n} k={k}");
            }
            let gn = gs.g_at(n);
            assert!(gn.coeffs().iter().all(|c| *c >= Rat::zero()));
        }
        assert_eq!(gs.r[13], bulk);
    }

    #[test]
    fn motion_is_conserved() {
        let order = 12;
        let gs = solve_rn_series(&Potential::quartic(), 6, order);
        let bulk = quartic_bulk(order).unwrap();
        let target = integral_of_motion(&bulk, &bulk);
        let g = TruncSeries::variable("g", order);
        let want = g.mul_ref(&bulk.powi(3)).sub_ref(&bulk);
        assert_eq!(target, want);
        assert_eq!(integral_of_motion(&gs.r_at(-1), &gs.r_at(0)), gs.r_at(0).neg_ref());
        for n in 0..6 {
            assert_eq!(integral_of_motion(&gs.r_at(n), &gs.r_at(n + 1)), target, "n={n}");
        }
    }

    #[test]
    fn characteristic_root() {
        let order = 10;
        let x = char_root_series(order).unwrap();
        let bulk = quartic_bulk(order).unwrap();
        // x^2 + 4x + 1 = x / (gR)
        let one = TruncSeries::one("g", order);
        let lhs = x.mul_ref(&x).add_ref(&x.scale(&rint(4))).add_ref(&one).mul_ref(&bulk.shift(1));
        assert_eq!(lhs.truncate(order), x);
        for g in [0.01, 0.05, 0.08] {
            let (r, xv) = quartic_r_x_f64(g).unwrap();
            assert!(xv.abs() < 1.0);
            assert!((xv + 1.0 / xv + 4.0 - 1.0 / (g * r)).abs() < 1e-10);
        }
        assert!(quartic_r_x_f64(0.09).is_err());
    }

    #[test]
    fn numeric_closed_form() {
        let g = 0.05;
        let (r, _) = quartic_r_x_f64(g).unwrap();
        let r0 = exact_rn_quartic_f64(0.0, g).unwrap();
        assert!((r0 - (r - g * r * r * r)).abs() < 1e-13);
        assert!((exact_rn_quartic_f64(200.0, g).unwrap() - r).abs() < 1e-12);
        let series = exact_rn_quartic_series(2, 40).unwrap();
        assert!((series.eval_f64(0.02) - exact_rn_quartic_f64(2.0, 0.02).unwrap()).abs() < 1e-12);
        for n in 0..5 {
            let a = integral_of_motion_f64(exact_rn_quartic_f64(n as f64, g).unwrap(), exact_rn_quartic_f64(n as f64 + 1.0, g).unwrap(), g);
            assert!((a - (g * r * r * r - r)).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_valences_reach_one_cut() {
        let v = Potential::new(&[(3, rint(1)), (4, rint(1))]);
        let gs = solve_rn_series(&v, 9, 8);
        let bulk = solve_one_cut(&v, 8);
        assert_eq!(gs.r[9], bulk.r);
        assert_eq!(gs.s[9], bulk.s);
        assert!(gs.s[0].coeff(1) > Rat::zero());
        let sextic = Potential::new(&[(4, rint(1)), (6, rint(1))]);
        // a hexavalent root vertex can drop the index by two per order
        let gs6 = solve_rn_series(&sextic, 13, 6);
        assert_eq!(gs6.boundary, 2);
        assert_eq!(gs6.r[13], r_even_fixed_point(&sextic, 6).unwrap());
        assert_ne!(gs6.r[10], gs6.r[13]);
    }

    #[test]
    fn fixed_area_exact_and_float() {
        assert_eq!(fixed_area_ratio(0, 7).unwrap(), rint(1));
        assert_eq!(b_n_limit(1), rat(23, 4));
        let ns = [1usize, 2, 3];
        let fl = fixed_area_ratios_f64(&ns, 60).unwrap();
        for (i, &n) in ns.iter().enumerate() {
            let ex = crate::series::rat_to_f64(&fixed_area_ratio(n, 60).unwrap());
            assert!((fl[i] - ex).abs() < 1e-9 * ex, "n={n} {} {}", fl[i], ex);
        }
    }

    #[test]
    fn continuum_profile() {
        let (f1, _) = continuum_two_point(1.0).unwrap();
        assert!((f1 - 1.2410).abs() < 2e-4);
        assert!((f1 - 1.241_108_900_148).abs() < 1e-12);
        assert!(continuum_two_point(0.0).is_err());
        let h = 1e-3;
        for r in grid(0.3, 5.0, 48) {
            let f = |x: f64| continuum_two_point(x).unwrap().0;
            let (abs, rel) = ode_residual(r, h).unwrap();
            assert!(rel < 1e-8, "r={r}");
            if r >= 1.0 {
                assert!(abs < 1e-8, "r={r}");
            }
            let d1 = (f(r - 2.0 * h) - 8.0 * f(r - h) + 8.0 * f(r + h) - f(r + 2.0 * h)) / (12.0 * h);
            let (_, g) = continuum_two_point(r).unwrap();
            assert!((g + d1).abs() < 1e-8 * (1.0 + g));
        }
    }
}
