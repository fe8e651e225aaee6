//! Planar one-cut solution: the R, S residue system, leg generating functions,
//! the planar free energy of even potentials and the eigenvalue density.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::numeric::{adaptive_simpson, bisect};
use crate::series::{
    binom, factorial, fixed_point_solve, rat, rat_to_f64, rint, Coeff, Rat, SeriesError, SymbolPoly, TruncSeries,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanarError {
    #[error("potential has odd couplings")]
    EvenOnly,
    #[error("coupling is outside the one-cut regime")]
    OutOfOneCut,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `V(x) = x^2/2 - g Σ c_i x^i / i`: vertex weights `g_i = c_i g` in one counting variable `g`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Potential {
    pub couplings: BTreeMap<usize, Rat>,
}

impl Potential {
    pub fn new(pairs: &[(usize, Rat)]) -> Self {
        let couplings = pairs.iter().filter(|(_, c)| !c.is_zero()).cloned().collect();
        Potential { couplings }
    }

    pub fn gaussian() -> Self {
        Potential::default()
    }

    pub fn quartic() -> Self {
        Potential::new(&[(4, rint(1))])
    }

    pub fn is_even(&self) -> bool {
        self.couplings.keys().all(|i| i % 2 == 0)
    }

    pub fn degree(&self) -> usize {
        self.couplings.keys().copied().max().unwrap_or(2).max(2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneCutSolution {
    pub r: TruncSeries<Rat>,
    pub s: TruncSeries<Rat>,
}

fn multinomial(n: usize, a: usize, b: usize, c: usize) -> Rat {
    Rat::from_integer(factorial(n as u64) / (factorial(a as u64) * factorial(b as u64) * factorial(c as u64)))
}

/// Coefficient of `w^m` in `(w + S + R/w)^n`.
pub fn laurent_power_coeff(s: &TruncSeries<Rat>, r: &TruncSeries<Rat>, n: usize, m: i64) -> TruncSeries<Rat> {
    let order = s.order().min(r.order());
    let mut out = TruncSeries::zero(s.var(), order);
    // a - c = m, a + b + c = n
    for c in 0..=n {
        let a = m + c as i64;
        if a < 0 || a as usize + c > n {
            continue;
        }
        let a = a as usize;
        let b = n - a - c;
        let term = s.powi(b as u32).mul_ref(&r.powi(c as u32)).scale(&multinomial(n, a, b, c));
        out = out.add_ref(&term);
    }
    out
}

/// `V'_m`: coefficient of `w^m` in `V'(w + S + R/w)`.
pub fn residue_coeff(v: &Potential, sol: &OneCutSolution, m: i64) -> TruncSeries<Rat> {
    let order = sol.r.order().min(sol.s.order());
    let mut out = match m {
        1 => TruncSeries::one("g", order),
        0 => sol.s.truncate(order),
        -1 => sol.r.truncate(order),
        _ => TruncSeries::zero("g", order),
    };
    for (&i, c) in &v.couplings {
        let t = laurent_power_coeff(&sol.s, &sol.r, i - 1, m).shift(1).scale(c);
        out = out.sub_ref(&t);
    }
    out
}

pub fn solve_one_cut(v: &Potential, order: usize) -> OneCutSolution {
    let mut sol = OneCutSolution { r: TruncSeries::one("g", order), s: TruncSeries::zero("g", order) };
    // each pass fixes one more order of both series
    for _ in 0..=order + 1 {
        let mut s_new = TruncSeries::zero("g", order);
        let mut r_new = TruncSeries::one("g", order);
        for (&i, c) in &v.couplings {
            s_new = s_new.add_ref(&laurent_power_coeff(&sol.s, &sol.r, i - 1, 0).shift(1).scale(c));
            r_new = r_new.add_ref(&laurent_power_coeff(&sol.s, &sol.r, i - 1, -1).shift(1).scale(c));
        }
        let next = OneCutSolution { r: r_new, s: s_new };
        if next == sol {
            break;
        }
        sol = next;
    }
    sol
}

/// `R = 1 + Σ c_{2k} C(2k-1, k) g R^k`, the even-potential equation.
pub fn r_even_fixed_point(v: &Potential, order: usize) -> Result<TruncSeries<Rat>, PlanarError> {
    if !v.is_even() {
        return Err(PlanarError::EvenOnly);
    }
    let couplings = v.couplings.clone();
    Ok(fixed_point_solve(
        |r| {
            let mut acc = TruncSeries::zero("g", order);
            for (&i, c) in &couplings {
                let k = i / 2;
                let w = c * Rat::from_integer(binom(2 * k as u64 - 1, k as u64));
                acc = acc.add_ref(&r.powi(k as u32).scale(&w));
            }
            TruncSeries::one("g", order).add_ref(&acc.shift(1))
        },
        rint(1),
        "g",
        order,
    )?)
}

pub fn gamma_one(v: &Potential, sol: &OneCutSolution) -> TruncSeries<Rat> {
    residue_coeff(v, sol, -2).add_ref(&sol.s)
}

pub fn gamma_two_sameface(v: &Potential, sol: &OneCutSolution) -> TruncSeries<Rat> {
    let v2 = residue_coeff(v, sol, -2);
    sol.r.add_ref(&residue_coeff(v, sol, -3)).sub_ref(&v2.mul_ref(&v2))
}

/// Two legs anywhere: this is `R` itself.
pub fn gamma_one_one(_v: &Potential, sol: &OneCutSolution) -> TruncSeries<Rat> {
    sol.r.clone()
}

/// Quartic closed form `f = log(R)/2 + (R-1)(R-9)/24`.
pub fn quartic_free_energy(order: usize) -> Result<TruncSeries<Rat>, PlanarError> {
    let r = r_even_fixed_point(&Potential::quartic(), order)?;
    let one = TruncSeries::one("g", order);
    let nine = TruncSeries::constant("g", rint(9), order);
    let poly = r.sub_ref(&one).mul_ref(&r.sub_ref(&nine)).scale(&rat(1, 24));
    // f(0) = 0 fixes the constant: (1-1)(1-9)/24 = 0
    Ok(r.log()?.scale(&rat(1, 2)).add_ref(&poly))
}

/// Planar free energy `f = ∫_0^1 (1-z) log(r(z)/z) dz` for even potentials, termwise in `g`.
pub fn planar_free_energy(v: &Potential, order: usize) -> Result<TruncSeries<Rat>, PlanarError> {
    if !v.is_even() {
        return Err(PlanarError::EvenOnly);
    }
    // rho = r/z solves rho = 1 + g Σ c_{2k} C(2k-1,k) z^(k-1) rho^k
    let z = |e: i32| SymbolPoly::monomial(Rat::one(), &[("z", e)]);
    let couplings: Vec<(usize, SymbolPoly)> = v
        .couplings
        .iter()
        .map(|(&i, c)| {
            let k = i / 2;
            let w = c * Rat::from_integer(binom(2 * k as u64 - 1, k as u64));
            (k, z(k as i32 - 1).scale(&w))
        })
        .collect();
    let rho = fixed_point_solve(
        |x| {
            let mut acc = TruncSeries::<SymbolPoly>::zero("g", order);
            for (k, w) in &couplings {
                acc = acc.add_ref(&x.powi(*k as u32).mul_coeff(w));
            }
            TruncSeries::one("g", order).add_ref(&acc.shift(1))
        },
        SymbolPoly::unity(),
        "g",
        order,
    )?;
    let l = rho.log()?;
    let c = l
        .coeffs()
        .iter()
        .map(|p| {
            let mut acc = Rat::zero();
            for (m, c) in p.terms() {
                let j = SymbolPoly::exponent(m, "z") as i64;
                acc += c * rat(1, (j + 1) * (j + 2));
            }
            acc
        })
        .collect();
    Ok(TruncSeries::new("g", c, order))
}

/// Numeric one-cut data for an even potential at a fixed coupling `g`.
#[derive(Clone, Debug)]
pub struct OneCutNumeric {
    pub g: f64,
    /// `R = a^2/4`.
    pub r: f64,
    /// `M(z)` coefficients in ascending powers of `z`.
    pub m_poly: Vec<f64>,
}

fn phi_even(couplings: &[(usize, f64)], g: f64, r: f64) -> (f64, f64) {
    let mut p = r;
    let mut dp = 1.0;
    for &(i, c) in couplings {
        let k = (i / 2) as i32;
        let w = c * g * rat_to_f64(&Rat::from_integer(binom(2 * k as u64 - 1, k as u64)));
        p -= w * r.powi(k);
        dp -= w * k as f64 * r.powi(k - 1);
    }
    (p, dp)
}

impl OneCutNumeric {
    pub fn new(v: &Potential, g: f64) -> Result<Self, PlanarError> {
        if !v.is_even() {
            return Err(PlanarError::EvenOnly);
        }
        let cs: Vec<(usize, f64)> = v.couplings.iter().map(|(&i, c)| (i, rat_to_f64(c))).collect();
        // follow the branch from r = 0 where phi(r) = 1 is first reached with phi' > 0
        let mut r = 0.0;
        let mut prev = 0.0;
        loop {
            let (p, dp) = phi_even(&cs, g, r);
            if p >= 1.0 {
                break;
            }
            if dp <= 0.0 || r > 1e8 {
                return Err(PlanarError::OutOfOneCut);
            }
            prev = r;
            r += (1e-3f64).max(r * 1e-3);
        }
        let root = bisect(&|x| phi_even(&cs, g, x).0 - 1.0, prev, r, 1e-15).ok_or(PlanarError::OutOfOneCut)?;
        if phi_even(&cs, g, root).1 <= 1e-12 {
            return Err(PlanarError::OutOfOneCut);
        }
        // V'(z) = z - g Σ c_i z^(i-1); M = polynomial part of V'(z)/sqrt(z^2 - 4R)
        let deg = v.degree();
        let mut vp = vec![0.0; deg];
        vp[1] = 1.0;
        for &(i, c) in &cs {
            vp[i - 1] -= g * c;
        }
        let mut m_poly = vec![0.0; deg];
        for (p, &cp) in vp.iter().enumerate() {
            let mut j = 0;
            while p >= 2 * j + 1 {
                let cj = rat_to_f64(&Rat::from_integer(binom(2 * j as u64, j as u64)));
                m_poly[p - 2 * j - 1] += cp * cj * root.powi(j as i32);
                j += 1;
            }
        }
        Ok(OneCutNumeric { g, r: root, m_poly })
    }

    pub fn edge(&self) -> f64 {
        2.0 * self.r.sqrt()
    }

    pub fn density(&self, z: f64) -> f64 {
        let a = self.edge();
        if z.abs() >= a {
            return 0.0;
        }
        let m: f64 = self.m_poly.iter().rev().fold(0.0, |acc, c| acc * z + c);
        m * (a * a - z * z).sqrt() / (2.0 * PI)
    }

    /// `∫ z^k ρ(z) dz`, integrated in `z = a sin θ` so the endpoint root is smooth.
    pub fn moment(&self, k: i32, tol: f64) -> f64 {
        let a = self.edge();
        let f = |t: f64| {
            let z = a * t.sin();
            z.powi(k) * self.density(z) * a * t.cos()
        };
        adaptive_simpson(&f, -PI / 2.0, PI / 2.0, tol)
    }
}

pub fn spectral_density_eval(v: &Potential, g: f64, z: f64) -> Result<f64, PlanarError> {
    Ok(OneCutNumeric::new(v, g)?.density(z))
}

pub fn catalan(p: u64) -> BigInt {
    binom(2 * p, p) / BigInt::from(p + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fatgraph::{connected_free_energy, genus_part, DEFAULT_DART_CAP};

    fn ints(c: &[i64]) -> TruncSeries<Rat> {
        TruncSeries::from_ints("g", c)
    }

    #[test]
    fn gaussian_and_quartic_solutions() {
        let s = solve_one_cut(&Potential::gaussian(), 4);
        assert_eq!(s.r, TruncSeries::one("g", 4));
        assert_eq!(s.s, TruncSeries::zero("g", 4));
        let q = solve_one_cut(&Potential::quartic(), 3);
        assert_eq!(q.r, ints(&[1, 3, 18, 135]));
        assert!(q.s.coeffs().iter().all(|c| c.is_zero()));
    }

    #[test]
    fn residue_identities() {
        let v = Potential::new(&[(3, rint(1)), (4, rint(2))]);
        let sol = solve_one_cut(&v, 6);
        assert_eq!(residue_coeff(&v, &sol, 0), TruncSeries::zero("g", 6));
        assert_eq!(residue_coeff(&v, &sol, -1), TruncSeries::one("g", 6));
        for m in 1..=3i64 {
            let lhs = residue_coeff(&v, &sol, -m);
            let rhs = residue_coeff(&v, &sol, m).mul_ref(&sol.r.powi(m as u32));
            assert_eq!(lhs, rhs);
        }
        let g = solve_one_cut(&Potential::gaussian(), 3);
        assert_eq!(residue_coeff(&Potential::gaussian(), &g, 0), TruncSeries::zero("g", 3));
        assert_eq!(residue_coeff(&Potential::gaussian(), &g, -1), TruncSeries::one("g", 3));
    }

    #[test]
    fn quartic_gamma_two() {
        let v = Potential::quartic();
        let sol = solve_one_cut(&v, 10);
        let g2 = gamma_two_sameface(&v, &sol);
        assert_eq!(g2.truncate(3), ints(&[1, 2, 9, 54]));
        let four = TruncSeries::constant("g", rint(4), 10);
        assert_eq!(g2, sol.r.mul_ref(&four.sub_ref(&sol.r)).scale(&rat(1, 3)));
        assert_eq!(gamma_one(&v, &sol), TruncSeries::zero("g", 10));
        assert_eq!(gamma_one_one(&v, &sol).truncate(2), ints(&[1, 3, 18]));
        let g = Potential::gaussian();
        let gs = solve_one_cut(&g, 3);
        assert_eq!(gamma_two_sameface(&g, &gs), TruncSeries::one("g", 3));
        assert_eq!(gamma_one(&g, &gs), TruncSeries::zero("g", 3));
    }

    #[test]
    fn free_energies() {
        let f = quartic_free_energy(3).unwrap();
        assert_eq!(f.coeffs(), &[rint(0), rat(1, 2), rat(9, 8), rat(9, 2)]);
        assert_eq!(planar_free_energy(&Potential::quartic(), 3).unwrap(), f);
        assert_eq!(planar_free_energy(&Potential::gaussian(), 3).unwrap(), TruncSeries::zero("g", 3));
        assert_eq!(planar_free_energy(&Potential::new(&[(3, rint(1))]), 3), Err(PlanarError::EvenOnly));
    }

    #[test]
    fn sextic_free_energy_matches_oracle() {
        let v = Potential::new(&[(6, rint(1))]);
        let f = planar_free_energy(&v, 2).unwrap();
        let w = [(6usize, rint(1))].into_iter().collect();
        let oracle = genus_part(&connected_free_energy(&w, 2, DEFAULT_DART_CAP).unwrap(), 0);
        assert_eq!(f, oracle);
    }

    #[test]
    fn quartic_derivative_identity() {
        let n = 10;
        let f = quartic_free_energy(n).unwrap();
        let r = r_even_fixed_point(&Potential::quartic(), n).unwrap();
        let lhs = f.derivative().shift(1).scale(&rint(4));
        let one = TruncSeries::one("g", n);
        let three = TruncSeries::constant("g", rint(3), n);
        let rhs = r.sub_ref(&one).mul_ref(&three.sub_ref(&r)).scale(&rat(1, 3));
        assert_eq!(lhs.truncate(n - 1), rhs.truncate(n - 1));
    }

    #[test]
    fn residue_system_matches_blossom_equation() {
        for v in [Potential::quartic(), Potential::new(&[(4, rint(2)), (6, rint(-1))]), Potential::new(&[(2, rat(1, 3)), (8, rint(1))])] {
            let a = solve_one_cut(&v, 10).r;
            let b = r_even_fixed_point(&v, 10).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn densities() {
        let g = OneCutNumeric::new(&Potential::gaussian(), 0.0).unwrap();
        assert!((g.density(0.0) - 1.0 / PI).abs() < 1e-14);
        assert!((g.moment(0, 1e-12) - 1.0).abs() < 1e-8);
        for p in 1..=4u64 {
            let c = rat_to_f64(&Rat::from_integer(catalan(p)));
            assert!((g.moment(2 * p as i32, 1e-12) - c).abs() < 1e-6);
        }
        let q = OneCutNumeric::new(&Potential::quartic(), 0.05).unwrap();
        assert!((q.moment(0, 1e-12) - 1.0).abs() < 1e-8);
        let exact_r = (1.0 - (1.0 - 12.0 * 0.05f64).sqrt()) / (6.0 * 0.05);
        assert!((q.r - exact_r).abs() < 1e-12);
        assert_eq!(q.density(3.0), 0.0);
        assert!(matches!(OneCutNumeric::new(&Potential::quartic(), 1.0 / 12.0 + 1e-9), Err(PlanarError::OutOfOneCut)));
        assert!(matches!(OneCutNumeric::new(&Potential::quartic(), 0.2), Err(PlanarError::OutOfOneCut)));
    }

    /// Coefficients of the polynomial through `(j, ys[j])`, ascending powers.
    fn interpolate(ys: &[Rat]) -> Vec<Rat> {
        let n = ys.len();
        let mut diffs = ys.to_vec();
        let mut out = vec![Rat::zero(); n];
        // basis x(x-1)...(x-i+1)/i!
        let mut basis = vec![Rat::one()];
        for i in 0..n {
            for (k, b) in basis.iter().enumerate() {
                out[k] += &diffs[0] * b;
            }
            let next: Vec<Rat> = (0..diffs.len() - 1).map(|j| &diffs[j + 1] - &diffs[j]).collect();
            diffs = next;
            let mut nb = vec![Rat::zero(); basis.len() + 1];
            for (k, b) in basis.iter().enumerate() {
                nb[k + 1] += b / rint(i as i64 + 1);
                nb[k] -= b * rint(i as i64) / rint(i as i64 + 1);
            }
            basis = nb;
        }
        out
    }

    #[test]
    fn cubic_legs_match_oracle() {
        let order = 4;
        let planar_at = |c1: i64| {
            let w = [(1usize, rint(c1)), (3usize, rint(1))].into_iter().collect();
            genus_part(&connected_free_energy(&w, order, DEFAULT_DART_CAP).unwrap(), 0)
        };
        let samples: Vec<TruncSeries<Rat>> = (0..=order as i64).map(planar_at).collect();
        let v = Potential::new(&[(3, rint(1))]);
        let sol = solve_one_cut(&v, order);
        let g1 = gamma_one(&v, &sol);
        let r = gamma_one_one(&v, &sol);
        for k in 1..=order {
            let ys: Vec<Rat> = samples.iter().map(|f| f.coeff(k)).collect();
            let poly = interpolate(&ys);
            // g^k term with m powers of g_1 carries g_3^(k-m)
            assert_eq!(poly[1], g1.coeff(k - 1), "Gamma1 at g^{}", k - 1);
            if k >= 2 {
                assert_eq!(&poly[2] * rint(2), r.coeff(k - 2), "R at g^{}", k - 2);
            }
        }
        assert_eq!(sol.s.truncate(3), ints(&[0, 2, 0, 12]));
        assert_eq!(g1.truncate(3), ints(&[0, 1, 0, 4]));
    }
}
