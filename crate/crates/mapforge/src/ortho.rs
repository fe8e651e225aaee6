//! Orthogonal polynomials for even potentials: moments, Hankel norms, the exact
//! finite-N free energy and its genus expansion, plus multicritical tuning.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::planar::{r_even_fixed_point, PlanarError, Potential};
use crate::series::{
    binom, double_factorial_odd, factorial, rint, Coeff, Rat, SeriesError, SymbolPoly, TruncSeries,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrthoError {
    #[error("potential has odd couplings")]
    EvenOnly,
    #[error("Hankel pivot {0} is not invertible")]
    DegenerateMeasure(usize),
    #[error("coefficient of g^{0} did not stabilize; increase the number of sizes")]
    IncreaseM(usize),
    #[error("N-exponent {1} at g^{0} is not of the form 2-2h")]
    StructureViolation(usize, i32),
    #[error("no multicritical point with positive r_c")]
    NoPhysicalRoot,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Planar(#[from] PlanarError),
}

/// `ν_k = <x^k exp(N g Σ c_i x^i / i)>` under the Gaussian of variance `1/N`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable<R: Coeff> {
    pub nu: Vec<TruncSeries<R>>,
}

/// The parameter `N` as a ring element, with its inverse.
pub trait NValue: Coeff {
    fn n_pow(n: &Self, n_inv: &Self, e: i64) -> Self {
        let (b, k) = if e >= 0 { (n, e) } else { (n_inv, -e) };
        let mut out = Self::unity();
        for _ in 0..k {
            out = out.times(b);
        }
        out
    }
}

impl NValue for Rat {}
impl NValue for SymbolPoly {}

fn poly_mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn moments_from_potential<R: NValue>(
    v: &Potential,
    order: usize,
    kmax: usize,
    n: &R,
    n_inv: &R,
) -> Result<MomentTable<R>, OrthoError> {
    if !v.is_even() {
        return Err(OrthoError::EvenOnly);
    }
    let deg = v.degree();
    let mut p = vec![Rat::zero(); deg + 1];
    for (&i, c) in &v.couplings {
        p[i] = c / rint(i as i64);
    }
    let mut powers = vec![vec![Rat::one()]];
    for j in 1..=order {
        let next = poly_mul(&powers[j - 1], &p);
        powers.push(next);
    }
    let gauss = |m: usize| -> R {
        if m % 2 == 1 {
            return R::nil();
        }
        let df = Rat::from_integer(double_factorial_odd((m / 2) as u64));
        R::n_pow(n, n_inv, -((m / 2) as i64)).scale(&df)
    };
    let mut nu = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let mut c = Vec::with_capacity(order + 1);
        for (j, pj) in powers.iter().enumerate() {
            let mut acc = R::nil();
            for (e, w) in pj.iter().enumerate() {
                if !w.is_zero() {
                    acc = acc.plus(&gauss(k + e).scale(w));
                }
            }
            let pref = Rat::from_integer(BigInt::one()) / Rat::from_integer(factorial(j as u64));
            c.push(acc.times(&R::n_pow(n, n_inv, j as i64)).scale(&pref));
        }
        nu.push(TruncSeries::new("g", c, order));
    }
    Ok(MomentTable { nu })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrthoData<R: Coeff> {
    /// Raw norms `h_m = D_{m+1}/D_m`.
    pub h: Vec<TruncSeries<R>>,
    /// `r_m = h_m / h_{m-1}` for `m >= 1`; index 0 holds zero.
    pub r: Vec<TruncSeries<R>>,
}

impl<R: Coeff> OrthoData<R> {
    /// `h_m` divided by its Gaussian value.
    pub fn normalized(&self, m: usize) -> Result<TruncSeries<R>, OrthoError> {
        let h = &self.h[m];
        let c0 = h.coeff(0).inverse().ok_or(OrthoError::DegenerateMeasure(m))?;
        Ok(h.mul_coeff(&c0))
    }
}

/// Pivots of symmetric Gaussian elimination on `(ν_{i+j})_{i,j<size}`.
pub fn hankel_norms<R: Coeff>(moments: &MomentTable<R>, size: usize) -> Result<OrthoData<R>, OrthoError> {
    let mut a: Vec<Vec<TruncSeries<R>>> =
        (0..size).map(|i| (0..size).map(|j| moments.nu[i + j].clone()).collect()).collect();
    let mut h = Vec::with_capacity(size);
    for p in 0..size {
        let pivot = a[p][p].clone();
        let inv = pivot.inverse().map_err(|_| OrthoError::DegenerateMeasure(p))?;
        for i in p + 1..size {
            let f = a[i][p].mul_ref(&inv);
            if f.coeffs().iter().all(|c| c.is_nil()) {
                continue;
            }
            for j in p + 1..size {
                let t = f.mul_ref(&a[p][j]);
                a[i][j] = a[i][j].sub_ref(&t);
            }
        }
        h.push(pivot);
    }
    let mut r = vec![TruncSeries::zero("g", moments.nu[0].order())];
    for m in 1..size {
        r.push(h[m].div(&h[m - 1]).map_err(|_| OrthoError::DegenerateMeasure(m - 1))?);
    }
    Ok(OrthoData { h, r })
}

/// `F_N = Σ_{i<N} log(h_i / h_i^(0))` at an integer `N`.
pub fn free_energy_at(v: &Potential, order: usize, n: usize) -> Result<TruncSeries<Rat>, OrthoError> {
    let nr = rint(n as i64);
    let moments = moments_from_potential(v, order, 2 * n, &nr, &nr.recip())?;
    let data = hankel_norms(&moments, n)?;
    let mut f = TruncSeries::zero("g", order);
    for i in 0..n {
        f = f.add_ref(&data.normalized(i)?.log()?);
    }
    Ok(f)
}

/// Solves the square linear system `a x = b` exactly.
fn solve_rational(mut a: Vec<Vec<Rat>>, mut b: Vec<Rat>) -> Option<Vec<Rat>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip();
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] * &inv;
                for c in col..n {
                    let t = &f * &a[col][c];
                    a[r][c] -= t;
                }
                let t = &f * &b[col];
                b[r] -= t;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Default number of matrix sizes: enough points for all exponents `2, 1, ..., 2 - 2h_max`.
pub fn default_sizes(v: &Potential, order: usize) -> usize {
    let hmax = order * v.degree() / 4;
    2 * hmax + 1
}

/// Exact `F_N` as a Laurent polynomial in `N` at each order of `g`.
///
/// `F_N` is computed at `N = 1..=sizes+1`; each coefficient is fitted on the first
/// `sizes` points with exponents `2, 1, ..., 3 - sizes` and must reproduce the last.
pub fn exact_free_energy_fn(v: &Potential, order: usize, sizes: usize) -> Result<TruncSeries<SymbolPoly>, OrthoError> {
    if !v.is_even() {
        return Err(OrthoError::EvenOnly);
    }
    let samples: Vec<TruncSeries<Rat>> =
        (1..=sizes + 1).map(|n| free_energy_at(v, order, n)).collect::<Result<_, _>>()?;
    let exps: Vec<i32> = (0..sizes as i32).map(|j| 2 - j).collect();
    let npow = |n: usize, e: i32| {
        let b = rint(n as i64);
        if e >= 0 {
            crate::series::pow_rat(&b, e as u32)
        } else {
            crate::series::pow_rat(&b.recip(), (-e) as u32)
        }
    };
    let mut coeffs = vec![SymbolPoly::nil().mark_laurent("N")];
    for k in 1..=order {
        let a: Vec<Vec<Rat>> = (1..=sizes).map(|n| exps.iter().map(|&e| npow(n, e)).collect()).collect();
        let b: Vec<Rat> = (0..sizes).map(|i| samples[i].coeff(k)).collect();
        let x = solve_rational(a, b).ok_or(OrthoError::IncreaseM(k))?;
        let check: Rat = exps.iter().zip(&x).map(|(&e, c)| c * npow(sizes + 1, e)).sum();
        if check != samples[sizes].coeff(k) {
            return Err(OrthoError::IncreaseM(k));
        }
        let mut p = SymbolPoly::nil().mark_laurent("N");
        for (&e, c) in exps.iter().zip(&x) {
            p = p.plus(&SymbolPoly::monomial(c.clone(), &[("N", e)]).mark_laurent("N"));
        }
        coeffs.push(p);
    }
    Ok(TruncSeries::new("g", coeffs, order))
}

/// `(g-order, genus) -> coefficient` of `N^(2-2h)`.
pub type GenusExpansion = BTreeMap<(usize, usize), Rat>;

pub fn genus_extract(f: &TruncSeries<SymbolPoly>) -> Result<GenusExpansion, OrthoError> {
    let mut out = GenusExpansion::new();
    for (k, c) in f.coeffs().iter().enumerate() {
        for e in c.exponents_of("N") {
            if e > 2 || (2 - e) % 2 != 0 {
                return Err(OrthoError::StructureViolation(k, e));
            }
            let v = c.coeff_of("N", e).as_constant().ok_or(OrthoError::StructureViolation(k, e))?;
            out.insert((k, ((2 - e) / 2) as usize), v);
        }
    }
    Ok(out)
}

pub fn genus_series(ge: &GenusExpansion, h: usize, order: usize) -> TruncSeries<Rat> {
    let c = (0..=order).map(|k| ge.get(&(k, h)).cloned().unwrap_or_else(Rat::zero)).collect();
    TruncSeries::new("g", c, order)
}

/// `(1/24) Σ g^n/n 3^n (4^n - C(2n, n))`.
pub fn genus_one_closed_form(order: usize) -> TruncSeries<Rat> {
    let mut c = vec![Rat::zero()];
    for n in 1..=order as u64 {
        let three = BigInt::from(3).pow(n as u32);
        let four = BigInt::from(4).pow(n as u32);
        let num = three * (four - binom(2 * n, n));
        c.push(Rat::new(num, BigInt::from(24 * n)));
    }
    TruncSeries::new("g", c, order)
}

/// Weighted paths of length `len` from `from` to `to`: up steps weigh 1, a down step from `m` weighs `r_m`.
pub fn path_weight<R: Coeff>(r: &dyn Fn(i64) -> TruncSeries<R>, from: i64, to: i64, len: usize, order: usize) -> TruncSeries<R> {
    let lo = from - len as i64;
    let hi = from + len as i64;
    let width = (hi - lo + 1) as usize;
    let mut cur: Vec<TruncSeries<R>> = vec![TruncSeries::zero("g", order); width];
    cur[(from - lo) as usize] = TruncSeries::one("g", order);
    for _ in 0..len {
        let mut next = vec![TruncSeries::zero("g", order); width];
        for (idx, w) in cur.iter().enumerate() {
            if w.coeffs().iter().all(|c| c.is_nil()) {
                continue;
            }
            let m = lo + idx as i64;
            if m + 1 <= hi {
                next[idx + 1] = next[idx + 1].add_ref(w);
            }
            if m - 1 >= lo {
                next[idx - 1] = next[idx - 1].add_ref(&w.mul_ref(&r(m)));
            }
        }
        cur = next;
    }
    cur[(to - lo) as usize].clone()
}

/// `r_n - Σ c_i g [x^(i-1) p_n]_{p_{n-1}} - n/N`; zero when the recursion holds.
pub fn string_recursion_residual<R: NValue>(
    v: &Potential,
    r: &[TruncSeries<R>],
    n: usize,
    n_inv: &R,
) -> TruncSeries<R> {
    let order = r[n].order();
    let get = |m: i64| -> TruncSeries<R> {
        if m <= 0 || m as usize >= r.len() {
            TruncSeries::zero("g", order)
        } else {
            r[m as usize].clone()
        }
    };
    let mut out = r[n].clone();
    for (&i, c) in &v.couplings {
        let w = path_weight(&get, n as i64, n as i64 - 1, i - 1, order).shift(1).scale(c);
        out = out.sub_ref(&w);
    }
    out.sub_ref(&TruncSeries::constant("g", n_inv.scale(&rint(n as i64)), order))
}

/// `φ(r) = r - Σ_k w_k g^(k-1) x_k r^k` with `x_2 = 1` and free `x_k` for `k >= 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiFamily {
    /// Fixed weights `w_k` for `k = 2..`.
    pub weights: BTreeMap<usize, Rat>,
}

impl PhiFamily {
    pub fn pure_gravity() -> Self {
        PhiFamily { weights: [(2, rint(3))].into_iter().collect() }
    }

    /// `r - 3 g r^2 - 30 z g^2 r^3`.
    pub fn hard_dimer() -> Self {
        PhiFamily { weights: [(2, rint(3)), (3, rint(30))].into_iter().collect() }
    }

    pub fn gaussian() -> Self {
        PhiFamily { weights: BTreeMap::new() }
    }

    /// Even-potential family, `w_k = C(2k-1, k)` for `k = 2..=m+1`.
    pub fn even(m: usize) -> Self {
        let weights = (2..=m + 1).map(|k| (k, Rat::from_integer(binom(2 * k as u64 - 1, k as u64)))).collect();
        PhiFamily { weights }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    pub m: usize,
    /// `g r_c`.
    pub g_rc: Rat,
    /// `g t_c` with `t_c = φ(r_c)`.
    pub g_tc: Rat,
    /// Tuned parameters `x_k`, `k >= 3`.
    pub params: BTreeMap<usize, Rat>,
    pub gamma: Rat,
}

/// Tunes the family so `φ' = ... = φ^(m) = 0` at `r_c`.
///
/// The solution is `φ'(r) = (1 - r/r_c)^m`, so every quantity is rational.
pub fn multicritical_solve(family: &PhiFamily, m: usize) -> Result<CriticalPoint, OrthoError> {
    if m == 0 || (2..=m + 1).any(|k| family.weights.get(&k).map_or(true, |w| w.is_zero())) {
        return Err(OrthoError::NoPhysicalRoot);
    }
    let mp1 = rint(m as i64 + 1);
    // coefficient of r^k in (r_c/(m+1)) (1 - (1 - r/r_c)^(m+1)) is -(1/(m+1)) C(m+1,k) (-1/r_c)^k r_c
    let w2 = &family.weights[&2];
    let u = rint(m as i64) / (rint(2) * w2);
    if !u.is_positive() {
        return Err(OrthoError::NoPhysicalRoot);
    }
    let mut params = BTreeMap::new();
    for k in 3..=m + 1 {
        let sign = if k % 2 == 0 { rint(1) } else { rint(-1) };
        let c = Rat::from_integer(binom(m as u64 + 1, k as u64));
        let upow = crate::series::pow_rat(&u, k as u32 - 1);
        // -w_k g^(k-1) x_k = -(1/(m+1)) C(m+1,k) (-1)^k r_c^(1-k)
        params.insert(k, &c * sign / (&mp1 * &family.weights[&k] * upow));
    }
    Ok(CriticalPoint { m, g_tc: &u / &mp1, g_rc: u, params, gamma: -(Rat::one() / mp1) })
}

/// Evaluates the tuned family at `g = 1`.
pub fn phi_eval(family: &PhiFamily, cp: &CriticalPoint, r: f64) -> f64 {
    let mut out = r;
    for (&k, w) in &family.weights {
        let x = if k == 2 { Rat::one() } else { cp.params.get(&k).cloned().unwrap_or_else(Rat::zero) };
        out -= crate::series::rat_to_f64(&(w * x)) * r.powi(k as i32);
    }
    out
}

/// Log-log slope of `r_c - r(t)` against `t_c - t` on the small-`r` branch at `g = 1`.
pub fn singular_slope(family: &PhiFamily, cp: &CriticalPoint, deltas: &[f64]) -> f64 {
    let rc = crate::series::rat_to_f64(&cp.g_rc);
    let tc = crate::series::rat_to_f64(&cp.g_tc);
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&d| {
            let t = tc - d;
            let r = crate::numeric::bisect(&|r| phi_eval(family, cp, r) - t, 0.0, rc, 1e-15).unwrap_or(f64::NAN);
            (d.ln(), (rc - r).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Planar graphs with two marked faces: `log R`.
pub fn two_marked_faces(v: &Potential, order: usize) -> Result<TruncSeries<Rat>, OrthoError> {
    Ok(r_even_fixed_point(v, order)?.log()?)
}

pub fn n_sym() -> (SymbolPoly, SymbolPoly) {
    let n = SymbolPoly::laurent_symbol("N");
    let inv = n.inverse().expect("Laurent symbol");
    (n, inv)
}
