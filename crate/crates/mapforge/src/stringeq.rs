//! Pseudo-differential operators in `d = d/dy` over differential polynomials in `u(y)`:
//! the square root of `d^2 - u`, KdV residues, string equations and their large-`y` solutions.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::series::{rat, rint, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StringEqError {
    #[error("coefficient of d^{0} is below the tracked depth {1}")]
    DeepenCutoff(i64, i64),
    #[error("commutator has a d^{0} term; expected a multiplication operator")]
    AlgebraBug(i64),
}

/// A monomial: sorted derivative orders, e.g. `u^2 u''` is `[0, 0, 2]`.
pub type DiffMono = Vec<u32>;

/// Polynomial in `u, u', u'', ...` with rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiffPoly {
    terms: BTreeMap<DiffMono, Rat>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly::default()
    }

    pub fn constant(c: Rat) -> Self {
        Self::term(c, &[])
    }

    /// `c * Π u^(k_i)`.
    pub fn term(c: Rat, derivs: &[u32]) -> Self {
        let mut p = DiffPoly::default();
        if !c.is_zero() {
            let mut m = derivs.to_vec();
            m.sort_unstable();
            p.terms.insert(m, c);
        }
        p
    }

    /// `u^(k)`.
    pub fn u(k: u32) -> Self {
        Self::term(Rat::one(), &[k])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&DiffMono, &Rat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, derivs: &[u32]) -> Rat {
        let mut m = derivs.to_vec();
        m.sort_unstable();
        self.terms.get(&m).cloned().unwrap_or_else(Rat::zero)
    }

    /// Weight with `u^(k)` counting `k + 2`; `None` if terms have mixed weights.
    pub fn weight(&self) -> Option<u32> {
        let ws: Vec<u32> = self.terms.keys().map(|m| m.iter().map(|k| k + 2).sum()).collect();
        match ws.first() {
            Some(&w) if ws.iter().all(|&x| x == w) => Some(w),
            None => Some(0),
            _ => None,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            let e = out.terms.entry(m.clone()).or_insert_with(Rat::zero);
            *e += c;
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&rint(-1)))
    }

    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return DiffPoly::zero();
        }
        DiffPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * r)).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = DiffPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                m.sort_unstable();
                let e = out.terms.entry(m).or_insert_with(Rat::zero);
                *e += ca * cb;
            }
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }

    /// Total derivative in `y`.
    pub fn derivative(&self) -> Self {
        let mut out = DiffPoly::zero();
        for (m, c) in &self.terms {
            for i in 0..m.len() {
                if i > 0 && m[i] == m[i - 1] {
                    continue;
                }
                let mult = m.iter().filter(|&&k| k == m[i]).count() as i64;
                let mut n = m.clone();
                n[i] += 1;
                n.sort_unstable();
                let e = out.terms.entry(n).or_insert_with(Rat::zero);
                *e += c * rint(mult);
            }
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }

    pub fn nth_derivative(&self, n: u32) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }
}

fn render_mono(m: &DiffMono) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < m.len() {
        let k = m[i];
        let mut j = i;
        while j < m.len() && m[j] == k {
            j += 1;
        }
        let base = format!("u{}", "'".repeat(k as usize));
        let mult = j - i;
        parts.push(if mult == 1 { base } else { format!("{base}^{mult}") });
        i = j;
    }
    parts.join("*")
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut items: Vec<(&DiffMono, &Rat)> = self.terms.iter().collect();
        items.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));
        for (i, (m, c)) in items.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            if m.is_empty() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{}", render_mono(m))?;
            } else {
                write!(f, "{abs}*{}", render_mono(m))?;
            }
        }
        Ok(())
    }
}

/// Generalized binomial `C(a, l)` for integer `a` of either sign.
fn gbinom(a: i64, l: u32) -> Rat {
    let mut out = Rat::one();
    for i in 0..l as i64 {
        out = out * rint(a - i) / rint(i + 1);
    }
    out
}

/// `Σ_i c_i d^i` in normal form (coefficients left of `d`).
///
/// Degrees below `low` are not tracked; `low = None` means the operator is exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoDiffOp {
    terms: BTreeMap<i64, DiffPoly>,
    low: Option<i64>,
}

impl PseudoDiffOp {
    pub fn exact(terms: &[(i64, DiffPoly)]) -> Self {
        let mut t = BTreeMap::new();
        for (i, c) in terms {
            if !c.is_zero() {
                t.insert(*i, c.clone());
            }
        }
        PseudoDiffOp { terms: t, low: None }
    }

    /// `d^2 - u`.
    pub fn schrodinger() -> Self {
        Self::exact(&[(2, DiffPoly::constant(Rat::one())), (0, DiffPoly::u(0).scale(&rint(-1)))])
    }

    pub fn d() -> Self {
        Self::exact(&[(1, DiffPoly::constant(Rat::one()))])
    }

    pub fn mult(f: DiffPoly) -> Self {
        Self::exact(&[(0, f)])
    }

    pub fn low(&self) -> Option<i64> {
        self.low
    }

    pub fn top(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    pub fn coeff(&self, i: i64) -> Result<DiffPoly, StringEqError> {
        if let Some(l) = self.low {
            if i < l {
                return Err(StringEqError::DeepenCutoff(i, l));
            }
        }
        Ok(self.terms.get(&i).cloned().unwrap_or_default())
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (i, c) in &o.terms {
            let e = terms.entry(*i).or_default();
            *e = e.add(c);
        }
        terms.retain(|_, c| !c.is_zero());
        let low = match (self.low, o.low) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let mut out = PseudoDiffOp { terms, low };
        out.prune();
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&rint(-1)))
    }

    pub fn scale(&self, r: &Rat) -> Self {
        let terms = self.terms.iter().map(|(i, c)| (*i, c.scale(r))).filter(|(_, c)| !c.is_zero()).collect();
        PseudoDiffOp { terms, low: self.low }
    }

    fn prune(&mut self) {
        if let Some(l) = self.low {
            self.terms.retain(|&i, _| i >= l);
        }
    }

    /// Non-negative powers of `d`.
    pub fn plus_part(&self) -> Self {
        let terms = self.terms.iter().filter(|(i, _)| **i >= 0).map(|(i, c)| (*i, c.clone())).collect();
        PseudoDiffOp { terms, low: None }
    }

    pub fn minus_part(&self) -> Self {
        let terms = self.terms.iter().filter(|(i, _)| **i < 0).map(|(i, c)| (*i, c.clone())).collect();
        PseudoDiffOp { terms, low: self.low }
    }

    /// Normal-ordered product using `d^a f = Σ_l C(a, l) f^(l) d^(a-l)`.
    ///
    /// The result is exact down to `max(low_A + top_B, low_B + top_A)`.
    pub fn multiply(&self, o: &Self) -> Self {
        let ta = self.top().unwrap_or(0);
        let tb = o.top().unwrap_or(0);
        let low = match (self.low, o.low) {
            (None, None) => None,
            (Some(a), None) => Some(a + tb),
            (None, Some(b)) => Some(b + ta),
            (Some(a), Some(b)) => Some((a + tb).max(b + ta)),
        };
        assert!(
            low.is_some() || self.terms.keys().all(|&i| i >= 0),
            "negative powers need a tracked depth"
        );
        let mut terms: BTreeMap<i64, DiffPoly> = BTreeMap::new();
        for (&i, a) in &self.terms {
            for (&j, b) in &o.terms {
                let mut l = 0u32;
                let mut bl = b.clone();
                loop {
                    let deg = i + j - l as i64;
                    if let Some(lo) = low {
                        if deg < lo {
                            break;
                        }
                    }
                    if i >= 0 && l as i64 > i {
                        break;
                    }
                    if bl.is_zero() {
                        break;
                    }
                    let c = gbinom(i, l);
                    let e = terms.entry(deg).or_default();
                    *e = e.add(&a.mul(&bl).scale(&c));
                    l += 1;
                    bl = bl.derivative();
                }
            }
        }
        terms.retain(|_, c| !c.is_zero());
        PseudoDiffOp { terms, low }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::exact(&[(0, DiffPoly::constant(Rat::one()))]);
        for _ in 0..k {
            out = out.multiply(self);
        }
        out
    }
}

pub fn pdo_multiply(a: &PseudoDiffOp, b: &PseudoDiffOp) -> PseudoDiffOp {
    a.multiply(b)
}

/// `L = d + Σ_{i=1..cutoff} l_i d^(-i)` with `L^2 = d^2 - u`, exact down to `d^(-cutoff)`.
pub fn pdo_sqrt_q(cutoff: i64) -> PseudoDiffOp {
    let q = PseudoDiffOp::schrodinger();
    let mut l = PseudoDiffOp { terms: [(1, DiffPoly::constant(Rat::one()))].into_iter().collect(), low: Some(-cutoff) };
    for i in 1..=cutoff {
        // l_i first enters L^2 at d^(1-i), with coefficient 2
        let sq = l.multiply(&l);
        let target = q.coeff(1 - i).unwrap_or_default();
        let have = sq.terms.get(&(1 - i)).cloned().unwrap_or_default();
        let li = target.sub(&have).scale(&rat(1, 2));
        if !li.is_zero() {
            l.terms.insert(-i, li);
        }
    }
    l
}

/// `R_{m+1}[u]`: the `d^(-1)` coefficient of `L^(2m+1)`.
pub fn kdv_residue(m: usize, cutoff: i64) -> Result<DiffPoly, StringEqError> {
    let l = pdo_sqrt_q(cutoff);
    l.pow(2 * m as u32 + 1).coeff(-1)
}

/// `R'_{m+1} - (R'''_m / 4 - u' R_m / 2 - u R'_m)`.
pub fn kdv_recursion_residual(r_m: &DiffPoly, r_next: &DiffPoly) -> DiffPoly {
    let u = DiffPoly::u(0);
    let up = DiffPoly::u(1);
    let rhs = r_m
        .nth_derivative(3)
        .scale(&rat(1, 4))
        .sub(&up.mul(r_m).scale(&rat(1, 2)))
        .sub(&u.mul(&r_m.derivative()));
    r_next.derivative().sub(&rhs)
}

/// `[(L^(2m+1))_+, d^2 - u]`, which must be a multiplication operator.
pub fn commutator_check(m: usize, cutoff: i64) -> Result<DiffPoly, StringEqError> {
    let l = pdo_sqrt_q(cutoff);
    let p = l.pow(2 * m as u32 + 1);
    p.coeff(-1)?;
    let p = p.plus_part();
    let q = PseudoDiffOp::schrodinger();
    let c = p.multiply(&q).sub(&q.multiply(&p));
    if let Some((&i, _)) = c.terms.iter().find(|(&i, _)| i != 0) {
        return Err(StringEqError::AlgebraBug(i));
    }
    c.coeff(0)
}

/// `2 Σ_j μ_j R_j[u]`, the left side of the string equation `... = y`; `mu[0]` is `μ_1`.
pub fn string_equation(mu: &[Rat], cutoff: i64) -> Result<DiffPoly, StringEqError> {
    let mut out = DiffPoly::zero();
    for (j, c) in mu.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        out = out.add(&kdv_residue(j, cutoff)?.scale(&(c * rint(2))));
    }
    Ok(out)
}

/// `((2m+2)/(2m+3), 2m+1)`.
pub fn double_scaling_exponents(m: usize) -> (Rat, usize) {
    (rat(2 * m as i64 + 2, 2 * m as i64 + 3), 2 * m + 1)
}

/// Sum of `c y^p` over rational exponents `p`.
pub type PowerSum = BTreeMap<Rat, Rat>;

fn ps_add(a: &mut PowerSum, b: &PowerSum, s: &Rat) {
    for (p, c) in b {
        let e = a.entry(p.clone()).or_insert_with(Rat::zero);
        *e += c * s;
    }
    a.retain(|_, c| !c.is_zero());
}

fn ps_mul(a: &PowerSum, b: &PowerSum) -> PowerSum {
    let mut out = PowerSum::new();
    for (pa, ca) in a {
        for (pb, cb) in b {
            let p = pa + pb;
            let e = out.entry(p).or_insert_with(Rat::zero);
            *e += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn ps_deriv(a: &PowerSum) -> PowerSum {
    let mut out = PowerSum::new();
    for (p, c) in a {
        if !p.is_zero() {
            out.insert(p - Rat::one(), c * p);
        }
    }
    out
}

/// Substitutes a power sum for `u` in a differential polynomial, dropping exponents below `floor`.
pub fn substitute(poly: &DiffPoly, u: &PowerSum, floor: &Rat) -> PowerSum {
    let max_k = poly.terms().flat_map(|(m, _)| m.iter().copied()).max().unwrap_or(0);
    let mut derivs = vec![u.clone()];
    for k in 1..=max_k as usize {
        let d = ps_deriv(&derivs[k - 1]);
        derivs.push(d);
    }
    let mut out = PowerSum::new();
    for (m, c) in poly.terms() {
        let mut prod: PowerSum = [(Rat::zero(), Rat::one())].into_iter().collect();
        for &k in m {
            prod = ps_mul(&prod, &derivs[k as usize]);
        }
        ps_add(&mut out, &prod, c);
    }
    // partial products can dip below the floor and come back, so cut only here
    out.retain(|p, _| p >= floor);
    out
}

/// String equation normalized so the `u^(m+1)` coefficient is 1.
pub fn normalized_string_equation(m: usize, cutoff: i64) -> Result<DiffPoly, StringEqError> {
    let r = kdv_residue(m, cutoff)?;
    let lead = r.coeff(&vec![0; m + 1]);
    Ok(r.scale(&lead.recip()))
}

/// Large-`y` coefficients `u_h` of `u = Σ u_h y^((1 - (2m+3) h)/(m+1))` solving the normalized string equation.
pub fn painleve_genus_coeffs(m: usize, count: usize) -> Result<Vec<Rat>, StringEqError> {
    let eq = normalized_string_equation(m, 2 * m as i64 + 2)?;
    let alpha = rat(1, m as i64 + 1);
    let beta = rat(2 * m as i64 + 3, m as i64 + 1);
    let floor = Rat::one() - &beta * rint(count as i64);
    let mut coeffs = vec![Rat::one()];
    let expo = |h: usize| &alpha - &beta * rint(h as i64);
    for h in 1..count {
        let u: PowerSum = coeffs.iter().enumerate().map(|(i, c)| (expo(i), c.clone())).collect();
        let res = substitute(&eq, &u, &floor);
        let target = Rat::one() - &beta * rint(h as i64);
        let c = res.get(&target).cloned().unwrap_or_else(Rat::zero);
        // u_h enters at y^(1 - h beta) only through (m+1) u_0^m u_h
        coeffs.push(-c / rint(m as i64 + 1));
    }
    Ok(coeffs)
}

/// Residual `eq(u) - y` of a truncated large-`y` solution, keeping exponents `>= floor`.
pub fn painleve_residual(m: usize, coeffs: &[Rat], floor: &Rat) -> Result<PowerSum, StringEqError> {
    let eq = normalized_string_equation(m, 2 * m as i64 + 2)?;
    let alpha = rat(1, m as i64 + 1);
    let beta = rat(2 * m as i64 + 3, m as i64 + 1);
    let u: PowerSum = coeffs.iter().enumerate().map(|(i, c)| (&alpha - &beta * rint(i as i64), c.clone())).collect();
    let mut res = substitute(&eq, &u, floor);
    ps_add(&mut res, &[(Rat::one(), Rat::one())].into_iter().collect(), &rint(-1));
    Ok(res)
}
