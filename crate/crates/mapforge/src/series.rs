//! Exact coefficient rings and dense truncated power series.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rat = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("divisor has a non-invertible constant term")]
    NonUnitDivisor,
    #[error("constant term not admissible for this function")]
    BadConstantTerm,
    #[error("series has no invertible linear term")]
    NotInvertible,
    #[error("fixed-point map is not degree raising")]
    NotContracting,
    #[error("series variables differ: {0} vs {1}")]
    VariableMismatch(String, String),
    #[error("cannot parse coefficient {0:?}")]
    Parse(String),
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn parse_rat(s: &str) -> Result<Rat, SeriesError> {
    Rat::from_str(s.trim()).map_err(|_| SeriesError::Parse(s.to_string()))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    // plain to_f64 overflows for huge numerators; scale by bit length first
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db;
    let n = if shift > 0 { r.numer() >> (shift.max(0) as usize) } else { r.numer().clone() };
    let d = if shift < 0 { r.denom() >> ((-shift) as usize) } else { r.denom().clone() };
    let (nn, dd) = trim_pair(&n, &d);
    nn / dd * 2f64.powi(shift as i32)
}

fn trim_pair(n: &BigInt, d: &BigInt) -> (f64, f64) {
    let bits = n.bits().max(d.bits()) as i64;
    let s = (bits - 900).max(0) as usize;
    let n = n >> s;
    let d = d >> s;
    (n.to_f64().unwrap_or(0.0), d.to_f64().unwrap_or(f64::NAN))
}

/// Coefficient ring used by [`TruncSeries`].
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display {
    fn nil() -> Self;
    fn unity() -> Self;
    fn is_nil(&self) -> bool;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn negate(&self) -> Self;
    fn scale(&self, r: &Rat) -> Self;
    fn from_rat(r: Rat) -> Self;
    fn inverse(&self) -> Option<Self>;
    fn is_unity(&self) -> bool {
        *self == Self::unity()
    }
}

impl Coeff for Rat {
    fn nil() -> Self {
        Zero::zero()
    }
    fn unity() -> Self {
        One::one()
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn negate(&self) -> Self {
        -self
    }
    fn scale(&self, r: &Rat) -> Self {
        self * r
    }
    fn from_rat(r: Rat) -> Self {
        r
    }
    fn inverse(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }
}

/// Floats for large-order numerics where exact coefficients get too big.
impl Coeff for f64 {
    fn nil() -> Self {
        0.0
    }
    fn unity() -> Self {
        1.0
    }
    fn is_nil(&self) -> bool {
        *self == 0.0
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn negate(&self) -> Self {
        -self
    }
    fn scale(&self, r: &Rat) -> Self {
        self * rat_to_f64(r)
    }
    fn from_rat(r: Rat) -> Self {
        rat_to_f64(&r)
    }
    fn inverse(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / self)
        }
    }
}

/// Exponent vector of a monomial, as sorted `(symbol, exponent)` pairs with no zero exponents.
pub type Monomial = Vec<(String, i32)>;

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut m: BTreeMap<String, i32> = a.iter().cloned().collect();
    for (s, e) in b {
        *m.entry(s.clone()).or_insert(0) += e;
    }
    m.into_iter().filter(|(_, e)| *e != 0).collect()
}

/// Sparse polynomial in named symbols with rational coefficients.
///
/// Symbols listed in `laurent` may carry negative exponents.
#[derive(Clone, Debug, Default)]
pub struct SymbolPoly {
    terms: BTreeMap<Monomial, Rat>,
    laurent: BTreeSet<String>,
}

impl SymbolPoly {
    pub fn constant(c: Rat) -> Self {
        let mut p = SymbolPoly::default();
        if !Zero::is_zero(&c) {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn symbol(name: &str) -> Self {
        Self::monomial(<Rat as One>::one(), &[(name, 1)])
    }

    /// A Laurent symbol; its exponents may go negative.
    pub fn laurent_symbol(name: &str) -> Self {
        let mut p = Self::symbol(name);
        p.laurent.insert(name.to_string());
        p
    }

    pub fn monomial(c: Rat, exps: &[(&str, i32)]) -> Self {
        let mut p = SymbolPoly::default();
        let m: Monomial = {
            let mut b: BTreeMap<String, i32> = BTreeMap::new();
            for (s, e) in exps {
                *b.entry(s.to_string()).or_insert(0) += e;
            }
            b.into_iter().filter(|(_, e)| *e != 0).collect()
        };
        for (s, e) in &m {
            if *e < 0 {
                p.laurent.insert(s.clone());
            }
        }
        if !Zero::is_zero(&c) {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn mark_laurent(mut self, name: &str) -> Self {
        self.laurent.insert(name.to_string());
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn exponent(m: &Monomial, sym: &str) -> i32 {
        m.iter().find(|(s, _)| s == sym).map(|(_, e)| *e).unwrap_or(0)
    }

    /// Collects the coefficient of `sym^exp`, as a polynomial in the other symbols.
    pub fn coeff_of(&self, sym: &str, exp: i32) -> SymbolPoly {
        let mut out = SymbolPoly { terms: BTreeMap::new(), laurent: self.laurent.clone() };
        for (m, c) in &self.terms {
            if Self::exponent(m, sym) == exp {
                let rest: Monomial = m.iter().filter(|(s, _)| s != sym).cloned().collect();
                out.terms.insert(rest, c.clone());
            }
        }
        out
    }

    /// Exponents of `sym` that occur, ascending.
    pub fn exponents_of(&self, sym: &str) -> Vec<i32> {
        let set: BTreeSet<i32> = self.terms.keys().map(|m| Self::exponent(m, sym)).collect();
        set.into_iter().collect()
    }

    /// The value if the polynomial is a constant.
    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(<Rat as Zero>::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn eval(&self, values: &BTreeMap<String, f64>) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.iter().fold(rat_to_f64(c), |acc, (s, e)| {
                    acc * values.get(s).copied().unwrap_or(f64::NAN).powi(*e)
                })
            })
            .sum()
    }

    /// Substitutes a rational value for one symbol.
    pub fn substitute(&self, sym: &str, v: &Rat) -> SymbolPoly {
        let mut out = SymbolPoly { terms: BTreeMap::new(), laurent: self.laurent.clone() };
        for (m, c) in &self.terms {
            let e = Self::exponent(m, sym);
            let f = if e >= 0 { pow_rat(v, e as u32) } else { pow_rat(&v.recip(), (-e) as u32) };
            let rest: Monomial = m.iter().filter(|(s, _)| s != sym).cloned().collect();
            let t = out.terms.entry(rest).or_insert_with(<Rat as Zero>::zero);
            *t += c * f;
        }
        out.terms.retain(|_, c| !Zero::is_zero(c));
        out
    }

    fn merged_laurent(&self, o: &Self) -> BTreeSet<String> {
        self.laurent.union(&o.laurent).cloned().collect()
    }
}

pub fn pow_rat(v: &Rat, e: u32) -> Rat {
    let mut out = <Rat as One>::one();
    for _ in 0..e {
        out *= v;
    }
    out
}

impl Coeff for SymbolPoly {
    fn nil() -> Self {
        SymbolPoly::default()
    }
    fn unity() -> Self {
        SymbolPoly::constant(<Rat as One>::one())
    }
    fn is_nil(&self) -> bool {
        self.terms.is_empty()
    }
    fn plus(&self, o: &Self) -> Self {
        let mut out = SymbolPoly { terms: self.terms.clone(), laurent: self.merged_laurent(o) };
        for (m, c) in &o.terms {
            let t = out.terms.entry(m.clone()).or_insert_with(<Rat as Zero>::zero);
            *t += c;
        }
        out.terms.retain(|_, c| !Zero::is_zero(c));
        out
    }
    fn minus(&self, o: &Self) -> Self {
        self.plus(&o.negate())
    }
    fn times(&self, o: &Self) -> Self {
        let mut out = SymbolPoly { terms: BTreeMap::new(), laurent: self.merged_laurent(o) };
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let t = out.terms.entry(mono_mul(ma, mb)).or_insert_with(<Rat as Zero>::zero);
                *t += ca * cb;
            }
        }
        out.terms.retain(|_, c| !Zero::is_zero(c));
        out
    }
    fn negate(&self) -> Self {
        SymbolPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
            laurent: self.laurent.clone(),
        }
    }
    fn scale(&self, r: &Rat) -> Self {
        if Zero::is_zero(r) {
            return SymbolPoly { terms: BTreeMap::new(), laurent: self.laurent.clone() };
        }
        SymbolPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * r)).collect(),
            laurent: self.laurent.clone(),
        }
    }
    fn from_rat(r: Rat) -> Self {
        SymbolPoly::constant(r)
    }
    /// Only monomials whose symbols are all Laurent (or constants) are units.
    fn inverse(&self) -> Option<Self> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if m.iter().any(|(s, _)| !self.laurent.contains(s)) {
            return None;
        }
        let inv: Monomial = m.iter().map(|(s, e)| (s.clone(), -e)).collect();
        let mut out = SymbolPoly { terms: BTreeMap::new(), laurent: self.laurent.clone() };
        out.terms.insert(inv, c.recip());
        Some(out)
    }
}

// Equality ignores the laurent flag set.
impl PartialEq for SymbolPoly {
    fn eq(&self, o: &SymbolPoly) -> bool {
        self.terms == o.terms
    }
}

impl Eq for SymbolPoly {}

impl fmt::Display for SymbolPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest total degree first
        let mut items: Vec<(&Monomial, &Rat)> = self.terms.iter().collect();
        items.sort_by(|a, b| {
            let da: i32 = a.0.iter().map(|x| x.1).sum();
            let db: i32 = b.0.iter().map(|x| x.1).sum();
            db.cmp(&da).then(b.0.cmp(a.0))
        });
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
            let mono: Vec<String> = m
                .iter()
                .map(|(s, e)| if *e == 1 { s.clone() } else { format!("{s}^{e}") })
                .collect();
            if mono.is_empty() {
                write!(f, "{abs}")?;
            } else if One::is_one(&abs) {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{abs}*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Dense truncated power series `c_0 + c_1 x + ... + c_O x^O` in a named variable.
///
/// Binary operations truncate silently to the smaller of the two orders.
/// Operator impls panic on mismatched variable names; use [`ring_arith`] for a checked form.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncSeries<R: Coeff> {
    var: String,
    coeffs: Vec<R>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn ring_arith<R: Coeff>(
    a: &TruncSeries<R>,
    b: &TruncSeries<R>,
    op: ArithOp,
) -> Result<TruncSeries<R>, SeriesError> {
    if a.var != b.var {
        return Err(SeriesError::VariableMismatch(a.var.clone(), b.var.clone()));
    }
    Ok(match op {
        ArithOp::Add => a.add_ref(b),
        ArithOp::Sub => a.sub_ref(b),
        ArithOp::Mul => a.mul_ref(b),
        ArithOp::Div => a.div(b)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Elementary {
    Log,
    Exp,
    Sqrt,
    Pow(Rat),
}

pub fn elementary<R: Coeff>(a: &TruncSeries<R>, f: Elementary) -> Result<TruncSeries<R>, SeriesError> {
    match f {
        Elementary::Log => a.log(),
        Elementary::Exp => a.exp(),
        Elementary::Sqrt => a.sqrt(),
        Elementary::Pow(r) => a.pow(&r),
    }
}

impl<R: Coeff> TruncSeries<R> {
    pub fn new(var: &str, mut coeffs: Vec<R>, order: usize) -> Self {
        coeffs.resize(order + 1, R::nil());
        TruncSeries { var: var.to_string(), coeffs }
    }

    pub fn zero(var: &str, order: usize) -> Self {
        Self::new(var, Vec::new(), order)
    }

    pub fn constant(var: &str, c: R, order: usize) -> Self {
        Self::new(var, vec![c], order)
    }

    pub fn one(var: &str, order: usize) -> Self {
        Self::constant(var, R::unity(), order)
    }

    /// The series `c * var^k`.
    pub fn monomial(var: &str, c: R, k: usize, order: usize) -> Self {
        let mut s = Self::zero(var, order);
        if k <= order {
            s.coeffs[k] = c;
        }
        s
    }

    /// The variable itself.
    pub fn variable(var: &str, order: usize) -> Self {
        Self::monomial(var, R::unity(), 1, order)
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[R] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> R {
        self.coeffs.get(k).cloned().unwrap_or_else(R::nil)
    }

    pub fn set_coeff(&mut self, k: usize, c: R) {
        if k < self.coeffs.len() {
            self.coeffs[k] = c;
        }
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::new(&self.var, self.coeffs.iter().take(order + 1).cloned().collect(), order)
    }

    pub fn map<S: Coeff>(&self, f: impl Fn(&R) -> S) -> TruncSeries<S> {
        TruncSeries { var: self.var.clone(), coeffs: self.coeffs.iter().map(f).collect() }
    }

    fn check_var(&self, o: &Self) {
        assert_eq!(self.var, o.var, "series variables differ");
    }

    pub fn add_ref(&self, o: &Self) -> Self {
        self.check_var(o);
        let n = self.order().min(o.order());
        let c = (0..=n).map(|k| self.coeffs[k].plus(&o.coeffs[k])).collect();
        TruncSeries { var: self.var.clone(), coeffs: c }
    }

    pub fn sub_ref(&self, o: &Self) -> Self {
        self.check_var(o);
        let n = self.order().min(o.order());
        let c = (0..=n).map(|k| self.coeffs[k].minus(&o.coeffs[k])).collect();
        TruncSeries { var: self.var.clone(), coeffs: c }
    }

    pub fn mul_ref(&self, o: &Self) -> Self {
        self.check_var(o);
        let n = self.order().min(o.order());
        let mut c = vec![R::nil(); n + 1];
        for i in 0..=n {
            if self.coeffs[i].is_nil() {
                continue;
            }
            for j in 0..=(n - i) {
                if o.coeffs[j].is_nil() {
                    continue;
                }
                c[i + j] = c[i + j].plus(&self.coeffs[i].times(&o.coeffs[j]));
            }
        }
        TruncSeries { var: self.var.clone(), coeffs: c }
    }

    pub fn neg_ref(&self) -> Self {
        self.map(|c| c.negate())
    }

    pub fn scale(&self, r: &Rat) -> Self {
        self.map(|c| c.scale(r))
    }

    pub fn mul_coeff(&self, r: &R) -> Self {
        self.map(|c| c.times(r))
    }

    /// Multiplies by `var^k`.
    pub fn shift(&self, k: usize) -> Self {
        let mut c = vec![R::nil(); k];
        c.extend(self.coeffs.iter().cloned());
        Self::new(&self.var, c, self.order())
    }

    pub fn derivative(&self) -> Self {
        let c = (1..self.coeffs.len())
            .map(|k| self.coeffs[k].scale(&rint(k as i64)))
            .collect();
        Self::new(&self.var, c, self.order())
    }

    /// Antiderivative with zero constant term.
    pub fn integral(&self) -> Self {
        let mut c = vec![R::nil()];
        for k in 0..self.order() {
            c.push(self.coeffs[k].scale(&rat(1, k as i64 + 1)));
        }
        Self::new(&self.var, c, self.order())
    }

    pub fn powi(&self, e: u32) -> Self {
        let mut out = Self::one(&self.var, self.order());
        for _ in 0..e {
            out = out.mul_ref(self);
        }
        out
    }

    pub fn inverse(&self) -> Result<Self, SeriesError> {
        let inv0 = self.coeffs[0].inverse().ok_or(SeriesError::NonUnitDivisor)?;
        let n = self.order();
        let mut b = vec![inv0.clone()];
        for k in 1..=n {
            let mut s = R::nil();
            for j in 1..=k {
                s = s.plus(&self.coeffs[j].times(&b[k - j]));
            }
            b.push(s.times(&inv0).negate());
        }
        Ok(TruncSeries { var: self.var.clone(), coeffs: b })
    }

    pub fn div(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check_var(o);
        let n = self.order().min(o.order());
        Ok(self.truncate(n).mul_ref(&o.truncate(n).inverse()?))
    }

    pub fn log(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_unity() {
            return Err(SeriesError::BadConstantTerm);
        }
        let q = self.derivative().truncate(self.order()).mul_ref(&self.inverse()?);
        Ok(q.integral())
    }

    pub fn exp(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_nil() {
            return Err(SeriesError::BadConstantTerm);
        }
        // n b_n = sum_k k a_k b_{n-k}
        let n = self.order();
        let mut b = vec![R::unity()];
        for m in 1..=n {
            let mut s = R::nil();
            for k in 1..=m {
                s = s.plus(&self.coeffs[k].times(&b[m - k]).scale(&rint(k as i64)));
            }
            b.push(s.scale(&rat(1, m as i64)));
        }
        Ok(TruncSeries { var: self.var.clone(), coeffs: b })
    }

    pub fn pow(&self, r: &Rat) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_unity() {
            return Err(SeriesError::BadConstantTerm);
        }
        // a b' = r a' b with a_0 = 1:  m b_m = sum_{k=1..m} (r k - (m - k)) a_k b_{m-k}
        let n = self.order();
        let mut b = vec![R::unity()];
        for m in 1..=n {
            let mut s = R::nil();
            for k in 1..=m {
                let w = r * rint(k as i64) - rint((m - k) as i64);
                s = s.plus(&self.coeffs[k].times(&b[m - k]).scale(&w));
            }
            b.push(s.scale(&rat(1, m as i64)));
        }
        Ok(TruncSeries { var: self.var.clone(), coeffs: b })
    }

    pub fn sqrt(&self) -> Result<Self, SeriesError> {
        self.pow(&rat(1, 2))
    }

    /// `self(inner(x))`; the result lives in the inner variable.
    pub fn compose(&self, inner: &Self) -> Result<Self, SeriesError> {
        if !inner.coeffs[0].is_nil() {
            return Err(SeriesError::BadConstantTerm);
        }
        let n = self.order().min(inner.order());
        let inner = inner.truncate(n);
        let mut acc = Self::zero(&inner.var, n);
        for k in (0..=n).rev() {
            acc = acc.mul_ref(&inner);
            acc.coeffs[0] = acc.coeffs[0].plus(&self.coeffs[k]);
        }
        Ok(acc)
    }

    pub fn reversion(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_nil() {
            return Err(SeriesError::BadConstantTerm);
        }
        let a1 = self.coeff(1);
        let inv = a1.inverse().ok_or(SeriesError::NotInvertible)?;
        let n = self.order();
        let var = self.var.clone();
        let mut higher = self.clone();
        higher.coeffs[1] = R::nil();
        // b = (w - higher(b)) / a1
        fixed_point_solve(
            |b| {
                let w = TruncSeries::<R>::variable(&var, n);
                let h = higher.compose(b).expect("zero constant term");
                w.sub_ref(&h).mul_coeff(&inv)
            },
            R::nil(),
            &self.var,
            n,
        )
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.to_strings().into_iter().map(serde_json::Value::String).collect())
    }
}

impl TruncSeries<Rat> {
    pub fn from_ints(var: &str, c: &[i64]) -> Self {
        Self::new(var, c.iter().map(|&x| rint(x)).collect(), c.len().max(1) - 1)
    }

    pub fn from_json(var: &str, v: &serde_json::Value) -> Result<Self, SeriesError> {
        let arr = v.as_array().ok_or_else(|| SeriesError::Parse(v.to_string()))?;
        if arr.is_empty() {
            return Err(SeriesError::Parse(v.to_string()));
        }
        let mut c = Vec::new();
        for x in arr {
            let s = x.as_str().ok_or_else(|| SeriesError::Parse(x.to_string()))?;
            c.push(parse_rat(s)?);
        }
        let n = c.len() - 1;
        Ok(Self::new(var, c, n))
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + rat_to_f64(c))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(rat_to_f64).collect()
    }
}

/// Solves `X = f(X)` degree by degree starting from the constant `seed`.
///
/// Each pass must leave the already-fixed low coefficients untouched.
pub fn fixed_point_solve<R: Coeff>(
    f: impl Fn(&TruncSeries<R>) -> TruncSeries<R>,
    seed: R,
    var: &str,
    order: usize,
) -> Result<TruncSeries<R>, SeriesError> {
    let mut x = TruncSeries::constant(var, seed, order);
    for pass in 0..=order + 1 {
        let y = f(&x).truncate(order);
        if y.order() < order {
            return Err(SeriesError::NotContracting);
        }
        let frozen = (pass + 1).min(order + 1);
        if (0..frozen).any(|k| y.coeffs[k] != x.coeffs[k]) {
            return Err(SeriesError::NotContracting);
        }
        if y == x {
            return Ok(x);
        }
        x = y;
    }
    Err(SeriesError::NotContracting)
}

impl<R: Coeff> fmt::Display for TruncSeries<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_nil() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})*{}", self.var)?,
                _ => write!(f, "({c})*{}^{k}", self.var)?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O({}^{})", self.var, self.order() + 1)
    }
}

impl<R: Coeff> Add for &TruncSeries<R> {
    type Output = TruncSeries<R>;
    fn add(self, o: Self) -> TruncSeries<R> {
        self.add_ref(o)
    }
}

impl<R: Coeff> Sub for &TruncSeries<R> {
    type Output = TruncSeries<R>;
    fn sub(self, o: Self) -> TruncSeries<R> {
        self.sub_ref(o)
    }
}

impl<R: Coeff> Mul for &TruncSeries<R> {
    type Output = TruncSeries<R>;
    fn mul(self, o: Self) -> TruncSeries<R> {
        self.mul_ref(o)
    }
}

impl<R: Coeff> Neg for &TruncSeries<R> {
    type Output = TruncSeries<R>;
    fn neg(self) -> TruncSeries<R> {
        self.neg_ref()
    }
}

impl<R: Coeff> Add for TruncSeries<R> {
    type Output = TruncSeries<R>;
    fn add(self, o: Self) -> TruncSeries<R> {
        self.add_ref(&o)
    }
}

impl<R: Coeff> Sub for TruncSeries<R> {
    type Output = TruncSeries<R>;
    fn sub(self, o: Self) -> TruncSeries<R> {
        self.sub_ref(&o)
    }
}

impl<R: Coeff> Mul for TruncSeries<R> {
    type Output = TruncSeries<R>;
    fn mul(self, o: Self) -> TruncSeries<R> {
        self.mul_ref(&o)
    }
}

/// Binomial coefficient as an exact rational; `n` may be any rational.
pub fn binom_rat(n: &Rat, k: u32) -> Rat {
    let mut out = <Rat as One>::one();
    for i in 0..k {
        out = out * (n - rint(i as i64)) / rint(i as i64 + 1);
    }
    out
}

pub fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut out = BigInt::one();
    for i in 0..k {
        out = out * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    out
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, b| a * BigInt::from(b))
}

/// `(2n-1)!!`, with `(-1)!! = 1`.
pub fn double_factorial_odd(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(2 * i - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(c: &[i64]) -> TruncSeries<Rat> {
        TruncSeries::from_ints("g", c)
    }

    #[test]
    fn squares_and_geometric() {
        let a = s(&[1, 3, 18]);
        assert_eq!(&a * &a, s(&[1, 6, 45]));
        let inv = s(&[1, -1, 0, 0, 0]).inverse().unwrap();
        assert_eq!(inv, s(&[1, 1, 1, 1, 1]));
        assert_eq!(&s(&[1, 1, 0]) * &s(&[1, -1, 0]), s(&[1, 0, -1]));
        assert_eq!(s(&[1, 2]).div(&s(&[0, 1])), Err(SeriesError::NonUnitDivisor));
    }

    #[test]
    fn elementary_examples() {
        assert_eq!(s(&[1, -12, 0, 0]).sqrt().unwrap(), s(&[1, -6, -18, -108]));
        assert_eq!(s(&[1, 0, 0]).log().unwrap(), s(&[0, 0, 0]));
        let l = s(&[1, 3, 18, 135]).log().unwrap();
        assert_eq!(l.coeffs(), &[rint(0), rint(3), rat(27, 2), rint(90)]);
        assert_eq!(s(&[2, 1]).log(), Err(SeriesError::BadConstantTerm));
        assert_eq!(s(&[1, 1]).exp(), Err(SeriesError::BadConstantTerm));
    }

    #[test]
    fn compose_examples() {
        let outer = TruncSeries::from_ints("x", &[1, 1, 1]);
        let inner = s(&[0, 1, 0]);
        assert_eq!(outer.compose(&inner).unwrap(), s(&[1, 1, 1]));
        let outer = TruncSeries::new("x", vec![rint(0), rint(1), rat(-1, 2)], 2);
        assert_eq!(outer.compose(&s(&[0, 2, 0])).unwrap(), s(&[0, 2, -2]));
        assert_eq!(outer.compose(&s(&[1, 2, 0])), Err(SeriesError::BadConstantTerm));
        // log(1+y) at y = exp(g)-1
        let n = 8;
        let y = TruncSeries::<Rat>::variable("g", n).exp().unwrap() - TruncSeries::one("g", n);
        let log1p = TruncSeries::new(
            "y",
            (0..=n).map(|k| if k == 0 { rint(0) } else { rat(if k % 2 == 1 { 1 } else { -1 }, k as i64) }).collect(),
            n,
        );
        assert_eq!(log1p.compose(&y).unwrap(), TruncSeries::variable("g", n));
    }

    #[test]
    fn reversion_catalan() {
        let a = s(&[0, 1, -1, 0, 0]);
        assert_eq!(a.reversion().unwrap(), s(&[0, 1, 1, 2, 5]));
        assert_eq!(s(&[0, 1, 0]).reversion().unwrap(), s(&[0, 1, 0]));
        assert_eq!(s(&[0, 0, 1]).reversion(), Err(SeriesError::NotInvertible));
    }

    #[test]
    fn fixed_points() {
        let three = rint(3);
        let x = fixed_point_solve(
            |x| &TruncSeries::one("g", 3) + &(x * x).shift(1).scale(&three),
            rint(1),
            "g",
            3,
        )
        .unwrap();
        assert_eq!(x, s(&[1, 3, 18, 135]));
        let c = fixed_point_solve(|_| s(&[7, 0, 0]), rint(7), "g", 2).unwrap();
        assert_eq!(c, s(&[7, 0, 0]));
        // large Schroeder numbers 1, 2, 6, 22, 90
        let y = fixed_point_solve(
            |x| &TruncSeries::one("g", 4) + &(&(x * x) + x).shift(1),
            rint(1),
            "g",
            4,
        )
        .unwrap();
        assert_eq!(y, s(&[1, 2, 6, 22, 90]));
        // X = 1 + 2X has no degree-raising structure
        let bad = fixed_point_solve(|x| &TruncSeries::one("g", 2) + &x.scale(&rint(2)), rint(1), "g", 2);
        assert_eq!(bad, Err(SeriesError::NotContracting));
    }

    #[test]
    fn json_round_trip() {
        let a = TruncSeries::new("g", vec![rint(0), rat(1, 2), rat(9, 8), rat(-9, 2)], 3);
        let j = a.to_json();
        assert_eq!(j.to_string(), r#"["0","1/2","9/8","-9/2"]"#);
        assert_eq!(TruncSeries::from_json("g", &j).unwrap(), a);
    }

    #[test]
    fn laurent_symbol() {
        let n = SymbolPoly::laurent_symbol("N");
        let inv = n.inverse().unwrap();
        let e = n.scale(&rint(2)).plus(&inv);
        assert_eq!(e.to_string(), "2*N + N^-1");
        assert_eq!(e.coeff_of("N", -1).as_constant(), Some(rint(1)));
        assert!(SymbolPoly::symbol("rho").inverse().is_none());
    }

    #[test]
    fn huge_rational_to_float() {
        let big = Rat::new(BigInt::from(10).pow(400) * 3, BigInt::from(10).pow(400));
        assert!((rat_to_f64(&big) - 3.0).abs() < 1e-12);
    }
}
