//! Wick pairings of star vertices, face tracing, and genus-resolved Gaussian averages.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::series::{factorial, rint, Coeff, Rat, SeriesError, SymbolPoly, TruncSeries};

pub const DEFAULT_DART_CAP: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WickError {
    #[error("profile has {0} half-edges, above the cap of {1}")]
    TooLarge(usize, usize),
    #[error("malformed map: {0}")]
    MalformedMap(String),
    #[error("free energy coefficient at g^{0} has N-degree {1}, expected 2")]
    StructureViolation(usize, i32),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Number of vertices of each valence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VertexProfile {
    pub counts: BTreeMap<usize, usize>,
}

impl VertexProfile {
    pub fn new(pairs: &[(usize, usize)]) -> Self {
        let mut counts = BTreeMap::new();
        for &(i, n) in pairs {
            if n > 0 {
                *counts.entry(i).or_insert(0) += n;
            }
        }
        VertexProfile { counts }
    }

    pub fn darts(&self) -> usize {
        self.counts.iter().map(|(i, n)| i * n).sum()
    }

    pub fn vertices(&self) -> usize {
        self.counts.values().sum()
    }

    /// Valences in star layout order.
    pub fn valences(&self) -> Vec<usize> {
        let mut v = Vec::new();
        for (&i, &n) in &self.counts {
            v.extend(std::iter::repeat(i).take(n));
        }
        v
    }

    /// Rotation with darts of each vertex consecutive and cyclically ordered.
    pub fn star_sigma(&self) -> Vec<usize> {
        let mut sigma = Vec::with_capacity(self.darts());
        let mut off = 0;
        for k in self.valences() {
            for j in 0..k {
                sigma.push(off + (j + 1) % k);
            }
            off += k;
        }
        sigma
    }
}

/// A map on darts `0..2E`: `sigma` rotates darts counterclockwise around vertices,
/// `alpha` pairs darts into edges. Faces are the cycles of `sigma ∘ alpha`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorialMap {
    pub sigma: Vec<usize>,
    pub alpha: Vec<usize>,
    pub root: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapStats {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    /// Genus of each connected component, in order of smallest dart.
    pub genera: Vec<usize>,
}

fn cycles(perm: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for s in 0..perm.len() {
        if seen[s] {
            continue;
        }
        let mut c = Vec::new();
        let mut d = s;
        while !seen[d] {
            seen[d] = true;
            c.push(d);
            d = perm[d];
        }
        out.push(c);
    }
    out
}

fn count_cycles(perm: impl Fn(usize) -> usize, n: usize, seen: &mut [bool]) -> usize {
    seen[..n].iter_mut().for_each(|x| *x = false);
    let mut c = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        c += 1;
        let mut d = s;
        while !seen[d] {
            seen[d] = true;
            d = perm(d);
        }
    }
    c
}

impl CombinatorialMap {
    pub fn new(sigma: Vec<usize>, alpha: Vec<usize>, root: Option<usize>) -> Result<Self, WickError> {
        let m = CombinatorialMap { sigma, alpha, root };
        m.validate()?;
        Ok(m)
    }

    pub fn num_darts(&self) -> usize {
        self.sigma.len()
    }

    pub fn validate(&self) -> Result<(), WickError> {
        let n = self.sigma.len();
        let bad = |s: &str| Err(WickError::MalformedMap(s.to_string()));
        if self.alpha.len() != n {
            return bad("sigma and alpha sizes differ");
        }
        if n % 2 == 1 {
            return bad("odd number of darts");
        }
        let mut hit = vec![false; n];
        for &d in &self.sigma {
            if d >= n || hit[d] {
                return bad("sigma is not a permutation");
            }
            hit[d] = true;
        }
        for d in 0..n {
            let a = self.alpha[d];
            if a >= n || a == d || self.alpha[a] != d {
                return bad("alpha is not a fixed-point-free involution");
            }
        }
        if let Some(r) = self.root {
            if r >= n {
                return bad("root out of range");
            }
        }
        Ok(())
    }

    /// `phi(d) = sigma(alpha(d))`.
    pub fn phi(&self) -> Vec<usize> {
        (0..self.num_darts()).map(|d| self.sigma[self.alpha[d]]).collect()
    }

    pub fn vertex_cycles(&self) -> Vec<Vec<usize>> {
        cycles(&self.sigma)
    }

    pub fn face_cycles(&self) -> Vec<Vec<usize>> {
        cycles(&self.phi())
    }

    /// Connected component index of each dart.
    pub fn components(&self) -> Vec<usize> {
        let n = self.num_darts();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(d) = stack.pop() {
                for e in [self.sigma[d], self.alpha[d]] {
                    if comp[e] == usize::MAX {
                        comp[e] = next;
                        stack.push(e);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// Relabels the root's component in breadth-first order from the root, so two
    /// rooted maps are isomorphic iff their canonical forms are equal.
    pub fn canonical_form(&self) -> (Vec<usize>, Vec<usize>) {
        let Some(root) = self.root else {
            return (Vec::new(), Vec::new());
        };
        let n = self.num_darts();
        let mut label = vec![usize::MAX; n];
        let mut order = vec![root];
        label[root] = 0;
        let mut i = 0;
        while i < order.len() {
            let d = order[i];
            for e in [self.sigma[d], self.alpha[d]] {
                if label[e] == usize::MAX {
                    label[e] = order.len();
                    order.push(e);
                }
            }
            i += 1;
        }
        let sigma = order.iter().map(|&d| label[self.sigma[d]]).collect();
        let alpha = order.iter().map(|&d| label[self.alpha[d]]).collect();
        (sigma, alpha)
    }

    pub fn faces_and_genus(&self) -> Result<MapStats, WickError> {
        self.validate()?;
        let comp = self.components();
        let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut v = vec![0i64; ncomp];
        let mut e = vec![0i64; ncomp];
        let mut f = vec![0i64; ncomp];
        let vc = self.vertex_cycles();
        let fc = self.face_cycles();
        for c in &vc {
            v[comp[c[0]]] += 1;
        }
        for c in &fc {
            f[comp[c[0]]] += 1;
        }
        for d in 0..self.num_darts() {
            e[comp[d]] += 1;
        }
        let mut genera = Vec::with_capacity(ncomp);
        for c in 0..ncomp {
            let chi = v[c] - e[c] / 2 + f[c];
            if chi > 2 || (2 - chi) % 2 != 0 {
                return Err(WickError::MalformedMap(format!("component Euler characteristic {chi}")));
            }
            genera.push(((2 - chi) / 2) as usize);
        }
        Ok(MapStats { vertices: vc.len(), edges: self.num_darts() / 2, faces: fc.len(), genera })
    }
}

fn check_cap(profile: &VertexProfile, cap: usize) -> Result<(), WickError> {
    let d = profile.darts();
    if d > cap {
        return Err(WickError::TooLarge(d, cap));
    }
    Ok(())
}

fn pair_rec(alpha: &mut [usize], visit: &mut dyn FnMut(&[usize])) {
    let n = alpha.len();
    let Some(d) = (0..n).find(|&d| alpha[d] == usize::MAX) else {
        visit(alpha);
        return;
    };
    for e in d + 1..n {
        if alpha[e] == usize::MAX {
            alpha[d] = e;
            alpha[e] = d;
            pair_rec(alpha, visit);
            alpha[d] = usize::MAX;
            alpha[e] = usize::MAX;
        }
    }
}

fn pairings_with_first(n: usize, first: usize, visit: &mut dyn FnMut(&[usize])) {
    let mut alpha = vec![usize::MAX; n];
    alpha[0] = first;
    alpha[first] = 0;
    pair_rec(&mut alpha, visit);
}

/// Visits every perfect matching of the profile's darts, with `sigma` the star layout.
/// Odd dart counts visit nothing.
pub fn enumerate_pairings(
    profile: &VertexProfile,
    cap: usize,
    mut visit: impl FnMut(&CombinatorialMap),
) -> Result<u64, WickError> {
    check_cap(profile, cap)?;
    let n = profile.darts();
    if n % 2 == 1 {
        return Ok(0);
    }
    let sigma = profile.star_sigma();
    let mut count = 0u64;
    if n == 0 {
        visit(&CombinatorialMap { sigma, alpha: Vec::new(), root: None });
        return Ok(1);
    }
    let mut alpha0 = vec![usize::MAX; n];
    pair_rec(&mut alpha0, &mut |alpha| {
        count += 1;
        visit(&CombinatorialMap { sigma: sigma.clone(), alpha: alpha.to_vec(), root: Some(0) });
    });
    Ok(count)
}

/// Histogram of face counts over all pairings, split across workers by the partner of dart 0.
pub fn face_histogram(profile: &VertexProfile, cap: usize) -> Result<BTreeMap<usize, u64>, WickError> {
    check_cap(profile, cap)?;
    let n = profile.darts();
    let mut hist = BTreeMap::new();
    if n % 2 == 1 {
        return Ok(hist);
    }
    if n == 0 {
        hist.insert(0, 1);
        return Ok(hist);
    }
    let sigma = profile.star_sigma();
    let parts: Vec<BTreeMap<usize, u64>> = (1..n)
        .into_par_iter()
        .map(|first| {
            let mut h = BTreeMap::new();
            let mut seen = vec![false; n];
            pairings_with_first(n, first, &mut |alpha| {
                let f = count_cycles(|d| sigma[alpha[d]], n, &mut seen);
                *h.entry(f).or_insert(0u64) += 1;
            });
            h
        })
        .collect();
    for h in parts {
        for (f, c) in h {
            *hist.entry(f).or_insert(0) += c;
        }
    }
    Ok(hist)
}

pub fn n_symbol() -> SymbolPoly {
    SymbolPoly::laurent_symbol("N")
}

fn n_power(e: i32, c: Rat) -> SymbolPoly {
    SymbolPoly::monomial(c, &[("N", e)]).mark_laurent("N")
}

/// `<Π Tr M^i>` as `Σ_pairings N^(F-E)`.
pub fn gaussian_trace_average(profile: &VertexProfile, cap: usize) -> Result<SymbolPoly, WickError> {
    let hist = face_histogram(profile, cap)?;
    let e = (profile.darts() / 2) as i32;
    let mut out = SymbolPoly::nil().mark_laurent("N");
    for (f, c) in hist {
        out = out.plus(&n_power(f as i32 - e, Rat::from_integer(BigInt::from(c))));
    }
    Ok(out)
}

/// All profiles over the given valences with exactly `k` vertices.
fn profiles_with(valences: &[usize], k: usize) -> Vec<Vec<usize>> {
    if valences.is_empty() {
        return if k == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for n0 in 0..=k {
        for mut rest in profiles_with(&valences[1..], k - n0) {
            rest.insert(0, n0);
            out.push(rest);
        }
    }
    out
}

/// `Z` through `g^order` for the potential weight `exp(N g Σ w_i Tr M^i / i)`.
/// Each vertex carries one power of `g`.
pub fn partition_series_z(
    weights: &BTreeMap<usize, Rat>,
    order: usize,
    cap: usize,
) -> Result<TruncSeries<SymbolPoly>, WickError> {
    let active: Vec<(usize, Rat)> =
        weights.iter().filter(|(_, w)| !w.is_zero()).map(|(i, w)| (*i, w.clone())).collect();
    let valences: Vec<usize> = active.iter().map(|x| x.0).collect();
    let mut coeffs = vec![SymbolPoly::unity().mark_laurent("N")];
    for k in 1..=order {
        let mut total = SymbolPoly::nil().mark_laurent("N");
        for ns in profiles_with(&valences, k) {
            let profile = VertexProfile::new(&valences.iter().copied().zip(ns.iter().copied()).collect::<Vec<_>>());
            if profile.darts() % 2 == 1 {
                continue;
            }
            check_cap(&profile, cap)?;
            let mut pref = Rat::one();
            for ((i, w), &n) in active.iter().zip(ns.iter()) {
                let n32 = n as u32;
                let num = crate::series::pow_rat(w, n32);
                let den = Rat::from_integer(BigInt::from(*i).pow(n32) * factorial(n as u64));
                pref = pref * num / den;
            }
            let avg = gaussian_trace_average(&profile, cap)?;
            total = total.plus(&avg.times(&n_power(k as i32, pref)));
        }
        coeffs.push(total);
    }
    Ok(TruncSeries::new("g", coeffs, order))
}

/// `F = log Z`, checking that every coefficient has N-degree exactly 2 (or vanishes).
pub fn connected_free_energy(
    weights: &BTreeMap<usize, Rat>,
    order: usize,
    cap: usize,
) -> Result<TruncSeries<SymbolPoly>, WickError> {
    let z = partition_series_z(weights, order, cap)?;
    let f = z.log()?;
    for (k, c) in f.coeffs().iter().enumerate() {
        if c.is_nil() {
            continue;
        }
        let top = *c.exponents_of("N").last().unwrap();
        if top != 2 {
            return Err(WickError::StructureViolation(k, top));
        }
    }
    Ok(f)
}

/// Splits each coefficient into genus parts: the coefficient of `N^(2-2h)`.
pub fn genus_split(f: &TruncSeries<SymbolPoly>) -> BTreeMap<usize, BTreeMap<usize, Rat>> {
    let mut out = BTreeMap::new();
    for (k, c) in f.coeffs().iter().enumerate() {
        let mut row = BTreeMap::new();
        for e in c.exponents_of("N") {
            if (2 - e) % 2 != 0 || e > 2 {
                continue;
            }
            let h = ((2 - e) / 2) as usize;
            let v = c.coeff_of("N", e).as_constant().unwrap_or_else(Rat::zero);
            row.insert(h, v);
        }
        out.insert(k, row);
    }
    out
}

/// Genus-`h` part of the free energy as a rational series in `g`.
pub fn genus_part(f: &TruncSeries<SymbolPoly>, h: usize) -> TruncSeries<Rat> {
    let e = 2 - 2 * h as i32;
    let c = f
        .coeffs()
        .iter()
        .map(|p| p.coeff_of("N", e).as_constant().unwrap_or_else(Rat::zero))
        .collect();
    TruncSeries::new("g", c, f.order())
}

pub fn weights_from(pairs: &[(usize, i64)]) -> BTreeMap<usize, Rat> {
    pairs.iter().map(|&(i, w)| (i, rint(w))).collect()
}
