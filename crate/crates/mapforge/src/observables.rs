//! Distance profiles and the local environment of the origin in quadrangulations.
//!
//! Finite-area averages are taken over quadrangulations with a marked origin
//! vertex (each counted with weight `1/|Aut|`), which is the rooted ensemble
//! reweighted by `1/deg(origin)`.

use std::collections::BTreeMap;

use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::bijections::{enumerate_well_labeled, cvs_inverse, sample_quadrangulation, BijectionError, RootedQuadrangulation};
use crate::geodesic::{quartic_r_x, soliton, GeodesicError};
use crate::series::{binom, rat, rint, Coeff, Rat, SeriesError, SymbolPoly, TruncSeries};

#[derive(Debug, Error)]
pub enum ObservablesError {
    #[error("order-{0} term has no sigma and cannot be integrated against ds/s")]
    IntegrationObstruction(usize),
    #[error("no continuous branch through Gamma(1,1) = 1 at rho = {0}, sigma = {1}")]
    BranchError(f64, f64),
    #[error("area must be positive")]
    ZeroArea,
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Bijection(#[from] BijectionError),
}

/// Weights `rho_p` per vertex at distance `p+1` and `sigma_p` per edge `p -> p+1`,
/// for `p <= k`; both are 1 beyond the window.
#[derive(Clone, Debug)]
pub struct LocalWeights<C: Coeff> {
    pub rho: Vec<C>,
    pub sigma: Vec<C>,
}

impl<C: Coeff> LocalWeights<C> {
    pub fn new(rho: Vec<C>, sigma: Vec<C>) -> Self {
        assert_eq!(rho.len(), sigma.len(), "one rho and one sigma per window slot");
        assert!(!rho.is_empty(), "window needs at least one slot");
        LocalWeights { rho, sigma }
    }

    pub fn uniform(k: usize) -> Self {
        LocalWeights::new(vec![C::unity(); k + 1], vec![C::unity(); k + 1])
    }

    pub fn k(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn rho_at(&self, n: usize) -> C {
        self.rho.get(n).cloned().unwrap_or_else(C::unity)
    }

    pub fn sigma_at(&self, n: usize) -> C {
        self.sigma.get(n).cloned().unwrap_or_else(C::unity)
    }
}

impl LocalWeights<SymbolPoly> {
    /// Symbols `rho0, sigma0, ..., rhok, sigmak`.
    pub fn symbolic(k: usize) -> Self {
        LocalWeights::new(
            (0..=k).map(|p| SymbolPoly::symbol(&format!("rho{p}"))).collect(),
            (0..=k).map(|p| SymbolPoly::symbol(&format!("sigma{p}"))).collect(),
        )
    }

    /// The `k = 0` window with symbols `rho` and `sigma`.
    pub fn origin() -> Self {
        LocalWeights::new(vec![SymbolPoly::symbol("rho")], vec![SymbolPoly::symbol("sigma")])
    }
}

/// Weighted `R_n` for `n` up to some window top, with the unweighted bulk `R`.
#[derive(Clone, Debug)]
pub struct WeightedSolution<C: Coeff> {
    pub weights: LocalWeights<C>,
    pub r: Vec<TruncSeries<C>>,
    pub bulk: TruncSeries<C>,
}

impl<C: Coeff> WeightedSolution<C> {
    /// `Z_n = sigma_n R_n`.
    pub fn z(&self, n: usize) -> TruncSeries<C> {
        self.r[n].mul_coeff(&self.weights.sigma_at(n))
    }

    /// `f(Z_k, Z_{k+1}) - f(R, R)`, zero when the window closes up.
    pub fn closure_residual(&self) -> TruncSeries<C> {
        let k = self.weights.k();
        motion(&self.z(k), &self.z(k + 1)).sub_ref(&motion(&self.bulk, &self.bulk))
    }
}

/// `f(x, y) = x y (1 - g x - g y) - x - y`.
fn motion<C: Coeff>(x: &TruncSeries<C>, y: &TruncSeries<C>) -> TruncSeries<C> {
    let order = x.order().min(y.order());
    let one = TruncSeries::one("g", order);
    let gsum = x.add_ref(y).shift(1).truncate(order);
    x.mul_ref(y).mul_ref(&one.sub_ref(&gsum)).sub_ref(x).sub_ref(y)
}

/// Solves `Z_n = sigma_n rho_n / (1 - g sigma_n (Z_{n+1} + Z_n + Z_{n-1}))` with `Z_{-1} = 0`
/// and unit weights past the window, order by order in `g`. The unweighted tail is
/// carried far enough that truncation at the window top does not reach `order`.
pub fn weighted_rn_solve<C: Coeff>(w: &LocalWeights<C>, order: usize) -> Result<WeightedSolution<C>, ObservablesError> {
    let (bulk, _) = quartic_r_x::<C>(&Rat::one(), order)?;
    let top = w.k() + order + 2;
    let zero = TruncSeries::<C>::zero("g", order);
    let one = TruncSeries::<C>::one("g", order);
    let mut r: Vec<TruncSeries<C>> = (0..=top).map(|n| TruncSeries::constant("g", w.rho_at(n), order)).collect();
    for _ in 0..order + 2 {
        let z: Vec<TruncSeries<C>> = (0..=top).map(|n| r[n].mul_coeff(&w.sigma_at(n))).collect();
        let next: Result<Vec<_>, SeriesError> = (0..=top)
            .map(|n| {
                let below = if n == 0 { &zero } else { &z[n - 1] };
                let above = if n == top { &bulk } else { &z[n + 1] };
                let s = above.add_ref(&z[n]).add_ref(below).mul_coeff(&w.sigma_at(n)).shift(1).truncate(order);
                Ok(one.sub_ref(&s).inverse()?.mul_coeff(&w.rho_at(n)))
            })
            .collect();
        r = next?;
    }
    Ok(WeightedSolution { weights: w.clone(), r, bulk })
}

/// `R_0(g | rho, sigma)`: rooted quadrangulations with `rho` per neighbor of the origin
/// and `sigma` per edge at the origin.
pub fn quartic_r0_rho_sigma(order: usize) -> Result<TruncSeries<SymbolPoly>, ObservablesError> {
    Ok(weighted_rn_solve(&LocalWeights::origin(), order)?.r[0].clone())
}

/// Left side of the algebraic relation for `R_0(g | rho, sigma)` after eliminating `Z_1`.
pub fn origin_relation_residual(r0: &TruncSeries<SymbolPoly>) -> Result<TruncSeries<SymbolPoly>, ObservablesError> {
    let order = r0.order();
    let rho = TruncSeries::constant("g", SymbolPoly::symbol("rho"), order);
    let sigma = SymbolPoly::symbol("sigma");
    let sig2 = sigma.times(&sigma);
    let sig3 = sig2.times(&sigma);
    let one = TruncSeries::<SymbolPoly>::one("g", order);
    let (r, _) = quartic_r_x::<SymbolPoly>(&Rat::one(), order)?;
    let g = |s: &TruncSeries<SymbolPoly>| s.shift(1).truncate(order);
    let d = r0.sub_ref(&rho);
    let r0sq = r0.mul_ref(r0);
    let first = d.mul_ref(&one.add_ref(r0).sub_ref(&g(&r0sq).mul_coeff(&sig2)).sub_ref(&rho));
    let grr = g(&r.mul_ref(&one.sub_ref(&g(&r.mul_ref(&r)))));
    let second = r0.mul_ref(&d.add_ref(&grr)).mul_coeff(&sigma);
    let third = g(&r0sq.mul_ref(r0)).mul_coeff(&sig3);
    Ok(first.sub_ref(&second).add_ref(&third))
}

/// `Gamma_0 = ∫_0^sigma R_0(g | rho, s) ds / s`, termwise, over areas `A >= 1`.
pub fn unrooted_gamma0(r0: &TruncSeries<SymbolPoly>) -> Result<TruncSeries<SymbolPoly>, ObservablesError> {
    let mut out = TruncSeries::<SymbolPoly>::zero("g", r0.order());
    for a in 1..=r0.order() {
        let mut c = SymbolPoly::nil();
        for (m, v) in r0.coeff(a).terms() {
            let e = SymbolPoly::exponent(m, "sigma");
            if e <= 0 {
                return Err(ObservablesError::IntegrationObstruction(a));
            }
            let exps: Vec<(&str, i32)> = m.iter().map(|(s, e)| (s.as_str(), *e)).collect();
            c = c.plus(&SymbolPoly::monomial(v / rint(e as i64), &exps));
        }
        out.set_coeff(a, c);
    }
    Ok(out)
}

fn at_one(p: &SymbolPoly) -> Rat {
    p.substitute("rho", &Rat::one()).substitute("sigma", &Rat::one()).as_constant().expect("only rho and sigma occur")
}

/// Weighted number of origin-marked quadrangulations with `area` faces, `Gamma_{0,A}(1,1)`.
pub fn origin_normalizer(area: usize) -> Result<Rat, ObservablesError> {
    if area == 0 {
        return Err(ObservablesError::ZeroArea);
    }
    let w = LocalWeights::new(vec![SymbolPoly::unity()], vec![SymbolPoly::symbol("sigma")]);
    let r0 = weighted_rn_solve(&w, area)?.r[0].clone();
    Ok(at_one(&unrooted_gamma0(&r0)?.coeff(area)))
}

/// `<rho^N1 sigma^N01>_A` as a polynomial in `rho, sigma`.
pub fn origin_environment(area: usize) -> Result<SymbolPoly, ObservablesError> {
    if area == 0 {
        return Err(ObservablesError::ZeroArea);
    }
    let gamma = unrooted_gamma0(&quartic_r0_rho_sigma(area)?)?.coeff(area);
    Ok(gamma.scale(&at_one(&gamma).recip()))
}

fn rn_exact(n: i64, area: usize) -> Result<Rat, ObservablesError> {
    if n < 0 {
        return Ok(Rat::zero());
    }
    let (r, x) = quartic_r_x::<Rat>(&Rat::one(), area)?;
    Ok(soliton(&r, &x, n as usize)?.coeff(area))
}

/// Average number of edges `n -> n+1` at area `A`.
pub fn edges_at_distance(n: usize, area: usize) -> Result<Rat, ObservablesError> {
    let num = rn_exact(n as i64, area)? - rn_exact(n as i64 - 1, area)?;
    Ok(num / origin_normalizer(area)?)
}

/// Average number of vertices at distance `n` at area `A`; the origin alone at `n = 0`.
pub fn vertices_at_distance(n: usize, area: usize) -> Result<Rat, ObservablesError> {
    if n == 0 {
        return Ok(Rat::one());
    }
    let (r, x) = quartic_r_x::<Rat>(&Rat::one(), area)?;
    let log_r = |m: usize| -> Result<TruncSeries<Rat>, ObservablesError> { Ok(soliton(&r, &x, m)?.log()?) };
    let v = if n == 1 { log_r(0)? } else { log_r(n - 1)?.sub_ref(&log_r(n - 2)?) };
    Ok(v.coeff(area) / origin_normalizer(area)?)
}

/// Large-area limit of the edge profile.
pub fn edges_asymptotic(n: u64) -> Rat {
    let n = Rat::from_integer(n.into());
    let a = &n * &n + rint(4) * &n + rint(2);
    let b = rint(5) * n.clone() * &n * &n * &n + rint(40) * n.clone() * &n * &n + rint(117) * &n * &n + rint(148) * &n + rint(70);
    let d = (&n + rint(1)) * (&n + rint(2)) * (&n + rint(3));
    rat(6, 35) * a * b / d
}

/// Large-area limit of the vertex profile.
pub fn vertices_asymptotic(n: u64) -> Rat {
    if n == 0 {
        return Rat::one();
    }
    let delta = if n == 1 { Rat::one() } else { Rat::zero() };
    let n = Rat::from_integer(n.into());
    rat(3, 35) * ((&n + rint(1)) * (rint(5) * &n * &n + rint(10) * &n + rint(2)) + delta)
}

/// Float vertex profile at large area, expanding in `12 g`. The normalizer uses
/// `Gamma_{0,A}(1,1) = (A+2) R_{0,A} / (4A)`, i.e. mean origin degree `4A/(A+2)`.
pub fn vertices_at_distance_f64(ns: &[usize], area: usize) -> Result<Vec<f64>, ObservablesError> {
    if area == 0 {
        return Err(ObservablesError::ZeroArea);
    }
    let (r, x) = quartic_r_x::<f64>(&rat(1, 12), area)?;
    let max = ns.iter().copied().max().unwrap_or(0);
    let logs: Result<Vec<TruncSeries<f64>>, ObservablesError> =
        (0..max.max(1)).map(|m| Ok(soliton(&r, &x, m)?.log()?)).collect();
    let logs = logs?;
    let r0 = soliton(&r, &x, 0)?.coeff(area);
    let norm = r0 * (area as f64 + 2.0) / (4.0 * area as f64);
    Ok(ns
        .iter()
        .map(|&n| match n {
            0 => 1.0,
            1 => logs[0].coeff(area) / norm,
            _ => (logs[n - 1].coeff(area) - logs[n - 2].coeff(area)) / norm,
        })
        .collect())
}

/// Averages from every rooted quadrangulation with `area` faces, each weighted `1/deg(origin)`.
#[derive(Clone, Debug)]
pub struct ExhaustiveProfile {
    pub vertices: Vec<Rat>,
    pub edges: Vec<Rat>,
    /// `<rho^N1 sigma^N01>`.
    pub environment: SymbolPoly,
    pub normalizer: Rat,
    pub maps: usize,
}

/// Degree of the origin and the number of distinct neighbors.
pub fn origin_degree_and_neighbors(q: &RootedQuadrangulation) -> (usize, usize) {
    let m = &q.map;
    let root = m.root.expect("rooted");
    let mut neighbors = Vec::new();
    let mut deg = 0;
    let mut d = root;
    let vid = vertex_of(m);
    loop {
        deg += 1;
        neighbors.push(vid[m.alpha[d]]);
        d = m.sigma[d];
        if d == root {
            break;
        }
    }
    neighbors.sort_unstable();
    neighbors.dedup();
    (deg, neighbors.len())
}

fn vertex_of(m: &crate::fatgraph::CombinatorialMap) -> Vec<usize> {
    let mut id = vec![usize::MAX; m.num_darts()];
    for (i, c) in m.vertex_cycles().iter().enumerate() {
        for &d in c {
            id[d] = i;
        }
    }
    id
}

pub fn exhaustive_profile(area: usize) -> Result<ExhaustiveProfile, ObservablesError> {
    if area == 0 {
        return Err(ObservablesError::ZeroArea);
    }
    let trees = enumerate_well_labeled(0, area, None, crate::bijections::DEFAULT_TREE_CAP)?;
    let mut vertices: Vec<Rat> = Vec::new();
    let mut edges: Vec<Rat> = Vec::new();
    let mut env = SymbolPoly::nil();
    let mut total = Rat::zero();
    for t in &trees {
        let q = cvs_inverse(t)?;
        let (deg, nb) = origin_degree_and_neighbors(&q);
        let w = rat(1, deg as i64);
        total += &w;
        env = env.plus(&SymbolPoly::monomial(w.clone(), &[("rho", nb as i32), ("sigma", deg as i32)]));
        for (n, c) in q.distance_profile().iter().enumerate() {
            if vertices.len() <= n {
                vertices.resize(n + 1, Rat::zero());
            }
            vertices[n] += &w * rint(*c as i64);
        }
        for (n, c) in q.edge_profile().iter().enumerate() {
            if edges.len() <= n {
                edges.resize(n + 1, Rat::zero());
            }
            edges[n] += &w * rint(*c as i64);
        }
    }
    let inv = total.recip();
    Ok(ExhaustiveProfile {
        vertices: vertices.into_iter().map(|v| v * &inv).collect(),
        edges: edges.into_iter().map(|v| v * &inv).collect(),
        environment: env.scale(&inv),
        normalizer: total,
        maps: trees.len(),
    })
}

/// `6G(G+1)(G+3) - sigma (2G(1+4G+G^2) + 3 rho (G+1)^2 (G+2))`.
pub fn gamma_cubic(gamma: f64, rho: f64, sigma: f64) -> f64 {
    let g = gamma;
    6.0 * g * (g + 1.0) * (g + 3.0) - sigma * (2.0 * g * (1.0 + 4.0 * g + g * g) + 3.0 * rho * (g + 1.0).powi(2) * (g + 2.0))
}

fn gamma_cubic_dg(gamma: f64, rho: f64, sigma: f64) -> f64 {
    let g = gamma;
    6.0 * (3.0 * g * g + 8.0 * g + 3.0) - sigma * (2.0 + 16.0 * g + 6.0 * g * g + 3.0 * rho * (g + 1.0) * (3.0 * g + 5.0))
}

/// Large-area `<rho^N1 sigma^N01>`: the root of the cubic continued from `Gamma(1,1) = 1`,
/// along `(rho^u, sigma^u)` for positive weights and a straight line otherwise.
pub fn gamma_limit(rho: f64, sigma: f64) -> Result<f64, ObservablesError> {
    if !(rho.is_finite() && sigma.is_finite()) {
        return Err(ObservablesError::BranchError(rho, sigma));
    }
    let steps = 400;
    let mut g = 1.0;
    for i in 1..=steps {
        let t = i as f64 / steps as f64;
        let (p, s) = if rho > 0.0 && sigma > 0.0 {
            (rho.powf(t), sigma.powf(t))
        } else {
            (1.0 + t * (rho - 1.0), 1.0 + t * (sigma - 1.0))
        };
        for _ in 0..50 {
            let d = gamma_cubic_dg(g, p, s);
            if d.abs() < 1e-9 {
                return Err(ObservablesError::BranchError(rho, sigma));
            }
            let step = gamma_cubic(g, p, s) / d;
            g -= step;
            if step.abs() < 1e-15 * (1.0 + g.abs()) {
                break;
            }
        }
        if !g.is_finite() || gamma_cubic(g, p, s).abs() > 1e-9 * (1.0 + g.abs().powi(3)) {
            return Err(ObservablesError::BranchError(rho, sigma));
        }
    }
    Ok(g)
}

/// Series of the cubic's root vanishing at `t = 0`, along `rho = t, sigma = 1` or `rho = 1, sigma = t`.
pub fn gamma_series(along_rho: bool, order: usize) -> Result<TruncSeries<Rat>, ObservablesError> {
    let t = TruncSeries::<Rat>::variable("t", order);
    let one = TruncSeries::<Rat>::one("t", order);
    let (rho, sigma) = if along_rho { (t.clone(), one.clone()) } else { (one.clone(), t.clone()) };
    let cubic = |g: &TruncSeries<Rat>| {
        let c = |k: i64| one.scale(&rint(k));
        let a = g.mul_ref(&g.add_ref(&one)).mul_ref(&g.add_ref(&c(3))).scale(&rint(6));
        let b1 = g.mul_ref(&one.add_ref(&g.scale(&rint(4))).add_ref(&g.mul_ref(g))).scale(&rint(2));
        let gp1 = g.add_ref(&one);
        let b2 = rho.mul_ref(&gp1).mul_ref(&gp1).mul_ref(&g.add_ref(&c(2))).scale(&rint(3));
        a.sub_ref(&sigma.mul_ref(&b1.add_ref(&b2)))
    };
    // the linear coefficient of the cubic in Gamma at t = 0
    let slope = if along_rho { rint(16) } else { rint(18) };
    let mut g = TruncSeries::<Rat>::zero("t", order);
    for _ in 0..=order + 1 {
        g = g.sub_ref(&cubic(&g).scale(&slope.recip()));
    }
    if !cubic(&g).coeffs().iter().all(|c| c.is_zero()) {
        return Err(ObservablesError::Series(SeriesError::NotContracting));
    }
    Ok(g)
}

/// Probability of `n` distinct neighbors in the large-area limit, `(3/16)^n C(2n, n)`.
pub fn neighbor_probability(n: u32) -> Rat {
    crate::series::pow_rat(&rat(3, 16), n) * Rat::from_integer(binom(2 * n as u64, n as u64))
}

/// `Gamma(rho, 1) = 2 / sqrt(4 - 3 rho) - 1`.
pub fn gamma_rho_closed(rho: f64) -> f64 {
    2.0 / (4.0 - 3.0 * rho).sqrt() - 1.0
}

/// `Gamma(1, sigma) = (sqrt((6 + 3 sigma) / (6 - 5 sigma)) - 1) / 2`.
pub fn gamma_sigma_closed(sigma: f64) -> f64 {
    (((6.0 + 3.0 * sigma) / (6.0 - 5.0 * sigma)).sqrt() - 1.0) / 2.0
}

/// Generating function of neighbor counts with no multiple edge at the origin:
/// `lim_{sigma -> 0} Gamma(t / sigma, sigma)`, the root of
/// `6G(G+1)(G+3) = 3t (G+1)^2 (G+2)` continued from `G = 0` at `t = 0`.
pub fn simple_neighbor_pgf(t: f64) -> Result<f64, ObservablesError> {
    let f = |g: f64, t: f64| 6.0 * g * (g + 1.0) * (g + 3.0) - 3.0 * t * (g + 1.0).powi(2) * (g + 2.0);
    let df = |g: f64, t: f64| 6.0 * (3.0 * g * g + 8.0 * g + 3.0) - 3.0 * t * (g + 1.0) * (3.0 * g + 5.0);
    let steps = 400;
    let mut g = 0.0;
    for i in 1..=steps {
        let s = t * i as f64 / steps as f64;
        for _ in 0..50 {
            let d = df(g, s);
            if d.abs() < 1e-9 {
                return Err(ObservablesError::BranchError(t, 0.0));
            }
            let step = f(g, s) / d;
            g -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
    }
    Ok(g)
}

/// Closed form printed alongside the simple-neighbor limit, `sqrt((8-t)/(2-t)) - 2`.
pub fn simple_neighbor_pgf_printed(t: f64) -> f64 {
    ((8.0 - t) / (2.0 - t)).sqrt() - 2.0
}

/// Monte-Carlo averages in the origin-marked ensemble, from the uniform rooted sampler
/// reweighted by `1/deg(origin)`.
#[derive(Clone, Debug)]
pub struct ProfileEstimate {
    pub area: usize,
    pub samples: usize,
    pub vertices: Vec<(f64, f64)>,
    /// Fraction of origins without a multiple edge, and its standard error.
    pub simple: (f64, f64),
    /// Fraction of origins of degree 1.
    pub degree_one: (f64, f64),
}

pub struct SampledMap {
    pub map: RootedQuadrangulation,
    pub profile: Vec<u64>,
    pub degree: usize,
    pub neighbors: usize,
}

/// Draws `samples` maps in parallel; sample `i` uses stream `i` of `seed`.
pub fn sample_maps(area: usize, samples: usize, seed: u64) -> Result<Vec<SampledMap>, ObservablesError> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (map, _) = sample_quadrangulation(area, seed, i)?;
            let (degree, neighbors) = origin_degree_and_neighbors(&map);
            let profile = map.distance_profile();
            Ok(SampledMap { map, profile, degree, neighbors })
        })
        .collect()
}

fn weighted_mean(w: &[f64], x: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mean = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / sw;
    let var: f64 = w.iter().zip(x).map(|(a, b)| (a * (b - mean)).powi(2)).sum();
    (mean, var.sqrt() / sw)
}

pub fn monte_carlo_profile(area: usize, samples: usize, seed: u64, n_max: usize) -> Result<ProfileEstimate, ObservablesError> {
    if area == 0 {
        return Err(ObservablesError::ZeroArea);
    }
    let maps = sample_maps(area, samples, seed)?;
    let w: Vec<f64> = maps.iter().map(|m| 1.0 / m.degree as f64).collect();
    let vertices = (0..=n_max)
        .map(|n| {
            let x: Vec<f64> = maps.iter().map(|m| m.profile.get(n).copied().unwrap_or(0) as f64).collect();
            weighted_mean(&w, &x)
        })
        .collect();
    let simple: Vec<f64> = maps.iter().map(|m| (m.degree == m.neighbors) as u8 as f64).collect();
    let one: Vec<f64> = maps.iter().map(|m| (m.degree == 1) as u8 as f64).collect();
    Ok(ProfileEstimate { area, samples, vertices, simple: weighted_mean(&w, &simple), degree_one: weighted_mean(&w, &one) })
}

/// Exact rationals as `f64`, for reporting.
pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Coefficients of `rho^a sigma^b` in a polynomial.
pub fn bivariate_coefficients(p: &SymbolPoly) -> BTreeMap<(i32, i32), Rat> {
    p.terms()
        .map(|(m, c)| ((SymbolPoly::exponent(m, "rho"), SymbolPoly::exponent(m, "sigma")), c.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::exact_rn_quartic_series;

    #[test]
    fn closed_form_profiles() {
        assert_eq!(edges_asymptotic(0), rint(4));
        assert_eq!(edges_asymptotic(1), rint(19));
        assert_eq!(vertices_asymptotic(1), rint(3));
        assert_eq!(vertices_asymptotic(2), rat(54, 5));
        assert_eq!(vertices_asymptotic(0), rint(1));
        let n = 4000u64;
        let ratio = to_f64(&edges_asymptotic(n)) / (6.0 * (n as f64).powi(3) / 7.0);
        assert!((ratio - 1.0).abs() < 5e-3);
    }

    #[test]
    fn uniform_weights_give_geodesic_series() {
        let s = weighted_rn_solve(&LocalWeights::<Rat>::uniform(2), 8).unwrap();
        for n in 0..5 {
            assert_eq!(s.r[n], exact_rn_quartic_series(n, 8).unwrap());
        }
        assert!(s.closure_residual().coeffs().iter().all(|c| c.is_zero()));
        let (r, _) = quartic_r_x::<Rat>(&Rat::one(), 8).unwrap();
        let r3 = r.mul_ref(&r).mul_ref(&r).shift(1).truncate(8);
        assert_eq!(s.r[0], r.sub_ref(&r3));
    }

    #[test]
    fn origin_weights_first_orders() {
        let r0 = quartic_r0_rho_sigma(4).unwrap();
        assert_eq!(r0.coeff(0), SymbolPoly::symbol("rho"));
        let rs = SymbolPoly::monomial(rint(1), &[("rho", 1), ("sigma", 1)]);
        assert_eq!(r0.coeff(1), rs.plus(&rs.times(&rs)));
        assert!(origin_relation_residual(&r0).unwrap().coeffs().iter().all(|c| c.is_nil()));
        let ones: Vec<Rat> = r0.coeffs().iter().map(at_one).collect();
        assert_eq!(ones, vec![rint(1), rint(2), rint(9), rint(54), rint(378)]);
        // no sigma means no edge at the origin, which only the empty map allows
        let no_edges: Vec<SymbolPoly> = r0.coeffs().iter().map(|c| c.coeff_of("sigma", 0)).collect();
        assert_eq!(no_edges[0], SymbolPoly::symbol("rho"));
        assert!(no_edges[1..].iter().all(|c| c.is_nil()));
        let k1 = weighted_rn_solve(&LocalWeights::symbolic(1), 4).unwrap();
        assert!(k1.closure_residual().coeffs().iter().all(|c| c.is_nil()));
    }

    #[test]
    fn gamma0_integrates_the_rooting() {
        let r0 = quartic_r0_rho_sigma(6).unwrap();
        let g0 = unrooted_gamma0(&r0).unwrap();
        for a in 1..=6 {
            let mut back = SymbolPoly::nil();
            for (m, c) in g0.coeff(a).terms() {
                let e = SymbolPoly::exponent(m, "sigma");
                let exps: Vec<(&str, i32)> = m.iter().map(|(s, e)| (s.as_str(), *e)).collect();
                back = back.plus(&SymbolPoly::monomial(c * rint(e as i64), &exps));
            }
            assert_eq!(back, r0.coeff(a));
        }
        assert_eq!(at_one(&g0.coeff(1)), rat(3, 2));
        let bad = TruncSeries::new("g", vec![SymbolPoly::symbol("rho"), SymbolPoly::symbol("rho")], 1);
        assert!(matches!(unrooted_gamma0(&bad), Err(ObservablesError::IntegrationObstruction(1))));
    }

    #[test]
    fn mean_origin_degree_is_euler() {
        for a in 1..=6usize {
            let e0 = edges_at_distance(0, a).unwrap();
            assert_eq!(e0, rat(4 * a as i64, a as i64 + 2));
        }
    }

    #[test]
    fn finite_area_matches_enumeration() {
        for a in 1..=3 {
            let ex = exhaustive_profile(a).unwrap();
            assert_eq!(ex.normalizer, origin_normalizer(a).unwrap());
            for n in 0..ex.vertices.len() + 1 {
                let v = ex.vertices.get(n).cloned().unwrap_or_else(Rat::zero);
                assert_eq!(vertices_at_distance(n, a).unwrap(), v, "v_{n} at A={a}");
                let e = ex.edges.get(n).cloned().unwrap_or_else(Rat::zero);
                assert_eq!(edges_at_distance(n, a).unwrap(), e, "e_{n} at A={a}");
            }
            let total: Rat = (0..=a + 2).map(|n| vertices_at_distance(n, a).unwrap()).sum();
            assert_eq!(total, rint(a as i64 + 2));
            assert_eq!(origin_environment(a).unwrap(), ex.environment);
        }
    }

    #[test]
    fn weighted_window_matches_enumeration() {
        // rho_p per vertex at distance p+1, sigma_p per edge p -> p+1, p <= 1
        let s = weighted_rn_solve(&LocalWeights::symbolic(1), 3).unwrap();
        for a in 1..=3 {
            let mut want = SymbolPoly::nil();
            for t in enumerate_well_labeled(0, a, None, 8).unwrap() {
                let q = cvs_inverse(&t).unwrap();
                let v = q.distance_profile();
                let e = q.edge_profile();
                let get = |x: &Vec<u64>, i: usize| x.get(i).copied().unwrap_or(0) as i32;
                want = want.plus(&SymbolPoly::monomial(
                    rint(1),
                    &[("rho0", get(&v, 1)), ("rho1", get(&v, 2)), ("sigma0", get(&e, 0)), ("sigma1", get(&e, 1))],
                ));
            }
            assert_eq!(s.r[0].coeff(a), want, "A={a}");
        }
    }

    #[test]
    fn cubic_branch_specializations() {
        let a = gamma_series(true, 8).unwrap();
        for n in 1..=8u32 {
            assert_eq!(a.coeff(n as usize), neighbor_probability(n));
        }
        assert_eq!(neighbor_probability(1), rat(3, 8));
        assert_eq!(neighbor_probability(2), rat(27, 128));
        let b = gamma_series(false, 8).unwrap();
        let one = TruncSeries::<Rat>::one("t", 8);
        let t = TruncSeries::<Rat>::variable("t", 8);
        let closed = one
            .scale(&rint(6))
            .add_ref(&t.scale(&rint(3)))
            .div(&one.scale(&rint(6)).sub_ref(&t.scale(&rint(5))))
            .unwrap()
            .sqrt()
            .unwrap()
            .sub_ref(&one)
            .scale(&rat(1, 2));
        assert_eq!(b, closed);
        assert!((gamma_limit(1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        for &x in &[0.0, 0.3, 0.7, 1.1] {
            assert!((gamma_limit(x, 1.0).unwrap() - gamma_rho_closed(x)).abs() < 1e-12);
            assert!((gamma_limit(1.0, x).unwrap() - gamma_sigma_closed(x)).abs() < 1e-12);
        }
        assert!(gamma_limit(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn simple_neighbor_limit() {
        assert_eq!(simple_neighbor_pgf(0.0).unwrap(), 0.0);
        // degree one has probability 1/3, the sigma-linear term of Gamma(1, sigma)
        let h = 1e-6;
        assert!((simple_neighbor_pgf(h).unwrap() / h - 1.0 / 3.0).abs() < 1e-5);
        // small-sigma approach
        let g = gamma_limit(1e4, 1e-4).unwrap();
        assert!((g - simple_neighbor_pgf(1.0).unwrap()).abs() < 1e-4);
    }
}
