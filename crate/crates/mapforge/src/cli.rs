//! Command-line front end. Every run echoes its resolved parameters and
//! prints sorted JSON or plain CSV, so identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Display;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::bijections::BijectionError;
use crate::branching::{self, BranchingConfig, BranchingError, Walls};
use crate::fatgraph::{connected_free_energy, genus_split, WickError};
use crate::geodesic::{self, GeodesicError};
use crate::observables::{self, ObservablesError};
use crate::ortho::{default_sizes, exact_free_energy_fn, genus_extract, OrthoError};
use crate::planar::{self, PlanarError, Potential};
use crate::series::{parse_rat, Rat, SeriesError, TruncSeries};
use crate::stringeq::{self, StringEqError};

#[derive(Parser, Debug)]
#[command(name = "mapforge", version, about = "Planar map enumeration and random map tools")]
pub struct Cli {
    /// Worker threads (falls back to MAPFORGE_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WallKind {
    Single,
    Interval,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Brute-force Wick expansion of the free energy.
    Oracle(OracleArgs),
    /// One-cut planar series.
    Planar(PlanarArgs),
    /// Genus expansion from orthogonal polynomials.
    Genus(GenusArgs),
    /// Distance-refined two-leg functions.
    Geodesic(GeodesicArgs),
    /// Uniform random quadrangulations.
    Sample(SampleArgs),
    /// Local statistics around the origin.
    Local(LocalArgs),
    /// Branching random walk with walls.
    Branching(BranchingArgs),
    /// Gelfand-Dickey residues and string equations.
    Stringeq(StringeqArgs),
}

/// Couplings given as `--g3`, `--g4`, `--g6` or `--weights g4=1,g6=1/2`.
#[derive(Args, Debug, Serialize)]
pub struct Couplings {
    #[arg(long)]
    pub g3: Option<String>,
    #[arg(long)]
    pub g4: Option<String>,
    #[arg(long)]
    pub g6: Option<String>,
    #[arg(long)]
    pub weights: Option<String>,
}

impl Couplings {
    fn resolve(&self) -> Result<BTreeMap<usize, Rat>, CliError> {
        let mut out = BTreeMap::new();
        if let Some(w) = &self.weights {
            for item in w.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| CliError::invalid("ParseError", format!("weight {item:?} is not of the form gK=value")))?;
                let k: usize = k
                    .trim()
                    .trim_start_matches('g')
                    .parse()
                    .map_err(|_| CliError::invalid("ParseError", format!("bad valence in {item:?}")))?;
                if k == 0 {
                    return Err(CliError::invalid("ParseError", "valence must be positive".into()));
                }
                out.insert(k, rational(v)?);
            }
        }
        for (k, v) in [(3, &self.g3), (4, &self.g4), (6, &self.g6)] {
            if let Some(v) = v {
                out.insert(k, rational(v)?);
            }
        }
        Ok(out)
    }

    fn potential(&self) -> Result<Potential, CliError> {
        let c = self.resolve()?;
        if c.is_empty() {
            return Err(CliError::invalid("ValidationError", "no couplings given".into()));
        }
        Ok(Potential::new(&c.into_iter().collect::<Vec<_>>()))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub couplings: Couplings,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Report coefficients per genus rather than as polynomials in N.
    #[arg(long)]
    pub genus_split: bool,
    /// Largest number of half-edges the enumeration may face.
    #[arg(long, default_value_t = 24)]
    pub cap: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct PlanarArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub couplings: Couplings,
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Comma list from f, R, S, Gamma1, Gamma2, Gamma11.
    #[arg(long, default_value = "f,R")]
    pub emit: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct GenusArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub couplings: Couplings,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value_t = 1)]
    pub max_genus: usize,
    /// Number of matrix sizes used for the extraction.
    #[arg(long)]
    pub sizes: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct GeodesicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub couplings: Couplings,
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub order: usize,
    /// Comma list from Rn, Gn, motion, exact.
    #[arg(long, default_value = "Rn")]
    pub emit: String,
    /// Compare the critical discrete profile with its scaling limit.
    #[arg(long)]
    pub continuum: bool,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 16)]
    pub points: usize,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub faces: usize,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// `profile` (per-sample distance profiles) or `summary` (reweighted means).
    #[arg(long, default_value = "profile")]
    pub emit: String,
    #[arg(long, default_value_t = 6)]
    pub nmax: usize,
    #[arg(long)]
    pub dump_maps: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct LocalArgs {
    /// Comma list from P, Pi, profile.
    #[arg(long, default_value = "P,Pi,profile")]
    pub emit: String,
    #[arg(long, default_value_t = 6)]
    pub nmax: usize,
    /// Exact profile at this number of faces instead of the large-area limit.
    #[arg(long)]
    pub finite_area: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct BranchingArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = WallKind::Single)]
    pub wall: WallKind,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub max_generations: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct StringeqArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Comma list from residues, commutator, painleve.
    #[arg(long, default_value = "residues")]
    pub emit: String,
    /// Number of large-y coefficients for `painleve`.
    #[arg(long, default_value_t = 4)]
    pub terms: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub name: String,
    pub message: String,
}

impl CliError {
    fn invalid(name: &str, message: String) -> Self {
        CliError { code: 2, name: name.into(), message }
    }

    fn numeric(name: &str, message: String) -> Self {
        CliError { code: 3, name: name.into(), message }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.name, self.message)
    }
}

fn variant<E: std::fmt::Debug>(e: &E) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string()
}

macro_rules! classify {
    ($ty:ty, $($bad:pat),*) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                let name = variant(&e);
                let message = e.to_string();
                #[allow(unreachable_patterns)]
                match e {
                    $($bad => CliError::invalid(&name, message),)*
                    _ => CliError::numeric(&name, message),
                }
            }
        }
    };
}

classify!(SeriesError, SeriesError::Parse(_));
classify!(PlanarError, PlanarError::EvenOnly);
classify!(OrthoError, OrthoError::EvenOnly);
classify!(WickError, WickError::TooLarge(..));
classify!(GeodesicError, GeodesicError::DomainError(_), GeodesicError::OutOfOneCut(_));
classify!(ObservablesError, ObservablesError::ZeroArea);
classify!(BijectionError, BijectionError::TooLarge(..));
classify!(StringEqError, StringEqError::DeepenCutoff(..));
classify!(BranchingError, BranchingError::BadProbability(_), BranchingError::BadStart(_));

fn rational(s: &str) -> Result<Rat, CliError> {
    parse_rat(s.trim()).map_err(|_| CliError::invalid("ParseError", format!("cannot parse rational {s:?}")))
}

fn emits(list: &str, allowed: &[&str]) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if !allowed.contains(&item) {
            return Err(CliError::invalid("ValidationError", format!("unknown emit {item:?}; expected one of {}", allowed.join(", "))));
        }
        out.push(item.to_string());
    }
    Ok(out)
}

/// Finished report: parameters, named results, and the rows used for CSV.
pub struct Report {
    pub command: String,
    pub params: Value,
    pub results: Map<String, Value>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub format: Format,
}

impl Report {
    fn new<P: Serialize>(command: &str, params: &P, format: Format) -> Self {
        Report {
            command: command.into(),
            params: serde_json::to_value(params).expect("parameters serialize"),
            results: Map::new(),
            header: Vec::new(),
            rows: Vec::new(),
            format,
        }
    }

    fn put(&mut self, key: &str, v: Value) {
        self.results.insert(key.into(), v);
    }

    fn series_rows(&mut self, key: &str, s: &TruncSeries<Rat>) {
        if self.header.is_empty() {
            self.header = vec!["name".into(), "order".into(), "coefficient".into()];
        }
        for (k, c) in s.to_strings().into_iter().enumerate() {
            self.rows.push(vec![key.into(), k.to_string(), c]);
        }
        self.put(key, s.to_json());
    }

    pub fn render(&self) -> String {
        match self.format {
            Format::Json => {
                let doc = json!({
                    "command": self.command,
                    "params": self.params,
                    "results": Value::Object(self.results.clone()),
                    "tool": "mapforge",
                    "version": env!("CARGO_PKG_VERSION"),
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = format!("# mapforge {} {}\n", env!("CARGO_PKG_VERSION"), self.command);
                if let Value::Object(m) = &self.params {
                    for (k, v) in m {
                        let v = match v {
                            Value::String(x) => x.clone(),
                            other => other.to_string(),
                        };
                        s.push_str(&format!("# {k}={v}\n"));
                    }
                }
                s.push_str(&self.header.join(","));
                s.push('\n');
                for row in &self.rows {
                    s.push_str(&row.join(","));
                    s.push('\n');
                }
                s
            }
        }
    }
}

fn oracle(a: &OracleArgs) -> Result<Report, CliError> {
    let weights = a.couplings.resolve()?;
    if weights.is_empty() {
        return Err(CliError::invalid("ValidationError", "no couplings given".into()));
    }
    let f = connected_free_energy(&weights, a.order, a.cap)?;
    let mut rep = Report::new("oracle", a, a.format);
    rep.header = vec!["order".into(), "genus".into(), "coefficient".into()];
    let split = genus_split(&f);
    for (k, row) in &split {
        for (h, c) in row {
            rep.rows.push(vec![k.to_string(), h.to_string(), c.to_string()]);
        }
    }
    if a.genus_split {
        let mut m = Map::new();
        for (k, row) in split {
            let inner: Map<String, Value> = row.into_iter().map(|(h, c)| (h.to_string(), Value::String(c.to_string()))).collect();
            m.insert(k.to_string(), Value::Object(inner));
        }
        rep.put("F", Value::Object(m));
    } else {
        rep.put("F", json!(f.to_strings()));
    }
    Ok(rep)
}

fn planar_cmd(a: &PlanarArgs) -> Result<Report, CliError> {
    let v = a.couplings.potential()?;
    let list = emits(&a.emit, &["f", "R", "S", "Gamma1", "Gamma2", "Gamma11"])?;
    let sol = planar::solve_one_cut(&v, a.order);
    let mut rep = Report::new("planar", a, a.format);
    for key in list {
        let s = match key.as_str() {
            "f" => planar::planar_free_energy(&v, a.order)?,
            "R" => sol.r.clone(),
            "S" => sol.s.clone(),
            "Gamma1" => planar::gamma_one(&v, &sol),
            "Gamma2" => planar::gamma_two_sameface(&v, &sol),
            _ => planar::gamma_one_one(&v, &sol),
        };
        rep.series_rows(&key, &s);
    }
    Ok(rep)
}

fn genus_cmd(a: &GenusArgs) -> Result<Report, CliError> {
    let v = a.couplings.potential()?;
    let sizes = a.sizes.unwrap_or_else(|| default_sizes(&v, a.order));
    let f = exact_free_energy_fn(&v, a.order, sizes)?;
    let ge = genus_extract(&f)?;
    let mut rep = Report::new("genus", a, a.format);
    rep.header = vec!["order".into(), "genus".into(), "coefficient".into()];
    let mut per_genus = Map::new();
    for h in 0..=a.max_genus {
        let mut coeffs = Vec::new();
        for k in 0..=a.order {
            let c = ge.get(&(k, h)).cloned().unwrap_or_default();
            rep.rows.push(vec![k.to_string(), h.to_string(), c.to_string()]);
            coeffs.push(c.to_string());
        }
        per_genus.insert(h.to_string(), json!(coeffs));
    }
    rep.put("F", Value::Object(per_genus));
    Ok(rep)
}

fn geodesic_cmd(a: &GeodesicArgs) -> Result<Report, CliError> {
    if a.continuum {
        if !(a.eps > 0.0 && a.eps < 1.0) {
            return Err(CliError::invalid("ValidationError", format!("eps {} is outside (0, 1)", a.eps)));
        }
        let mut rep = Report::new("geodesic", a, a.format.unwrap_or(Format::Csv));
        rep.header = vec!["r".into(), "F".into(), "G".into(), "deviation".into()];
        let rows = geodesic::discrete_vs_continuum(a.eps, &geodesic::grid(0.5, 2.0, a.points.max(2)))?;
        let mut json_rows = Vec::new();
        for (r, n, scaled, f) in rows {
            let (_, g) = geodesic::continuum_two_point(n as f64 * a.eps)?;
            rep.rows.push(vec![r.to_string(), f.to_string(), g.to_string(), (scaled - f).to_string()]);
            json_rows.push(json!({"r": r, "F": f, "G": g, "deviation": scaled - f}));
        }
        rep.put("continuum", json!(json_rows));
        return Ok(rep);
    }
    let v = a.couplings.potential()?;
    let list = emits(&a.emit, &["Rn", "Gn", "motion", "exact"])?;
    let sol = geodesic::solve_rn_series(&v, a.n + 1, a.order);
    let mut rep = Report::new("geodesic", a, a.format.unwrap_or(Format::Json));
    let n = a.n as i64;
    for key in list {
        let s = match key.as_str() {
            "Rn" => sol.r_at(n),
            "Gn" => sol.g_at(n),
            "motion" => geodesic::integral_of_motion(&sol.r_at(n), &sol.r_at(n + 1)),
            _ => {
                if v != Potential::quartic() {
                    return Err(CliError::invalid("ValidationError", "exact form needs --g4 1 alone".into()));
                }
                geodesic::exact_rn_quartic_series(a.n, a.order)?
            }
        };
        rep.series_rows(&key, &s);
    }
    Ok(rep)
}

#[derive(Serialize)]
struct DumpedMap<'a> {
    sigma: &'a [usize],
    alpha: &'a [usize],
    root: usize,
}

fn sample_cmd(a: &SampleArgs) -> Result<Report, CliError> {
    if a.faces == 0 {
        return Err(ObservablesError::ZeroArea.into());
    }
    let list = emits(&a.emit, &["profile", "summary"])?;
    let mut rep = Report::new("sample", a, a.format);
    let maps = observables::sample_maps(a.faces, a.samples, a.seed)?;
    if let Some(path) = &a.dump_maps {
        let dumped: Vec<DumpedMap> = maps
            .iter()
            .map(|m| DumpedMap { sigma: &m.map.map.sigma, alpha: &m.map.map.alpha, root: m.map.map.root.unwrap_or(0) })
            .collect();
        let text = serde_json::to_string(&dumped).expect("maps serialize");
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::invalid("IoError", format!("cannot write {path}: {e}")))?;
    }
    if list.iter().any(|k| k == "profile") {
        rep.header = vec!["sample".into(), "distance".into(), "vertices".into()];
        let mut profiles = Vec::new();
        for (i, m) in maps.iter().enumerate() {
            for (n, c) in m.profile.iter().enumerate() {
                rep.rows.push(vec![i.to_string(), n.to_string(), c.to_string()]);
            }
            profiles.push(json!(m.profile));
        }
        rep.put("profiles", json!(profiles));
    }
    if list.iter().any(|k| k == "summary") {
        let est = observables::monte_carlo_profile(a.faces, a.samples, a.seed, a.nmax)?;
        if rep.header.is_empty() {
            rep.header = vec!["distance".into(), "mean".into(), "stderr".into()];
            for (n, (m, s)) in est.vertices.iter().enumerate() {
                rep.rows.push(vec![n.to_string(), m.to_string(), s.to_string()]);
            }
        }
        let means: Vec<Value> = est.vertices.iter().map(|(m, s)| json!({"mean": m, "stderr": s})).collect();
        rep.put(
            "summary",
            json!({
                "vertices": means,
                "simple": {"mean": est.simple.0, "stderr": est.simple.1},
                "degree_one": {"mean": est.degree_one.0, "stderr": est.degree_one.1},
            }),
        );
    }
    Ok(rep)
}

fn local_cmd(a: &LocalArgs) -> Result<Report, CliError> {
    let list = emits(&a.emit, &["P", "Pi", "profile"])?;
    let mut rep = Report::new("local", a, a.format);
    rep.header = vec!["name".into(), "n".into(), "value".into()];
    for key in list {
        match key.as_str() {
            "P" => {
                let v: Vec<String> = (1..=a.nmax as u32).map(|n| observables::neighbor_probability(n).to_string()).collect();
                for (i, x) in v.iter().enumerate() {
                    rep.rows.push(vec!["P".into(), (i + 1).to_string(), x.clone()]);
                }
                rep.put("P", json!(v));
            }
            "Pi" => {
                let x = observables::simple_neighbor_pgf(1.0)?;
                rep.rows.push(vec!["Pi".into(), "1".into(), x.to_string()]);
                rep.put("Pi", json!(x));
            }
            _ => {
                let mut edges = Vec::new();
                let mut vertices = Vec::new();
                for n in 0..=a.nmax {
                    let (e, v) = match a.finite_area {
                        Some(area) => (
                            observables::edges_at_distance(n, area)?,
                            observables::vertices_at_distance(n, area)?,
                        ),
                        None => (observables::edges_asymptotic(n as u64), observables::vertices_asymptotic(n as u64)),
                    };
                    rep.rows.push(vec!["edges".into(), n.to_string(), e.to_string()]);
                    rep.rows.push(vec!["vertices".into(), n.to_string(), v.to_string()]);
                    edges.push(e.to_string());
                    vertices.push(v.to_string());
                }
                rep.put("edges", json!(edges));
                rep.put("vertices", json!(vertices));
            }
        }
    }
    Ok(rep)
}

fn branching_cmd(a: &BranchingArgs) -> Result<Report, CliError> {
    let walls = match (a.wall, a.l) {
        (WallKind::Single, _) => Walls::Lower,
        (WallKind::Interval, Some(l)) => Walls::Interval(l),
        (WallKind::Interval, None) => {
            return Err(CliError::invalid("ValidationError", "--wall interval needs --L".into()));
        }
    };
    if a.samples > 0 && a.seed.is_none() {
        return Err(CliError::invalid("ValidationError", "sampling requires --seed".into()));
    }
    let mut cfg = BranchingConfig::new(a.p, walls, a.n as i64, a.seed.unwrap_or(0));
    cfg.max_generations = a.max_generations;
    cfg.validate()?;
    let exact = match walls {
        Walls::Lower => branching::exact_extinction(a.n, a.p)?,
        Walls::Interval(l) => branching::escape_exact(a.n, l, a.p)?,
    };
    let mut rep = Report::new("branching", a, a.format);
    rep.put("exact", json!(exact));
    rep.put("event", json!(if walls == Walls::Lower { "extinct" } else { "escaped" }));
    rep.header = vec!["estimate".into(), "stderr".into(), "exact".into(), "z".into(), "censored".into()];
    if a.samples == 0 {
        rep.put("estimate", Value::Null);
        rep.rows.push(vec![String::new(), String::new(), exact.to_string(), String::new(), String::new()]);
        return Ok(rep);
    }
    let est = match walls {
        Walls::Lower => branching::simulate_extinction(&cfg, a.samples)?,
        Walls::Interval(_) => branching::simulate_escape(&cfg, a.samples)?,
    };
    let z = if est.stderr > 0.0 { (est.value - exact) / est.stderr } else { 0.0 };
    rep.rows.push(vec![est.value.to_string(), est.stderr.to_string(), exact.to_string(), z.to_string(), est.censored.to_string()]);
    rep.put("estimate", json!(est.value));
    rep.put("stderr", json!(est.stderr));
    rep.put("z", json!(z));
    rep.put("censored", json!(est.censored));
    Ok(rep)
}

fn stringeq_cmd(a: &StringeqArgs) -> Result<Report, CliError> {
    let list = emits(&a.emit, &["residues", "commutator", "painleve"])?;
    let mut rep = Report::new("stringeq", a, a.format);
    rep.header = vec!["name".into(), "index".into(), "value".into()];
    for key in list {
        match key.as_str() {
            "residues" => {
                let mut v = Vec::new();
                for j in 0..=a.m {
                    let r = stringeq::kdv_residue(j, 2 * j as i64 + 2)?.to_string();
                    rep.rows.push(vec!["residue".into(), (j + 1).to_string(), format!("\"{r}\"")]);
                    v.push(r);
                }
                rep.put("residues", json!(v));
            }
            "commutator" => {
                let c = stringeq::commutator_check(a.m, 2 * a.m as i64 + 2)?.to_string();
                rep.rows.push(vec!["commutator".into(), a.m.to_string(), format!("\"{c}\"")]);
                rep.put("commutator", json!(c));
            }
            _ => {
                let c: Vec<String> = stringeq::painleve_genus_coeffs(a.m, a.terms)?.iter().map(|x| x.to_string()).collect();
                for (h, x) in c.iter().enumerate() {
                    rep.rows.push(vec!["painleve".into(), h.to_string(), x.clone()]);
                }
                rep.put("painleve", json!(c));
            }
        }
    }
    Ok(rep)
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Oracle(a) => oracle(a),
        Command::Planar(a) => planar_cmd(a),
        Command::Genus(a) => genus_cmd(a),
        Command::Geodesic(a) => geodesic_cmd(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Local(a) => local_cmd(a),
        Command::Branching(a) => branching_cmd(a),
        Command::Stringeq(a) => stringeq_cmd(a),
    }
}

/// `--threads`, else `MAPFORGE_THREADS`, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("MAPFORGE_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::invalid("ValidationError", format!("MAPFORGE_THREADS={s:?} is not a count"))),
        Err(_) => Ok(None),
    }
}

/// Parse, run, and write; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = resolve_threads(cli.threads).and_then(|threads| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            pool = pool.num_threads(t);
        }
        let pool = pool.build().map_err(|e| CliError::invalid("ValidationError", e.to_string()))?;
        pool.install(|| run(&cli))
    });
    match outcome {
        Ok(rep) => {
            let text = rep.render();
            match &cli.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("IoError: cannot write {path}: {e}");
                        return 2;
                    }
                }
                None => print!("{text}"),
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
