//! Tree bijections for planar maps.
//!
//! Blossom trees close up into two-leg planar graphs with even valences, and
//! well-labeled trees close up into rooted quadrangulations. Tree labels are
//! shifted: a tree label `l` is a vertex at distance `l + 1` from the origin.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fatgraph::CombinatorialMap;

pub const DEFAULT_TREE_CAP: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BijectionError {
    #[error("not a blossom tree: {0}")]
    NotBlossom(String),
    #[error("not a two-leg map with even valences: {0}")]
    NotTwoLeg(String),
    #[error("not a rooted planar quadrangulation: {0}")]
    NotQuadrangulation(String),
    #[error("not a well-labeled tree: {0}")]
    NotWellLabeled(String),
    #[error("size {0} exceeds the enumeration cap {1}")]
    TooLarge(usize, usize),
}

/// Blossom subtree: a white leaf (charge +1), a black leaf (charge -1) or an
/// inner vertex with its descendants in counterclockwise order after the parent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlossomTree {
    White,
    Black,
    Vertex(Vec<BlossomTree>),
}

impl BlossomTree {
    pub fn charge(&self) -> i64 {
        match self {
            BlossomTree::White => 1,
            BlossomTree::Black => -1,
            BlossomTree::Vertex(c) => c.iter().map(|t| t.charge()).sum(),
        }
    }

    pub fn vertices(&self) -> usize {
        match self {
            BlossomTree::Vertex(c) => 1 + c.iter().map(|t| t.vertices()).sum::<usize>(),
            _ => 0,
        }
    }

    /// Every subtree that is not a black leaf has charge +1, and valences are even.
    pub fn validate(&self) -> Result<(), BijectionError> {
        if *self == BlossomTree::Black {
            return Err(BijectionError::NotBlossom("root subtree is a black leaf".into()));
        }
        self.check()
    }

    fn check(&self) -> Result<(), BijectionError> {
        if let BlossomTree::Vertex(c) = self {
            if (c.len() + 1) % 2 == 1 || c.len() < 1 {
                return Err(BijectionError::NotBlossom(format!("vertex of valence {}", c.len() + 1)));
            }
            for t in c {
                t.check()?;
            }
        }
        if *self != BlossomTree::Black && self.charge() != 1 {
            return Err(BijectionError::NotBlossom(format!("subtree of charge {}", self.charge())));
        }
        Ok(())
    }
}

/// Planar map with two univalent legs; `map.root` is the out-leg dart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoLegMap {
    pub map: CombinatorialMap,
    pub in_leg: usize,
    pub out_leg: usize,
}

impl TwoLegMap {
    pub fn validate(&self) -> Result<(), BijectionError> {
        let bad = |s: &str| Err(BijectionError::NotTwoLeg(s.to_string()));
        let m = &self.map;
        let stats = m.faces_and_genus().map_err(|e| BijectionError::NotTwoLeg(e.to_string()))?;
        if stats.genera != vec![0] {
            return bad("not a connected planar map");
        }
        for leg in [self.in_leg, self.out_leg] {
            if leg >= m.num_darts() || m.sigma[leg] != leg {
                return bad("legs must be univalent");
            }
        }
        if self.in_leg == self.out_leg || m.root != Some(self.out_leg) {
            return bad("legs must be distinct with the root on the out-leg");
        }
        for cyc in m.vertex_cycles() {
            if !cyc.contains(&self.in_leg) && !cyc.contains(&self.out_leg) && cyc.len() % 2 == 1 {
                return bad("odd inner valence");
            }
        }
        Ok(())
    }

    /// Valence of every inner vertex.
    pub fn valences(&self) -> Vec<usize> {
        self.map
            .vertex_cycles()
            .into_iter()
            .filter(|c| !c.contains(&self.in_leg) && !c.contains(&self.out_leg))
            .map(|c| c.len())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Leaf {
    White,
    Black,
}

#[derive(Default)]
struct DartBuilder {
    sigma: Vec<usize>,
    alpha: Vec<usize>,
}

impl DartBuilder {
    fn dart(&mut self) -> usize {
        let d = self.sigma.len();
        self.sigma.push(d);
        self.alpha.push(usize::MAX);
        d
    }

    fn link(&mut self, a: usize, b: usize) {
        self.alpha[a] = b;
        self.alpha[b] = a;
    }

    fn cycle(&mut self, ds: &[usize]) {
        for (i, &d) in ds.iter().enumerate() {
            self.sigma[d] = ds[(i + 1) % ds.len()];
        }
    }
}

fn build_blossom(t: &BlossomTree, b: &mut DartBuilder, leaves: &mut Vec<(usize, Leaf)>) -> usize {
    match t {
        BlossomTree::White | BlossomTree::Black => {
            let l = b.dart();
            leaves.push((l, if *t == BlossomTree::White { Leaf::White } else { Leaf::Black }));
            l
        }
        BlossomTree::Vertex(children) => {
            let p = b.dart();
            let mut ring = vec![p];
            for c in children {
                let d = b.dart();
                ring.push(d);
                let top = build_blossom(c, b, leaves);
                b.link(d, top);
            }
            b.cycle(&ring);
            p
        }
    }
}

/// Keeps the listed darts and renumbers them, dropping everything else.
fn compact(sigma: &[usize], alpha: &[usize], keep: &[bool], root: usize) -> (CombinatorialMap, Vec<usize>) {
    let mut index = vec![usize::MAX; sigma.len()];
    let mut next = 0;
    for d in 0..sigma.len() {
        if keep[d] {
            index[d] = next;
            next += 1;
        }
    }
    let mut s = vec![0; next];
    let mut a = vec![0; next];
    for d in 0..sigma.len() {
        if !keep[d] {
            continue;
        }
        let mut e = sigma[d];
        while !keep[e] {
            e = sigma[e];
        }
        s[index[d]] = index[e];
        a[index[d]] = index[alpha[d]];
    }
    (CombinatorialMap { sigma: s, alpha: a, root: Some(index[root]) }, index)
}

/// Matches each black leaf to the next free white leaf counterclockwise around the tree.
pub fn blossom_close(t: &BlossomTree) -> Result<TwoLegMap, BijectionError> {
    t.validate()?;
    let mut b = DartBuilder::default();
    let mut leaves = Vec::new();
    let out = b.dart();
    let top = build_blossom(t, &mut b, &mut leaves);
    b.link(out, top);
    let color: std::collections::HashMap<usize, Leaf> = leaves.iter().copied().collect();
    // leaves in face order, walking from the out-leg
    let mut order = Vec::new();
    let mut d = out;
    loop {
        if let Some(&c) = color.get(&d) {
            order.push((d, c));
        }
        d = b.sigma[b.alpha[d]];
        if d == out {
            break;
        }
    }
    let mut stack = Vec::new();
    let mut free_white = Vec::new();
    let mut pairs = Vec::new();
    for &(l, c) in &order {
        match c {
            Leaf::Black => stack.push(l),
            Leaf::White => match stack.pop() {
                Some(bl) => pairs.push((bl, l)),
                None => free_white.push(l),
            },
        }
    }
    if free_white.len() != stack.len() + 1 {
        return Err(BijectionError::NotBlossom("leaf charges do not close up".into()));
    }
    // the leftover blacks wrap around the root to the leading free whites
    for (i, bl) in stack.iter().rev().enumerate() {
        pairs.push((*bl, free_white[i]));
    }
    let in_leaf = *free_white.last().unwrap();
    let mut keep = vec![true; b.sigma.len()];
    let mut alpha = b.alpha.clone();
    for &(bl, wl) in &pairs {
        keep[bl] = false;
        keep[wl] = false;
        let (x, y) = (b.alpha[bl], b.alpha[wl]);
        alpha[x] = y;
        alpha[y] = x;
    }
    let (map, index) = compact(&b.sigma, &alpha, &keep, out);
    Ok(TwoLegMap { map, in_leg: index[in_leaf], out_leg: index[out] })
}

fn vertex_ids(sigma: &[usize]) -> Vec<usize> {
    let mut id = vec![usize::MAX; sigma.len()];
    let mut next = 0;
    for s in 0..sigma.len() {
        if id[s] != usize::MAX {
            continue;
        }
        let mut d = s;
        while id[d] == usize::MAX {
            id[d] = next;
            d = sigma[d];
        }
        next += 1;
    }
    id
}

/// Iterative cutting along the face of the in-leg until a tree remains.
pub fn blossom_cut(m: &TwoLegMap) -> Result<BlossomTree, BijectionError> {
    blossom_cut_passes(m).map(|(t, _)| t)
}

/// Same as [`blossom_cut`], also returning how many edges each pass cut.
pub fn blossom_cut_passes(m: &TwoLegMap) -> Result<(BlossomTree, Vec<usize>), BijectionError> {
    m.validate()?;
    let sigma = &m.map.sigma;
    let alpha = &m.map.alpha;
    let n = sigma.len();
    let vid = vertex_ids(sigma);
    let nv = vid.iter().max().map_or(0, |x| x + 1);
    let mut cut: Vec<Option<Leaf>> = vec![None; n];
    let mut edges = n / 2;
    let connected_without = |cut: &[Option<Leaf>], d: usize| -> bool {
        let target = vid[alpha[d]];
        let mut seen = vec![false; nv];
        let mut queue = VecDeque::from([vid[d]]);
        seen[vid[d]] = true;
        // darts grouped by vertex via sigma orbits
        while let Some(v) = queue.pop_front() {
            if v == target {
                return true;
            }
            let start = (0..n).find(|&e| vid[e] == v).unwrap();
            let mut e = start;
            loop {
                if cut[e].is_none() && e != d && e != alpha[d] {
                    let w = vid[alpha[e]];
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
                e = sigma[e];
                if e == start {
                    break;
                }
            }
        }
        false
    };
    // passes around the face of the in-leg; edges cut during a pass keep their place
    // in the walk, and the next pass follows the enlarged face
    let mut passes = Vec::new();
    while edges + 1 > nv {
        passes.push(0);
        if passes.len() > n {
            return Err(BijectionError::NotTwoLeg("cutting stalled".into()));
        }
        let mut walk = vec![m.in_leg];
        loop {
            let d = *walk.last().unwrap();
            let e = if cut[d].is_some() { sigma[d] } else { sigma[alpha[d]] };
            if e == m.in_leg {
                break;
            }
            walk.push(e);
        }
        for d in walk {
            if cut[d].is_none() && connected_without(&cut, d) {
                cut[d] = Some(Leaf::Black);
                cut[alpha[d]] = Some(Leaf::White);
                edges -= 1;
                *passes.last_mut().unwrap() += 1;
            }
        }
    }
    fn node(d: usize, m: &TwoLegMap, cut: &[Option<Leaf>]) -> BlossomTree {
        let sigma = &m.map.sigma;
        let mut children = Vec::new();
        let mut c = sigma[d];
        while c != d {
            children.push(match cut[c] {
                Some(Leaf::Black) => BlossomTree::Black,
                Some(Leaf::White) => BlossomTree::White,
                None if m.map.alpha[c] == m.in_leg => BlossomTree::White,
                None => node(m.map.alpha[c], m, cut),
            });
            c = sigma[c];
        }
        BlossomTree::Vertex(children)
    }
    let top = alpha[m.out_leg];
    let t = if top == m.in_leg { BlossomTree::White } else { node(top, m, &cut) };
    t.validate()?;
    Ok((t, passes))
}

/// All blossom trees with `vertices` inner vertices whose valences lie in `valences`.
pub fn enumerate_blossom_trees(valences: &[usize], vertices: usize, cap: usize) -> Result<Vec<BlossomTree>, BijectionError> {
    if vertices > cap {
        return Err(BijectionError::TooLarge(vertices, cap));
    }
    if let Some(v) = valences.iter().find(|v| **v % 2 == 1 || **v < 2) {
        return Err(BijectionError::NotBlossom(format!("valence {v} is not even")));
    }
    let mut memo: Vec<Vec<BlossomTree>> = Vec::new();
    for size in 0..=vertices {
        let mut out = Vec::new();
        if size == 0 {
            out.push(BlossomTree::White);
        }
        for &val in valences {
            if size == 0 {
                break;
            }
            let k = val / 2;
            for blacks in black_positions(val - 1, k - 1) {
                forests(&memo, k, size - 1, &mut |subs: &[&BlossomTree]| {
                    let mut it = subs.iter();
                    let children =
                        (0..val - 1).map(|i| if blacks[i] { BlossomTree::Black } else { (*it.next().unwrap()).clone() }).collect();
                    out.push(BlossomTree::Vertex(children));
                });
            }
        }
        memo.push(out);
    }
    Ok(memo.pop().unwrap())
}

fn black_positions(slots: usize, blacks: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << slots) {
        if mask.count_ones() as usize == blacks {
            out.push((0..slots).map(|i| mask >> i & 1 == 1).collect());
        }
    }
    out
}

/// Calls `f` on every sequence of `parts` trees whose sizes sum to `total`.
fn forests(memo: &[Vec<BlossomTree>], parts: usize, total: usize, f: &mut dyn FnMut(&[&BlossomTree])) {
    fn rec<'a>(memo: &'a [Vec<BlossomTree>], parts: usize, total: usize, acc: &mut Vec<&'a BlossomTree>, f: &mut dyn FnMut(&[&BlossomTree])) {
        if parts == 0 {
            if total == 0 {
                f(acc);
            }
            return;
        }
        for s in 0..=total {
            for t in &memo[s] {
                acc.push(t);
                rec(memo, parts - 1, total - s, acc, f);
                acc.pop();
            }
        }
    }
    rec(memo, parts, total, &mut Vec::new(), f);
}

/// Plane tree with labels; children are listed counterclockwise after the parent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WellLabeledTree {
    pub label: u32,
    pub children: Vec<WellLabeledTree>,
}

impl WellLabeledTree {
    pub fn leaf(label: u32) -> Self {
        WellLabeledTree { label, children: Vec::new() }
    }

    pub fn edges(&self) -> usize {
        self.children.iter().map(|c| 1 + c.edges()).sum()
    }

    pub fn validate(&self) -> Result<(), BijectionError> {
        for c in &self.children {
            if self.label.abs_diff(c.label) > 1 {
                return Err(BijectionError::NotWellLabeled(format!("labels {} and {} are adjacent", self.label, c.label)));
            }
            c.validate()?;
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<u32> {
        let mut out = vec![self.label];
        for c in &self.children {
            out.extend(c.labels());
        }
        out
    }
}

/// All rooted well-labeled trees with the given root label and edge count.
pub fn enumerate_well_labeled(root: u32, edges: usize, max_label: Option<u32>, cap: usize) -> Result<Vec<WellLabeledTree>, BijectionError> {
    if edges > cap {
        return Err(BijectionError::TooLarge(edges, cap));
    }
    fn trees(label: u32, e: usize, max: Option<u32>) -> Vec<WellLabeledTree> {
        forest(label, e, max).into_iter().map(|children| WellLabeledTree { label, children }).collect()
    }
    fn forest(label: u32, e: usize, max: Option<u32>) -> Vec<Vec<WellLabeledTree>> {
        if e == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for k in 0..e {
            for l in [label.wrapping_sub(1), label, label + 1] {
                if l == u32::MAX || max.is_some_and(|m| l > m) {
                    continue;
                }
                let firsts = trees(l, k, max);
                let rests = forest(label, e - 1 - k, max);
                for f in &firsts {
                    for r in &rests {
                        let mut v = Vec::with_capacity(r.len() + 1);
                        v.push(f.clone());
                        v.extend(r.iter().cloned());
                        out.push(v);
                    }
                }
            }
        }
        out
    }
    if max_label.is_some_and(|m| root > m) {
        return Ok(Vec::new());
    }
    Ok(trees(root, edges, max_label))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Confluent,
    Normal,
}

/// Rooted planar quadrangulation; the origin is the start vertex of the root dart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedQuadrangulation {
    pub map: CombinatorialMap,
}

impl RootedQuadrangulation {
    pub fn new(map: CombinatorialMap) -> Result<Self, BijectionError> {
        let q = RootedQuadrangulation { map };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), BijectionError> {
        let bad = |s: &str| Err(BijectionError::NotQuadrangulation(s.to_string()));
        let m = &self.map;
        if m.root.is_none() {
            return bad("no root");
        }
        let stats = m.faces_and_genus().map_err(|e| BijectionError::NotQuadrangulation(e.to_string()))?;
        if stats.genera != vec![0] {
            return bad("not a connected planar map");
        }
        if m.face_cycles().iter().any(|f| f.len() != 4) {
            return bad("a face is not a quadrangle");
        }
        if stats.vertices != stats.faces + 2 {
            return bad("Euler relation fails");
        }
        let lab = self.distances();
        if (0..m.num_darts()).any(|d| lab[d].abs_diff(lab[m.alpha[d]]) != 1) {
            return bad("not bipartite");
        }
        Ok(())
    }

    pub fn faces(&self) -> usize {
        self.map.num_darts() / 4
    }

    /// Distance from the origin of the vertex at each dart.
    pub fn distances(&self) -> Vec<u32> {
        let m = &self.map;
        let n = m.num_darts();
        let vid = vertex_ids(&m.sigma);
        let nv = vid.iter().max().map_or(0, |x| x + 1);
        let mut dist = vec![u32::MAX; nv];
        let mut darts_of = vec![Vec::new(); nv];
        for d in 0..n {
            darts_of[vid[d]].push(d);
        }
        let o = vid[m.root.unwrap_or(0)];
        dist[o] = 0;
        let mut queue = VecDeque::from([o]);
        while let Some(v) = queue.pop_front() {
            for &d in &darts_of[v] {
                let w = vid[m.alpha[d]];
                if dist[w] == u32::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (0..n).map(|d| dist[vid[d]]).collect()
    }

    /// Number of vertices at each distance from the origin.
    pub fn distance_profile(&self) -> Vec<u64> {
        let lab = self.distances();
        let mut out = Vec::new();
        for cyc in self.map.vertex_cycles() {
            let l = lab[cyc[0]] as usize;
            if out.len() <= l {
                out.resize(l + 1, 0);
            }
            out[l] += 1;
        }
        out
    }

    /// Number of edges `n -> n+1` for each `n`.
    pub fn edge_profile(&self) -> Vec<u64> {
        let lab = self.distances();
        let mut out = Vec::new();
        for d in 0..self.map.num_darts() {
            let (a, b) = (lab[d], lab[self.map.alpha[d]]);
            if b == a + 1 {
                if out.len() <= a as usize {
                    out.resize(a as usize + 1, 0);
                }
                out[a as usize] += 1;
            }
        }
        out
    }

    /// Confluent faces read `l, l+1, l, l+1`; normal faces `l, l+1, l+2, l+1`.
    pub fn face_kinds(&self) -> Vec<FaceKind> {
        let lab = self.distances();
        self.map
            .face_cycles()
            .iter()
            .map(|f| {
                let ls: Vec<u32> = f.iter().map(|&d| lab[d]).collect();
                let lo = *ls.iter().min().unwrap();
                if ls.iter().filter(|&&l| l == lo).count() == 2 {
                    FaceKind::Confluent
                } else {
                    FaceKind::Normal
                }
            })
            .collect()
    }

    /// Canonical relabeling; equal iff the rooted maps are isomorphic.
    pub fn canonical(&self) -> (Vec<usize>, Vec<usize>) {
        self.map.canonical_form()
    }
}

/// Quadrangulation to well-labeled tree: one new edge per face between the two
/// corners followed, along the face, by a label one less.
pub fn cvs_forward(q: &RootedQuadrangulation) -> Result<WellLabeledTree, BijectionError> {
    q.validate()?;
    let m = &q.map;
    let n = m.num_darts();
    let lab = q.distances();
    // partner[c] = the other corner of the tree edge drawn at corner c
    let mut partner = vec![usize::MAX; n];
    for f in m.face_cycles() {
        let picked: Vec<usize> = (0..4).filter(|&k| lab[f[(k + 3) % 4]] + 1 == lab[f[k]]).map(|k| f[k]).collect();
        if picked.len() != 2 {
            return Err(BijectionError::NotQuadrangulation("face without two descending corners".into()));
        }
        partner[picked[0]] = picked[1];
        partner[picked[1]] = picked[0];
    }
    let mut before = vec![0; n];
    for d in 0..n {
        before[m.sigma[d]] = d;
    }
    // tree darts clockwise around the map vertex of corner c; a child corner skips
    // its own parent edge, while the root starts at the root corner itself
    let kids = |c: usize, root: bool| {
        let mut out = Vec::new();
        let mut e = m.sigma[c];
        loop {
            if partner[e] != usize::MAX && (root || e != c) {
                out.push(partner[e]);
            }
            if e == c {
                break;
            }
            e = m.sigma[e];
        }
        out
    };
    fn grow(c: usize, lab: &[u32], kids: &dyn Fn(usize, bool) -> Vec<usize>) -> WellLabeledTree {
        let children = kids(c, false).into_iter().map(|k| grow(k, lab, kids)).collect();
        WellLabeledTree { label: lab[c] - 1, children }
    }
    let r = m.root.unwrap();
    let start = m.alpha[r];
    let children = kids(start, true).into_iter().map(|k| grow(k, &lab, &kids)).collect();
    Ok(WellLabeledTree { label: lab[start] - 1, children })
}

/// Well-labeled tree (root label 0) to quadrangulation: every corner is joined to the
/// next corner counterclockwise with a label one less, or to a new origin.
pub fn cvs_inverse(t: &WellLabeledTree) -> Result<RootedQuadrangulation, BijectionError> {
    t.validate()?;
    if t.label != 0 {
        return Err(BijectionError::NotWellLabeled(format!("root label {} is not 0", t.label)));
    }
    if t.edges() == 0 {
        return Err(BijectionError::NotWellLabeled("tree has no edge".into()));
    }
    // tree as a map: each node's ring is (parent side, children...)
    let mut b = DartBuilder::default();
    let mut dist = Vec::new();
    fn build(t: &WellLabeledTree, up: Option<usize>, b: &mut DartBuilder, dist: &mut Vec<u32>) -> Option<usize> {
        let mut ring = Vec::new();
        if let Some(u) = up {
            ring.push(u);
        }
        let mut first = None;
        for c in &t.children {
            let d = b.dart();
            dist.push(t.label + 1);
            let cu = b.dart();
            dist.push(c.label + 1);
            b.link(d, cu);
            ring.push(d);
            first.get_or_insert(d);
            build(c, Some(cu), b, dist);
        }
        if !ring.is_empty() {
            b.cycle(&ring);
        }
        first
    }
    let d0 = build(t, None, &mut b, &mut dist).unwrap();
    let nt = b.sigma.len();
    let mut contour = Vec::with_capacity(nt);
    let mut d = d0;
    loop {
        contour.push(d);
        d = b.sigma[b.alpha[d]];
        if d == d0 {
            break;
        }
    }
    let len = contour.len();
    let mut pos = vec![0; nt];
    for (i, &d) in contour.iter().enumerate() {
        pos[d] = i;
    }
    let cl: Vec<u32> = contour.iter().map(|&d| dist[d]).collect();
    // successor corner with label one less, scanning the doubled contour backwards
    let maxl = *cl.iter().max().unwrap() as usize;
    let mut nearest = vec![usize::MAX; maxl + 2];
    let mut succ = vec![usize::MAX; len];
    for k in (0..2 * len).rev() {
        let i = k % len;
        let l = cl[i] as usize;
        if k < len && l > 1 {
            succ[i] = nearest[l - 1] % len;
        }
        nearest[l] = k;
    }
    // new darts: out[i] at corner i, inn[i] at its target
    let base = nt;
    let out = |i: usize| base + 2 * i;
    let inn = |i: usize| base + 2 * i + 1;
    let total = base + 2 * len;
    let mut alpha = vec![usize::MAX; total];
    let mut sigma = vec![usize::MAX; total];
    for i in 0..len {
        alpha[out(i)] = inn(i);
        alpha[inn(i)] = out(i);
    }
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); len];
    let mut to_origin = Vec::new();
    for i in 0..len {
        if cl[i] == 1 {
            to_origin.push(i);
        } else {
            incoming[succ[i]].push(i);
        }
    }
    // innermost arcs (shortest span) sit next to the incoming tree side
    for (t, list) in incoming.iter_mut().enumerate() {
        list.sort_by_key(|&j| (t + len - j) % len);
    }
    for v in vertex_cycles_of(&b.sigma) {
        let mut ring = Vec::new();
        for &td in &v {
            let c = pos[td];
            ring.extend(incoming[c].iter().map(|&j| inn(j)));
            ring.push(out(c));
        }
        for (k, &x) in ring.iter().enumerate() {
            sigma[x] = ring[(k + 1) % ring.len()];
        }
    }
    let mut origin_ring: Vec<usize> = to_origin.iter().map(|&i| inn(i)).collect();
    origin_ring.reverse();
    for (k, &x) in origin_ring.iter().enumerate() {
        sigma[x] = origin_ring[(k + 1) % origin_ring.len()];
    }
    let s: Vec<usize> = (base..total).map(|x| sigma[x] - base).collect();
    let a: Vec<usize> = (base..total).map(|x| alpha[x] - base).collect();
    let map = CombinatorialMap { sigma: s, alpha: a, root: Some(inn(0) - base) };
    RootedQuadrangulation::new(map)
}

fn vertex_cycles_of(sigma: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; sigma.len()];
    let mut out = Vec::new();
    for s in 0..sigma.len() {
        if seen[s] {
            continue;
        }
        let mut c = Vec::new();
        let mut d = s;
        while !seen[d] {
            seen[d] = true;
            c.push(d);
            d = sigma[d];
        }
        out.push(c);
    }
    out
}

/// Per-sample generator keyed by `(seed, index)`, so parallel draws are reproducible.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform Dyck word of semilength `a` (`true` = away from the root), by the cycle lemma.
pub fn random_dyck<R: Rng>(a: usize, rng: &mut R) -> Vec<bool> {
    let mut steps: Vec<bool> = std::iter::repeat(true).take(a).chain(std::iter::repeat(false).take(a + 1)).collect();
    steps.shuffle(rng);
    let mut h = 0i64;
    let mut low = 0i64;
    let mut at = 0;
    for (i, &s) in steps.iter().enumerate() {
        h += if s { 1 } else { -1 };
        if h < low {
            low = h;
            at = i + 1;
        }
    }
    let mut w: Vec<bool> = steps[at..].iter().chain(steps[..at].iter()).copied().collect();
    w.pop();
    w
}

/// Plane tree from a Dyck word with labels from edge increments; `None` if a label goes negative.
pub fn labeled_tree_from_dyck(word: &[bool], increments: &[i8], root: u32) -> Option<WellLabeledTree> {
    let mut stack = vec![WellLabeledTree::leaf(root)];
    let mut k = 0;
    for &up in word {
        if up {
            let l = stack.last().unwrap().label as i64 + increments[k] as i64;
            k += 1;
            if l < 0 {
                return None;
            }
            stack.push(WellLabeledTree::leaf(l as u32));
        } else {
            let c = stack.pop().unwrap();
            stack.last_mut().unwrap().children.push(c);
        }
    }
    stack.pop()
}

/// One proposal: uniform plane tree with `a` edges and uniform increments in {-1, 0, 1};
/// `None` when a label goes negative.
///
/// The Dyck word is drawn step by step from ballot-number transition probabilities,
/// which is the same uniform law as [`random_dyck`] but lets a doomed proposal stop
/// at its first negative label.
pub fn propose_labeled_tree<R: Rng>(a: usize, rng: &mut R) -> Option<WellLabeledTree> {
    let mut word = Vec::with_capacity(2 * a);
    let mut inc = Vec::with_capacity(a);
    let mut labels = vec![0i64];
    for step in 0..2 * a {
        let m = (2 * a - step) as u64;
        let h = (labels.len() - 1) as u64;
        // up with probability (m - h)(h + 2) / (2 m (h + 1))
        let up = rng.gen_ratio(((m - h) * (h + 2)) as u32, (2 * m * (h + 1)) as u32);
        if up {
            let d = rng.gen_range(-1i8..=1);
            let l = labels.last().unwrap() + d as i64;
            if l < 0 {
                return None;
            }
            labels.push(l);
            inc.push(d);
        } else {
            labels.pop();
        }
        word.push(up);
    }
    labeled_tree_from_dyck(&word, &inc, 0)
}

/// Proposal built from the cycle-lemma word; slower, kept as a cross-check.
pub fn propose_labeled_tree_cyclic<R: Rng>(a: usize, rng: &mut R) -> Option<WellLabeledTree> {
    let word = random_dyck(a, rng);
    let inc: Vec<i8> = (0..a).map(|_| rng.gen_range(-1i8..=1)).collect();
    labeled_tree_from_dyck(&word, &inc, 0)
}

/// Uniform rooted quadrangulation with `a` faces, and the number of proposals used.
pub fn sample_quadrangulation(a: usize, seed: u64, index: u64) -> Result<(RootedQuadrangulation, u64), BijectionError> {
    assert!(a >= 1, "need at least one face");
    let mut rng = sample_rng(seed, index);
    let mut tries = 0;
    loop {
        tries += 1;
        if let Some(t) = propose_labeled_tree(a, &mut rng) {
            return Ok((cvs_inverse(&t)?, tries));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn empty_blossom_is_one_edge() {
        let m = blossom_close(&BlossomTree::White).unwrap();
        assert_eq!(m.map.num_darts(), 2);
        assert_eq!(m.map.alpha[m.in_leg], m.out_leg);
        assert_eq!(blossom_cut(&m).unwrap(), BlossomTree::White);
        assert!(blossom_close(&BlossomTree::Black).is_err());
    }

    #[test]
    fn blossom_counts_and_round_trip() {
        let want = [1usize, 3, 18, 135];
        for (a, &w) in want.iter().enumerate() {
            let trees = enumerate_blossom_trees(&[4], a, DEFAULT_TREE_CAP).unwrap();
            assert_eq!(trees.len(), w);
            let mut forms = BTreeSet::new();
            for t in &trees {
                assert!(t.validate().is_ok());
                let m = blossom_close(t).unwrap();
                m.validate().unwrap();
                assert!(m.valences().iter().all(|&v| v == 4));
                assert_eq!(m.map.faces_and_genus().unwrap().genera, vec![0]);
                assert_eq!(&blossom_cut(&m).unwrap(), t);
                forms.insert(m.map.canonical_form());
            }
            assert_eq!(forms.len(), w);
        }
    }

    #[test]
    fn six_cuts_in_two_turns() {
        let trees = enumerate_blossom_trees(&[4], 6, DEFAULT_TREE_CAP).unwrap();
        assert_eq!(trees.len(), 96228);
        let mut profiles = BTreeSet::new();
        for t in trees.iter().step_by(7) {
            let (back, passes) = blossom_cut_passes(&blossom_close(t).unwrap()).unwrap();
            assert_eq!(&back, t);
            assert_eq!(passes.iter().sum::<usize>(), 6);
            profiles.insert(passes);
        }
        assert!(profiles.contains(&vec![3, 3]));
        assert!(profiles.contains(&vec![6]));
    }

    #[test]
    fn one_vertex_maps_have_one_black_leaf() {
        for t in enumerate_blossom_trees(&[4], 1, DEFAULT_TREE_CAP).unwrap() {
            let BlossomTree::Vertex(c) = &t else { panic!() };
            assert_eq!(c.iter().filter(|x| **x == BlossomTree::Black).count(), 1);
        }
    }

    #[test]
    fn mixed_even_valences() {
        let trees = enumerate_blossom_trees(&[4, 6], 2, DEFAULT_TREE_CAP).unwrap();
        // R = 1 + 3gR^2 + 10gR^3: [g^2] = 3*2*3 + 10*3*3 + 3*2*10 + 10*3*10
        assert_eq!(trees.len(), 18 + 90 + 60 + 300);
        for t in &trees {
            let m = blossom_close(t).unwrap();
            assert_eq!(&blossom_cut(&m).unwrap(), t);
        }
        assert!(enumerate_blossom_trees(&[3], 1, 8).is_err());
        assert!(matches!(enumerate_blossom_trees(&[4], 9, 8), Err(BijectionError::TooLarge(9, 8))));
    }

    #[test]
    fn well_labeled_counts() {
        let want = [2usize, 9, 54, 378];
        for (i, &w) in want.iter().enumerate() {
            assert_eq!(enumerate_well_labeled(0, i + 1, None, DEFAULT_TREE_CAP).unwrap().len(), w);
        }
        for n in 1..4 {
            assert_eq!(enumerate_well_labeled(n, 1, None, DEFAULT_TREE_CAP).unwrap().len(), 3);
        }
        assert_eq!(enumerate_well_labeled(0, 2, Some(0), DEFAULT_TREE_CAP).unwrap().len(), 2);
    }

    #[test]
    fn size_one_quadrangulations() {
        let path = WellLabeledTree { label: 0, children: vec![WellLabeledTree::leaf(1)] };
        let q = cvs_inverse(&path).unwrap();
        let d = q.distances();
        assert_eq!(d[q.map.root.unwrap()], 0);
        assert_eq!(q.distance_profile(), vec![1, 1, 1]);
        assert_eq!(q.face_kinds(), vec![FaceKind::Normal]);
        let star = WellLabeledTree { label: 0, children: vec![WellLabeledTree::leaf(0)] };
        let q2 = cvs_inverse(&star).unwrap();
        assert_eq!(q2.distance_profile(), vec![1, 2]);
        assert_eq!(q2.face_kinds(), vec![FaceKind::Confluent]);
        assert_ne!(q.canonical(), q2.canonical());
        assert_eq!(cvs_forward(&q).unwrap(), path);
        assert_eq!(cvs_forward(&q2).unwrap(), star);
    }

    #[test]
    fn cvs_round_trips() {
        for a in 1..=4 {
            let trees = enumerate_well_labeled(0, a, None, DEFAULT_TREE_CAP).unwrap();
            let mut forms = BTreeSet::new();
            for t in &trees {
                let q = cvs_inverse(t).unwrap();
                assert_eq!(q.faces(), a);
                assert_eq!(&cvs_forward(&q).unwrap(), t);
                // tree label l sits at distance l + 1
                let mut from_tree: Vec<u32> = t.labels().iter().map(|l| l + 1).collect();
                from_tree.push(0);
                from_tree.sort_unstable();
                let mut from_map: Vec<u32> = q.map.vertex_cycles().iter().map(|c| q.distances()[c[0]]).collect();
                from_map.sort_unstable();
                assert_eq!(from_tree, from_map);
                forms.insert(q.canonical());
            }
            assert_eq!(forms.len(), trees.len());
        }
        let bad = WellLabeledTree { label: 0, children: vec![WellLabeledTree::leaf(2)] };
        assert!(matches!(cvs_inverse(&bad), Err(BijectionError::NotWellLabeled(_))));
    }

    #[test]
    fn dyck_words_are_balanced() {
        let mut rng = sample_rng(3, 0);
        for a in [1usize, 5, 40] {
            let w = random_dyck(a, &mut rng);
            assert_eq!(w.len(), 2 * a);
            let mut h = 0i64;
            for &s in &w {
                h += if s { 1 } else { -1 };
                assert!(h >= 0);
            }
            assert_eq!(h, 0);
        }
    }

    #[test]
    fn acceptance_rate_at_fifty() {
        let a = 50;
        let p = 2.0 / (a as f64 + 2.0);
        let trials = 10_000;
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        let mut rng = sample_rng(11, 0);
        let fast = (0..trials).filter(|_| propose_labeled_tree(a, &mut rng).is_some()).count();
        let slow = (0..trials).filter(|_| propose_labeled_tree_cyclic(a, &mut rng).is_some()).count();
        for hits in [fast, slow] {
            let rate = hits as f64 / trials as f64;
            assert!((rate - p).abs() < 3.0 * sd, "rate {rate} vs {p}");
        }
    }

    #[test]
    fn both_proposals_cover_small_trees_evenly() {
        // 9 rooted maps at two faces, each hit about 3000 times
        let mut rng = sample_rng(5, 1);
        let mut fast = std::collections::BTreeMap::new();
        let mut slow = std::collections::BTreeMap::new();
        while fast.values().sum::<usize>() < 27_000 {
            if let Some(t) = propose_labeled_tree(2, &mut rng) {
                *fast.entry(t).or_insert(0) += 1;
            }
        }
        while slow.values().sum::<usize>() < 27_000 {
            if let Some(t) = propose_labeled_tree_cyclic(2, &mut rng) {
                *slow.entry(t).or_insert(0) += 1;
            }
        }
        for counts in [fast, slow] {
            assert_eq!(counts.len(), 9);
            assert!(counts.values().all(|&c| (2700..3300).contains(&c)), "{counts:?}");
        }
    }

    #[test]
    fn sampler_is_reproducible() {
        let (q1, t1) = sample_quadrangulation(30, 9, 4).unwrap();
        let (q2, t2) = sample_quadrangulation(30, 9, 4).unwrap();
        assert_eq!(q1, q2);
        assert_eq!(t1, t2);
        assert_eq!(q1.faces(), 30);
        assert_eq!(cvs_inverse(&cvs_forward(&q1).unwrap()).unwrap().canonical(), q1.canonical());
    }
}
