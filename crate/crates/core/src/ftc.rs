//! Vertices, neighborhoods, neighborhood types and the reduced offspring graph.
//!
//! An ordinary IFS is handled as a graph-directed system with one graph vertex
//! and only self-loops, so one engine serves both cases. Exploration is driven
//! by types: a type is expanded once through a representative vertex and its
//! neighborhood, which is enough because every neighbor of a child is a child
//! of a neighbor of the parent.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{bbox_may_overlap, open_overlap, ConvexPolygon, Point, Similitude};
use crate::index_sets::{check_contractive, extensions, word_label, Alphabet, IndexSetRule, Word};
use crate::parallel::par_map;
use crate::scalar::QuadScalar;

/// A validated (graph-directed) system of contractive similitudes with an
/// invariant family of open convex regions.
#[derive(Debug, Clone)]
pub struct System {
    maps: Vec<Similitude>,
    ratios: Vec<QuadScalar>,
    from: Vec<usize>,
    to: Vec<usize>,
    omegas: Vec<ConvexPolygon>,
    successors: Vec<Vec<usize>>,
    labels: Vec<String>,
}

impl System {
    /// Edge `e` maps `omegas[to[e]]` into `omegas[from[e]]`.
    pub fn new(
        maps: Vec<Similitude>,
        from: Vec<usize>,
        to: Vec<usize>,
        omegas: Vec<ConvexPolygon>,
        labels: Vec<String>,
    ) -> Result<System> {
        if maps.is_empty() {
            return Err(Error::model("the system has no maps"));
        }
        if omegas.is_empty() {
            return Err(Error::model("the system has no invariant region"));
        }
        let n = maps.len();
        if from.len() != n || to.len() != n || labels.len() != n {
            return Err(Error::Internal("edge tables of different lengths".into()));
        }
        let dim = omegas[0].dim();
        if let Some(i) = omegas.iter().position(|o| o.dim() != dim) {
            return Err(Error::model(format!(
                "region {} has a different dimension",
                i + 1
            )));
        }
        for (e, m) in maps.iter().enumerate() {
            if m.dim() != dim {
                return Err(Error::model(format!(
                    "map {} acts on dimension {}, regions on {dim}",
                    labels[e],
                    m.dim()
                )));
            }
            if from[e] >= omegas.len() || to[e] >= omegas.len() {
                return Err(Error::model(format!(
                    "edge {} refers to a missing graph vertex",
                    labels[e]
                )));
            }
        }
        let ratios: Vec<QuadScalar> = maps.iter().map(|m| m.ratio().clone()).collect();
        check_contractive(&ratios)?;
        let t = omegas.len();
        let mut successors = vec![Vec::new(); t];
        for e in 0..n {
            successors[from[e]].push(e);
        }
        let system = System {
            maps,
            ratios,
            from,
            to,
            omegas,
            successors,
            labels,
        };
        system.check_reachable_out_edges()?;
        if let Some(v) = system.invariance_violations().into_iter().next() {
            return Err(Error::model(v.to_string()));
        }
        Ok(system)
    }

    /// An ordinary IFS on one invariant region.
    pub fn ifs(maps: Vec<Similitude>, omega: ConvexPolygon) -> Result<System> {
        let n = maps.len();
        let labels = (1..=n).map(|i| format!("f{i}")).collect();
        System::new(maps, vec![0; n], vec![0; n], vec![omega], labels)
    }

    fn check_reachable_out_edges(&self) -> Result<()> {
        // every graph vertex is the start of a root, so all must have out-edges
        for (i, succ) in self.successors.iter().enumerate() {
            if succ.is_empty() {
                return Err(Error::model(format!(
                    "graph vertex {} has no outgoing edge",
                    i + 1
                )));
            }
        }
        if self.successors.iter().all(|s| s.len() == 1) {
            return Err(Error::model(
                "every graph vertex has a single outgoing map, so the attractor is finite (degenerate system)",
            ));
        }
        Ok(())
    }

    /// Edges whose image region leaves the region of their initial vertex.
    pub fn invariance_violations(&self) -> Vec<InvarianceViolation> {
        let mut out = Vec::new();
        for e in 0..self.maps.len() {
            let image = self.omegas[self.to[e]].map(&self.maps[e]);
            if let Some(w) = self.omegas[self.from[e]].containment_witness(&image) {
                out.push(InvarianceViolation {
                    edge: self.labels[e].clone(),
                    from: self.from[e] + 1,
                    to: self.to[e] + 1,
                    witness: w.iter().map(|x| x.to_string()).collect(),
                });
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.omegas[0].dim()
    }

    pub fn graph_vertices(&self) -> usize {
        self.omegas.len()
    }

    pub fn maps(&self) -> &[Similitude] {
        &self.maps
    }

    pub fn omegas(&self) -> &[ConvexPolygon] {
        &self.omegas
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edge_from(&self, e: usize) -> usize {
        self.from[e]
    }

    pub fn edge_to(&self, e: usize) -> usize {
        self.to[e]
    }

    pub fn ratios(&self) -> &[QuadScalar] {
        &self.ratios
    }

    pub fn default_rule(&self) -> IndexSetRule {
        IndexSetRule::default_for(&self.ratios)
    }

    /// `S_w` for an admissible word.
    pub fn word_map(&self, word: &[usize]) -> Similitude {
        word.iter()
            .fold(Similitude::identity(self.dim()), |acc, &s| {
                acc.compose(&self.maps[s])
            })
    }

    pub fn label(&self, word: &[usize]) -> String {
        if self.graph_vertices() == 1
            && self
                .labels
                .iter()
                .enumerate()
                .all(|(i, l)| *l == format!("f{}", i + 1))
        {
            return word_label(word, self.maps.len());
        }
        word.iter()
            .map(|&s| self.labels[s].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// `S_v(Ω_{j_v})`.
    pub fn image(&self, v: &Vertex) -> ConvexPolygon {
        self.omegas[v.terminal].map(&v.map)
    }

    pub fn roots(&self) -> Vec<Vertex> {
        (0..self.graph_vertices())
            .map(|i| Vertex {
                map: Similitude::identity(self.dim()),
                initial: i,
                terminal: i,
                level: 0,
                word: Vec::new(),
                scale: QuadScalar::one(),
            })
            .collect()
    }
}

impl Alphabet for System {
    fn len(&self) -> usize {
        self.maps.len()
    }
    fn ratio(&self, symbol: usize) -> &QuadScalar {
        &self.ratios[symbol]
    }
    fn successors(&self, state: usize) -> &[usize] {
        &self.successors[state]
    }
    fn target(&self, symbol: usize) -> usize {
        self.to[symbol]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvarianceViolation {
    pub edge: String,
    pub from: usize,
    pub to: usize,
    /// A vertex of the image polygon outside the closure of the target region.
    pub witness: Vec<String>,
}

impl std::fmt::Display for InvarianceViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "edge {} maps region {} outside region {}: image vertex ({}) is not in the closure",
            self.edge,
            self.to,
            self.from,
            self.witness.join(", ")
        )
    }
}

/// A vertex `(S_u, i, j, k)`: a distinct map at level `k` together with the
/// lexicographically least word realizing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub map: Similitude,
    pub initial: usize,
    pub terminal: usize,
    pub level: usize,
    pub word: Word,
    /// `ρ_u / base^k` under ratio stopping, 1 under fixed length.
    pub scale: QuadScalar,
}

/// Sorted normalized neighbor maps `S_ω⁻¹ S_σ` tagged with terminal vertices,
/// plus the relative scale of `ω`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeighborhoodSignature {
    pub scale: QuadScalar,
    pub entries: Vec<(Similitude, usize)>,
}

impl NeighborhoodSignature {
    /// `neighbors` must contain `v` itself.
    pub fn of(v: &Vertex, neighbors: &[Vertex]) -> NeighborhoodSignature {
        let inv = v.map.inverse();
        let mut entries: Vec<(Similitude, usize)> = neighbors
            .iter()
            .map(|s| (inv.compose(&s.map), s.terminal))
            .collect();
        entries.sort();
        NeighborhoodSignature {
            scale: v.scale.clone(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_types: usize,
    pub max_level: usize,
    pub vertex_budget: usize,
    pub verify_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_types: 256,
            max_level: 32,
            vertex_budget: 1_000_000,
            verify_depth: 2,
        }
    }
}

/// A vertex together with its neighborhood (the vertex itself first).
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub members: Vec<Vertex>,
}

impl Neighborhood {
    pub fn vertex(&self) -> &Vertex {
        &self.members[0]
    }

    pub fn signature(&self) -> NeighborhoodSignature {
        NeighborhoodSignature::of(&self.members[0], &self.members)
    }
}

/// A retained offspring edge `ω →^w σ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeEdge {
    pub target: usize,
    pub ratio: QuadScalar,
    pub word: Word,
}

#[derive(Debug, Clone)]
pub struct TypeEntry {
    pub signature: NeighborhoodSignature,
    pub representative: Vertex,
    pub neighborhood_size: usize,
    pub edges: Vec<TypeEdge>,
    /// Further vertices of this type met during exploration.
    pub other_representatives: Vec<Neighborhood>,
    rep_neighborhood: Neighborhood,
}

impl TypeEntry {
    pub fn representative_neighborhood(&self) -> &Neighborhood {
        &self.rep_neighborhood
    }
}

/// The finite set of neighborhood types and the reduced offspring structure.
#[derive(Debug, Clone)]
pub struct TypeAutomaton {
    pub rule: IndexSetRule,
    /// Types `0..roots` are the root types, one per graph vertex.
    pub roots: usize,
    pub types: Vec<TypeEntry>,
    /// Level by which every type had been expanded.
    pub fixpoint_level: usize,
    /// Types discovered but removed because no offspring survive.
    pub pruned_types: usize,
    pub vertices_generated: usize,
    lookup: HashMap<NeighborhoodSignature, Option<usize>>,
}

impl TypeAutomaton {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Type of a signature: `Some(Some(id))` if alive, `Some(None)` if it was
    /// pruned, `None` if never seen.
    pub fn classify(&self, sig: &NeighborhoodSignature) -> Option<Option<usize>> {
        self.lookup.get(sig).cloned()
    }

    /// 0/1-style counts: entry `(i, j)` is the number of edges from `i` to `j`.
    pub fn count_matrix(&self) -> Vec<Vec<usize>> {
        let q = self.len();
        let mut m = vec![vec![0; q]; q];
        for (i, t) in self.types.iter().enumerate() {
            for e in &t.edges {
                m[i][e.target] += 1;
            }
        }
        m
    }
}

struct Candidate {
    vertex: Vertex,
    parent: usize,
    ext: Word,
    ratio: QuadScalar,
}

/// Children of every member of a neighborhood, deduplicated by `(map, i, j)`,
/// each with its lexicographically smallest incoming edge. Candidates come
/// back in order of first appearance.
fn expand_neighborhood(
    system: &System,
    rule: &IndexSetRule,
    members: &[Vertex],
    generated: &mut usize,
) -> Result<Vec<Candidate>> {
    let mut out: Vec<Candidate> = Vec::new();
    let mut index: HashMap<(Similitude, usize), usize> = HashMap::new();
    for (pi, p) in members.iter().enumerate() {
        for ext in extensions(rule, system, p.terminal, &p.scale)? {
            *generated += 1;
            let map = p.map.compose(&system.word_map(&ext.word));
            let mut word = p.word.clone();
            word.extend_from_slice(&ext.word);
            let key = (map, ext.end_state);
            match index.get(&key) {
                Some(&ci) => {
                    let c = &mut out[ci];
                    let parent_word = &members[c.parent].word;
                    if (&ext.word, &p.word) < (&c.ext, parent_word) {
                        c.parent = pi;
                        c.ext = ext.word.clone();
                        c.ratio = ext.ratio.clone();
                    }
                    if word < c.vertex.word {
                        c.vertex.word = word;
                    }
                }
                None => {
                    index.insert(key.clone(), out.len());
                    out.push(Candidate {
                        vertex: Vertex {
                            map: key.0,
                            initial: p.initial,
                            terminal: ext.end_state,
                            level: p.level + 1,
                            word,
                            scale: ext.scale.clone(),
                        },
                        parent: pi,
                        ext: ext.word,
                        ratio: ext.ratio,
                    });
                }
            }
        }
    }
    Ok(out)
}

struct Offspring {
    nbhd: Neighborhood,
    ext: Word,
    ratio: QuadScalar,
}

/// Retained offspring of `nbhd.vertex()`, each with its own neighborhood, in
/// order of extension word.
fn offspring(
    system: &System,
    rule: &IndexSetRule,
    nbhd: &Neighborhood,
    generated: &mut usize,
) -> Result<Vec<Offspring>> {
    let cands = expand_neighborhood(system, rule, &nbhd.members, generated)?;
    let images: Vec<ConvexPolygon> = cands.iter().map(|c| system.image(&c.vertex)).collect();
    let boxes: Vec<_> = images.iter().map(|p| p.bbox_f64()).collect();
    let mut out = Vec::new();
    for (ci, c) in cands.iter().enumerate() {
        if c.parent != 0 {
            continue;
        }
        let mut members = vec![c.vertex.clone()];
        let mut others: Vec<&Vertex> = Vec::new();
        for (di, d) in cands.iter().enumerate() {
            if di != ci
                && d.vertex.initial == c.vertex.initial
                && bbox_may_overlap(&boxes[ci], &boxes[di])
                && open_overlap(&images[ci], &images[di])
            {
                others.push(&d.vertex);
            }
        }
        others.sort_by(|a, b| a.word.cmp(&b.word));
        members.extend(others.into_iter().cloned());
        out.push(Offspring {
            nbhd: Neighborhood { members },
            ext: c.ext.clone(),
            ratio: c.ratio.clone(),
        });
    }
    out.sort_by(|a, b| a.ext.cmp(&b.ext));
    Ok(out)
}

struct RawType {
    signature: NeighborhoodSignature,
    reps: Vec<Neighborhood>,
    edges: Vec<(usize, QuadScalar, Word)>,
}

/// Breadth-first type discovery until every type has been expanded, followed
/// by pruning of types without surviving offspring.
pub fn explore(system: &System, rule: &IndexSetRule, limits: &Limits) -> Result<TypeAutomaton> {
    rule.validate()?;
    let mut types: Vec<RawType> = Vec::new();
    let mut index: HashMap<NeighborhoodSignature, usize> = HashMap::new();
    for root in system.roots() {
        let nbhd = Neighborhood {
            members: vec![root],
        };
        let sig = nbhd.signature();
        index.insert(sig.clone(), types.len());
        types.push(RawType {
            signature: sig,
            reps: vec![nbhd],
            edges: Vec::new(),
        });
    }
    let mut generated = 0usize;
    let mut max_level = 0usize;
    let mut next = 0usize;
    while next < types.len() {
        let rep = types[next].reps[0].clone();
        let kids = offspring(system, rule, &rep, &mut generated)?;
        if generated > limits.vertex_budget {
            return Err(Error::NotDetected {
                types_found: types.len(),
                level_reached: max_level,
                reason: format!("vertex budget of {} exceeded", limits.vertex_budget),
            });
        }
        for kid in kids {
            let sig = kid.nbhd.signature();
            let level = kid.nbhd.vertex().level;
            let target = match index.get(&sig) {
                Some(&t) => {
                    if types[t].reps.len() < 3 {
                        types[t].reps.push(kid.nbhd);
                    }
                    t
                }
                None => {
                    if types.len() >= limits.max_types {
                        return Err(Error::NotDetected {
                            types_found: types.len(),
                            level_reached: max_level,
                            reason: format!("more than {} types", limits.max_types),
                        });
                    }
                    if level > limits.max_level {
                        return Err(Error::NotDetected {
                            types_found: types.len(),
                            level_reached: level,
                            reason: format!(
                                "new types still appearing beyond level {}",
                                limits.max_level
                            ),
                        });
                    }
                    max_level = max_level.max(level);
                    index.insert(sig.clone(), types.len());
                    types.push(RawType {
                        signature: sig,
                        reps: vec![kid.nbhd],
                        edges: Vec::new(),
                    });
                    types.len() - 1
                }
            };
            types[next].edges.push((target, kid.ratio, kid.ext));
        }
        next += 1;
    }

    let mut alive = vec![true; types.len()];
    loop {
        let mut changed = false;
        for i in 0..types.len() {
            if alive[i] && !types[i].edges.iter().any(|(t, _, _)| alive[*t]) {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(r) = (0..system.graph_vertices()).find(|&r| !alive[r]) {
        return Err(Error::model(format!(
            "root type T{} has no offspring in the reduced graph; the system is degenerate",
            r + 1
        )));
    }
    let mut renumber = vec![None; types.len()];
    let mut count = 0;
    for i in 0..types.len() {
        if alive[i] {
            renumber[i] = Some(count);
            count += 1;
        }
    }
    let pruned_types = types.len() - count;
    let lookup = index
        .into_iter()
        .map(|(sig, i)| (sig, renumber[i]))
        .collect();
    let entries = types
        .into_iter()
        .enumerate()
        .filter(|(i, _)| alive[*i])
        .map(|(_, t)| {
            let mut reps = t.reps.into_iter();
            let first = reps.next().expect("type has a representative");
            TypeEntry {
                signature: t.signature,
                representative: first.vertex().clone(),
                neighborhood_size: first.members.len(),
                edges: t
                    .edges
                    .into_iter()
                    .filter_map(|(target, ratio, word)| {
                        renumber[target].map(|target| TypeEdge {
                            target,
                            ratio,
                            word,
                        })
                    })
                    .collect(),
                other_representatives: reps.collect(),
                rep_neighborhood: first,
            }
        })
        .collect();
    let automaton = TypeAutomaton {
        rule: rule.clone(),
        roots: system.graph_vertices(),
        types: entries,
        fixpoint_level: max_level + 1,
        pruned_types,
        vertices_generated: generated,
        lookup,
    };
    if matches!(rule, IndexSetRule::RatioStopping(_)) && limits.verify_depth > 0 {
        for check in descendant_checks(system, &automaton, limits.verify_depth)? {
            if !check.agree {
                return Err(Error::Verification(format!(
                    "type T{}: {} (verify depth {})",
                    check.type_id + 1,
                    check.detail,
                    limits.verify_depth
                )));
            }
        }
    }
    Ok(automaton)
}

/// Outcome of comparing one type's structure across its known representatives.
#[derive(Debug, Clone, Serialize)]
pub struct RepresentativeCheck {
    pub type_id: usize,
    pub representatives: usize,
    pub agree: bool,
    pub detail: String,
}

type EdgeMultiset = BTreeMap<(usize, QuadScalar), usize>;

fn edge_multiset(
    system: &System,
    automaton: &TypeAutomaton,
    nbhd: &Neighborhood,
) -> Result<EdgeMultiset> {
    let mut generated = 0;
    let mut out = BTreeMap::new();
    for kid in offspring(system, &automaton.rule, nbhd, &mut generated)? {
        match automaton.classify(&kid.nbhd.signature()) {
            Some(Some(t)) => *out.entry((t, kid.ratio)).or_insert(0) += 1,
            Some(None) => {}
            None => {
                return Err(Error::Verification(format!(
                    "offspring {} has a neighborhood type not in the automaton",
                    system.label(&kid.nbhd.vertex().word)
                )))
            }
        }
    }
    Ok(out)
}

/// Offspring `(target type, ratio)` multisets recomputed from every known
/// representative of every type.
pub fn representative_checks(
    system: &System,
    automaton: &TypeAutomaton,
) -> Result<Vec<RepresentativeCheck>> {
    let mut out = Vec::new();
    for (id, t) in automaton.types.iter().enumerate() {
        let mut expected: EdgeMultiset = BTreeMap::new();
        for e in &t.edges {
            *expected.entry((e.target, e.ratio.clone())).or_insert(0) += 1;
        }
        let mut agree = true;
        let mut detail = String::from("identical offspring multisets");
        for (ri, rep) in std::iter::once(&t.rep_neighborhood)
            .chain(&t.other_representatives)
            .enumerate()
        {
            let got = match edge_multiset(system, automaton, rep) {
                Ok(m) => m,
                Err(e) => {
                    agree = false;
                    detail = e.to_string();
                    break;
                }
            };
            if got != expected {
                agree = false;
                detail = format!(
                    "representative {} ({}) differs",
                    ri + 1,
                    system.label(&rep.vertex().word)
                );
                break;
            }
        }
        out.push(RepresentativeCheck {
            type_id: id,
            representatives: 1 + t.other_representatives.len(),
            agree,
            detail,
        });
    }
    Ok(out)
}

/// Normalized descendants of a whole neighborhood for `depth` levels.
fn descendant_profile(
    system: &System,
    rule: &IndexSetRule,
    nbhd: &Neighborhood,
    depth: usize,
) -> Result<BTreeSet<(usize, Similitude, usize, QuadScalar)>> {
    let inv = nbhd.vertex().map.inverse();
    let mut out = BTreeSet::new();
    let mut frontier: Vec<Vertex> = nbhd.members.clone();
    let mut generated = 0;
    for d in 1..=depth {
        let cands = expand_neighborhood(system, rule, &frontier, &mut generated)?;
        frontier = cands.into_iter().map(|c| c.vertex).collect();
        for v in &frontier {
            out.insert((d, inv.compose(&v.map), v.terminal, v.scale.clone()));
        }
    }
    Ok(out)
}

/// Re-expand matched representatives `depth` levels and compare what they
/// generate after normalization. A mismatch refutes the equivalence; agreement
/// is evidence only.
pub fn descendant_checks(
    system: &System,
    automaton: &TypeAutomaton,
    depth: usize,
) -> Result<Vec<RepresentativeCheck>> {
    let mut out = Vec::new();
    for (id, t) in automaton.types.iter().enumerate() {
        let base = descendant_profile(system, &automaton.rule, &t.rep_neighborhood, depth)?;
        let mut agree = true;
        let mut detail = format!("descendants agree for {depth} levels");
        for rep in &t.other_representatives {
            if descendant_profile(system, &automaton.rule, rep, depth)? != base {
                agree = false;
                detail = format!("descendants of {} differ", system.label(&rep.vertex().word));
                break;
            }
        }
        out.push(RepresentativeCheck {
            type_id: id,
            representatives: 1 + t.other_representatives.len(),
            agree,
            detail,
        });
    }
    Ok(out)
}

/// The retained incoming edge of a level vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelEdge {
    pub parent: usize,
    pub word: Word,
    pub ratio: QuadScalar,
}

/// All vertices of one level, with retained parent edges into the previous one.
#[derive(Debug, Clone)]
pub struct Level {
    pub k: usize,
    pub vertices: Vec<Vertex>,
    /// Parallel to `vertices`; `None` at level 0.
    pub parent_edges: Vec<Option<LevelEdge>>,
    /// Number of incoming edges before deduplication, parallel to `vertices`.
    pub incoming: Vec<usize>,
}

impl Level {
    pub fn root(system: &System) -> Level {
        let vertices = system.roots();
        let n = vertices.len();
        Level {
            k: 0,
            vertices,
            parent_edges: vec![None; n],
            incoming: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn find(&self, map: &Similitude) -> Option<usize> {
        self.vertices.iter().position(|v| v.map == *map)
    }
}

/// Level `k+1` from level `k`: every extension, deduplicated by map, keeping
/// the lexicographically smallest edge (extension word, then parent word).
pub fn build_level(
    system: &System,
    rule: &IndexSetRule,
    prev: &Level,
    vertex_budget: usize,
) -> Result<Level> {
    let mut index: HashMap<(Similitude, usize, usize), usize> = HashMap::new();
    let mut vertices: Vec<Vertex> = Vec::new();
    let mut edges: Vec<LevelEdge> = Vec::new();
    let mut incoming: Vec<usize> = Vec::new();
    for (pi, p) in prev.vertices.iter().enumerate() {
        for ext in extensions(rule, system, p.terminal, &p.scale)? {
            let map = p.map.compose(&system.word_map(&ext.word));
            let mut word = p.word.clone();
            word.extend_from_slice(&ext.word);
            let key = (map, p.initial, ext.end_state);
            match index.get(&key) {
                Some(&vi) => {
                    incoming[vi] += 1;
                    let e = &edges[vi];
                    if (&ext.word, &p.word) < (&e.word, &prev.vertices[e.parent].word) {
                        edges[vi] = LevelEdge {
                            parent: pi,
                            word: ext.word.clone(),
                            ratio: ext.ratio.clone(),
                        };
                    }
                    if word < vertices[vi].word {
                        vertices[vi].word = word;
                    }
                }
                None => {
                    if vertices.len() >= vertex_budget {
                        return Err(Error::Resource(format!(
                            "level {} exceeds the vertex budget of {vertex_budget}",
                            prev.k + 1
                        )));
                    }
                    index.insert(key.clone(), vertices.len());
                    vertices.push(Vertex {
                        map: key.0,
                        initial: p.initial,
                        terminal: ext.end_state,
                        level: prev.k + 1,
                        word,
                        scale: ext.scale.clone(),
                    });
                    edges.push(LevelEdge {
                        parent: pi,
                        word: ext.word,
                        ratio: ext.ratio,
                    });
                    incoming.push(1);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| {
        (vertices[a].initial, &vertices[a].word).cmp(&(vertices[b].initial, &vertices[b].word))
    });
    Ok(Level {
        k: prev.k + 1,
        vertices: order.iter().map(|&i| vertices[i].clone()).collect(),
        parent_edges: order.iter().map(|&i| Some(edges[i].clone())).collect(),
        incoming: order.iter().map(|&i| incoming[i]).collect(),
    })
}

/// Levels `0..=depth`.
pub fn build_levels(
    system: &System,
    rule: &IndexSetRule,
    depth: usize,
    vertex_budget: usize,
) -> Result<Vec<Level>> {
    rule.validate()?;
    let mut levels = vec![Level::root(system)];
    for _ in 0..depth {
        let next = build_level(
            system,
            rule,
            levels.last().expect("nonempty"),
            vertex_budget,
        )?;
        levels.push(next);
    }
    Ok(levels)
}

/// Indices of the same-level vertices whose images open-overlap that of
/// vertex `idx` (including `idx` itself).
pub fn neighborhood(system: &System, level: &Level, idx: usize) -> Vec<usize> {
    let v = &level.vertices[idx];
    let img = system.image(v);
    let bb = img.bbox_f64();
    (0..level.len())
        .filter(|&o| {
            let w = &level.vertices[o];
            if o == idx {
                return true;
            }
            if w.initial != v.initial {
                return false;
            }
            let other = system.image(w);
            bbox_may_overlap(&bb, &other.bbox_f64()) && open_overlap(&img, &other)
        })
        .collect()
}

/// Neighborhoods of every vertex of a level, via a sweep over float bounding
/// boxes followed by the exact test.
pub fn level_neighborhoods(system: &System, level: &Level) -> Vec<Vec<usize>> {
    let images: Vec<ConvexPolygon> = par_map(&level.vertices, |v| system.image(v));
    let boxes: Vec<_> = images.iter().map(|p| p.bbox_f64()).collect();
    let mut order: Vec<usize> = (0..level.len()).collect();
    order.sort_by(|&a, &b| boxes[a].0[0].total_cmp(&boxes[b].0[0]));
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if boxes[b].0[0] > boxes[a].1[0] + 1e-9 {
                break;
            }
            if level.vertices[a].initial == level.vertices[b].initial
                && bbox_may_overlap(&boxes[a], &boxes[b])
            {
                pairs.push((a, b));
            }
        }
    }
    let hits = par_map(&pairs, |&(a, b)| open_overlap(&images[a], &images[b]));
    let mut out: Vec<Vec<usize>> = (0..level.len()).map(|i| vec![i]).collect();
    for (&(a, b), hit) in pairs.iter().zip(hits) {
        if hit {
            out[a].push(b);
            out[b].push(a);
        }
    }
    for (i, n) in out.iter_mut().enumerate() {
        n[1..].sort_unstable();
        debug_assert_eq!(n[0], i);
    }
    out
}

/// Type of every vertex of a level (`None` for pruned types).
pub fn classify_level(
    system: &System,
    automaton: &TypeAutomaton,
    level: &Level,
) -> Result<Vec<Option<usize>>> {
    let nbhds = level_neighborhoods(system, level);
    let sigs = par_map(&(0..level.len()).collect::<Vec<_>>(), |&i| {
        let members: Vec<Vertex> = nbhds[i]
            .iter()
            .map(|&j| level.vertices[j].clone())
            .collect();
        NeighborhoodSignature::of(&level.vertices[i], &members)
    });
    sigs.iter()
        .enumerate()
        .map(|(i, s)| {
            automaton.classify(s).ok_or_else(|| {
                Error::Internal(format!(
                    "vertex {} at level {} has a type outside the automaton",
                    system.label(&level.vertices[i].word),
                    level.k
                ))
            })
        })
        .collect()
}

/// A member of the stopping family `𝒜_b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FamilyMember {
    pub map: Similitude,
    pub initial: usize,
    pub terminal: usize,
}

/// `𝒜_b = {S_u : ρ_u ≤ b < ρ_{u⁻}}` over paths from every graph vertex,
/// deduplicated by map and end vertices; `b ≥ 1` gives the identities.
pub fn stopping_family(
    system: &System,
    b: &QuadScalar,
    budget: usize,
) -> Result<Vec<FamilyMember>> {
    if !b.is_positive() {
        return Err(Error::model("stopping parameter b must be positive"));
    }
    let mut seen: HashSet<FamilyMember> = HashSet::new();
    let mut out = Vec::new();
    for i in 0..system.graph_vertices() {
        let mut stack: Vec<(Similitude, usize)> = vec![(Similitude::identity(system.dim()), i)];
        while let Some((map, state)) = stack.pop() {
            if map.ratio() <= b {
                let m = FamilyMember {
                    map,
                    initial: i,
                    terminal: state,
                };
                if seen.insert(m.clone()) {
                    if out.len() >= budget {
                        return Err(Error::Resource(format!(
                            "stopping family exceeds {budget} maps"
                        )));
                    }
                    out.push(m);
                }
                continue;
            }
            for &e in system.successors(state).iter().rev() {
                stack.push((map.compose(&system.maps[e]), system.to[e]));
            }
        }
    }
    Ok(out)
}

/// Members of `𝒜_b` starting at `component` whose closed image contains `x`,
/// found by descending only into images that contain it.
pub fn coverage_count(system: &System, b: &QuadScalar, component: usize, x: &Point) -> usize {
    let mut seen: HashSet<(Similitude, usize)> = HashSet::new();
    let mut stack = vec![(Similitude::identity(system.dim()), component)];
    while let Some((map, state)) = stack.pop() {
        if !system.omegas[state].map(&map).contains_closed(x) {
            continue;
        }
        if map.ratio() <= b {
            seen.insert((map, state));
            continue;
        }
        for &e in system.successors(state) {
            stack.push((map.compose(&system.maps[e]), system.to[e]));
        }
    }
    seen.len()
}

#[derive(Debug, Clone, Serialize)]
pub struct WscProbe {
    pub b: String,
    pub family_size: usize,
    pub samples: usize,
    pub max_multiplicity: usize,
}

/// Largest number of maps of `𝒜_b` whose closed images share a sampled
/// attractor point: a lower bound for the separation constant.
pub fn wsc_multiplicity_probe(
    system: &System,
    b: &QuadScalar,
    samples: usize,
    seed: u64,
    budget: usize,
) -> Result<WscProbe> {
    if !b.is_positive() || *b > QuadScalar::one() {
        return Err(Error::model("the probe needs 0 < b ≤ 1"));
    }
    let family = stopping_family(system, b, budget)?;
    let points = crate::render::exact_attractor_samples(system, samples, seed);
    let counts = par_map(&points, |(c, x)| coverage_count(system, b, *c, x));
    Ok(WscProbe {
        b: b.to_string(),
        family_size: family.len(),
        samples: points.len(),
        max_multiplicity: counts.into_iter().max().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> QuadScalar {
        QuadScalar::ratio(n, d)
    }

    fn gasket() -> System {
        let tri = ConvexPolygon::new(vec![
            vec![q(-1, 2), q(0, 1)],
            vec![q(1, 2), q(0, 1)],
            vec![q(0, 1), q(1, 1)],
        ])
        .unwrap();
        let maps = [(0, 1, 1, 2), (-1, 4, 0, 1), (1, 4, 0, 1)]
            .iter()
            .map(|&(a, b, c, d)| Similitude::homothety(q(1, 2), vec![q(a, b), q(c, d)]).unwrap())
            .collect();
        System::ifs(maps, tri).unwrap()
    }

    fn halves_on_line() -> System {
        let maps = vec![
            Similitude::homothety(q(1, 2), vec![q(0, 1)]).unwrap(),
            Similitude::homothety(q(1, 2), vec![q(1, 2)]).unwrap(),
        ];
        System::ifs(maps, ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap()).unwrap()
    }

    #[test]
    fn gasket_single_type() {
        let a = explore(&gasket(), &IndexSetRule::FixedLength, &Limits::default()).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a.types[0].edges.len(), 3);
        assert!(a.types[0]
            .edges
            .iter()
            .all(|e| e.target == 0 && e.ratio == q(1, 2)));
    }

    #[test]
    fn gasket_levels_and_neighborhoods() {
        let s = gasket();
        let levels = build_levels(&s, &IndexSetRule::FixedLength, 3, 1000).unwrap();
        assert_eq!(levels[1].len(), 3);
        assert_eq!(levels[1].parent_edges.iter().flatten().count(), 3);
        assert_eq!(levels[3].len(), 27);
        for level in &levels {
            for (i, n) in level_neighborhoods(&s, level).iter().enumerate() {
                assert_eq!(n, &vec![i]);
                assert_eq!(n, &neighborhood(&s, level, i));
            }
        }
        assert_eq!(neighborhood(&s, &levels[0], 0), vec![0]);
    }

    #[test]
    fn line_halves() {
        let a = explore(
            &halves_on_line(),
            &IndexSetRule::FixedLength,
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a.count_matrix(), vec![vec![2]]);
    }

    #[test]
    fn empty_system_rejected() {
        let tri = ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap();
        assert!(matches!(System::ifs(vec![], tri), Err(Error::Model(_))));
    }

    #[test]
    fn invariance_enforced() {
        let bad = vec![
            Similitude::homothety(q(1, 2), vec![q(0, 1)]).unwrap(),
            Similitude::homothety(q(1, 2), vec![q(3, 4)]).unwrap(),
        ];
        let err = System::ifs(bad, ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap()).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
    }

    #[test]
    fn one_map_is_degenerate() {
        let one = System::ifs(
            vec![Similitude::homothety(q(1, 2), vec![q(0, 1)]).unwrap()],
            ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap(),
        );
        assert!(matches!(one, Err(Error::Model(m)) if m.contains("degenerate")));
    }

    #[test]
    fn exact_overlapping_line_system_is_finite_type() {
        // {x/3, x/3 + 1/3, x/3 + 2/3} ∪ {x/3 + 1/6}: the fourth map overlaps two others
        let maps = [0, 1, 2]
            .iter()
            .map(|&t| Similitude::homothety(q(1, 3), vec![q(t, 3)]).unwrap())
            .chain(std::iter::once(
                Similitude::homothety(q(1, 3), vec![q(1, 6)]).unwrap(),
            ))
            .collect();
        let s = System::ifs(maps, ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap()).unwrap();
        let a = explore(&s, &IndexSetRule::FixedLength, &Limits::default()).unwrap();
        assert!(a.len() > 1);
        for c in representative_checks(&s, &a).unwrap() {
            assert!(c.agree, "{c:?}");
        }
        let levels = build_levels(&s, &IndexSetRule::FixedLength, 4, 100_000).unwrap();
        for level in &levels {
            assert!(classify_level(&s, &a, level)
                .unwrap()
                .iter()
                .all(|t| t.is_some()));
        }
    }

    #[test]
    fn stopping_family_of_gasket() {
        let s = gasket();
        assert_eq!(stopping_family(&s, &q(1, 4), 1000).unwrap().len(), 9);
        assert_eq!(stopping_family(&s, &q(1, 1), 1000).unwrap().len(), 1);
        let probe = wsc_multiplicity_probe(&s, &q(1, 4), 50, 7, 1000).unwrap();
        assert_eq!(probe.max_multiplicity, 1);
        let probe = wsc_multiplicity_probe(&s, &q(1, 1), 10, 7, 1000).unwrap();
        assert_eq!(probe.max_multiplicity, 1);
    }
}
