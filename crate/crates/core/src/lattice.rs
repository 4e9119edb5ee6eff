//! Hexagonal tori, open patches cut out of them, and the translated patch
//! family used by the cover-counting argument.
//!
//! The torus uses a two-site unit cell. Cell `(x, y)` holds an `A` site at
//! `x * a1 + y * a2` and a `B` site displaced by `(sqrt(3)/2, 1/2)`, with
//! `a1 = (sqrt(3), 0)` and `a2 = (sqrt(3)/2, 3/2)`. Every `A(x, y)` bonds to
//! `B(x, y)`, `B(x - 1, y)` and `B(x, y - 1)` (indices taken modulo the
//! torus extents). Vertex ids are assigned lexicographically by
//! `(y, x, sublattice)`.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::Serialize;

use crate::constants::MIN_TORUS_EXTENT;
use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const A1: [f64; 2] = [SQRT3, 0.0];
const A2: [f64; 2] = [SQRT3 / 2.0, 1.5];
const B_OFFSET: [f64; 2] = [SQRT3 / 2.0, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Vertex {
    pub id: VertexId,
    pub x: usize,
    pub y: usize,
    pub sublattice: Sublattice,
}

/// A hexagonal face, listed as a closed 6-cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Plaquette {
    pub id: usize,
    pub vertex_cycle: [VertexId; 6],
    /// `edges[k]` joins `vertex_cycle[k]` and `vertex_cycle[(k + 1) % 6]`.
    pub edges: [EdgeId; 6],
}

/// The honeycomb lattice wrapped on an `m1 x m2` torus.
#[derive(Debug, Clone)]
pub struct TorusLattice {
    m1: usize,
    m2: usize,
    vertices: Vec<Vertex>,
    edges: Vec<(VertexId, VertexId)>,
    plaquettes: Vec<Plaquette>,
    incident: Vec<[EdgeId; 3]>,
    edge_faces: Vec<[usize; 2]>,
}

/// Builds the hexagonal torus with `m1 x m2` cells.
///
/// Tori with `m < 3` are degenerate (multi-edges, repeated plaquette
/// vertices) but still satisfy the counting invariants.
pub fn build_torus(m1: usize, m2: usize) -> Result<TorusLattice> {
    TorusLattice::new(m1, m2)
}

impl TorusLattice {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        if m1 == 0 || m2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "torus extents must be positive, got ({m1}, {m2})"
            )));
        }
        let cells = m1 * m2;
        let mut vertices = Vec::with_capacity(2 * cells);
        for y in 0..m2 {
            for x in 0..m1 {
                for sublattice in [Sublattice::A, Sublattice::B] {
                    vertices.push(Vertex {
                        id: vertices.len(),
                        x,
                        y,
                        sublattice,
                    });
                }
            }
        }

        let mut lattice = Self {
            m1,
            m2,
            vertices,
            edges: Vec::with_capacity(3 * cells),
            plaquettes: Vec::with_capacity(cells),
            incident: vec![[usize::MAX; 3]; 2 * cells],
            edge_faces: Vec::new(),
        };

        let mut fill = vec![0usize; 2 * cells];
        for y in 0..m2 {
            for x in 0..m1 {
                let a = lattice.site(x as isize, y as isize, Sublattice::A);
                let xm = x as isize - 1;
                let ym = y as isize - 1;
                for b in [
                    lattice.site(x as isize, y as isize, Sublattice::B),
                    lattice.site(xm, y as isize, Sublattice::B),
                    lattice.site(x as isize, ym, Sublattice::B),
                ] {
                    let e = lattice.edges.len();
                    lattice.edges.push((a, b));
                    lattice.incident[a][fill[a]] = e;
                    fill[a] += 1;
                    lattice.incident[b][fill[b]] = e;
                    fill[b] += 1;
                }
            }
        }

        let mut edge_faces = vec![[usize::MAX; 2]; lattice.edges.len()];
        let mut face_fill = vec![0usize; lattice.edges.len()];
        for y in 0..m2 as isize {
            for x in 0..m1 as isize {
                let id = lattice.plaquettes.len();
                let vertex_cycle = [
                    lattice.site(x, y, Sublattice::B),
                    lattice.site(x, y + 1, Sublattice::A),
                    lattice.site(x, y + 1, Sublattice::B),
                    lattice.site(x + 1, y + 1, Sublattice::A),
                    lattice.site(x + 1, y, Sublattice::B),
                    lattice.site(x + 1, y, Sublattice::A),
                ];
                let edges = [
                    lattice.a_edge(x, y + 1, 2),
                    lattice.a_edge(x, y + 1, 0),
                    lattice.a_edge(x + 1, y + 1, 1),
                    lattice.a_edge(x + 1, y + 1, 2),
                    lattice.a_edge(x + 1, y, 0),
                    lattice.a_edge(x + 1, y, 1),
                ];
                for &e in &edges {
                    edge_faces[e][face_fill[e]] = id;
                    face_fill[e] += 1;
                }
                lattice.plaquettes.push(Plaquette {
                    id,
                    vertex_cycle,
                    edges,
                });
            }
        }
        lattice.edge_faces = edge_faces;
        Ok(lattice)
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    /// Edges incident to `v` (with repetition for multi-edges).
    pub fn incident_edges(&self, v: VertexId) -> [EdgeId; 3] {
        self.incident[v]
    }

    /// The two plaquettes bordering edge `e`.
    pub fn edge_plaquettes(&self, e: EdgeId) -> [usize; 2] {
        self.edge_faces[e]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident[v].iter().filter(|&&e| e != usize::MAX).count()
    }

    /// Whether the torus is small enough for edges or plaquettes to self-overlap.
    pub fn is_degenerate(&self) -> bool {
        self.m1 < 3 || self.m2 < 3
    }

    /// Vertex id at cell `(x, y)` with wraparound.
    pub fn site(&self, x: isize, y: isize, sublattice: Sublattice) -> VertexId {
        let x = x.rem_euclid(self.m1 as isize) as usize;
        let y = y.rem_euclid(self.m2 as isize) as usize;
        2 * (y * self.m1 + x) + usize::from(sublattice == Sublattice::B)
    }

    fn a_edge(&self, x: isize, y: isize, kind: usize) -> EdgeId {
        let x = x.rem_euclid(self.m1 as isize) as usize;
        let y = y.rem_euclid(self.m2 as isize) as usize;
        3 * (y * self.m1 + x) + kind
    }

    /// Image of `v` under translation by `(dx, dy)` cells.
    pub fn translate_vertex(&self, v: VertexId, dx: isize, dy: isize) -> VertexId {
        let vert = self.vertices[v];
        self.site(vert.x as isize + dx, vert.y as isize + dy, vert.sublattice)
    }

    /// Image of edge `e` under translation by `(dx, dy)` cells.
    pub fn translate_edge(&self, e: EdgeId, dx: isize, dy: isize) -> EdgeId {
        let cell = e / 3;
        let x = (cell % self.m1) as isize;
        let y = (cell / self.m1) as isize;
        self.a_edge(x + dx, y + dy, e % 3)
    }

    /// Displacement from `from` to `to` along edge `e` in the plane.
    fn edge_displacement(&self, e: EdgeId, from: VertexId) -> [f64; 2] {
        let d = match e % 3 {
            0 => B_OFFSET,
            1 => [B_OFFSET[0] - A1[0], B_OFFSET[1] - A1[1]],
            _ => [B_OFFSET[0] - A2[0], B_OFFSET[1] - A2[1]],
        };
        if self.edges[e].0 == from {
            d
        } else {
            [-d[0], -d[1]]
        }
    }

    /// Planar coordinates of a vertex in the fundamental domain.
    pub fn position(&self, v: VertexId) -> [f64; 2] {
        let vert = self.vertices[v];
        let mut p = [
            vert.x as f64 * A1[0] + vert.y as f64 * A2[0],
            vert.x as f64 * A1[1] + vert.y as f64 * A2[1],
        ];
        if vert.sublattice == Sublattice::B {
            p[0] += B_OFFSET[0];
            p[1] += B_OFFSET[1];
        }
        p
    }

    fn other_end(&self, e: EdgeId, v: VertexId) -> VertexId {
        let (a, b) = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            kind: format!("torus {}x{}", self.m1, self.m2),
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    id: v.id,
                    x: self.position(v.id)[0],
                    y: self.position(v.id)[1],
                    degree: self.degree(v.id),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(u, v)| EdgeRecord { u, v, weight: 1.0 })
                .collect(),
            plaquettes: self.plaquettes.len(),
        }
    }
}

/// Role of an edge inside a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EdgeRole {
    /// Edge of the central hexagon.
    Central,
    /// Edge from a central-hexagon vertex to its outward neighbor.
    Spoke,
    /// Remaining edges of the outer flower ring.
    Outer,
    /// Edge to a degree-1 boundary vertex.
    Pendant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PatchKind {
    /// 36-site flower of 7 hexagons with 12 pendant edges.
    Flower,
    /// 12-site cluster: one hexagon with a pendant on every vertex.
    DecoratedHexagon,
    /// Bare 6-site hexagon ring.
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatchSite {
    /// Torus vertex id for embedded patches, local index otherwise.
    pub label: usize,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatchEdge {
    /// Local site indices, `u < v`.
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    /// Whether the edge carries the adjustable weight (even when it equals 1).
    pub weighted: bool,
    pub role: EdgeRole,
    pub lattice_edge: Option<EdgeId>,
}

/// An open-boundary cluster with per-edge weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Patch {
    pub kind: PatchKind,
    pub sites: Vec<PatchSite>,
    pub edges: Vec<PatchEdge>,
    /// Local indices of degree-1 sites.
    pub pendants: Vec<usize>,
}

impl Patch {
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.sites.len()];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    pub fn neighbors(&self, site: usize) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(k, e)| {
                if e.u == site {
                    Some((e.v, k))
                } else if e.v == site {
                    Some((e.u, k))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn weighted_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.weighted).count()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Unordered pairs of distinct edges sharing a vertex, as edge indices.
    pub fn adjacent_edge_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for site in 0..self.sites.len() {
            let inc: Vec<usize> = self.neighbors(site).into_iter().map(|(_, e)| e).collect();
            for i in 0..inc.len() {
                for j in i + 1..inc.len() {
                    pairs.push((inc[i].min(inc[j]), inc[i].max(inc[j])));
                }
            }
        }
        pairs
    }

    /// Bounded faces of the (connected, planar) patch: `E - V + 1`.
    pub fn interior_faces(&self) -> usize {
        self.edges.len() + 1 - self.sites.len()
    }

    pub fn to_document(&self) -> GraphDocument {
        let deg = self.degrees();
        GraphDocument {
            kind: format!("{:?}", self.kind),
            vertices: self
                .sites
                .iter()
                .enumerate()
                .map(|(i, s)| VertexRecord {
                    id: s.label,
                    x: s.position[0],
                    y: s.position[1],
                    degree: deg[i],
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    u: self.sites[e.u].label,
                    v: self.sites[e.v].label,
                    weight: e.weight,
                })
                .collect(),
            plaquettes: self.interior_faces(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub degree: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Exportable description of a torus or patch.
#[derive(Debug, Clone, Serialize)]
pub struct GraphDocument {
    pub kind: String,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
    pub plaquettes: usize,
}

/// Cuts a patch of the given shape around `center` out of the torus.
///
/// `labels_local` replaces torus ids by local indices in the site labels.
fn cut_patch(
    lattice: &TorusLattice,
    center: usize,
    kind: PatchKind,
    hex_weight: f64,
    spoke_weight: Option<f64>,
    labels_local: bool,
) -> Patch {
    let plaq = &lattice.plaquettes[center];
    let central: Vec<VertexId> = plaq.vertex_cycle.to_vec();

    let mut flower_edges: Vec<EdgeId> = plaq.edges.to_vec();
    if kind == PatchKind::Flower {
        for &e in &plaq.edges {
            let [f0, f1] = lattice.edge_plaquettes(e);
            let petal = if f0 == center { f1 } else { f0 };
            for &pe in &lattice.plaquettes[petal].edges {
                if !flower_edges.contains(&pe) {
                    flower_edges.push(pe);
                }
            }
        }
    }

    // Local numbering: central cycle, then the rest of the flower in BFS
    // order, then pendants in the order of their attachment vertex.
    let mut order: Vec<VertexId> = central.clone();
    let mut in_flower: HashMap<VertexId, usize> = central.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut queue: VecDeque<VertexId> = central.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for e in lattice.incident_edges(v) {
            if !flower_edges.contains(&e) {
                continue;
            }
            let w = lattice.other_end(e, v);
            if let std::collections::hash_map::Entry::Vacant(slot) = in_flower.entry(w) {
                slot.insert(order.len());
                order.push(w);
                queue.push_back(w);
            }
        }
    }

    let mut flower_degree = vec![0usize; order.len()];
    for &e in &flower_edges {
        let (a, b) = lattice.edges[e];
        flower_degree[in_flower[&a]] += 1;
        flower_degree[in_flower[&b]] += 1;
    }

    let mut pendant_edges = Vec::new();
    if kind != PatchKind::Ring {
        let flower_len = order.len();
        for i in 0..flower_len {
            if flower_degree[i] != 2 {
                continue;
            }
            let v = order[i];
            for e in lattice.incident_edges(v) {
                if !flower_edges.contains(&e) {
                    pendant_edges.push(e);
                    order.push(lattice.other_end(e, v));
                }
            }
        }
    }
    let local: HashMap<VertexId, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    // Planar coordinates by walking edges from the first central vertex.
    let mut positions = vec![[f64::NAN; 2]; order.len()];
    positions[0] = lattice.position(order[0]);
    let all_edges: Vec<EdgeId> = flower_edges.iter().chain(&pendant_edges).copied().collect();
    let mut queue = VecDeque::from([order[0]]);
    while let Some(v) = queue.pop_front() {
        for &e in &all_edges {
            let (a, b) = lattice.edges[e];
            if a != v && b != v {
                continue;
            }
            let w = lattice.other_end(e, v);
            if positions[local[&w]][0].is_nan() {
                let d = lattice.edge_displacement(e, v);
                let p = positions[local[&v]];
                positions[local[&w]] = [p[0] + d[0], p[1] + d[1]];
                queue.push_back(w);
            }
        }
    }

    let central_set: Vec<VertexId> = central.clone();
    let mut edges = Vec::with_capacity(all_edges.len());
    for &e in &all_edges {
        let (a, b) = lattice.edges[e];
        let (la, lb) = (local[&a], local[&b]);
        let in_a = central_set.contains(&a);
        let in_b = central_set.contains(&b);
        let role = if pendant_edges.contains(&e) {
            EdgeRole::Pendant
        } else if in_a && in_b {
            EdgeRole::Central
        } else if in_a || in_b {
            EdgeRole::Spoke
        } else {
            EdgeRole::Outer
        };
        let (weight, weighted) = match role {
            EdgeRole::Central => (hex_weight, true),
            EdgeRole::Spoke => match spoke_weight {
                Some(w) => (w, true),
                None => (1.0, false),
            },
            _ => (1.0, false),
        };
        edges.push(PatchEdge {
            u: la.min(lb),
            v: la.max(lb),
            weight,
            weighted,
            role,
            lattice_edge: Some(e),
        });
    }
    edges.sort_by_key(|e| (e.u, e.v));

    let sites = order
        .iter()
        .enumerate()
        .map(|(i, &v)| PatchSite {
            label: if labels_local { i } else { v },
            position: positions[i],
        })
        .collect();
    let mut patch = Patch {
        kind,
        sites,
        edges,
        pendants: Vec::new(),
    };
    patch.pendants = patch
        .degrees()
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 1)
        .map(|(i, _)| i)
        .collect();
    patch
}

fn reference_torus() -> TorusLattice {
    TorusLattice::new(MIN_TORUS_EXTENT, MIN_TORUS_EXTENT).expect("reference torus")
}

fn reference_center(lattice: &TorusLattice) -> usize {
    (lattice.m2 / 2) * lattice.m1 + lattice.m1 / 2
}

fn check_weight(a: f64) -> Result<()> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("weight a must be >= 1, got {a}")));
    }
    Ok(())
}

/// The 36-site patch: seven hexagons with a pendant on each of the twelve
/// outer degree-2 vertices. The six central-hexagon edges and the six spokes
/// leaving it carry weight `a`.
pub fn build_patch_f(a: f64) -> Result<Patch> {
    check_weight(a)?;
    let lattice = reference_torus();
    let center = reference_center(&lattice);
    Ok(cut_patch(&lattice, center, PatchKind::Flower, a, Some(a), true))
}

/// The 12-site cluster: a hexagon with weight `a_hex` on its edges and a
/// unit-weight pendant on each vertex.
pub fn build_patch_12(a_hex: f64) -> Result<Patch> {
    if !(a_hex > 0.0) || !a_hex.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "hexagon weight must be positive, got {a_hex}"
        )));
    }
    let lattice = reference_torus();
    let center = reference_center(&lattice);
    Ok(cut_patch(
        &lattice,
        center,
        PatchKind::DecoratedHexagon,
        a_hex,
        None,
        true,
    ))
}

/// A bare hexagon of six degree-2 sites with uniform weight `w`.
pub fn build_ring(w: f64) -> Result<Patch> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ring weight must be positive, got {w}"
        )));
    }
    let lattice = reference_torus();
    let center = reference_center(&lattice);
    Ok(cut_patch(&lattice, center, PatchKind::Ring, w, None, true))
}

/// The copy of the 36-site patch centered on plaquette `center` of the torus.
/// Site labels are torus vertex ids and every edge records its torus edge id.
pub fn translate_patch(lattice: &TorusLattice, center: usize, a: f64) -> Result<Patch> {
    check_weight(a)?;
    if lattice.m1 < MIN_TORUS_EXTENT || lattice.m2 < MIN_TORUS_EXTENT {
        return Err(Error::InvalidParameter(format!(
            "translated patches need m1, m2 >= {MIN_TORUS_EXTENT}, got ({}, {})",
            lattice.m1, lattice.m2
        )));
    }
    if center >= lattice.plaquettes.len() {
        return Err(Error::InvalidParameter(format!("no plaquette {center}")));
    }
    Ok(cut_patch(lattice, center, PatchKind::Flower, a, Some(a), false))
}

/// The full family of translated patches, one per plaquette.
#[derive(Debug, Clone)]
pub struct PatchCover {
    pub lattice: TorusLattice,
    pub patches: BTreeMap<usize, Patch>,
}

impl PatchCover {
    pub fn new(lattice: TorusLattice, a: f64) -> Result<Self> {
        let mut patches = BTreeMap::new();
        for p in 0..lattice.plaquettes.len() {
            patches.insert(p, translate_patch(&lattice, p, a)?);
        }
        Ok(Self { lattice, patches })
    }
}
