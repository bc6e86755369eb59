//! Combinatorics of S-quad-graphs: the bipartite quadrilateral complexes on
//! which orthogonal ring patterns live.
//!
//! A quad-graph `G` (a quadrilateral cell decomposition of a disk, with edges
//! labelled *horizontal*/*vertical* so that the labels alternate around every
//! face) gives rise to its *central extension*: a new quad complex whose
//! vertices are
//!
//! * **white sphere-family** nodes — the vertices of `G`,
//! * **white circle-family** nodes — the faces of `G`,
//! * **black** nodes — the edges of `G`,
//!
//! and whose quads are the (vertex, edge, face, edge) incidences of `G`.  Each
//! quad therefore has one white corner of each family in opposite positions
//! and two black corners (one per edge label) in the other two.  All quads are
//! oriented counter-clockwise and are stored starting at their sphere-family
//! corner.
//!
//! This module owns the combinatorial layer only: construction (rectangular
//! patches and central extensions of general quad meshes), validation
//! (orientability, connectivity, disk topology via the Euler count, label
//! alternation), and derived structure (vertex fans in rotational order,
//! boundary flags, degrees, the S-edge list, G-edges).  Geometry lives
//! elsewhere.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no quads")]
    Empty,
    #[error("node index out of range in quad {0}")]
    IndexOutOfRange(usize),
    #[error("quad {0} does not have sphere/circle corners in opposite positions")]
    FamilyMismatch(usize),
    #[error("quad {0} has two black corners with the same edge label")]
    LabelClash(usize),
    #[error("S-edge between white {white} and black {black} is traversed twice in the same direction or bounds more than two quads")]
    NonManifoldEdge { white: u32, black: u32 },
    #[error("the quads around white {0} do not chain into a single fan")]
    BranchingFan(u32),
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph is not a disk: Euler characteristic {0}, expected 1")]
    NotADisk(i64),
    #[error("rectangle sides must be at least 2, got {0}x{1}")]
    RectangleTooSmall(usize, usize),
    #[error("invalid quad mesh: {0}")]
    BadMesh(String),
    #[error("black {0} is not the midpoint of exactly one G-edge (needs exactly two sphere-family neighbours)")]
    BadBlack(u32),
}

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(
    /// Index of a white node (sphere- or circle-family).
    WhiteId
);
id_type!(
    /// Index of a black node (a G-edge midpoint).
    BlackId
);
id_type!(
    /// Index of a quad of the central extension.
    QuadId
);

/// Which family a white node belongs to: spheres sit at G-vertices, circles
/// at G-face centers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sphere,
    Circle,
}

/// The two-colouring of G-edges.  Labels alternate around every G-face and
/// every G-vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Horizontal,
    Vertical,
}

impl EdgeLabel {
    #[inline]
    pub fn opposite(self) -> EdgeLabel {
        match self {
            EdgeLabel::Horizontal => EdgeLabel::Vertical,
            EdgeLabel::Vertical => EdgeLabel::Horizontal,
        }
    }
}

/// Either kind of node, ordered whites-before-blacks for deterministic ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    White(WhiteId),
    Black(BlackId),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct White {
    pub family: Family,
    /// Integer grid coordinates when the graph came from a rectangular patch.
    pub grid: Option<[i32; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Black {
    /// Label of the G-edge this black node is the midpoint of.
    pub label: EdgeLabel,
    pub grid: Option<[i32; 2]>,
}

/// One quad of the central extension, oriented counter-clockwise starting at
/// its sphere-family corner: ws → b_first → wc → b_second.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Quad {
    pub ws: WhiteId,
    pub b_first: BlackId,
    pub wc: WhiteId,
    pub b_second: BlackId,
}

impl Quad {
    /// The white corner of `self` other than `w`.
    pub fn partner(&self, w: WhiteId) -> WhiteId {
        if self.ws == w {
            self.wc
        } else {
            self.ws
        }
    }

    /// Black corners in rotational (ccw) order around white `w`: walking ccw
    /// around `w`, a quad is entered across `entry` and left across `exit`.
    pub fn entry_exit(&self, w: WhiteId) -> (BlackId, BlackId) {
        if self.ws == w {
            (self.b_first, self.b_second)
        } else {
            (self.b_second, self.b_first)
        }
    }

    pub fn contains_white(&self, w: WhiteId) -> bool {
        self.ws == w || self.wc == w
    }
}

/// One quad incidence in the rotational fan of a white node.
#[derive(Clone, Copy, Debug)]
pub struct FanEntry {
    pub quad: QuadId,
    /// The opposite white corner of the quad.
    pub partner: WhiteId,
    /// Black crossed when entering this quad, walking ccw around the white.
    pub entry: BlackId,
    /// Black crossed when leaving this quad.
    pub exit: BlackId,
}

/// The rotationally ordered quads around a white node.  Closed fans belong to
/// interior nodes (the last exit equals the first entry); open fans to
/// boundary nodes.
#[derive(Clone, Debug)]
pub struct Fan {
    pub entries: Vec<FanEntry>,
    pub closed: bool,
}

/// An edge of the central extension, connecting a white and a black node.
#[derive(Clone, Copy, Debug)]
pub struct SEdge {
    pub white: WhiteId,
    pub black: BlackId,
    /// The one or two quads this edge bounds.
    pub quads: [Option<QuadId>; 2],
}

/// A G-edge recovered from a black node: its two sphere-family endpoints.
#[derive(Clone, Copy, Debug)]
pub struct GEdge {
    pub black: BlackId,
    pub v1: WhiteId,
    pub v2: WhiteId,
    pub label: EdgeLabel,
}

/// A general quad mesh: the input for a central extension.  Faces are listed
/// as counter-clockwise 4-cycles of vertex indices.  Edge labels are derived
/// by alternation from the first edge of the first face (which is labelled
/// `first_label`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadMesh {
    pub num_vertices: usize,
    pub faces: Vec<[u32; 4]>,
    #[serde(default = "default_first_label")]
    pub first_label: EdgeLabel,
}

fn default_first_label() -> EdgeLabel {
    EdgeLabel::Horizontal
}

/// Serialized form: nodes and quads only; everything else is derived (and
/// re-validated) on deserialization.
#[derive(Clone, Serialize, Deserialize)]
struct RawGraph {
    whites: Vec<White>,
    blacks: Vec<Black>,
    quads: Vec<Quad>,
}

/// The validated combinatorial complex.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct SQuadGraph {
    whites: Vec<White>,
    blacks: Vec<Black>,
    quads: Vec<Quad>,
    fans: Vec<Fan>,
    s_edges: Vec<SEdge>,
    /// Edge indices incident to each white / black node.
    white_edges: Vec<Vec<u32>>,
    black_edges: Vec<Vec<u32>>,
    g_edges: Vec<GEdge>,
    grid_whites: HashMap<[i32; 2], WhiteId>,
}

impl TryFrom<RawGraph> for SQuadGraph {
    type Error = GraphError;
    fn try_from(raw: RawGraph) -> Result<Self, GraphError> {
        SQuadGraph::new(raw.whites, raw.blacks, raw.quads)
    }
}

impl From<SQuadGraph> for RawGraph {
    fn from(g: SQuadGraph) -> RawGraph {
        RawGraph {
            whites: g.whites,
            blacks: g.blacks,
            quads: g.quads,
        }
    }
}

impl SQuadGraph {
    /// Validate raw node/quad data and derive fans, edges, and boundary
    /// structure.
    pub fn new(
        whites: Vec<White>,
        blacks: Vec<Black>,
        quads: Vec<Quad>,
    ) -> Result<SQuadGraph, GraphError> {
        if quads.is_empty() {
            return Err(GraphError::Empty);
        }
        let nw = whites.len() as u32;
        let nb = blacks.len() as u32;

        for (qi, q) in quads.iter().enumerate() {
            if q.ws.0 >= nw || q.wc.0 >= nw || q.b_first.0 >= nb || q.b_second.0 >= nb {
                return Err(GraphError::IndexOutOfRange(qi));
            }
            if whites[q.ws.index()].family != Family::Sphere
                || whites[q.wc.index()].family != Family::Circle
            {
                return Err(GraphError::FamilyMismatch(qi));
            }
            if blacks[q.b_first.index()].label == blacks[q.b_second.index()].label {
                return Err(GraphError::LabelClash(qi));
            }
        }

        // Collect S-edges and check orientability: every directed traversal
        // (white→black or black→white) may occur at most once.  Walking a
        // quad ccw traverses (ws,b_first) white→black, (b_first,wc)
        // black→white, (wc,b_second) white→black, (b_second,ws) black→white.
        let mut edge_index: HashMap<(u32, u32), usize> = HashMap::new();
        let mut s_edges: Vec<SEdge> = Vec::new();
        let mut seen_direction: Vec<[bool; 2]> = Vec::new(); // [w→b, b→w]
        for (qi, q) in quads.iter().enumerate() {
            let traversals = [
                (q.ws, q.b_first, 0usize),
                (q.wc, q.b_first, 1),
                (q.wc, q.b_second, 0),
                (q.ws, q.b_second, 1),
            ];
            for (w, b, dir) in traversals {
                let idx = *edge_index.entry((w.0, b.0)).or_insert_with(|| {
                    s_edges.push(SEdge {
                        white: w,
                        black: b,
                        quads: [None, None],
                    });
                    seen_direction.push([false, false]);
                    s_edges.len() - 1
                });
                if seen_direction[idx][dir] {
                    return Err(GraphError::NonManifoldEdge {
                        white: w.0,
                        black: b.0,
                    });
                }
                seen_direction[idx][dir] = true;
                let slot = &mut s_edges[idx].quads;
                if slot[0].is_none() {
                    slot[0] = Some(QuadId(qi as u32));
                } else if slot[0] != Some(QuadId(qi as u32)) && slot[1].is_none() {
                    slot[1] = Some(QuadId(qi as u32));
                }
            }
        }

        // Incidence lists, in deterministic (insertion = quad) order.
        let mut white_edges: Vec<Vec<u32>> = vec![Vec::new(); whites.len()];
        let mut black_edges: Vec<Vec<u32>> = vec![Vec::new(); blacks.len()];
        for (ei, e) in s_edges.iter().enumerate() {
            white_edges[e.white.index()].push(ei as u32);
            black_edges[e.black.index()].push(ei as u32);
        }

        // Fans: chain each white's quads so that exit(i) == entry(i+1).
        let mut quads_at_white: Vec<Vec<QuadId>> = vec![Vec::new(); whites.len()];
        for (qi, q) in quads.iter().enumerate() {
            quads_at_white[q.ws.index()].push(QuadId(qi as u32));
            quads_at_white[q.wc.index()].push(QuadId(qi as u32));
        }
        let mut fans: Vec<Fan> = Vec::with_capacity(whites.len());
        for (wi, incident) in quads_at_white.iter().enumerate() {
            let w = WhiteId(wi as u32);
            if incident.is_empty() {
                return Err(GraphError::Disconnected);
            }
            let mut by_entry: HashMap<u32, QuadId> = HashMap::new();
            let mut exits: Vec<u32> = Vec::new();
            for &qid in incident {
                let (entry, exit) = quads[qid.index()].entry_exit(w);
                if by_entry.insert(entry.0, qid).is_some() {
                    return Err(GraphError::BranchingFan(w.0));
                }
                exits.push(exit.0);
            }
            // Open fan: start at the unique quad whose entry is nobody's
            // exit.  Closed fan: start at the smallest quad id.
            let start = incident
                .iter()
                .copied()
                .filter(|qid| {
                    let (entry, _) = quads[qid.index()].entry_exit(w);
                    !exits.contains(&entry.0)
                })
                .min();
            let (start, closed) = match start {
                Some(qid) => (qid, false),
                None => (*incident.iter().min().expect("nonempty"), true),
            };
            let mut entries = Vec::with_capacity(incident.len());
            let mut current = start;
            loop {
                let q = &quads[current.index()];
                let (entry, exit) = q.entry_exit(w);
                entries.push(FanEntry {
                    quad: current,
                    partner: q.partner(w),
                    entry,
                    exit,
                });
                match by_entry.get(&exit.0) {
                    Some(&next) if next != start => current = next,
                    _ => break,
                }
            }
            if entries.len() != incident.len() {
                return Err(GraphError::BranchingFan(w.0));
            }
            let last_exit = entries.last().expect("nonempty").exit;
            let first_entry = entries[0].entry;
            let closed = closed && last_exit == first_entry;
            fans.push(Fan { entries, closed });
        }

        // Every black must be the midpoint of exactly one G-edge.
        let mut g_edges = Vec::with_capacity(blacks.len());
        for (bi, edges) in black_edges.iter().enumerate() {
            let mut sphere_ends: Vec<WhiteId> = edges
                .iter()
                .map(|&ei| s_edges[ei as usize].white)
                .filter(|w| whites[w.index()].family == Family::Sphere)
                .collect();
            sphere_ends.sort_unstable();
            sphere_ends.dedup();
            if sphere_ends.len() != 2 {
                return Err(GraphError::BadBlack(bi as u32));
            }
            g_edges.push(GEdge {
                black: BlackId(bi as u32),
                v1: sphere_ends[0],
                v2: sphere_ends[1],
                label: blacks[bi].label,
            });
        }

        // Connectivity over S-edges.
        let n_nodes = whites.len() + blacks.len();
        let mut seen = vec![false; n_nodes];
        let mut queue = VecDeque::new();
        seen[0] = true;
        queue.push_back(0usize);
        let mut count = 1usize;
        while let Some(node) = queue.pop_front() {
            let edges = if node < whites.len() {
                &white_edges[node]
            } else {
                &black_edges[node - whites.len()]
            };
            for &ei in edges {
                let e = &s_edges[ei as usize];
                let other = if node < whites.len() {
                    whites.len() + e.black.index()
                } else {
                    e.white.index()
                };
                if !seen[other] {
                    seen[other] = true;
                    count += 1;
                    queue.push_back(other);
                }
            }
        }
        if count != n_nodes {
            return Err(GraphError::Disconnected);
        }

        // Disk topology: V - E + F = 1.
        let euler = n_nodes as i64 - s_edges.len() as i64 + quads.len() as i64;
        if euler != 1 {
            return Err(GraphError::NotADisk(euler));
        }

        let mut grid_whites = HashMap::new();
        for (wi, w) in whites.iter().enumerate() {
            if let Some(xy) = w.grid {
                grid_whites.insert(xy, WhiteId(wi as u32));
            }
        }

        Ok(SQuadGraph {
            whites,
            blacks,
            quads,
            fans,
            s_edges,
            white_edges,
            black_edges,
            g_edges,
            grid_whites,
        })
    }

    /// The central extension of an I×J rectangular patch of G: I·J
    /// sphere-family whites on the even grid, (I−1)(J−1) circle-family whites
    /// on the odd grid, and 4(I−1)(J−1) quads.
    pub fn build_rectangle(i: usize, j: usize) -> Result<SQuadGraph, GraphError> {
        if i < 2 || j < 2 {
            return Err(GraphError::RectangleTooSmall(i, j));
        }
        let (w, h) = (2 * i - 1, 2 * j - 1);
        let mut whites = Vec::new();
        let mut blacks = Vec::new();
        let mut node_at: HashMap<(i32, i32), (bool, u32)> = HashMap::new(); // (is_white, idx)
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                match (x % 2, y % 2) {
                    (0, 0) => {
                        node_at.insert((x, y), (true, whites.len() as u32));
                        whites.push(White {
                            family: Family::Sphere,
                            grid: Some([x, y]),
                        });
                    }
                    (1, 1) => {
                        node_at.insert((x, y), (true, whites.len() as u32));
                        whites.push(White {
                            family: Family::Circle,
                            grid: Some([x, y]),
                        });
                    }
                    (parity_x, _) => {
                        let label = if parity_x == 1 {
                            EdgeLabel::Horizontal
                        } else {
                            EdgeLabel::Vertical
                        };
                        node_at.insert((x, y), (false, blacks.len() as u32));
                        blacks.push(Black {
                            label,
                            grid: Some([x, y]),
                        });
                    }
                }
            }
        }
        let mut quads = Vec::new();
        for y in 0..(h - 1) as i32 {
            for x in 0..(w - 1) as i32 {
                // Unit square, ccw, rotated to start at its sphere corner.
                let mut corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
                let sphere_pos = corners
                    .iter()
                    .position(|&(cx, cy)| cx % 2 == 0 && cy % 2 == 0)
                    .expect("every unit square has a sphere corner");
                corners.rotate_left(sphere_pos);
                let ids: Vec<u32> = corners.iter().map(|c| node_at[c].1).collect();
                quads.push(Quad {
                    ws: WhiteId(ids[0]),
                    b_first: BlackId(ids[1]),
                    wc: WhiteId(ids[2]),
                    b_second: BlackId(ids[3]),
                });
            }
        }
        SQuadGraph::new(whites, blacks, quads)
    }

    /// Central extension of a general quad mesh.  Edge labels are propagated
    /// by alternation around faces starting from the first edge of the first
    /// face; inconsistency is an error.
    pub fn from_quad_mesh(mesh: &QuadMesh) -> Result<SQuadGraph, GraphError> {
        if mesh.faces.is_empty() {
            return Err(GraphError::Empty);
        }
        let nv = mesh.num_vertices as u32;
        // Collect undirected G-edges.
        let mut edge_ids: HashMap<(u32, u32), u32> = HashMap::new();
        let mut edge_ends: Vec<(u32, u32)> = Vec::new();
        let key = |a: u32, b: u32| (a.min(b), a.max(b));
        for (fi, f) in mesh.faces.iter().enumerate() {
            for c in 0..4 {
                let (a, b) = (f[c], f[(c + 1) % 4]);
                if a >= nv || b >= nv {
                    return Err(GraphError::BadMesh(format!(
                        "face {fi} references vertex out of range"
                    )));
                }
                if a == b {
                    return Err(GraphError::BadMesh(format!("face {fi} repeats a vertex")));
                }
                edge_ids.entry(key(a, b)).or_insert_with(|| {
                    edge_ends.push(key(a, b));
                    (edge_ends.len() - 1) as u32
                });
            }
        }
        // Label propagation: edges alternate around each face.
        let mut labels: Vec<Option<EdgeLabel>> = vec![None; edge_ends.len()];
        let first_edge = edge_ids[&key(mesh.faces[0][0], mesh.faces[0][1])];
        labels[first_edge as usize] = Some(mesh.first_label);
        let mut changed = true;
        while changed {
            changed = false;
            for f in &mesh.faces {
                let ids: Vec<u32> = (0..4)
                    .map(|c| edge_ids[&key(f[c], f[(c + 1) % 4])])
                    .collect();
                let known = ids
                    .iter()
                    .enumerate()
                    .find(|(_, &e)| labels[e as usize].is_some());
                if let Some((pos, &e)) = known {
                    let base = labels[e as usize].expect("known");
                    for (off, &other) in ids.iter().enumerate() {
                        let want = if (off + 4 - pos) % 2 == 0 {
                            base
                        } else {
                            base.opposite()
                        };
                        match labels[other as usize] {
                            None => {
                                labels[other as usize] = Some(want);
                                changed = true;
                            }
                            Some(l) if l != want => {
                                return Err(GraphError::BadMesh(
                                    "edge labels cannot alternate around every face".into(),
                                ));
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        if labels.iter().any(Option::is_none) {
            return Err(GraphError::BadMesh("mesh edges are not face-connected".into()));
        }

        let mut whites: Vec<White> = (0..nv)
            .map(|_| White {
                family: Family::Sphere,
                grid: None,
            })
            .collect();
        let blacks: Vec<Black> = labels
            .iter()
            .map(|l| Black {
                label: l.expect("all labelled"),
                grid: None,
            })
            .collect();
        let mut quads = Vec::with_capacity(4 * mesh.faces.len());
        for f in &mesh.faces {
            let wc = WhiteId(whites.len() as u32);
            whites.push(White {
                family: Family::Circle,
                grid: None,
            });
            for c in 0..4 {
                let prev = edge_ids[&key(f[(c + 3) % 4], f[c])];
                let next = edge_ids[&key(f[c], f[(c + 1) % 4])];
                quads.push(Quad {
                    ws: WhiteId(f[c]),
                    b_first: BlackId(next),
                    wc,
                    b_second: BlackId(prev),
                });
            }
        }
        SQuadGraph::new(whites, blacks, quads)
    }

    #[inline]
    pub fn num_whites(&self) -> usize {
        self.whites.len()
    }

    #[inline]
    pub fn num_blacks(&self) -> usize {
        self.blacks.len()
    }

    #[inline]
    pub fn num_quads(&self) -> usize {
        self.quads.len()
    }

    #[inline]
    pub fn white(&self, w: WhiteId) -> &White {
        &self.whites[w.index()]
    }

    #[inline]
    pub fn black(&self, b: BlackId) -> &Black {
        &self.blacks[b.index()]
    }

    #[inline]
    pub fn quad(&self, q: QuadId) -> &Quad {
        &self.quads[q.index()]
    }

    pub fn white_ids(&self) -> impl Iterator<Item = WhiteId> + '_ {
        (0..self.whites.len() as u32).map(WhiteId)
    }

    pub fn black_ids(&self) -> impl Iterator<Item = BlackId> + '_ {
        (0..self.blacks.len() as u32).map(BlackId)
    }

    pub fn quad_ids(&self) -> impl Iterator<Item = QuadId> + '_ {
        (0..self.quads.len() as u32).map(QuadId)
    }

    pub fn sphere_whites(&self) -> impl Iterator<Item = WhiteId> + '_ {
        self.white_ids()
            .filter(|w| self.whites[w.index()].family == Family::Sphere)
    }

    pub fn circle_whites(&self) -> impl Iterator<Item = WhiteId> + '_ {
        self.white_ids()
            .filter(|w| self.whites[w.index()].family == Family::Circle)
    }

    #[inline]
    pub fn fan(&self, w: WhiteId) -> &Fan {
        &self.fans[w.index()]
    }

    /// Number of incident quads (= number of white partners).
    #[inline]
    pub fn degree(&self, w: WhiteId) -> usize {
        self.fans[w.index()].entries.len()
    }

    /// A white is a boundary node iff its fan is open.
    #[inline]
    pub fn is_boundary(&self, w: WhiteId) -> bool {
        !self.fans[w.index()].closed
    }

    /// Opposite white corners over all quads at `w`, in fan order.
    pub fn white_partners(&self, w: WhiteId) -> impl Iterator<Item = (WhiteId, QuadId)> + '_ {
        self.fans[w.index()]
            .entries
            .iter()
            .map(|e| (e.partner, e.quad))
    }

    #[inline]
    pub fn s_edges(&self) -> &[SEdge] {
        &self.s_edges
    }

    pub fn edges_at_white(&self, w: WhiteId) -> impl Iterator<Item = &SEdge> + '_ {
        self.white_edges[w.index()]
            .iter()
            .map(|&ei| &self.s_edges[ei as usize])
    }

    pub fn edges_at_black(&self, b: BlackId) -> impl Iterator<Item = &SEdge> + '_ {
        self.black_edges[b.index()]
            .iter()
            .map(|&ei| &self.s_edges[ei as usize])
    }

    /// The G-edge a black node subdivides.
    #[inline]
    pub fn g_edge(&self, b: BlackId) -> &GEdge {
        &self.g_edges[b.index()]
    }

    #[inline]
    pub fn g_edges(&self) -> &[GEdge] {
        &self.g_edges
    }

    /// Label of the S-edge (w, b): equal to the black's G-edge label at
    /// sphere-family whites and opposite at circle-family whites.
    #[inline]
    pub fn s_edge_label(&self, w: WhiteId, b: BlackId) -> EdgeLabel {
        match self.whites[w.index()].family {
            Family::Sphere => self.blacks[b.index()].label,
            Family::Circle => self.blacks[b.index()].label.opposite(),
        }
    }

    /// White at the given rectangle grid coordinates, if any.
    pub fn white_at_grid(&self, x: i32, y: i32) -> Option<WhiteId> {
        self.grid_whites.get(&[x, y]).copied()
    }

    /// Extent of the grid coordinates when every node carries them:
    /// (max_x, max_y).
    pub fn grid_extent(&self) -> Option<(i32, i32)> {
        let mut max = [i32::MIN; 2];
        for g in self
            .whites
            .iter()
            .map(|w| w.grid)
            .chain(self.blacks.iter().map(|b| b.grid))
        {
            let g = g?;
            max[0] = max[0].max(g[0]);
            max[1] = max[1].max(g[1]);
        }
        Some((max[0], max[1]))
    }

    /// Breadth-first distances from `start` in the S-edge incidence graph.
    /// Node indexing: whites first, then blacks.
    fn bfs_distances(&self, start: usize) -> Vec<u32> {
        let n = self.whites.len() + self.blacks.len();
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        dist[start] = 0;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            let edges = if node < self.whites.len() {
                &self.white_edges[node]
            } else {
                &self.black_edges[node - self.whites.len()]
            };
            for &ei in edges {
                let e = &self.s_edges[ei as usize];
                let other = if node < self.whites.len() {
                    self.whites.len() + e.black.index()
                } else {
                    e.white.index()
                };
                if dist[other] == u32::MAX {
                    dist[other] = dist[node] + 1;
                    queue.push_back(other);
                }
            }
        }
        dist
    }

    /// The node of minimum eccentricity in the S-edge graph (ties broken by
    /// smallest index, whites before blacks).  A good origin for integration.
    pub fn central_node(&self) -> NodeId {
        let n = self.whites.len() + self.blacks.len();
        let mut best = (u32::MAX, 0usize);
        for start in 0..n {
            let ecc = *self
                .bfs_distances(start)
                .iter()
                .max()
                .expect("nonempty graph");
            if ecc < best.0 {
                best = (ecc, start);
            }
        }
        if best.1 < self.whites.len() {
            NodeId::White(WhiteId(best.1 as u32))
        } else {
            NodeId::Black(BlackId((best.1 - self.whites.len()) as u32))
        }
    }

    /// The white of minimum eccentricity (ties broken by smallest id).  Used
    /// to seed layout at the pole/apex.
    pub fn central_white(&self) -> WhiteId {
        let mut best = (u32::MAX, 0u32);
        for wi in 0..self.whites.len() {
            let ecc = *self
                .bfs_distances(wi)
                .iter()
                .max()
                .expect("nonempty graph");
            if ecc < best.0 {
                best = (ecc, wi as u32);
            }
        }
        WhiteId(best.1)
    }

    /// A breadth-first spanning tree of the S-edge graph rooted at `origin`:
    /// for each node except the root, the S-edge index linking it to its
    /// parent.  Entries are `(s_edge_index, parent_is_white)` keyed by node
    /// index (whites first, then blacks).
    pub fn spanning_tree(&self, origin: NodeId) -> Vec<Option<u32>> {
        let n = self.whites.len() + self.blacks.len();
        let start = match origin {
            NodeId::White(w) => w.index(),
            NodeId::Black(b) => self.whites.len() + b.index(),
        };
        let mut parent_edge = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            let edges = if node < self.whites.len() {
                &self.white_edges[node]
            } else {
                &self.black_edges[node - self.whites.len()]
            };
            for &ei in edges {
                let e = &self.s_edges[ei as usize];
                let other = if node < self.whites.len() {
                    self.whites.len() + e.black.index()
                } else {
                    e.white.index()
                };
                if !seen[other] {
                    seen[other] = true;
                    parent_edge[other] = Some(ei);
                    queue.push_back(other);
                }
            }
        }
        parent_edge
    }
}
