//! Lifting embedded ring patterns to pairs of dual two-sphere Koebe nets.
//!
//! Scaling each ring center off the surface by `√q / cos R_v` (spherical) or
//! `√q / cosh r_v` (hyperbolic) and each touching point to the two radii
//! `1/√q` and `√q` produces two polyhedral nets — one on the sphere-family
//! vertices, one on the circle-family vertices — whose edges alternately
//! touch the two concentric spheres `S²₊` and `S²₋`, whose faces are planar,
//! and whose vertex vectors are the face normals of the other net.  In the
//! Lorentz flavor the spheres are spacelike with squared radii `−1/q` and
//! `−q`, and all norms are taken in the Minkowski form.

use nalgebra::Matrix3;
use thiserror::Error;

use crate::elliptic::Modulus;
use crate::geom::{Flavor, Vec3};
use crate::layout::{EmbeddedRingPattern, RingRadius};
use crate::quadgraph::{BlackId, EdgeLabel, Family, QuadId, SQuadGraph, WhiteId};

#[derive(Debug, Error)]
pub enum KoebeError {
    /// An edge of the lifted net misses its tangency sphere.
    #[error(
        "edge tangency residual {residual:.3e} at white {white}, black {black} exceeds 1e-7"
    )]
    TangencyViolation {
        white: u32,
        black: u32,
        residual: f64,
    },
    /// A face is too small or too collinear to define a plane and center.
    #[error("face around white {white} has an ill-conditioned plane")]
    DegenerateFace { white: u32 },
}

/// One of the two concentric tangency spheres.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentSphere {
    /// `S²₊`: radius `1/√q` (spherical), squared radius `−1/q` (Lorentz).
    Plus,
    /// `S²₋`: radius `√q` (spherical), squared radius `−q` (Lorentz).
    Minus,
}

/// The sphere touched by a net edge, per incident white node: the edge of the
/// net through white `w` across black `b` touches the sphere selected by the
/// label of the edge `(w, b)`.  Spherical nets touch `S²₊` along horizontal
/// edges; spacelike Lorentz nets touch the spheres the other way around.
pub fn tangent_sphere(flavor: Flavor, s_edge_label: EdgeLabel) -> TangentSphere {
    match (flavor, s_edge_label) {
        (Flavor::Spherical, EdgeLabel::Horizontal) => TangentSphere::Plus,
        (Flavor::Spherical, EdgeLabel::Vertical) => TangentSphere::Minus,
        (Flavor::Hyperbolic, EdgeLabel::Horizontal) => TangentSphere::Minus,
        (Flavor::Hyperbolic, EdgeLabel::Vertical) => TangentSphere::Plus,
    }
}

/// A pair of dual two-sphere Koebe nets over one S-quad graph.  Both nets
/// are stored keyed by white node: sphere-family whites carry the vertices
/// of one net, circle-family whites the vertices of the other, and every
/// white also carries the center of the face the *other* net forms around
/// it.
#[derive(Clone, Debug)]
pub struct KoebePair {
    pub flavor: Flavor,
    pub modulus: Modulus,
    pub graph: SQuadGraph,
    /// Net vertex per white node.
    pub vertices: Vec<Vec3>,
    /// Center of the dual face around each white node: the scalar multiple
    /// of the vertex vector lying in that face's plane.
    pub face_centers: Vec<Vec3>,
    /// Touching point on `S²₊` per black node.
    pub tangent_plus: Vec<Vec3>,
    /// Touching point on `S²₋` per black node.
    pub tangent_minus: Vec<Vec3>,
    /// Radius of `S²₊`: `1/√q`, or `−1/q` as a squared radius in the Lorentz
    /// flavor.
    pub r_plus: f64,
    /// Radius of `S²₋`: `√q`, respectively `−q` squared.
    pub r_minus: f64,
    /// Ring radii carried over from the pattern (signed inner radii).
    pub radii: Vec<RingRadius>,
}

/// The Jacobi triple of a white's uniformizing variable, recovered from its
/// ring radii (spherical: `sn = cos r`, `cn = sin r`, `dn = sin R`;
/// hyperbolic: `sn = 1/cosh r`, `cn = tanh r`, `dn = tanh R`).
fn sn_cn_dn(flavor: Flavor, rr: RingRadius) -> (f64, f64, f64) {
    match flavor {
        Flavor::Spherical => (rr.r.cos(), rr.r.sin(), rr.big_r.sin()),
        Flavor::Hyperbolic => (1.0 / rr.r.cosh(), rr.r.tanh(), rr.big_r.tanh()),
    }
}

/// Scale factor taking a ring center to its net vertex.
fn vertex_scale(flavor: Flavor, q: f64, rr: RingRadius) -> f64 {
    let (sn, _, _) = sn_cn_dn(flavor, rr);
    match flavor {
        Flavor::Spherical => 1.0 / (q.sqrt() * sn),
        Flavor::Hyperbolic => q.sqrt() * sn,
    }
}

/// Scale factor taking a ring center to the center of the dual face around
/// it (the reciprocal of the vertex scale in the flavor's quadric).
fn face_center_scale(flavor: Flavor, q: f64, rr: RingRadius) -> f64 {
    let (sn, _, _) = sn_cn_dn(flavor, rr);
    match flavor {
        Flavor::Spherical => q.sqrt() * sn,
        Flavor::Hyperbolic => 1.0 / (q.sqrt() * sn),
    }
}

/// Lift an embedded ring pattern to its pair of dual two-sphere Koebe nets,
/// verifying every edge tangency on the way.
pub fn lift(pat: &EmbeddedRingPattern) -> Result<KoebePair, KoebeError> {
    let flavor = pat.flavor;
    let q = pat.modulus.q();
    let sq = q.sqrt();
    let vertices: Vec<Vec3> = pat
        .graph
        .white_ids()
        .map(|w| pat.centers[w.index()] * vertex_scale(flavor, q, pat.radii[w.index()]))
        .collect();
    let face_centers: Vec<Vec3> = pat
        .graph
        .white_ids()
        .map(|w| pat.centers[w.index()] * face_center_scale(flavor, q, pat.radii[w.index()]))
        .collect();
    let tangent_plus: Vec<Vec3> = pat.touch_points.iter().map(|t| t / sq).collect();
    let tangent_minus: Vec<Vec3> = pat.touch_points.iter().map(|t| t * sq).collect();
    let (r_plus, r_minus) = match flavor {
        Flavor::Spherical => (1.0 / sq, sq),
        Flavor::Hyperbolic => (-1.0 / q, -q),
    };
    let kp = KoebePair {
        flavor,
        modulus: pat.modulus,
        graph: pat.graph.clone(),
        vertices,
        face_centers,
        tangent_plus,
        tangent_minus,
        r_plus,
        r_minus,
        radii: pat.radii.clone(),
    };
    for e in kp.graph.s_edges() {
        let residual = kp.edge_tangency_residual(e.white, e.black);
        if residual.is_nan() || residual > 1e-7 {
            return Err(KoebeError::TangencyViolation {
                white: e.white.0,
                black: e.black.0,
                residual,
            });
        }
    }
    Ok(kp)
}

impl KoebePair {
    /// The touching point assigned to the net edge through white `w` across
    /// black `b`.
    pub fn tangent_point(&self, w: WhiteId, b: BlackId) -> Vec3 {
        match tangent_sphere(self.flavor, self.graph.s_edge_label(w, b)) {
            TangentSphere::Plus => self.tangent_plus[b.index()],
            TangentSphere::Minus => self.tangent_minus[b.index()],
        }
    }

    /// The single touching point the central-extension net places at black
    /// `b`: the one on the sphere-family net's edge through `b`.  Face
    /// centers connect to this point, not to the circle-family net's
    /// touching point.
    pub fn piece_tangent_point(&self, b: BlackId) -> Vec3 {
        self.tangent_point(self.graph.g_edge(b).v1, b)
    }

    /// Tangency defect of the half-edge from the vertex at `w` to the
    /// touching point across `b`: `|⟨k_w − t, t⟩|` in the flavor's form,
    /// which vanishes exactly when the edge lies in the tangent plane of its
    /// sphere at `t`.
    pub fn edge_tangency_residual(&self, w: WhiteId, b: BlackId) -> f64 {
        let t = self.tangent_point(w, b);
        let k = self.vertices[w.index()];
        self.flavor.dot(&(k - t), &t).abs()
    }

    /// Length of an edge difference in the flavor's form (Lorentz edges are
    /// spacelike, so the squared form is positive).
    pub fn edge_norm(&self, d: &Vec3) -> f64 {
        self.flavor.dot(d, d).max(0.0).sqrt()
    }

    /// The four edge lengths of the fundamental piece of a quad — vertex,
    /// first touching point, face center, second touching point — measured
    /// on the lifted points, with the two closed forms each length must
    /// equal: one in the ring radii, one in the Jacobi functions of the
    /// uniformizing variables.
    pub fn fundamental_piece_lengths(&self, quad: QuadId) -> [PieceEdge; 4] {
        let qd = self.graph.quad(quad);
        let q = self.modulus.q();
        let sq = q.sqrt();
        let corners = [
            (qd.ws, qd.b_first),
            (qd.wc, qd.b_first),
            (qd.wc, qd.b_second),
            (qd.ws, qd.b_second),
        ];
        corners.map(|(w, b)| {
            let family = self.graph.white(w).family;
            let label = self.graph.s_edge_label(w, b);
            let endpoint = match family {
                Family::Sphere => self.vertices[w.index()],
                Family::Circle => self.face_centers[w.index()],
            };
            let measured = self.edge_norm(&(endpoint - self.piece_tangent_point(b)));
            let rr = self.radii[w.index()];
            let (sn, cn, dn) = sn_cn_dn(self.flavor, rr);
            let (trig, elliptic) = match (self.flavor, family, label) {
                (Flavor::Spherical, Family::Sphere, EdgeLabel::Horizontal) => {
                    (rr.r.abs().tan() / sq, cn.abs() / (sq * sn))
                }
                (Flavor::Spherical, Family::Sphere, EdgeLabel::Vertical) => {
                    (sq * rr.big_r.tan(), dn / (sq * sn))
                }
                (Flavor::Spherical, Family::Circle, EdgeLabel::Horizontal) => {
                    (sq * rr.r.abs().sin(), sq * cn.abs())
                }
                (Flavor::Spherical, Family::Circle, EdgeLabel::Vertical) => {
                    (rr.big_r.sin() / sq, dn / sq)
                }
                (Flavor::Hyperbolic, Family::Sphere, EdgeLabel::Horizontal) => {
                    (sq * rr.r.abs().tanh(), sq * cn.abs())
                }
                (Flavor::Hyperbolic, Family::Sphere, EdgeLabel::Vertical) => {
                    (rr.big_r.tanh() / sq, dn / sq)
                }
                (Flavor::Hyperbolic, Family::Circle, EdgeLabel::Horizontal) => {
                    (rr.r.abs().sinh() / sq, cn.abs() / (sq * sn))
                }
                (Flavor::Hyperbolic, Family::Circle, EdgeLabel::Vertical) => {
                    (sq * rr.big_r.sinh(), dn / (sq * sn))
                }
            };
            PieceEdge {
                white: w,
                black: b,
                measured,
                from_radii: trig,
                from_elliptic: elliptic,
            }
        })
    }

    /// The net face around a white node: the vertices of the other family's
    /// net at the fan partners, in fan order.
    pub fn face_around(&self, w: WhiteId) -> Vec<Vec3> {
        self.graph
            .fan(w)
            .entries
            .iter()
            .map(|e| self.vertices[e.partner.index()])
            .collect()
    }
}

/// One edge of a fundamental piece with its measured length and the two
/// closed forms it must match.
#[derive(Clone, Copy, Debug)]
pub struct PieceEdge {
    pub white: WhiteId,
    pub black: BlackId,
    pub measured: f64,
    /// Closed form in the ring radii (`√q·tan R`, `sin r/√q`, …).
    pub from_radii: f64,
    /// Closed form in the Jacobi functions (`dn/(√q·sn)`, `√q·cn`, …).
    pub from_elliptic: f64,
}

/// Recompute the center of the face around white `w` from the face vertices
/// alone: fit the face plane, then intersect it with the line spanned by the
/// stored net vertex at `w`.  This is an independent route to the stored
/// `face_centers[w]` (which comes from the ring-pattern scaling).
pub fn face_center(kp: &KoebePair, w: WhiteId) -> Result<Vec3, KoebeError> {
    let pts = kp.face_around(w);
    if pts.len() < 3 {
        return Err(KoebeError::DegenerateFace { white: w.0 });
    }
    let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let mut scatter = Matrix3::<f64>::zeros();
    for p in &pts {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    // Eigenvalues ascending by sort: find largest/middle/smallest.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
    });
    let (smallest, middle, largest) = (order[0], order[1], order[2]);
    if eig.eigenvalues[middle] <= 1e-18 * eig.eigenvalues[largest].max(1e-300) {
        return Err(KoebeError::DegenerateFace { white: w.0 });
    }
    let normal = eig.eigenvectors.column(smallest).into_owned();
    let axis = kp.vertices[w.index()];
    let denom = normal.dot(&axis);
    if denom.abs() <= 1e-9 * axis.norm() {
        return Err(KoebeError::DegenerateFace { white: w.0 });
    }
    Ok(axis * (normal.dot(&centroid) / denom))
}

/// Residual report over a Koebe pair: worst-case defects per invariant
/// class.  Purely diagnostic; nothing is rejected here.
#[derive(Clone, Copy, Debug, Default)]
pub struct KoebeDiagnostics {
    /// Worst edge-tangency defect `|⟨k − t, t⟩|` over all net half-edges.
    pub max_tangency: f64,
    /// Worst face planarity defect: largest distance of a face vertex from
    /// the face's best-fit plane (Euclidean; planarity is metric-free).
    pub max_planarity: f64,
    /// Worst duality defect: `|⟨Δk_primal, Δk_dual⟩|` (normalized) between
    /// the two net edges crossing at an interior touching point.
    pub max_duality: f64,
    /// Worst face-center defect: `|⟨k_vertex − k̃, k̃⟩|` over face vertices.
    pub max_face_center: f64,
    /// Whether the touching points around every net vertex are cyclically
    /// ordered (all angular steps of one sign, full turn when interior).
    pub regular: bool,
    /// Lorentz flavor only: worst violation of `⟨k,k⟩ < 0`, `x₃ > 0` over
    /// all lifted points (0 when all points are timelike on the upper
    /// sheet).
    pub max_sheet_violation: f64,
}

/// Measure all Koebe-net invariants of a pair.
pub fn verify_koebe(kp: &KoebePair) -> KoebeDiagnostics {
    let flavor = kp.flavor;
    let graph = &kp.graph;
    let mut d = KoebeDiagnostics {
        regular: true,
        ..Default::default()
    };

    for e in graph.s_edges() {
        d.max_tangency = d.max_tangency.max(kp.edge_tangency_residual(e.white, e.black));
    }

    for w in graph.white_ids() {
        // Planarity and face-center defects of the face around `w`.
        let pts = kp.face_around(w);
        if pts.len() >= 4 {
            let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
            let mut scatter = Matrix3::<f64>::zeros();
            for p in &pts {
                let diff = p - centroid;
                scatter += diff * diff.transpose();
            }
            let eig = scatter.symmetric_eigen();
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| {
                eig.eigenvalues[a]
                    .partial_cmp(&eig.eigenvalues[b])
                    .unwrap()
            });
            let normal = eig.eigenvectors.column(order[0]).into_owned();
            for p in &pts {
                d.max_planarity = d.max_planarity.max(normal.dot(&(p - centroid)).abs());
            }
        }
        let fc = kp.face_centers[w.index()];
        for p in &pts {
            d.max_face_center = d
                .max_face_center
                .max(flavor.dot(&(p - fc), &fc).abs());
        }

        // Regularity: angular steps of the touching points around the
        // vertex, measured in the tangent plane of the ring center.
        let center = kp.vertices[w.index()];
        let p = flavor.renormalize(&center);
        let (e1, e2) = flavor.tangent_frame(&p);
        let fan = graph.fan(w);
        let mut bearings = Vec::with_capacity(fan.entries.len() + 1);
        for (i, e) in fan.entries.iter().enumerate() {
            let mut push = |b: BlackId| {
                let t = kp.tangent_point(w, b);
                // A touching point on the vertex axis has no bearing.
                if flavor.tangent_project(&p, &t).norm() > 1e-9 {
                    bearings.push(flavor.bearing(&p, &e1, &e2, &t));
                }
            };
            push(e.entry);
            if !fan.closed || i + 1 < fan.entries.len() {
                push(e.exit);
            }
        }
        if bearings.len() >= 3 {
            if fan.closed {
                bearings.push(bearings[0]);
            }
            let mut sign = 0.0f64;
            for pair in bearings.windows(2) {
                let mut step = pair[1] - pair[0];
                while step > std::f64::consts::PI {
                    step -= 2.0 * std::f64::consts::PI;
                }
                while step <= -std::f64::consts::PI {
                    step += 2.0 * std::f64::consts::PI;
                }
                if step.abs() > 1e-12 {
                    if sign != 0.0 && step.signum() != sign {
                        d.regular = false;
                    }
                    sign = step.signum();
                }
            }
        }
    }

    // Duality: the primal and dual net edges crossing at an interior black
    // are orthogonal.
    for b in graph.black_ids() {
        let ge = graph.g_edge(b);
        let mut wcs: Vec<usize> = graph
            .edges_at_black(b)
            .flat_map(|e| e.quads.iter().flatten())
            .map(|&qq| graph.quad(qq).wc.index())
            .collect();
        wcs.sort_unstable();
        wcs.dedup();
        if wcs.len() != 2 {
            continue;
        }
        let du = kp.vertices[ge.v2.index()] - kp.vertices[ge.v1.index()];
        let dv = kp.vertices[wcs[1]] - kp.vertices[wcs[0]];
        let denom = (kp.edge_norm(&du) * kp.edge_norm(&dv)).max(1e-300);
        d.max_duality = d.max_duality.max(flavor.dot(&du, &dv).abs() / denom);
    }

    if flavor == Flavor::Hyperbolic {
        for x in kp
            .vertices
            .iter()
            .chain(kp.face_centers.iter())
            .chain(kp.tangent_plus.iter())
            .chain(kp.tangent_minus.iter())
        {
            let timelike = flavor.dot(x, x);
            d.max_sheet_violation = d.max_sheet_violation.max(timelike.max(0.0)).max(-x.z.min(0.0));
        }
    }
    d
}
