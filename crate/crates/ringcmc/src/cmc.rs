//! Discrete cmc surfaces from two-sphere Koebe nets: sphere/circle radii,
//! one-form integration into a Christoffel-dual pair of touching-sphere
//! surfaces, mixed-area curvatures, and the modulus-to-one limits.
//!
//! The construction integrates two edge one-forms over the central-extension
//! graph of the net: on the edge from a white net point `k_w` towards the
//! touching point `t_b` with unit direction `û`, the primal surface steps by
//! `−d_w·û` and the dual by `∓d*_w·û` (sign by edge label).  The difference
//! of the two surfaces then reproduces the net itself, so the Gauss map is
//! `n = c* − c = k`, and every face satisfies the mixed-area mean-curvature
//! equation `H_f = 1`.

use std::collections::VecDeque;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::elliptic::Modulus;
use crate::geom::{Flavor, Vec3};
use crate::koebe::{lift, verify_koebe, KoebePair};
use crate::layout::embed;
use crate::quadgraph::{BlackId, EdgeLabel, Family, QuadId, SQuadGraph, WhiteId};
use crate::ringpattern::{solve, BoundaryData, PatternSolution, SolveOptions};

#[derive(Debug, Error)]
pub enum CmcError {
    /// Radii formulas blow up where `sn` vanishes.
    #[error("degenerate radius at white {white}: sn = {sn:.3e}")]
    DegenerateRadius { white: u32, sn: f64 },
    /// The Koebe pair fails its own invariants too badly to integrate.
    #[error("Koebe net residual {residual:.3e} exceeds 1e-7")]
    InvalidKoebe { residual: f64 },
    /// An edge of the central extension is too short to orient.
    #[error("edge (white {white}, black {black}) has near-zero length {length:.3e}")]
    DegenerateEdge { white: u32, black: u32, length: f64 },
    /// A one-form fails to close around an independent cycle.
    #[error("one-form closure residual {residual:.3e} on {cycle} exceeds 1e-7")]
    ClosureViolation { cycle: String, residual: f64 },
    /// Mixed-area input polygons have non-corresponding or non-parallel
    /// edges.
    #[error("polygons are not edge-parallel: {detail}")]
    NotParallel { detail: String },
    /// Mixed-area input polygon is not planar.
    #[error("polygon deviates from planarity by {residual:.3e}")]
    NotPlanar { residual: f64 },
    /// A Lorentz face plane is not spacelike, so it carries no area form.
    #[error("face plane is not spacelike (direction with squared norm {norm2:.3e})")]
    NotSpacelike { norm2: f64 },
    /// A face is too degenerate to carry curvatures.
    #[error("face around white {white} has near-zero area {area:.3e}")]
    DegenerateFace { white: u32, area: f64 },
    /// The modulus-to-one family fails to converge.
    #[error("limit family diverged at epsilon {epsilon:.3e}: {reason}")]
    NonConvergentFamily { epsilon: f64, reason: String },
}

/// Sphere radii (ⓢ whites) and circle radii (ⓒ whites) of the cmc pair,
/// derived from the solved uniformizing variables.
#[derive(Clone, Debug)]
pub struct CmcRadii {
    /// Primal radius per white.
    pub d: Vec<f64>,
    /// Dual radius per white.
    pub d_star: Vec<f64>,
    /// The global constant `λ = d·d* = (1−q²)/(4q)`.
    pub lambda: f64,
}

/// Radii of the vertex spheres (ⓢ) and face circles (ⓒ) of the cmc pair.
///
/// Spherical flavor: `d_ⓢ = (dn+cn)/(2√q·sn)`, `d_ⓒ = (dn+q·cn)/(2√q)`;
/// the dual radii flip the inner sign.  In the Lorentz flavor the two
/// families swap formula roles.  Every product `d·d*` collapses to the
/// global `λ = (1−q²)/(4q)`.
pub fn cmc_radii(sol: &PatternSolution) -> Result<CmcRadii, CmcError> {
    let q = sol.modulus.q();
    let sq = q.sqrt();
    let mut d = Vec::with_capacity(sol.vars.len());
    let mut d_star = Vec::with_capacity(sol.vars.len());
    for w in sol.graph.white_ids() {
        let jac = sol.modulus.jacobi(sol.vars[w.index()]);
        if jac.sn.abs() <= 1e-12 {
            return Err(CmcError::DegenerateRadius {
                white: w.0,
                sn: jac.sn,
            });
        }
        let family = sol.graph.white(w).family;
        // Which of the two closed forms applies: the `/sn` pair or not.
        let vertex_like = match sol.flavor {
            Flavor::Spherical => family == Family::Sphere,
            Flavor::Hyperbolic => family == Family::Circle,
        };
        let (dv, dsv) = if vertex_like {
            (
                (jac.dn + jac.cn) / (2.0 * sq * jac.sn),
                (jac.dn - jac.cn) / (2.0 * sq * jac.sn),
            )
        } else {
            (
                (jac.dn + q * jac.cn) / (2.0 * sq),
                (jac.dn - q * jac.cn) / (2.0 * sq),
            )
        };
        d.push(dv);
        d_star.push(dsv);
    }
    Ok(CmcRadii {
        d,
        d_star,
        lambda: (1.0 - q * q) / (4.0 * q),
    })
}

/// A Christoffel-dual pair of discrete cmc surfaces over one S-quad graph:
/// sphere centers at white extension vertices, touching points at black
/// ones, with the Gauss map `n = c* − c` reproducing the Koebe net.
#[derive(Clone, Debug)]
pub struct CmcPair {
    pub flavor: Flavor,
    pub modulus: Modulus,
    pub graph: SQuadGraph,
    /// Primal surface at whites (sphere centers ⓢ, circle centers ⓒ).
    pub c_white: Vec<Vec3>,
    /// Primal surface at blacks: the points where adjacent spheres touch.
    pub c_black: Vec<Vec3>,
    /// Dual surface at whites.
    pub c_star_white: Vec<Vec3>,
    /// Dual surface at blacks.
    pub c_star_black: Vec<Vec3>,
    /// Gauss map at whites: `c* − c`, equal to the Koebe net point.
    pub gauss_white: Vec<Vec3>,
    /// Gauss map at blacks: equal to the net's touching points.
    pub gauss_black: Vec<Vec3>,
    /// Primal radii per white.
    pub d: Vec<f64>,
    /// Dual radii per white.
    pub d_star: Vec<f64>,
    /// Global radius-product constant.
    pub lambda: f64,
    /// Worst one-form closure residual over all quad cycles (both forms).
    pub max_closure: f64,
}

/// Per-edge integration data: the direction from the white's net point to
/// the black's touching point, divided by the *signed* edge length from the
/// radii (`d−d*` on horizontal edges, `d+d*` on vertical ones), so flipped
/// rings reverse the step direction automatically.
struct EdgeStep {
    /// Primal step `c_b − c_w`.
    dc: Vec3,
    /// Dual step `c*_b − c*_w`.
    dc_star: Vec3,
}

fn edge_step(
    kp: &KoebePair,
    radii: &CmcRadii,
    w: WhiteId,
    b: BlackId,
) -> Result<EdgeStep, CmcError> {
    let net_point = match kp.graph.white(w).family {
        Family::Sphere => kp.vertices[w.index()],
        Family::Circle => kp.face_centers[w.index()],
    };
    let raw = kp.piece_tangent_point(b) - net_point;
    let (dw, dsw) = (radii.d[w.index()], radii.d_star[w.index()]);
    let signed_len = match kp.graph.s_edge_label(w, b) {
        EdgeLabel::Horizontal => dw - dsw,
        EdgeLabel::Vertical => dw + dsw,
    };
    if signed_len.abs() <= 1e-13 * (1.0 + dw.abs()) {
        return Err(CmcError::DegenerateEdge {
            white: w.0,
            black: b.0,
            length: signed_len,
        });
    }
    let u_hat = raw / signed_len;
    let star_sign = match kp.graph.s_edge_label(w, b) {
        EdgeLabel::Horizontal => -1.0,
        EdgeLabel::Vertical => 1.0,
    };
    Ok(EdgeStep {
        dc: -dw * u_hat,
        dc_star: star_sign * dsw * u_hat,
    })
}

/// Integrate the primal and dual one-forms over a spanning tree of the
/// central-extension graph rooted at `origin`, then verify closure around
/// every quad.  Gauge: `c(origin) = 0` and `c*(origin) = k(origin)`, so the
/// Gauss map `n = c* − c` is the Koebe net itself.
pub fn integrate_one_forms_from(
    kp: &KoebePair,
    radii: &CmcRadii,
    origin: WhiteId,
) -> Result<CmcPair, CmcError> {
    let diag = verify_koebe(kp);
    let koebe_residual = diag
        .max_tangency
        .max(diag.max_planarity)
        .max(diag.max_face_center)
        .max(diag.max_duality);
    if koebe_residual.is_nan() || koebe_residual > 1e-7 {
        return Err(CmcError::InvalidKoebe {
            residual: koebe_residual,
        });
    }

    let graph = &kp.graph;
    let nw = graph.num_whites();
    let nb = graph.num_blacks();
    let mut c: Vec<Option<Vec3>> = vec![None; nw + nb];
    let mut c_star: Vec<Option<Vec3>> = vec![None; nw + nb];
    c[origin.index()] = Some(Vec3::zeros());
    // The gauge must place `c*(origin)` at the origin's own net point —
    // the vertex for a sphere-family white, the face center for a
    // circle-family one — or the Gauss map `c* − c` would be globally
    // offset from the net.
    c_star[origin.index()] = Some(match graph.white(origin).family {
        Family::Sphere => kp.vertices[origin.index()],
        Family::Circle => kp.face_centers[origin.index()],
    });
    let mut queue = VecDeque::from([origin.index()]);
    while let Some(node) = queue.pop_front() {
        let edges: Vec<(WhiteId, BlackId)> = if node < nw {
            graph
                .edges_at_white(WhiteId(node as u32))
                .map(|e| (e.white, e.black))
                .collect()
        } else {
            graph
                .edges_at_black(BlackId((node - nw) as u32))
                .map(|e| (e.white, e.black))
                .collect()
        };
        for (w, b) in edges {
            let other = if node < nw { nw + b.index() } else { w.index() };
            if c[other].is_some() {
                continue;
            }
            let step = edge_step(kp, radii, w, b)?;
            if node < nw {
                c[other] = Some(c[node].expect("visited") + step.dc);
                c_star[other] = Some(c_star[node].expect("visited") + step.dc_star);
            } else {
                c[other] = Some(c[node].expect("visited") - step.dc);
                c_star[other] = Some(c_star[node].expect("visited") - step.dc_star);
            }
            queue.push_back(other);
        }
    }
    if c.iter().any(|x| x.is_none()) {
        return Err(CmcError::ClosureViolation {
            cycle: "disconnected extension graph".into(),
            residual: f64::INFINITY,
        });
    }
    let c: Vec<Vec3> = c.into_iter().map(|x| x.expect("connected")).collect();
    let c_star: Vec<Vec3> = c_star.into_iter().map(|x| x.expect("connected")).collect();

    let mut max_closure = 0.0f64;
    let mut worst: Option<(QuadId, f64)> = None;
    for qid in graph.quad_ids() {
        let residual = quad_closure_residual(kp, radii, qid)?;
        if residual > max_closure {
            max_closure = residual;
            worst = Some((qid, residual));
        }
    }
    if max_closure > 1e-7 {
        let (qid, residual) = worst.expect("nonempty");
        return Err(CmcError::ClosureViolation {
            cycle: format!("quad {}", qid.0),
            residual,
        });
    }

    let (c_white, c_black) = (c[..nw].to_vec(), c[nw..].to_vec());
    let (c_star_white, c_star_black) = (c_star[..nw].to_vec(), c_star[nw..].to_vec());
    let gauss_white: Vec<Vec3> = (0..nw).map(|i| c_star_white[i] - c_white[i]).collect();
    let gauss_black: Vec<Vec3> = (0..nb).map(|i| c_star_black[i] - c_black[i]).collect();
    Ok(CmcPair {
        flavor: kp.flavor,
        modulus: kp.modulus,
        graph: graph.clone(),
        c_white,
        c_black,
        c_star_white,
        c_star_black,
        gauss_white,
        gauss_black,
        d: radii.d.clone(),
        d_star: radii.d_star.clone(),
        lambda: radii.lambda,
        max_closure,
    })
}

/// [`integrate_one_forms_from`] rooted at the combinatorial center of the
/// graph (the float-drift-minimizing default).
pub fn integrate_one_forms(kp: &KoebePair, radii: &CmcRadii) -> Result<CmcPair, CmcError> {
    integrate_one_forms_from(kp, radii, kp.graph.central_white())
}

/// Residual of both one-forms summed around one quad of the extension
/// complex (the cycle basis of a disk complex).
fn quad_closure_residual(
    kp: &KoebePair,
    radii: &CmcRadii,
    qid: QuadId,
) -> Result<f64, CmcError> {
    let quad = kp.graph.quad(qid);
    let s1 = edge_step(kp, radii, quad.ws, quad.b_first)?;
    let s2 = edge_step(kp, radii, quad.wc, quad.b_first)?;
    let s3 = edge_step(kp, radii, quad.wc, quad.b_second)?;
    let s4 = edge_step(kp, radii, quad.ws, quad.b_second)?;
    // ws → b1 → wc → b2 → ws.
    let c_cycle = s1.dc - s2.dc + s3.dc - s4.dc;
    let c_star_cycle = s1.dc_star - s2.dc_star + s3.dc_star - s4.dc_star;
    Ok(c_cycle.norm().max(c_star_cycle.norm()))
}

impl CmcPair {
    /// Flavor-aware squared length of an ambient difference vector.
    fn norm2(&self, v: &Vec3) -> f64 {
        self.flavor.dot(v, v)
    }

    /// Worst deviation of any white's radius product from the global `λ`.
    pub fn lambda_deviation(&self) -> f64 {
        (0..self.graph.num_whites())
            .map(|i| (self.d[i] * self.d_star[i] - self.lambda).abs())
            .fold(0.0, f64::max)
    }

    /// The Darboux-pencil constant and its spread over sphere-family
    /// vertices: `−2α = ‖n_v‖² − d_v² − d*_v²` with the flavor's norm.
    pub fn darboux_alpha(&self) -> (f64, f64) {
        let values: Vec<f64> = self
            .graph
            .white_ids()
            .filter(|&w| self.graph.white(w).family == Family::Sphere)
            .map(|w| {
                let i = w.index();
                let m2 = self.norm2(&self.gauss_white[i]);
                -(m2 - self.d[i] * self.d[i] - self.d_star[i] * self.d_star[i]) / 2.0
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let spread = values
            .iter()
            .map(|v| (v - mean).abs())
            .fold(0.0, f64::max);
        (mean, spread)
    }

    /// Edge-normal lengths `c*_b − c_b` grouped by edge color.  Returns
    /// `(horizontal, vertical, spread)`: the per-color means and the worst
    /// deviation from them.  Spherical lengths are Euclidean; Lorentz values
    /// are signed squared lengths (both negative).
    pub fn edge_normal_lengths(&self) -> (f64, f64, f64) {
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        let mut values: Vec<(usize, f64)> = Vec::with_capacity(self.graph.num_blacks());
        for b in self.graph.black_ids() {
            let m = self.gauss_black[b.index()];
            let value = match self.flavor {
                Flavor::Spherical => self.norm2(&m).sqrt(),
                Flavor::Hyperbolic => self.norm2(&m),
            };
            let color = match self.graph.g_edge(b).label {
                EdgeLabel::Horizontal => 0,
                EdgeLabel::Vertical => 1,
            };
            sums[color] += value;
            counts[color] += 1;
            values.push((color, value));
        }
        let means = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
        let spread = values
            .iter()
            .map(|&(color, v)| (v - means[color]).abs())
            .fold(0.0, f64::max);
        (means[0], means[1], spread)
    }

    /// Worst touching defect over all vertex-sphere edges of both surfaces:
    /// `‖c_v − c_{v′}‖ − (d_v + d_{v′})`, and the dual likewise.
    ///
    /// Only sphere-family pairs qualify: adjacent vertex spheres meet at the
    /// shared touching point, which lies on the segment joining their
    /// centers.  Face circles of neighbouring faces need not touch — the
    /// fundamental piece bends at the touching point — so no distance
    /// identity holds between face centers.
    pub fn touching_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (v1, v2, _, _) in family_pairs(&self.graph) {
            if self.graph.white(v1).family != Family::Sphere {
                continue;
            }
            let (i, j) = (v1.index(), v2.index());
            let dc = self.c_white[j] - self.c_white[i];
            let dcs = self.c_star_white[j] - self.c_star_white[i];
            let primal = self.norm2(&dc).max(0.0).sqrt() - (self.d[i] + self.d[j]).abs();
            let dual = self.norm2(&dcs).max(0.0).sqrt() - (self.d_star[i] + self.d_star[j]).abs();
            worst = worst.max(primal.abs()).max(dual.abs());
        }
        worst
    }

    /// Worst normalized angle defect between a face normal `m_f = c*_f −
    /// c_f` and the edges of its primal and dual faces, over every closed
    /// circle-family fan (the faces of both surfaces are indexed by circle
    /// whites; the sphere-partner cycle around one bounds the face).
    pub fn face_normal_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.graph.white_ids() {
            let fan = self.graph.fan(w);
            if self.graph.white(w).family != Family::Circle || !fan.closed {
                continue;
            }
            let m = self.gauss_white[w.index()];
            let m_len = self.norm2(&m).abs().sqrt();
            for (a, b) in cycle_pairs(fan.entries.len()) {
                let pa = fan.entries[a].partner.index();
                let pb = fan.entries[b].partner.index();
                for edge in [
                    self.c_white[pb] - self.c_white[pa],
                    self.c_star_white[pb] - self.c_star_white[pa],
                ] {
                    let e_len = self.norm2(&edge).abs().sqrt();
                    if e_len > 1e-14 {
                        worst = worst.max(self.flavor.dot(&m, &edge).abs() / (m_len * e_len));
                    }
                }
            }
        }
        worst
    }

    /// Recompute the closure residual of every quad cycle from the stored
    /// surfaces (telescoping differences of integrated values are exact, so
    /// this recomputes the *form* steps instead).
    pub fn closure_residuals(&self, kp: &KoebePair) -> Result<Vec<(QuadId, f64)>, CmcError> {
        let radii = CmcRadii {
            d: self.d.clone(),
            d_star: self.d_star.clone(),
            lambda: self.lambda,
        };
        self.graph
            .quad_ids()
            .map(|qid| quad_closure_residual(kp, &radii, qid).map(|r| (qid, r)))
            .collect()
    }
}

/// All same-family white pairs joined through a black: the sphere-family
/// pair of every black, plus the circle-family pair where two distinct
/// circle whites flank it.  Yields `(v1, v2, black, s_edge_label at v1)`.
fn family_pairs(
    graph: &SQuadGraph,
) -> impl Iterator<Item = (WhiteId, WhiteId, BlackId, EdgeLabel)> + '_ {
    graph.black_ids().flat_map(move |b| {
        let ge = graph.g_edge(b);
        let mut out = vec![(ge.v1, ge.v2, b, graph.s_edge_label(ge.v1, b))];
        let mut wcs: Vec<WhiteId> = graph
            .edges_at_black(b)
            .flat_map(|e| e.quads.iter().flatten())
            .map(|&q| graph.quad(q).wc)
            .collect();
        wcs.sort_unstable();
        wcs.dedup();
        if wcs.len() == 2 {
            out.push((wcs[0], wcs[1], b, graph.s_edge_label(wcs[0], b)));
        }
        out.into_iter()
    })
}

fn cycle_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).map(move |i| (i, (i + 1) % n))
}

/// Christoffel transform of the vertex-sphere surface: integrate
/// `σ·λ·Δc/(d_v·d_{v′})` over the edges joining touching vertex spheres,
/// with `σ = +1` on horizontal and `−1` on vertical edges (vertical edges
/// reverse their direction).  Returns the dual centers indexed like the
/// whites (circle-family entries stay zero) and the dual radii `λ/d`.
///
/// Only the sphere family carries this edge-wise relation: adjacent face
/// circles do not touch, so their center differences obey no comparable
/// per-edge identity.
pub fn christoffel_dual(
    graph: &SQuadGraph,
    centers: &[Vec3],
    radii: &[f64],
    lambda: f64,
) -> Result<(Vec<Vec3>, Vec<f64>), CmcError> {
    let pairs: Vec<(WhiteId, WhiteId, BlackId, EdgeLabel)> = family_pairs(graph)
        .filter(|&(v1, _, _, _)| graph.white(v1).family == Family::Sphere)
        .collect();
    let step = |v1: WhiteId, v2: WhiteId, label: EdgeLabel| -> f64 {
        let sigma = match label {
            EdgeLabel::Horizontal => 1.0,
            EdgeLabel::Vertical => -1.0,
        };
        sigma * lambda / (radii[v1.index()] * radii[v2.index()])
    };

    // Closure first: around every closed circle-family fan, the partner
    // cycle is a face of the vertex-sphere graph.
    let mut worst: Option<(WhiteId, f64)> = None;
    for w in graph.white_ids() {
        let fan = graph.fan(w);
        if graph.white(w).family == Family::Sphere || !fan.closed {
            continue;
        }
        let mut total = Vec3::zeros();
        for (a, b) in cycle_pairs(fan.entries.len()) {
            let (va, vb) = (fan.entries[a].partner, fan.entries[b].partner);
            let black = fan.entries[b].entry;
            let dc = centers[vb.index()] - centers[va.index()];
            total += step(va, vb, graph.s_edge_label(va, black)) * dc;
        }
        let residual = total.norm();
        if worst.is_none_or(|(_, r)| residual > r) {
            worst = Some((w, residual));
        }
    }
    if let Some((w, residual)) = worst {
        if residual > 1e-7 {
            return Err(CmcError::ClosureViolation {
                cycle: format!("face around white {}", w.0),
                residual,
            });
        }
    }

    // Spanning-tree integration over the vertex-sphere subgraph.
    let nw = graph.num_whites();
    let mut dual: Vec<Option<Vec3>> = vec![None; nw];
    let start = graph
        .white_ids()
        .find(|&w| graph.white(w).family == Family::Sphere)
        .expect("sphere family nonempty");
    dual[start.index()] = Some(Vec3::zeros());
    let mut changed = true;
    while changed {
        changed = false;
        for &(v1, v2, _, label) in &pairs {
            let dc = centers[v2.index()] - centers[v1.index()];
            let delta = step(v1, v2, label) * dc;
            if dual[v1.index()].is_some() && dual[v2.index()].is_none() {
                dual[v2.index()] = Some(dual[v1.index()].expect("set") + delta);
                changed = true;
            } else if dual[v2.index()].is_some() && dual[v1.index()].is_none() {
                dual[v1.index()] = Some(dual[v2.index()].expect("set") - delta);
                changed = true;
            }
        }
    }
    let mut out = vec![Vec3::zeros(); nw];
    let mut out_radii = vec![0.0; nw];
    for w in graph.white_ids() {
        if graph.white(w).family == Family::Sphere {
            out[w.index()] = dual[w.index()].ok_or_else(|| CmcError::ClosureViolation {
                cycle: format!("white {} unreachable in vertex-sphere subgraph", w.0),
                residual: f64::INFINITY,
            })?;
            out_radii[w.index()] = lambda / radii[w.index()];
        }
    }
    Ok((out, out_radii))
}

/// The mixed area `A(P,Q) = ½(A(P+Q) − A(P) − A(Q))` of two planar polygons
/// with pairwise parallel corresponding edges, computed in a common
/// orthonormal frame of the face plane (Minkowski-orthonormal for the
/// Lorentz flavor, where the plane must be spacelike).
pub fn mixed_area(flavor: Flavor, p: &[Vec3], q: &[Vec3]) -> Result<f64, CmcError> {
    if p.len() != q.len() || p.len() < 3 {
        return Err(CmcError::NotParallel {
            detail: format!("vertex counts {} vs {}", p.len(), q.len()),
        });
    }
    let n = p.len();
    let centroid = |poly: &[Vec3]| poly.iter().sum::<Vec3>() / poly.len() as f64;
    let (cp, cq) = (centroid(p), centroid(q));

    // Euclidean best-fit plane of P; both polygons must be parallel to it.
    let mut scatter = Matrix3::<f64>::zeros();
    for x in p {
        let d = x - cp;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let normal = eig.eigenvectors.column(order[0]).into_owned();
    for (poly, center) in [(p, cp), (q, cq)] {
        let residual = poly
            .iter()
            .map(|x| normal.dot(&(x - center)).abs())
            .fold(0.0, f64::max);
        if residual > 1e-8 {
            return Err(CmcError::NotPlanar { residual });
        }
    }

    // Flavor-orthonormal in-plane frame from P's two most independent edges.
    let edges = |poly: &[Vec3], i: usize| poly[(i + 1) % n] - poly[i];
    let longest = (0..n)
        .max_by(|&a, &b| {
            edges(p, a)
                .norm()
                .partial_cmp(&edges(p, b).norm())
                .unwrap()
        })
        .expect("nonempty");
    let v1 = edges(p, longest);
    let n1 = flavor.dot(&v1, &v1);
    if n1 <= 1e-18 {
        return Err(CmcError::NotSpacelike { norm2: n1 });
    }
    let e1 = v1 / n1.sqrt();
    let v2 = normal.cross(&v1);
    let v2 = v2 - e1 * flavor.dot(&v2, &e1);
    let n2 = flavor.dot(&v2, &v2);
    if n2 <= 1e-18 {
        return Err(CmcError::NotSpacelike { norm2: n2 });
    }
    let e2 = v2 / n2.sqrt();

    let coords = |poly: &[Vec3], center: &Vec3| -> Vec<(f64, f64)> {
        poly.iter()
            .map(|x| {
                let d = x - center;
                (flavor.dot(&d, &e1), flavor.dot(&d, &e2))
            })
            .collect()
    };
    let pc = coords(p, &cp);
    let qc = coords(q, &cq);

    // Corresponding edges parallel (2D cross product, angular tolerance).
    let diam = pc
        .iter()
        .map(|&(x, y)| x.hypot(y))
        .fold(0.0, f64::max)
        .max(qc.iter().map(|&(x, y)| x.hypot(y)).fold(0.0, f64::max));
    for i in 0..n {
        let ep = (pc[(i + 1) % n].0 - pc[i].0, pc[(i + 1) % n].1 - pc[i].1);
        let eq = (qc[(i + 1) % n].0 - qc[i].0, qc[(i + 1) % n].1 - qc[i].1);
        let (lp, lq) = (ep.0.hypot(ep.1), eq.0.hypot(eq.1));
        if lp <= 1e-12 * diam.max(1.0) || lq <= 1e-12 * diam.max(1.0) {
            continue;
        }
        let sin_angle = (ep.0 * eq.1 - ep.1 * eq.0).abs() / (lp * lq);
        if sin_angle > 1e-6 {
            return Err(CmcError::NotParallel {
                detail: format!("edge {i}: angular defect {sin_angle:.3e}"),
            });
        }
    }

    let shoelace = |poly: &[(f64, f64)]| -> f64 {
        0.5 * (0..poly.len())
            .map(|i| {
                let (x0, y0) = poly[i];
                let (x1, y1) = poly[(i + 1) % poly.len()];
                x0 * y1 - x1 * y0
            })
            .sum::<f64>()
    };
    let sum: Vec<(f64, f64)> = pc
        .iter()
        .zip(&qc)
        .map(|(&(a, b), &(x, y))| (a + x, b + y))
        .collect();
    Ok(0.5 * (shoelace(&sum) - shoelace(&pc) - shoelace(&qc)))
}

/// Mixed-area curvatures of one face and the whole report.
#[derive(Clone, Copy, Debug)]
pub struct FaceCurvature {
    pub face: WhiteId,
    pub h: f64,
    pub k: f64,
}

#[derive(Clone, Debug)]
pub struct CurvatureReport {
    pub faces: Vec<FaceCurvature>,
    /// Worst deviation of any face's mean curvature from 1.
    pub mean_curvature_deviation: f64,
}

/// Per-face mean and Gaussian curvatures of the primal surface:
/// `H_f = −A(c_f, n_f)/A(c_f)` and `K_f = A(n_f)/A(c_f)` over the faces of
/// the sphere-family graph (one per circle white with a closed fan).
pub fn curvatures(pair: &CmcPair) -> Result<CurvatureReport, CmcError> {
    let mut faces = Vec::new();
    let mut deviation = 0.0f64;
    for w in pair.graph.white_ids() {
        let fan = pair.graph.fan(w);
        if pair.graph.white(w).family != Family::Circle || !fan.closed {
            continue;
        }
        let c_face: Vec<Vec3> = fan
            .entries
            .iter()
            .map(|e| pair.c_white[e.partner.index()])
            .collect();
        let n_face: Vec<Vec3> = fan
            .entries
            .iter()
            .map(|e| pair.gauss_white[e.partner.index()])
            .collect();
        let area_c = mixed_area(pair.flavor, &c_face, &c_face)?;
        let scale = c_face
            .iter()
            .flat_map(|a| c_face.iter().map(move |b| (a - b).norm_squared()))
            .fold(0.0, f64::max);
        if area_c.abs() <= 1e-12 * scale.max(1e-30) {
            return Err(CmcError::DegenerateFace {
                white: w.0,
                area: area_c,
            });
        }
        let area_cn = mixed_area(pair.flavor, &c_face, &n_face)?;
        let area_n = mixed_area(pair.flavor, &n_face, &n_face)?;
        let h = -area_cn / area_c;
        let k = area_n / area_c;
        deviation = deviation.max((h - 1.0).abs());
        faces.push(FaceCurvature { face: w, h, k });
    }
    Ok(CurvatureReport {
        faces,
        mean_curvature_deviation: deviation,
    })
}

/// One member of a modulus-to-one family and the extrapolated limit data.
#[derive(Clone, Debug)]
pub struct LimitFamily {
    pub flavor: Flavor,
    pub epsilons: Vec<f64>,
    /// Extrapolated uniformizing variables.
    pub limit_vars: Vec<f64>,
    /// Extrapolated central-extension net points per white.
    pub net_points: Vec<Vec3>,
    /// Extrapolated primal surface per white.
    pub surface: Vec<Vec3>,
    /// Extrapolated `c*/ε` per white: the minimal (maximal) surface.
    pub dual_scaled: Vec<Vec3>,
    /// Extrapolated primal radii and `d*/ε` per white.
    pub limit_d: Vec<f64>,
    pub limit_d_star_over_eps: Vec<f64>,
    /// Per-ε worst deviation of `d` from its closed-form limit oracle.
    pub identity_errors: Vec<f64>,
    /// Extrapolated radius error against the `1/sinh`-`sinh/2` oracles.
    pub max_radius_error: f64,
    /// Extrapolated defect of the one-sphere relation (`tanh x = cos R`
    /// spherical, `tanh x·cosh R = 1` Lorentz).
    pub max_circle_relation_error: f64,
    /// Worst defect of the Christoffel relation on the extrapolated dual.
    pub max_christoffel_residual: f64,
}

/// The radius limits per white as `q → 1`: `(lim d, lim d*/ε)`.
fn limit_radius_oracle(flavor: Flavor, family: Family, x: f64) -> (f64, f64) {
    let sinh_type = match flavor {
        Flavor::Spherical => family == Family::Sphere,
        Flavor::Hyperbolic => family == Family::Circle,
    };
    if sinh_type {
        (1.0 / x.sinh(), x.sinh() / 2.0)
    } else {
        (1.0 / x.cosh(), x.cosh() / 2.0)
    }
}

/// Run the whole pipeline at `q = 1 − ε` for a decreasing family of ε,
/// Richardson-extrapolate to the degenerate modulus, and verify the limit
/// identities: the surfaces converge to a classical one-sphere Koebe net
/// and its rescaled dual `c*/ε` to the associated minimal (spherical) or
/// maximal (Lorentz) surface.
pub fn minimal_limit(
    flavor: Flavor,
    graph: &SQuadGraph,
    boundary: &BoundaryData,
    epsilons: &[f64],
    options: &SolveOptions,
) -> Result<LimitFamily, CmcError> {
    if epsilons.len() < 2 || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CmcError::NonConvergentFamily {
            epsilon: f64::NAN,
            reason: "need at least two strictly decreasing epsilons".into(),
        });
    }
    let nw = graph.num_whites();
    let mut vars_by_eps: Vec<Vec<f64>> = Vec::new();
    let mut net_by_eps: Vec<Vec<Vec3>> = Vec::new();
    let mut c_by_eps: Vec<Vec<Vec3>> = Vec::new();
    let mut cs_by_eps: Vec<Vec<Vec3>> = Vec::new();
    let mut d_by_eps: Vec<Vec<f64>> = Vec::new();
    let mut ds_by_eps: Vec<Vec<f64>> = Vec::new();
    let mut big_r_by_eps: Vec<Vec<f64>> = Vec::new();
    let mut identity_errors = Vec::new();
    for &eps in epsilons {
        let fail = |reason: String| CmcError::NonConvergentFamily {
            epsilon: eps,
            reason,
        };
        let modulus = Modulus::new(1.0 - eps).map_err(|e| fail(e.to_string()))?;
        let sol = solve(flavor, graph, modulus, boundary, options)
            .map_err(|e| fail(e.to_string()))?;
        let pattern = embed(&sol).map_err(|e| fail(e.to_string()))?;
        let kp = lift(&pattern).map_err(|e| fail(e.to_string()))?;
        let radii = cmc_radii(&sol).map_err(|e| fail(e.to_string()))?;
        let pair = integrate_one_forms(&kp, &radii).map_err(|e| fail(e.to_string()))?;
        let mut identity_error = 0.0f64;
        for w in graph.white_ids() {
            let oracle = limit_radius_oracle(flavor, graph.white(w).family, sol.vars[w.index()]);
            identity_error = identity_error.max((radii.d[w.index()] - oracle.0).abs());
        }
        identity_errors.push(identity_error);
        // A flipped ring has its variable in the upper half of the box,
        // `2K − O(1)`; as ε shrinks the quarter period K grows without
        // bound, so such a variable diverges and no classical limit exists.
        let k = modulus.quarter_period();
        if let Some(w) = graph.white_ids().find(|w| sol.vars[w.index()] > k) {
            return Err(fail(format!(
                "ring at white {} is flipped (variable {:.4} exceeds the quarter \
                 period {:.4}); flipped rings diverge as q → 1, so this boundary \
                 data admits no classical limit",
                w.0,
                sol.vars[w.index()],
                k
            )));
        }
        vars_by_eps.push(sol.vars.clone());
        net_by_eps.push(
            graph
                .white_ids()
                .map(|w| match graph.white(w).family {
                    Family::Sphere => kp.vertices[w.index()],
                    Family::Circle => kp.face_centers[w.index()],
                })
                .collect(),
        );
        c_by_eps.push(pair.c_white.clone());
        cs_by_eps.push(pair.c_star_white.iter().map(|x| x / eps).collect());
        d_by_eps.push(radii.d.clone());
        ds_by_eps.push(radii.d_star.iter().map(|x| x / eps).collect());
        big_r_by_eps.push(pattern.radii.iter().map(|r| r.big_r).collect());
    }

    // Linear Richardson extrapolation from the two smallest epsilons.
    let m = epsilons.len();
    let (ea, eb) = (epsilons[m - 2], epsilons[m - 1]);
    let extrap_f = |xa: f64, xb: f64| (ea * xb - eb * xa) / (ea - eb);
    let extrap_v = |xa: &Vec3, xb: &Vec3| (xb * ea - xa * eb) / (ea - eb);
    let limit_vars: Vec<f64> = (0..nw)
        .map(|i| extrap_f(vars_by_eps[m - 2][i], vars_by_eps[m - 1][i]))
        .collect();
    let net_points: Vec<Vec3> = (0..nw)
        .map(|i| extrap_v(&net_by_eps[m - 2][i], &net_by_eps[m - 1][i]))
        .collect();
    let surface: Vec<Vec3> = (0..nw)
        .map(|i| extrap_v(&c_by_eps[m - 2][i], &c_by_eps[m - 1][i]))
        .collect();
    let dual_scaled: Vec<Vec3> = (0..nw)
        .map(|i| extrap_v(&cs_by_eps[m - 2][i], &cs_by_eps[m - 1][i]))
        .collect();
    let limit_d: Vec<f64> = (0..nw)
        .map(|i| extrap_f(d_by_eps[m - 2][i], d_by_eps[m - 1][i]))
        .collect();
    let limit_d_star_over_eps: Vec<f64> = (0..nw)
        .map(|i| extrap_f(ds_by_eps[m - 2][i], ds_by_eps[m - 1][i]))
        .collect();
    let limit_big_r: Vec<f64> = (0..nw)
        .map(|i| extrap_f(big_r_by_eps[m - 2][i], big_r_by_eps[m - 1][i]))
        .collect();

    let mut max_radius_error = 0.0f64;
    let mut max_circle_relation_error = 0.0f64;
    for w in graph.white_ids() {
        let i = w.index();
        let oracle = limit_radius_oracle(flavor, graph.white(w).family, limit_vars[i]);
        max_radius_error = max_radius_error
            .max((limit_d[i] - oracle.0).abs())
            .max((limit_d_star_over_eps[i] - oracle.1).abs());
        let relation = match flavor {
            // One tangency sphere: cos R = q·sn → cos R = tanh x at q = 1.
            Flavor::Spherical => limit_big_r[i].cos() - limit_vars[i].tanh(),
            // cosh R = 1/(q·sn) → tanh x · cosh R = 1 at q = 1.
            Flavor::Hyperbolic => limit_vars[i].tanh() * limit_big_r[i].cosh() - 1.0,
        };
        max_circle_relation_error = max_circle_relation_error.max(relation.abs());
    }

    // The extrapolated rescaled dual satisfies the classical Christoffel
    // relation against the extrapolated primal on the vertex-sphere edges:
    // Δ(c*/ε) = σ·Δc/(2·d_v·d_v′) (λ/ε → 1/2 as ε → 0).
    let mut max_christoffel_residual = 0.0f64;
    for (v1, v2, _, label) in family_pairs(graph) {
        if graph.white(v1).family != Family::Sphere {
            continue;
        }
        let (i, j) = (v1.index(), v2.index());
        let sigma = match label {
            EdgeLabel::Horizontal => 1.0,
            EdgeLabel::Vertical => -1.0,
        };
        let want = sigma / (2.0 * limit_d[i] * limit_d[j]) * (surface[j] - surface[i]);
        let got = dual_scaled[j] - dual_scaled[i];
        max_christoffel_residual = max_christoffel_residual.max((got - want).norm());
    }

    if max_radius_error > 1e-4 || max_circle_relation_error > 1e-4 {
        return Err(CmcError::NonConvergentFamily {
            epsilon: *epsilons.last().expect("nonempty"),
            reason: format!(
                "extrapolated radius error {max_radius_error:.3e}, \
                 circle relation error {max_circle_relation_error:.3e}"
            ),
        });
    }
    Ok(LimitFamily {
        flavor,
        epsilons: epsilons.to_vec(),
        limit_vars,
        net_points,
        surface,
        dual_scaled,
        limit_d,
        limit_d_star_over_eps,
        identity_errors,
        max_radius_error,
        max_circle_relation_error,
        max_christoffel_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::radii_from_vars;
    use crate::quadgraph::SQuadGraph;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn rectangle_boundary(graph: &SQuadGraph, corner: f64, side: f64) -> BoundaryData {
        BoundaryData::neumann(
            graph
                .white_ids()
                .filter(|&w| graph.is_boundary(w))
                .map(|w| (w, if graph.degree(w) == 1 { corner } else { side }))
                .collect(),
        )
    }

    fn solved(
        flavor: Flavor,
        q: f64,
        nx: usize,
        ny: usize,
        corner: f64,
        side: f64,
    ) -> PatternSolution {
        let graph = SQuadGraph::build_rectangle(nx, ny).unwrap();
        let bd = rectangle_boundary(&graph, corner, side);
        solve(
            flavor,
            &graph,
            Modulus::new(q).unwrap(),
            &bd,
            &SolveOptions::default(),
        )
        .unwrap()
    }

    fn pipeline(sol: &PatternSolution) -> (KoebePair, CmcRadii, CmcPair) {
        let kp = lift(&embed(sol).unwrap()).unwrap();
        let radii = cmc_radii(sol).unwrap();
        let pair = integrate_one_forms(&kp, &radii).unwrap();
        (kp, radii, pair)
    }

    /// A synthetic, solver-free 2×2 pattern: one interior circle white whose
    /// four congruent quads close up exactly.  The variables are found by
    /// bisecting the exact interior angle condition, giving embeddings (and
    /// hence one-form identities) at full float precision.
    fn exact_synthetic(flavor: Flavor, q: f64) -> PatternSolution {
        let graph = SQuadGraph::build_rectangle(2, 2).unwrap();
        let modulus = Modulus::new(q).unwrap();
        let k = modulus.quarter_period();
        // Interior closure at the circle white: each of the four quads must
        // contribute a quarter turn.
        let (mut lo, mut hi, fixed, solve_circle) = match flavor {
            // g(β_c+β_s) − g(β_c−β_s) = π/2, bisected in β_s at fixed β_c.
            Flavor::Spherical => (1e-9 * k, 2.0 * k - 1e-9 * k, 1.12 * k, false),
            // g(γ_c−γ_s) + g(γ_c+γ_s) = π/2, bisected in γ_c at fixed γ_s.
            Flavor::Hyperbolic => (1e-9 * k, 2.0 * k - 1e-9 * k, 0.9 * k, true),
        };
        let f = |x: f64| -> f64 {
            let (bc, bs) = if solve_circle { (x, fixed) } else { (fixed, x) };
            match flavor {
                Flavor::Spherical => {
                    modulus.kernel_g(bc + bs) - modulus.kernel_g(bc - bs) - PI / 2.0
                }
                Flavor::Hyperbolic => {
                    modulus.kernel_g(bc - bs) + modulus.kernel_g(bc + bs) - PI / 2.0
                }
            }
        };
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let (bc, bs) = if solve_circle {
            (root, fixed)
        } else {
            (fixed, root)
        };
        let vars: Vec<f64> = graph
            .white_ids()
            .map(|w| match graph.white(w).family {
                Family::Sphere => bs,
                Family::Circle => bc,
            })
            .collect();
        PatternSolution {
            flavor,
            modulus,
            graph,
            vars,
            orientations: BTreeMap::new(),
            phi: Vec::new(),
            residual: 0.0,
            iterations: 0,
            orientation_rounds: 0,
        }
    }

    /// Radii formulas: the global product constant `λ`, the trig forms in
    /// the ring radii, and the degenerate `d = d*` point at the quarter
    /// period.
    #[test]
    fn radii_products_and_trig_forms() {
        for (flavor, q) in [(Flavor::Spherical, 0.9), (Flavor::Hyperbolic, 0.93)] {
            let sol = solved(flavor, q, 3, 3, 2.0 * PI / 5.0, 0.9 * PI);
            let radii = cmc_radii(&sol).unwrap();
            assert_abs_diff_eq!(radii.lambda, (1.0 - q * q) / (4.0 * q), epsilon = 1e-15);
            let rr = radii_from_vars(&sol).unwrap();
            let sq = q.sqrt();
            for w in sol.graph.white_ids() {
                let i = w.index();
                assert!(
                    (radii.d[i] * radii.d_star[i] - radii.lambda).abs() <= 1e-8,
                    "lambda deviation at {i}"
                );
                assert!(radii.d[i] > 0.0 && radii.d_star[i] > 0.0);
                // Trig forms: half sums/differences of the fundamental-piece
                // edge lengths through this white, with signed inner radius.
                let (inner, outer) = match flavor {
                    Flavor::Spherical => match sol.graph.white(w).family {
                        Family::Sphere => (rr[i].r.tan() / sq, sq * rr[i].big_r.tan()),
                        Family::Circle => (sq * rr[i].r.sin(), rr[i].big_r.sin() / sq),
                    },
                    Flavor::Hyperbolic => match sol.graph.white(w).family {
                        Family::Sphere => (sq * rr[i].r.tanh(), rr[i].big_r.tanh() / sq),
                        Family::Circle => (rr[i].r.sinh() / sq, sq * rr[i].big_r.sinh()),
                    },
                };
                assert_abs_diff_eq!(radii.d[i], 0.5 * (outer + inner), epsilon = 1e-12);
                assert_abs_diff_eq!(radii.d_star[i], 0.5 * (outer - inner), epsilon = 1e-12);
            }
        }
        // At the quarter period cn = 0, so d = d* = √(1−q²)/(2√q).
        let q = 0.9f64;
        let modulus = Modulus::new(q).unwrap();
        let jac = modulus.jacobi(modulus.quarter_period());
        let d = (jac.dn + jac.cn) / (2.0 * q.sqrt() * jac.sn);
        let ds = (jac.dn - jac.cn) / (2.0 * q.sqrt() * jac.sn);
        let want = (1.0 - q * q).sqrt() / (2.0 * q.sqrt());
        assert_abs_diff_eq!(d, want, epsilon = 1e-12);
        assert_abs_diff_eq!(ds, want, epsilon = 1e-12);
    }

    /// Near the degenerate modulus the vertex-sphere radii approach the
    /// classical limits `d → 1/sinh β`, `d* → ε·sinh(β)/2`.
    #[test]
    fn radii_limits_near_degenerate_modulus() {
        let eps = 1e-6;
        let modulus = Modulus::new(1.0 - eps).unwrap();
        for beta in [0.7, 1.0, 1.9] {
            let jac = modulus.jacobi(beta);
            let sq = (1.0 - eps).sqrt();
            let d = (jac.dn + jac.cn) / (2.0 * sq * jac.sn);
            let ds = (jac.dn - jac.cn) / (2.0 * sq * jac.sn);
            assert!((d - 1.0 / beta.sinh()).abs() <= 1e-5);
            assert!((ds / eps - beta.sinh() / 2.0).abs() <= 1e-5);
        }
    }

    #[test]
    fn degenerate_variables_are_rejected() {
        let mut sol = exact_synthetic(Flavor::Spherical, 0.9);
        sol.vars[0] = 1e-14;
        assert!(matches!(
            cmc_radii(&sol),
            Err(CmcError::DegenerateRadius { .. })
        ));
    }

    /// The proof identity behind the construction: around a single quad of
    /// the extension complex, the radius-weighted unit-edge sums of both
    /// one-forms vanish.  On the exactly-constructed synthetic pattern this
    /// holds at full precision.
    #[test]
    fn fundamental_piece_one_forms_close_exactly() {
        for (flavor, q) in [(Flavor::Spherical, 0.9), (Flavor::Hyperbolic, 0.9)] {
            let sol = exact_synthetic(flavor, q);
            let kp = lift(&embed(&sol).unwrap()).unwrap();
            let radii = cmc_radii(&sol).unwrap();
            for qid in sol.graph.quad_ids() {
                let residual = quad_closure_residual(&kp, &radii, qid).unwrap();
                assert!(residual <= 1e-10, "{flavor:?}: quad closure {residual:.3e}");
            }
        }
    }

    /// Full integration on solved instances: closure everywhere, the Gauss
    /// map reproducing the Koebe net, touching spheres, the two-value edge
    /// normals, face-normal perpendicularity, λ- and α-constancy.
    #[test]
    fn integrated_pair_satisfies_surface_invariants() {
        for (flavor, q, corner) in [
            (Flavor::Spherical, 0.9, 2.0 * PI / 3.0),
            (Flavor::Hyperbolic, 0.93, 2.0 * PI / 5.0),
        ] {
            let sol = solved(flavor, q, 4, 4, corner, 0.9 * PI);
            let (kp, _radii, pair) = pipeline(&sol);
            assert!(pair.max_closure <= 1e-7, "closure {}", pair.max_closure);
            for w in sol.graph.white_ids() {
                let i = w.index();
                let net = match sol.graph.white(w).family {
                    Family::Sphere => kp.vertices[i],
                    Family::Circle => kp.face_centers[i],
                };
                assert!((pair.gauss_white[i] - net).norm() <= 1e-9);
            }
            for b in sol.graph.black_ids() {
                let i = b.index();
                assert!((pair.gauss_black[i] - kp.piece_tangent_point(b)).norm() <= 1e-9);
            }
            assert!(pair.lambda_deviation() <= 1e-8);
            let (alpha, alpha_spread) = pair.darboux_alpha();
            assert!(alpha_spread <= 1e-7, "alpha spread {alpha_spread}");
            let expected_alpha = match flavor {
                Flavor::Spherical => -(1.0 + q * q) / (4.0 * q),
                Flavor::Hyperbolic => (1.0 + q * q) / (4.0 * q),
            };
            assert_abs_diff_eq!(alpha, expected_alpha, epsilon = 1e-9);
            assert!(pair.touching_deviation() <= 1e-7);
            assert!(pair.face_normal_deviation() <= 1e-7);
            let (h_len, v_len, spread) = pair.edge_normal_lengths();
            assert!(spread <= 1e-7, "edge normal spread {spread}");
            let sq = q.sqrt();
            match flavor {
                Flavor::Spherical => {
                    assert_abs_diff_eq!(h_len, 1.0 / sq, epsilon = 1e-9);
                    assert_abs_diff_eq!(v_len, sq, epsilon = 1e-9);
                }
                Flavor::Hyperbolic => {
                    assert_abs_diff_eq!(h_len, -q, epsilon = 1e-9);
                    assert_abs_diff_eq!(v_len, -1.0 / q, epsilon = 1e-9);
                    assert!(v_len < h_len && h_len < 0.0);
                }
            }
            let closures = pair.closure_residuals(&kp).unwrap();
            assert_eq!(closures.len(), sol.graph.num_quads());
            assert!(closures.iter().all(|&(_, r)| r <= 1e-7));
        }
    }

    /// Moving the integration origin translates both surfaces rigidly.
    #[test]
    fn origin_change_is_a_rigid_translation() {
        let sol = solved(Flavor::Spherical, 0.9, 3, 4, 2.0 * PI / 5.0, 0.9 * PI);
        let kp = lift(&embed(&sol).unwrap()).unwrap();
        let radii = cmc_radii(&sol).unwrap();
        let a = integrate_one_forms(&kp, &radii).unwrap();
        let other = sol
            .graph
            .white_ids()
            .find(|&w| sol.graph.degree(w) == 1)
            .unwrap();
        let b = integrate_one_forms_from(&kp, &radii, other).unwrap();
        // Different spanning trees accumulate the per-quad closure residual
        // along the cycles between their paths; the deviation from a rigid
        // translation is bounded by that noise, far below any real defect
        // (a wrong sign or radius would shift entries by O(d) ≈ 0.1).
        let noise = 1e-8;
        let shift = b.c_white[0] - a.c_white[0];
        let shift_star = b.c_star_white[0] - a.c_star_white[0];
        for i in 0..sol.graph.num_whites() {
            let dev = (b.c_white[i] - a.c_white[i] - shift).norm();
            let dev_star = (b.c_star_white[i] - a.c_star_white[i] - shift_star).norm();
            assert!(dev <= noise, "white {i}: c dev {dev:.3e}");
            assert!(dev_star <= noise, "white {i}: c* dev {dev_star:.3e}");
        }
        for i in 0..sol.graph.num_blacks() {
            let dev = (b.c_black[i] - a.c_black[i] - shift).norm();
            assert!(dev <= noise, "black {i}: c dev {dev:.3e}");
        }
    }

    /// The Christoffel transform reproduces the integrated dual surface on
    /// the vertex-sphere family, is an involution, and keeps/reverses edge
    /// directions by color.
    #[test]
    fn christoffel_transform_matches_integrated_dual() {
        for (flavor, q) in [(Flavor::Spherical, 0.9), (Flavor::Hyperbolic, 0.93)] {
            let sol = solved(flavor, q, 4, 3, 2.0 * PI / 5.0, 0.9 * PI);
            let (_, radii, pair) = pipeline(&sol);
            let (dual, dual_radii) =
                christoffel_dual(&sol.graph, &pair.c_white, &radii.d, radii.lambda).unwrap();
            let members: Vec<usize> = sol
                .graph
                .white_ids()
                .filter(|&w| sol.graph.white(w).family == Family::Sphere)
                .map(|w| w.index())
                .collect();
            // Same surface up to translation.
            let offset = pair.c_star_white[members[0]] - dual[members[0]];
            for &i in &members {
                assert!(
                    (dual[i] + offset - pair.c_star_white[i]).norm() <= 1e-7,
                    "{flavor:?} white {i}"
                );
                assert_abs_diff_eq!(dual_radii[i], radii.d_star[i], epsilon = 1e-9);
            }
            // Involution: transforming back returns the original.
            let (back, back_radii) =
                christoffel_dual(&sol.graph, &dual, &dual_radii, radii.lambda).unwrap();
            let offset = pair.c_white[members[0]] - back[members[0]];
            for &i in &members {
                assert!((back[i] + offset - pair.c_white[i]).norm() <= 1e-9);
                assert_abs_diff_eq!(back_radii[i], radii.d[i], epsilon = 1e-9);
            }
            // Horizontal edges keep direction, vertical edges reverse.
            for (v1, v2, _, label) in family_pairs(&sol.graph) {
                if sol.graph.white(v1).family != Family::Sphere {
                    continue;
                }
                let dc = pair.c_white[v2.index()] - pair.c_white[v1.index()];
                let dd = dual[v2.index()] - dual[v1.index()];
                let aligned = dc.dot(&dd);
                match label {
                    EdgeLabel::Horizontal => assert!(aligned > 0.0),
                    EdgeLabel::Vertical => assert!(aligned < 0.0),
                }
            }
        }
    }

    #[test]
    fn christoffel_rejects_inexact_input() {
        let sol = solved(Flavor::Spherical, 0.9, 3, 3, 2.0 * PI / 5.0, 0.9 * PI);
        let (_, radii, pair) = pipeline(&sol);
        let mut centers = pair.c_white.clone();
        let interior = sol
            .graph
            .white_ids()
            .find(|&w| !sol.graph.is_boundary(w) && sol.graph.white(w).family == Family::Sphere)
            .unwrap();
        centers[interior.index()].x += 1e-2;
        let result = christoffel_dual(&sol.graph, &centers, &radii.d, radii.lambda);
        assert!(matches!(result, Err(CmcError::ClosureViolation { .. })));
    }

    /// Mixed area: diagonal reduces to plain area, the unit square gives 1,
    /// the definition matches the bilinear shoelace, and the defect
    /// detectors fire.
    #[test]
    fn mixed_area_basics() {
        let square = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let a = mixed_area(Flavor::Spherical, &square, &square).unwrap();
        assert_abs_diff_eq!(a.abs(), 1.0, epsilon = 1e-12);
        // Scaled copy: A(P, 2P) = 2·A(P).
        let doubled: Vec<Vec3> = square.iter().map(|p| p * 2.0).collect();
        let a2 = mixed_area(Flavor::Spherical, &square, &doubled).unwrap();
        assert_abs_diff_eq!(a2.abs(), 2.0, epsilon = 1e-12);
        // Bilinear shoelace oracle on a tilted parallel pair.
        let p: Vec<Vec3> = square
            .iter()
            .map(|v| Vec3::new(v.x, v.y, 0.3 * v.x - 0.2 * v.y))
            .collect();
        let q: Vec<Vec3> = p.iter().map(|v| v * 1.7).collect();
        let apq = mixed_area(Flavor::Spherical, &p, &q).unwrap();
        let app = mixed_area(Flavor::Spherical, &p, &p).unwrap();
        assert_abs_diff_eq!(apq, 1.7 * app, epsilon = 1e-12);
        // Non-planar and non-parallel inputs are rejected.
        let mut bent = square;
        bent[2].z += 1e-4;
        assert!(matches!(
            mixed_area(Flavor::Spherical, &bent, &bent),
            Err(CmcError::NotPlanar { .. })
        ));
        let rotated = [
            Vec3::new(0.5, -0.5, 0.0),
            Vec3::new(1.5, 0.5, 0.0),
            Vec3::new(0.5, 1.5, 0.0),
            Vec3::new(-0.5, 0.5, 0.0),
        ];
        assert!(matches!(
            mixed_area(Flavor::Spherical, &square, &rotated),
            Err(CmcError::NotParallel { .. })
        ));
        // Lorentz: a spacelike tilted square has induced area √(1−s²) times
        // smaller than its Euclidean shadow would suggest; check against
        // the closed form for the plane z = s·y.
        let s = 0.6;
        let tilted: Vec<Vec3> = square.iter().map(|v| Vec3::new(v.x, v.y, s * v.y)).collect();
        let at = mixed_area(Flavor::Hyperbolic, &tilted, &tilted).unwrap();
        assert_abs_diff_eq!(at.abs(), (1.0 - s * s).sqrt(), epsilon = 1e-12);
        // A lightlike direction has no spacelike frame.
        let lightlike: Vec<Vec3> = square.iter().map(|v| Vec3::new(v.x, v.y, v.y)).collect();
        assert!(matches!(
            mixed_area(Flavor::Hyperbolic, &lightlike, &lightlike),
            Err(CmcError::NotSpacelike { .. })
        ));
    }

    /// The mixed area of a face with its Christoffel-dual face vanishes:
    /// that is the defining property behind `H ≡ 1`.
    #[test]
    fn dual_faces_have_vanishing_mixed_area() {
        let sol = solved(Flavor::Spherical, 0.9, 4, 3, 2.0 * PI / 5.0, 0.9 * PI);
        let (_, _, pair) = pipeline(&sol);
        let mut tested = 0;
        for w in sol.graph.white_ids() {
            let fan = sol.graph.fan(w);
            if sol.graph.white(w).family != Family::Circle || !fan.closed {
                continue;
            }
            let c_face: Vec<Vec3> = fan
                .entries
                .iter()
                .map(|e| pair.c_white[e.partner.index()])
                .collect();
            let cs_face: Vec<Vec3> = fan
                .entries
                .iter()
                .map(|e| pair.c_star_white[e.partner.index()])
                .collect();
            let a = mixed_area(Flavor::Spherical, &c_face, &cs_face).unwrap();
            assert!(a.abs() <= 1e-8, "A(c, c*) = {a:.3e}");
            tested += 1;
        }
        assert!(tested >= 6);
    }

    /// Mean curvature is identically 1 on every face, Gaussian curvature
    /// follows, and the report reacts to scaling and corruption.
    #[test]
    fn curvature_report_flags_unit_mean_curvature() {
        for (flavor, q, corner) in [
            (Flavor::Spherical, 0.9, 2.0 * PI / 3.0),
            (Flavor::Hyperbolic, 0.93, 2.0 * PI / 5.0),
        ] {
            let sol = solved(flavor, q, 4, 4, corner, 0.9 * PI);
            let (_, _, pair) = pipeline(&sol);
            let report = curvatures(&pair).unwrap();
            assert_eq!(report.faces.len(), 9);
            assert!(
                report.mean_curvature_deviation <= 1e-6,
                "{flavor:?}: H deviation {}",
                report.mean_curvature_deviation
            );
            // Scaling c by μ with the same Gauss map scales H to 1/μ.
            let mu = 2.5;
            let mut scaled = pair.clone();
            for (c, n) in scaled.c_white.iter_mut().zip(&pair.gauss_white) {
                *c *= mu;
                let _ = n;
            }
            scaled.c_star_white = scaled
                .c_white
                .iter()
                .zip(&pair.gauss_white)
                .map(|(c, n)| c + n)
                .collect();
            scaled.gauss_white = pair.gauss_white.clone();
            let scaled_report = curvatures(&scaled).unwrap();
            for f in &scaled_report.faces {
                assert_abs_diff_eq!(f.h, 1.0 / mu, epsilon = 1e-6);
            }
            // Corrupting the Gauss map parallel to itself breaks H = 1 and
            // the report says so.
            let mut corrupted = pair.clone();
            for n in corrupted.gauss_white.iter_mut() {
                *n *= 1.05;
            }
            let bad = curvatures(&corrupted).unwrap();
            assert!(bad.mean_curvature_deviation > 1e-3);
        }
    }

    /// The q → 1 family converges linearly to the classical limits in both
    /// flavors.  Each flavor gets boundary data admitting a bounded limit:
    /// the ring variables must stay away from the flipped half of the
    /// variable box as the quarter period grows.
    #[test]
    fn limit_family_richardson_extrapolates() {
        let graph = SQuadGraph::build_rectangle(3, 3).unwrap();
        let epsilons = [1e-2, 1e-3, 1e-4];
        for (flavor, corner, side) in [
            (Flavor::Spherical, 0.6 * PI, 1.2 * PI),
            (Flavor::Hyperbolic, 2.0 * PI / 5.0, 0.9 * PI),
        ] {
            let bd = rectangle_boundary(&graph, corner, side);
            let fam = minimal_limit(flavor, &graph, &bd, &epsilons, &SolveOptions::default())
                .unwrap();
            assert!(fam.max_radius_error <= 1e-4, "{flavor:?}");
            assert!(fam.max_circle_relation_error <= 1e-4, "{flavor:?}");
            assert!(fam.max_christoffel_residual <= 1e-4, "{flavor:?}");
            // The per-ε identity errors decrease linearly with ε.
            assert!(fam.identity_errors[1] < 0.3 * fam.identity_errors[0]);
            assert!(fam.identity_errors[2] < 0.3 * fam.identity_errors[1]);
        }
        // Non-decreasing ε is rejected.
        let bd = rectangle_boundary(&graph, 0.6 * PI, 1.2 * PI);
        assert!(matches!(
            minimal_limit(
                Flavor::Spherical,
                &graph,
                &bd,
                &[1e-3, 1e-2],
                &SolveOptions::default()
            ),
            Err(CmcError::NonConvergentFamily { .. })
        ));
        // Boundary data whose pattern keeps flipped rings at every modulus
        // has no classical limit; the divergence is reported as such.
        let bd = rectangle_boundary(&graph, 0.4 * PI, 0.9 * PI);
        let err = minimal_limit(
            Flavor::Spherical,
            &graph,
            &bd,
            &epsilons,
            &SolveOptions::default(),
        )
        .unwrap_err();
        match err {
            CmcError::NonConvergentFamily { reason, .. } => {
                assert!(reason.contains("flipped"), "reason: {reason}");
            }
            other => panic!("expected NonConvergentFamily, got {other}"),
        }
    }
}
