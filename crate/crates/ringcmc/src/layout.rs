//! Geometric realization of solved ring patterns.
//!
//! A [`PatternSolution`] fixes every ring's two radii through the elliptic
//! uniformization; this module places the ring centers on the unit sphere
//! (spherical flavor) or the hyperboloid sheet in Minkowski space (hyperbolic
//! flavor) and the touching points at the black nodes.  The layout is built
//! by a breadth-first walk that chains exact angular offsets around each
//! center, then polished by a damped Gauss–Newton pass over all distance and
//! incidence constraints, and finally re-gauged so the seed sits at the base
//! point with its first edge along a fixed meridian.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Matrix3};
use thiserror::Error;

use crate::elliptic::Modulus;
use crate::geom::{Flavor, Vec3};
use crate::quadgraph::{BlackId, EdgeLabel, SQuadGraph, WhiteId};
use crate::ringpattern::PatternSolution;

#[derive(Debug, Error)]
pub enum LayoutError {
    /// A uniformizing variable sits at the edge of its domain, where the ring
    /// degenerates (great circle / unbounded hyperbolic radius).
    #[error("ring at white {white} is degenerate: variable {var:.6e} is at the domain edge")]
    DegenerateRing { white: u32, var: f64 },
    /// The two Pythagorean orderings of the center distance disagree, meaning
    /// the radii do not satisfy the orthogonality relation.
    #[error("center-distance orderings disagree: {lhs:.12} vs {rhs:.12}")]
    DistanceOrderingMismatch { lhs: f64, rhs: f64 },
    /// Constraint residuals remain above tolerance after the polish pass.
    #[error("layout residual {residual:.3e} exceeds {tol:.1e} after polish")]
    LayoutInconsistency { residual: f64, tol: f64 },
    /// The pattern solution's stationarity residual is too large to lay out.
    #[error("solution residual {0:.3e} exceeds the layout precondition 1e-8")]
    UnsolvedPattern(f64),
}

/// Signed inner radius and positive outer radius of one ring.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RingRadius {
    /// Inner radius; negative values mark a flipped (clockwise) ring.
    pub r: f64,
    /// Outer radius, always positive.
    pub big_r: f64,
}

/// Recover each ring's radii from the uniformizing variables.
///
/// Spherical: `cos r = sn β`, `sin r = cn β`, `sin R = dn β` — the sign of the
/// inner radius is the sign of `cn β`.  Hyperbolic: `cosh R = 1/(q·sn γ)`,
/// `sinh r = cn γ / sn γ`.
pub fn radii_from_vars(sol: &PatternSolution) -> Result<Vec<RingRadius>, LayoutError> {
    radii_from_raw(sol.flavor, &sol.modulus, &sol.vars)
}

/// [`radii_from_vars`] on raw variables (used by the Koebe lift as well).
pub fn radii_from_raw(
    flavor: Flavor,
    modulus: &Modulus,
    vars: &[f64],
) -> Result<Vec<RingRadius>, LayoutError> {
    let k = modulus.quarter_period();
    let eps = 1e-9;
    let mut out = Vec::with_capacity(vars.len());
    for (i, &v) in vars.iter().enumerate() {
        let degenerate = if modulus.is_degenerate() {
            v.is_nan() || v <= eps
        } else {
            v.is_nan() || v <= eps * k || v >= 2.0 * k - eps * k
        };
        if degenerate {
            return Err(LayoutError::DegenerateRing {
                white: i as u32,
                var: v,
            });
        }
        let jac = modulus.jacobi(v);
        let rr = match flavor {
            Flavor::Spherical => RingRadius {
                r: jac.cn.atan2(jac.sn),
                big_r: jac.dn.clamp(-1.0, 1.0).asin(),
            },
            Flavor::Hyperbolic => RingRadius {
                r: (jac.cn / jac.sn).asinh(),
                big_r: (1.0 / (modulus.q() * jac.sn)).max(1.0).acosh(),
            },
        };
        if !(rr.r.is_finite() && rr.big_r.is_finite()) {
            return Err(LayoutError::DegenerateRing {
                white: i as u32,
                var: v,
            });
        }
        out.push(rr);
    }
    Ok(out)
}

/// Geodesic distance between the centers of two next-neighboring (orthogonal)
/// rings: spherical `cos d = cos R_v · cos r_{v′}`, hyperbolic
/// `cosh d = cosh R_v · cosh r_{v′}`.  Both orderings are evaluated; they
/// agree exactly when the radii satisfy the global orthogonality relation.
pub fn neighbor_distance(
    a: RingRadius,
    b: RingRadius,
    flavor: Flavor,
) -> Result<f64, LayoutError> {
    let d = |x: RingRadius, y: RingRadius| match flavor {
        Flavor::Spherical => (x.big_r.cos() * y.r.cos()).clamp(-1.0, 1.0).acos(),
        Flavor::Hyperbolic => (x.big_r.cosh() * y.r.cosh()).max(1.0).acosh(),
    };
    let d1 = d(a, b);
    let d2 = d(b, a);
    if (d1 - d2).abs() > 1e-9 * (1.0 + d1.abs()) {
        return Err(LayoutError::DistanceOrderingMismatch { lhs: d1, rhs: d2 });
    }
    Ok(0.5 * (d1 + d2))
}

/// A ring pattern realized on its surface: centers at white nodes, touching
/// points at black nodes.
#[derive(Clone, Debug)]
pub struct EmbeddedRingPattern {
    pub flavor: Flavor,
    pub modulus: Modulus,
    pub graph: SQuadGraph,
    /// Ring center per white node (unit norm in the flavor's quadric).
    pub centers: Vec<Vec3>,
    /// Touching point per black node.
    pub touch_points: Vec<Vec3>,
    /// Ring radii per white node.
    pub radii: Vec<RingRadius>,
    /// Largest constraint residual after the polish pass.
    pub max_residual: f64,
}

/// The distance from a ring center to a touching point along an edge: the
/// inner radius magnitude on horizontal edges, the outer radius on vertical
/// ones.
pub fn touch_distance(graph: &SQuadGraph, radii: &[RingRadius], w: WhiteId, b: BlackId) -> f64 {
    match graph.s_edge_label(w, b) {
        EdgeLabel::Horizontal => radii[w.index()].r.abs(),
        EdgeLabel::Vertical => radii[w.index()].big_r,
    }
}

/// The in-quad angle at white `w` between the directions to the opposite
/// white `w'` and to the touching point of the edge `(w, b)`, together with
/// its turning sign.  The touching point, `w`, and `w'` form a right triangle
/// with the right angle at the touching point; the angle follows from the
/// flavor's Pythagorean relations.
fn wedge_angle(
    flavor: Flavor,
    graph: &SQuadGraph,
    radii: &[RingRadius],
    w: WhiteId,
    partner: WhiteId,
    b: BlackId,
) -> (f64, f64) {
    let rw = radii[w.index()];
    let rp = radii[partner.index()];
    let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
    match graph.s_edge_label(w, b) {
        // Touching point on the inner circle of `w` (and the outer circle of
        // the partner): legs |r_w| and R_{w'}.
        EdgeLabel::Horizontal => {
            let a = flavor
                .sin_like(rp.big_r)
                .atan2(flavor.cos_like(rp.big_r) * flavor.sin_like(rw.r.abs()));
            (a, sign(rw.r))
        }
        // Touching point on the outer circle of `w`: legs R_w and |r_{w'}|.
        EdgeLabel::Vertical => {
            let a = flavor
                .sin_like(rp.r.abs())
                .atan2(flavor.cos_like(rp.r.abs()) * flavor.sin_like(rw.big_r));
            (a, sign(rp.r))
        }
    }
}

/// Bearings (relative to an arbitrary fan origin) of every station around a
/// white node: for fan entry `i`, `theta[2i]` is the entry touching point,
/// `theta[2i+1]` the opposite white, `theta[2i+2]` the exit touching point
/// (shared with entry `i+1` in chained fans).
fn fan_bearings(
    flavor: Flavor,
    graph: &SQuadGraph,
    radii: &[RingRadius],
    w: WhiteId,
) -> Vec<f64> {
    let fan = graph.fan(w);
    let mut theta = Vec::with_capacity(2 * fan.entries.len() + 1);
    theta.push(0.0);
    for e in &fan.entries {
        let (a_in, s_in) = wedge_angle(flavor, graph, radii, w, e.partner, e.entry);
        let (a_out, s_out) = wedge_angle(flavor, graph, radii, w, e.partner, e.exit);
        let t_entry = *theta.last().unwrap();
        let t_partner = t_entry + s_in * a_in;
        theta.push(t_partner);
        theta.push(t_partner + s_out * a_out);
    }
    theta
}

/// Walk state: optional positions per white/black node.
struct Walk {
    whites: Vec<Option<Vec3>>,
    blacks: Vec<Option<Vec3>>,
}

/// Realize a solved ring pattern on its surface.
///
/// The seed (the graph's combinatorial center, restricted to whites) is
/// placed at the base point with its first edge along a fixed meridian; the
/// remaining nodes follow by breadth-first propagation of exact distances and
/// angles, and a damped Gauss–Newton polish distributes the floating-point
/// drift over all constraints before the gauge is restored.
pub fn embed(sol: &PatternSolution) -> Result<EmbeddedRingPattern, LayoutError> {
    if sol.residual.is_nan() || sol.residual > 1e-8 {
        return Err(LayoutError::UnsolvedPattern(sol.residual));
    }
    let flavor = sol.flavor;
    let graph = &sol.graph;
    let radii = radii_from_vars(sol)?;

    // Precompute neighbor distances per quad (validating the orthogonality
    // relation along the way).
    let mut quad_dist = Vec::with_capacity(graph.num_quads());
    for q in graph.quad_ids() {
        let quad = graph.quad(q);
        quad_dist.push(neighbor_distance(
            radii[quad.ws.index()],
            radii[quad.wc.index()],
            flavor,
        )?);
    }

    let mut walk = Walk {
        whites: vec![None; graph.num_whites()],
        blacks: vec![None; graph.num_blacks()],
    };

    let seed = graph.central_white();
    walk.whites[seed.index()] = Some(flavor.base_point());

    // Queue of whites whose fan is ready to be walked, with the quad linking
    // them to their already-walked parent (`None` for the seed).
    let mut queue = VecDeque::new();
    queue.push_back((seed, None::<(WhiteId, usize)>));
    let mut walked = vec![false; graph.num_whites()];

    while let Some((w, parent)) = queue.pop_front() {
        if walked[w.index()] {
            continue;
        }
        walked[w.index()] = true;
        let p = walk.whites[w.index()].expect("queued white is placed");
        let (e1, e2) = flavor.tangent_frame(&p);
        let theta = fan_bearings(flavor, graph, &radii, w);
        let fan = graph.fan(w);

        // Absolute bearing offset: the seed pins its first station to bearing
        // zero; other whites anchor on the direction back to their parent.
        let offset = match parent {
            None => 0.0,
            Some((pw, qidx)) => {
                let pp = walk.whites[pw.index()].expect("parent is placed");
                let j = fan
                    .entries
                    .iter()
                    .position(|e| e.quad.index() == qidx)
                    .expect("parent quad is in the fan");
                flavor.bearing(&p, &e1, &e2, &pp) - theta[2 * j + 1]
            }
        };

        for (i, e) in fan.entries.iter().enumerate() {
            let d = quad_dist[e.quad.index()];
            if walk.whites[e.partner.index()].is_none() {
                let pos = flavor.exp_bearing(&p, &e1, &e2, theta[2 * i + 1] + offset, d);
                walk.whites[e.partner.index()] = Some(pos);
            }
            if !walked[e.partner.index()] {
                queue.push_back((e.partner, Some((w, e.quad.index()))));
            }
            for (b, t) in [(e.entry, theta[2 * i]), (e.exit, theta[2 * i + 2])] {
                if walk.blacks[b.index()].is_none() {
                    let rho = touch_distance(graph, &radii, w, b);
                    walk.blacks[b.index()] = Some(flavor.exp_bearing(&p, &e1, &e2, t + offset, rho));
                }
            }
        }
    }

    let mut centers: Vec<Vec3> = walk
        .whites
        .into_iter()
        .map(|p| p.expect("connected graph places every white"))
        .collect();
    let mut touch_points: Vec<Vec3> = walk
        .blacks
        .into_iter()
        .map(|p| p.expect("connected graph places every black"))
        .collect();

    let max_residual = polish(
        flavor,
        graph,
        &radii,
        &quad_dist,
        &mut centers,
        &mut touch_points,
    );
    let tol = 1e-7;
    if max_residual.is_nan() || max_residual > tol {
        return Err(LayoutError::LayoutInconsistency {
            residual: max_residual,
            tol,
        });
    }

    regauge(flavor, graph, seed, &mut centers, &mut touch_points);

    Ok(EmbeddedRingPattern {
        flavor,
        modulus: sol.modulus,
        graph: graph.clone(),
        centers,
        touch_points,
        radii,
        max_residual,
    })
}

/// One scalar constraint of the layout system.
enum Constraint {
    /// ⟨p_a, p_b⟩ matches the pair dot of the target distance (node indices
    /// into the combined white+black array).
    PairDot { a: usize, b: usize, target: f64 },
    /// det[x_q, x_a, x_b] = 0: the touching point lies on the geodesic
    /// through the two centers it separates.
    Collinear { q: usize, a: usize, b: usize },
}

/// Damped Gauss–Newton over all layout constraints, moving every node in its
/// two tangent degrees of freedom.  Returns the final worst residual
/// expressed as a geodesic-distance error.
fn polish(
    flavor: Flavor,
    graph: &SQuadGraph,
    radii: &[RingRadius],
    quad_dist: &[f64],
    centers: &mut [Vec3],
    touch_points: &mut [Vec3],
) -> f64 {
    let nw = centers.len();
    let n_nodes = nw + touch_points.len();
    let mut constraints = Vec::new();
    for q in graph.quad_ids() {
        let quad = graph.quad(q);
        constraints.push(Constraint::PairDot {
            a: quad.ws.index(),
            b: quad.wc.index(),
            target: flavor.pair_dot_of_distance(quad_dist[q.index()]),
        });
    }
    for e in graph.s_edges() {
        constraints.push(Constraint::PairDot {
            a: e.white.index(),
            b: nw + e.black.index(),
            target: flavor.pair_dot_of_distance(touch_distance(graph, radii, e.white, e.black)),
        });
    }
    for b in graph.black_ids() {
        let ge = graph.g_edge(b);
        constraints.push(Constraint::Collinear {
            q: nw + b.index(),
            a: ge.v1.index(),
            b: ge.v2.index(),
        });
        // The circle-family centers of the two quads flanking an interior
        // touching point are tangent there as well.
        let mut wcs: Vec<usize> = graph
            .edges_at_black(b)
            .flat_map(|e| e.quads.iter().flatten())
            .map(|&q| graph.quad(q).wc.index())
            .collect();
        wcs.sort_unstable();
        wcs.dedup();
        if wcs.len() == 2 {
            constraints.push(Constraint::Collinear {
                q: nw + b.index(),
                a: wcs[0],
                b: wcs[1],
            });
        }
    }

    let m = constraints.len();
    let n = 2 * n_nodes;
    let node = |arr_w: &[Vec3], arr_b: &[Vec3], i: usize| -> Vec3 {
        if i < nw {
            arr_w[i]
        } else {
            arr_b[i - nw]
        }
    };

    let eval = |cw: &[Vec3], cb: &[Vec3], r: &mut DVector<f64>| {
        for (row, c) in constraints.iter().enumerate() {
            r[row] = match *c {
                Constraint::PairDot { a, b, target } => {
                    flavor.dot(&node(cw, cb, a), &node(cw, cb, b)) - target
                }
                Constraint::Collinear { q, a, b } => Matrix3::from_columns(&[
                    node(cw, cb, q),
                    node(cw, cb, a),
                    node(cw, cb, b),
                ])
                .determinant(),
            };
        }
    };

    let mut residual = DVector::zeros(m);
    let mut lambda = 1e-10;
    for _ in 0..60 {
        eval(centers, touch_points, &mut residual);
        let f = residual.norm_squared();
        if residual.amax() <= 1e-13 {
            break;
        }
        // Tangent frames per node, fixed for this iteration.
        let frames: Vec<(Vec3, Vec3)> = (0..n_nodes)
            .map(|i| flavor.tangent_frame(&node(centers, touch_points, i)))
            .collect();
        // Dense normal equations: the Jacobian has at most six nonzeros per
        // row, so accumulate J^T J and J^T r directly.
        let mut jtj = DMatrix::<f64>::zeros(n, n);
        let mut jtr = DVector::<f64>::zeros(n);
        for (row, c) in constraints.iter().enumerate() {
            let mut cols: Vec<(usize, f64)> = Vec::with_capacity(6);
            match *c {
                Constraint::PairDot { a, b, .. } => {
                    let pa = node(centers, touch_points, a);
                    let pb = node(centers, touch_points, b);
                    for (idx, p_other) in [(a, pb), (b, pa)] {
                        let (e1, e2) = frames[idx];
                        cols.push((2 * idx, flavor.dot(&e1, &p_other)));
                        cols.push((2 * idx + 1, flavor.dot(&e2, &p_other)));
                    }
                }
                Constraint::Collinear { q, a, b } => {
                    let orig = [
                        node(centers, touch_points, q),
                        node(centers, touch_points, a),
                        node(centers, touch_points, b),
                    ];
                    for (slot, idx) in [(0usize, q), (1, a), (2, b)] {
                        let (e1, e2) = frames[idx];
                        let det_slot = |e: &Vec3| {
                            let mut mtx = orig;
                            mtx[slot] = *e;
                            Matrix3::from_columns(&mtx).determinant()
                        };
                        cols.push((2 * idx, det_slot(&e1)));
                        cols.push((2 * idx + 1, det_slot(&e2)));
                    }
                }
            }
            for &(ci, vi) in &cols {
                jtr[ci] += vi * residual[row];
                for &(cj, vj) in &cols {
                    jtj[(ci, cj)] += vi * vj;
                }
            }
        }
        let scale = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max) + 1e-300;
        let mut improved = false;
        for _ in 0..20 {
            let mut lhs = jtj.clone();
            for i in 0..n {
                lhs[(i, i)] += lambda * scale;
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&jtr));
            let mut cw = centers.to_vec();
            let mut cb = touch_points.to_vec();
            for i in 0..n_nodes {
                let (t1, t2) = (delta[2 * i], delta[2 * i + 1]);
                let s = (t1 * t1 + t2 * t2).sqrt();
                if s > 0.0 {
                    let (e1, e2) = frames[i];
                    let p = node(&cw, &cb, i);
                    let moved = flavor.exp_bearing(&p, &e1, &e2, t2.atan2(t1), s);
                    if i < nw {
                        cw[i] = moved;
                    } else {
                        cb[i - nw] = moved;
                    }
                }
            }
            let mut r_new = DVector::zeros(m);
            eval(&cw, &cb, &mut r_new);
            if r_new.norm_squared() < f {
                centers.copy_from_slice(&cw);
                touch_points.copy_from_slice(&cb);
                lambda = (lambda / 3.0).max(1e-14);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    eval(centers, touch_points, &mut residual);
    residual.amax()
}

/// Rigidly move the layout so the seed sits at the base point and its first
/// fan direction lies along the frame's first axis.
fn regauge(
    flavor: Flavor,
    graph: &SQuadGraph,
    seed: WhiteId,
    centers: &mut [Vec3],
    touch_points: &mut [Vec3],
) {
    let p = centers[seed.index()];
    // Meridian object: the first entry touching point if it is at positive
    // distance, else the first opposite white (always at positive distance).
    let fan = graph.fan(seed);
    let first = &fan.entries[0];
    let cand = touch_points[first.entry.index()];
    let m = if flavor.distance(&p, &cand) > 1e-8 {
        cand
    } else {
        centers[first.partner.index()]
    };
    let t = flavor.tangent_project(&p, &m);
    let f1 = t / flavor.dot(&t, &t).sqrt();
    let f2n = flavor.cross(&p, &f1);
    let f2 = f2n / flavor.dot(&f2n, &f2n).sqrt();

    let base = flavor.base_point();
    let (e1, e2) = flavor.tangent_frame(&base);
    let g = Matrix3::from_columns(&[e1, e2, base]);
    let f = Matrix3::from_columns(&[f1, f2, p]);
    let l = match flavor {
        Flavor::Spherical => g * f.transpose(),
        Flavor::Hyperbolic => {
            let eta = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
            g * (eta * f.transpose() * eta)
        }
    };
    for x in centers.iter_mut().chain(touch_points.iter_mut()) {
        *x = flavor.renormalize(&(l * *x));
    }
}

/// Total geometric turning of the fan stations around a white node: the sum
/// of wrapped bearing increments over the cyclic sequence of touching points
/// and opposite centers.  Interior nodes wind by ±2π matching the ring's
/// orientation; boundary nodes wind by the covered nominal angle.
pub fn fan_winding(pat: &EmbeddedRingPattern, w: WhiteId) -> f64 {
    let flavor = pat.flavor;
    let p = pat.centers[w.index()];
    let (e1, e2) = flavor.tangent_frame(&p);
    let fan = pat.graph.fan(w);
    let mut stations = Vec::new();
    for e in &fan.entries {
        let q = pat.touch_points[e.entry.index()];
        if flavor.distance(&p, &q) > 1e-9 {
            stations.push(flavor.bearing(&p, &e1, &e2, &q));
        }
        stations.push(flavor.bearing(&p, &e1, &e2, &pat.centers[e.partner.index()]));
        if !fan.closed || e.quad != fan.entries.last().unwrap().quad {
            let q = pat.touch_points[e.exit.index()];
            if flavor.distance(&p, &q) > 1e-9 {
                stations.push(flavor.bearing(&p, &e1, &e2, &q));
            }
        }
    }
    if fan.closed {
        // Close the cycle back to the first station.
        stations.push(stations[0]);
    }
    let mut total = 0.0;
    for pair in stations.windows(2) {
        let mut d = pair[1] - pair[0];
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d <= -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        total += d;
    }
    total
}

impl EmbeddedRingPattern {
    /// Sample a circle of the pattern (the inner or outer circle of a ring)
    /// as `n` points on the surface.
    pub fn circle_points(&self, w: WhiteId, outer: bool, n: usize) -> Vec<Vec3> {
        let p = self.centers[w.index()];
        let (e1, e2) = self.flavor.tangent_frame(&p);
        let rho = if outer {
            self.radii[w.index()].big_r
        } else {
            self.radii[w.index()].r.abs()
        };
        (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                self.flavor.exp_bearing(&p, &e1, &e2, t, rho)
            })
            .collect()
    }

    /// Render the pattern to a standalone SVG document: a stereographic
    /// projection for the sphere, the Poincaré disk for the hyperbolic plane.
    /// Rings are drawn as their two circles, colored by vertex family, with
    /// touching points as dots.
    pub fn to_svg(&self) -> String {
        let project = |p: &Vec3| -> (f64, f64) { (p.x / (1.0 + p.z), -p.y / (1.0 + p.z)) };
        let samples = 128;
        let mut paths: Vec<(String, &str)> = Vec::new();
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut grow = |pt: (f64, f64)| {
            min.0 = min.0.min(pt.0);
            min.1 = min.1.min(pt.1);
            max.0 = max.0.max(pt.0);
            max.1 = max.1.max(pt.1);
        };
        for w in self.graph.white_ids() {
            let color = match self.graph.white(w).family {
                crate::quadgraph::Family::Sphere => "#2166ac",
                crate::quadgraph::Family::Circle => "#b2182b",
            };
            for outer in [false, true] {
                if !outer && self.radii[w.index()].r.abs() < 1e-9 {
                    continue;
                }
                let pts = self.circle_points(w, outer, samples);
                let mut d = String::new();
                for (i, p) in pts.iter().enumerate() {
                    let (x, y) = project(p);
                    grow((x, y));
                    let cmd = if i == 0 { 'M' } else { 'L' };
                    d.push_str(&format!("{cmd}{x:.6},{y:.6}"));
                }
                d.push('Z');
                paths.push((d, color));
            }
        }
        let dots: Vec<(f64, f64)> = self
            .touch_points
            .iter()
            .map(|p| {
                let pt = project(p);
                grow(pt);
                pt
            })
            .collect();
        if self.flavor == Flavor::Hyperbolic {
            grow((-1.0, -1.0));
            grow((1.0, 1.0));
        }
        let span = (max.0 - min.0).max(max.1 - min.1).max(1e-9);
        let pad = 0.04 * span;
        let (x0, y0) = (min.0 - pad, min.1 - pad);
        let (wd, ht) = (max.0 - min.0 + 2.0 * pad, max.1 - min.1 + 2.0 * pad);
        let stroke = 0.0015 * span;
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" \
             viewBox=\"{x0:.6} {y0:.6} {wd:.6} {ht:.6}\">\n"
        );
        if self.flavor == Flavor::Hyperbolic {
            svg.push_str(&format!(
                "  <circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"#888888\" \
                 stroke-width=\"{stroke:.6}\" stroke-dasharray=\"{dash:.6} {dash:.6}\"/>\n",
                dash = 4.0 * stroke
            ));
        }
        for (d, color) in &paths {
            svg.push_str(&format!(
                "  <path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{stroke:.6}\"/>\n"
            ));
        }
        for (x, y) in &dots {
            svg.push_str(&format!(
                "  <circle cx=\"{x:.6}\" cy=\"{y:.6}\" r=\"{r:.6}\" fill=\"#333333\"/>\n",
                r = 2.0 * stroke
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}
