//! Cross-cutting verification: every numeric invariant of the pipeline,
//! aggregated into one deterministic pass/fail report, plus a brute-force
//! oracle for ring patterns with a single interior vertex.
//!
//! [`run_all`] accepts any subset of the pipeline artifacts and runs a fixed
//! list of checks in a fixed order.  Checks whose artifact is missing are
//! *listed but skipped*, with the reason recorded, so a report always has the
//! same shape.  When several checks fail, the earliest failure in pipeline
//! order is treated as the root cause and later failures are annotated as
//! tainted by it — a single bad ring otherwise drowns the report in noise.
//!
//! [`brute_force_interior`] solves the stationarity equation of a
//! one-interior-vertex pattern by dense scan plus bisection, entirely
//! independently of the Newton solvers, and is used as an oracle against
//! [`crate::ringpattern::solve`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::cmc::{christoffel_dual, curvatures, CmcPair};
use crate::elliptic::Modulus;
use crate::geom::{Flavor, MinkowskiForm, Vec3};
use crate::koebe::{verify_koebe, KoebePair};
use crate::layout::{neighbor_distance, touch_distance, EmbeddedRingPattern};
use crate::quadgraph::{Family, SQuadGraph, WhiteId};
use crate::ringpattern::{BoundaryData, BoundaryOrientation, PatternSolution};

/// Errors of the brute-force oracle.
#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("no sign change of the stationarity equation on ({lo:.6}, {hi:.6})")]
    NoRoot { lo: f64, hi: f64 },
    #[error("oracle precondition violated: {0}")]
    Precondition(String),
}

/// What happened to one check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckOutcome {
    Passed,
    Failed,
    /// Not applicable to the artifacts provided; the reason is recorded.
    Skipped(String),
    /// Failed, but an earlier check already failed; its name is recorded as
    /// the likely root cause.
    Tainted(String),
}

/// One row of the report: a named residual against its tolerance.
#[derive(Clone, Debug)]
pub struct CheckSection {
    pub name: &'static str,
    /// Worst residual measured; `None` when the check was skipped.
    pub worst: Option<f64>,
    pub tolerance: f64,
    pub outcome: CheckOutcome,
}

impl CheckSection {
    /// True only for a check that ran and met its tolerance.
    pub fn passed(&self) -> bool {
        self.outcome == CheckOutcome::Passed
    }

    /// True for both plain and tainted failures.
    pub fn failed(&self) -> bool {
        matches!(
            self.outcome,
            CheckOutcome::Failed | CheckOutcome::Tainted(_)
        )
    }
}

/// The full verification report: every check in fixed order, plus input
/// hashes and the config echo for provenance.
#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub sections: Vec<CheckSection>,
    /// `(key, value)` rows: SHA-256 of a canonical dump per artifact
    /// provided, then the config echo when one was given.
    pub provenance: Vec<(String, String)>,
}

impl VerificationReport {
    /// Overall verdict: no check failed (skipped checks do not count
    /// against the verdict — they were not applicable).
    pub fn pass(&self) -> bool {
        self.sections.iter().all(|s| !s.failed())
    }

    /// Render as structured text.  The output is byte-identical for
    /// identical inputs: fixed ordering, fixed float formatting, and no
    /// nondeterministic containers anywhere in the pipeline.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("verification report\n");
        out.push_str("===================\n");
        let width = self
            .sections
            .iter()
            .map(|s| s.name.len())
            .max()
            .unwrap_or(0);
        for (i, s) in self.sections.iter().enumerate() {
            let worst = match s.worst {
                Some(v) => format!("{v:.6e}"),
                None => "-".to_string(),
            };
            let status = match &s.outcome {
                CheckOutcome::Passed => "PASS".to_string(),
                CheckOutcome::Failed => "FAIL".to_string(),
                CheckOutcome::Skipped(reason) => format!("SKIP ({reason})"),
                CheckOutcome::Tainted(cause) => format!("FAIL (tainted by {cause})"),
            };
            writeln!(
                out,
                "{:>3}. {:width$}  worst {:>13}  tol {:>6}  {}",
                i + 1,
                s.name,
                worst,
                format!("{:e}", s.tolerance),
                status,
            )
            .expect("write to string");
        }
        let passed = self.sections.iter().filter(|s| s.passed()).count();
        let failed = self
            .sections
            .iter()
            .filter(|s| s.outcome == CheckOutcome::Failed)
            .count();
        let tainted = self
            .sections
            .iter()
            .filter(|s| matches!(s.outcome, CheckOutcome::Tainted(_)))
            .count();
        let skipped = self
            .sections
            .iter()
            .filter(|s| matches!(s.outcome, CheckOutcome::Skipped(_)))
            .count();
        writeln!(
            out,
            "result: {} ({passed} passed, {failed} failed, {tainted} tainted, {skipped} skipped)",
            if self.pass() { "PASS" } else { "FAIL" },
        )
        .expect("write to string");
        out.push_str("provenance:\n");
        for (key, value) in &self.provenance {
            if value.contains('\n') {
                writeln!(out, "  {key}:").expect("write to string");
                for line in value.lines() {
                    writeln!(out, "    {line}").expect("write to string");
                }
            } else {
                writeln!(out, "  {key} = {value}").expect("write to string");
            }
        }
        out
    }
}

/// Any subset of the pipeline's artifacts.  Checks run on what is present
/// and are listed as skipped otherwise.
#[derive(Clone, Copy, Debug, Default)]
pub struct PipelineArtifacts<'a> {
    pub solution: Option<&'a PatternSolution>,
    /// The boundary data the solution was solved against; needed to tell
    /// pinned (Dirichlet) variables from free ones.
    pub boundary: Option<&'a BoundaryData>,
    pub pattern: Option<&'a EmbeddedRingPattern>,
    pub koebe: Option<&'a KoebePair>,
    pub pair: Option<&'a CmcPair>,
    /// Config text echoed into the report's provenance block.
    pub config_echo: Option<&'a str>,
}

/// Outcome of computing one check, before cascade annotation.
enum Raw {
    Value(f64),
    Skip(String),
}

fn skip(reason: &str) -> Raw {
    Raw::Skip(reason.to_string())
}

/// Run every applicable invariant over the artifacts, in a fixed order, and
/// assemble the report.  Never fails: broken invariants become failed
/// sections, and internal computation errors (degenerate faces, closure
/// violations, …) surface as infinite residuals.
pub fn run_all(artifacts: &PipelineArtifacts) -> VerificationReport {
    let mut raws: Vec<(&'static str, f64, Raw)> = Vec::new();

    // --- solution stage ---------------------------------------------------
    const NO_SOLUTION: &str = "no ring-pattern solution provided";
    match artifacts.solution {
        None => {
            raws.push(("variable-box", 0.0, skip(NO_SOLUTION)));
            raws.push(("interior-phi", 1e-12, skip(NO_SOLUTION)));
            raws.push(("stationarity", 1e-8, skip(NO_SOLUTION)));
        }
        Some(sol) => {
            raws.push(("variable-box", 0.0, Raw::Value(variable_box_excess(sol))));
            raws.push(("interior-phi", 1e-12, Raw::Value(interior_phi_defect(sol))));
            let stat = match artifacts.boundary {
                Some(bd) => Raw::Value(stationarity_residual(sol, bd)),
                None => skip("boundary data required to identify pinned variables"),
            };
            raws.push(("stationarity", 1e-8, stat));
        }
    }

    // --- embedded-pattern stage -------------------------------------------
    const NO_PATTERN: &str = "no embedded ring pattern provided";
    match artifacts.pattern {
        None => {
            raws.push(("q-relation", 1e-6, skip(NO_PATTERN)));
            raws.push(("ring-incidence", 1e-6, skip(NO_PATTERN)));
            raws.push(("ring-orthogonality", 1e-6, skip(NO_PATTERN)));
        }
        Some(pat) => {
            raws.push(("q-relation", 1e-6, Raw::Value(q_relation_defect(pat))));
            raws.push(("ring-incidence", 1e-6, Raw::Value(incidence_defect(pat))));
            raws.push((
                "ring-orthogonality",
                1e-6,
                Raw::Value(orthogonality_defect(pat)),
            ));
        }
    }

    // --- Koebe stage --------------------------------------------------------
    const NO_KOEBE: &str = "no Koebe net pair provided";
    match artifacts.koebe {
        None => {
            for (name, tol) in [
                ("koebe-tangency", 1e-7),
                ("koebe-planarity", 1e-7),
                ("koebe-duality", 1e-7),
                ("koebe-face-centers", 1e-7),
                ("koebe-regularity", 0.5),
                ("koebe-sheet", 0.0),
                ("piece-lengths", 1e-8),
            ] {
                raws.push((name, tol, skip(NO_KOEBE)));
            }
        }
        Some(kp) => {
            let diag = verify_koebe(kp);
            raws.push(("koebe-tangency", 1e-7, Raw::Value(diag.max_tangency)));
            raws.push(("koebe-planarity", 1e-7, Raw::Value(diag.max_planarity)));
            raws.push(("koebe-duality", 1e-7, Raw::Value(diag.max_duality)));
            raws.push((
                "koebe-face-centers",
                1e-7,
                Raw::Value(diag.max_face_center),
            ));
            raws.push((
                "koebe-regularity",
                0.5,
                Raw::Value(if diag.regular { 0.0 } else { 1.0 }),
            ));
            let sheet = match kp.flavor {
                Flavor::Hyperbolic => Raw::Value(diag.max_sheet_violation),
                Flavor::Spherical => skip("spherical lift has no sheet constraint"),
            };
            raws.push(("koebe-sheet", 0.0, sheet));
            raws.push(("piece-lengths", 1e-8, Raw::Value(piece_length_defect(kp))));
        }
    }

    // --- cmc stage ----------------------------------------------------------
    const NO_PAIR: &str = "no cmc surface pair provided";
    match artifacts.pair {
        None => {
            for (name, tol) in [
                ("one-form-closure", 1e-7),
                ("gauss-map-net", 1e-7),
                ("mean-curvature", 1e-6),
                ("radius-product", 1e-8),
                ("darboux-pencil", 1e-7),
                ("edge-normals", 1e-7),
                ("normal-ordering", 0.0),
                ("sphere-touching", 1e-7),
                ("face-normals", 1e-7),
                ("christoffel-duality", 1e-7),
                ("spacelike-faces", 0.0),
            ] {
                raws.push((name, tol, skip(NO_PAIR)));
            }
        }
        Some(pair) => {
            let closure = match artifacts.koebe {
                Some(kp) => match pair.closure_residuals(kp) {
                    Ok(rows) => rows.into_iter().map(|(_, r)| r).fold(0.0, f64::max),
                    Err(_) => f64::INFINITY,
                },
                // Without the net the forms cannot be re-evaluated; fall
                // back to the residual measured at integration time.
                None => pair.max_closure,
            };
            raws.push(("one-form-closure", 1e-7, Raw::Value(closure)));
            let gauss = match artifacts.koebe {
                Some(kp) => Raw::Value(gauss_map_defect(pair, kp)),
                None => skip("Koebe net pair required for the Gauss-map comparison"),
            };
            raws.push(("gauss-map-net", 1e-7, gauss));
            let mean = match curvatures(pair) {
                Ok(report) => report.mean_curvature_deviation,
                Err(_) => f64::INFINITY,
            };
            raws.push(("mean-curvature", 1e-6, Raw::Value(mean)));
            raws.push((
                "radius-product",
                1e-8,
                Raw::Value(radius_product_defect(pair)),
            ));
            raws.push(("darboux-pencil", 1e-7, Raw::Value(darboux_defect(pair))));
            raws.push(("edge-normals", 1e-7, Raw::Value(edge_normal_defect(pair))));
            raws.push((
                "normal-ordering",
                0.0,
                Raw::Value(normal_ordering_defect(pair)),
            ));
            raws.push((
                "sphere-touching",
                1e-7,
                Raw::Value(pair.touching_deviation()),
            ));
            raws.push((
                "face-normals",
                1e-7,
                Raw::Value(pair.face_normal_deviation()),
            ));
            raws.push((
                "christoffel-duality",
                1e-7,
                Raw::Value(christoffel_defect(pair)),
            ));
            let spacelike = match pair.flavor {
                Flavor::Hyperbolic => Raw::Value(spacelike_face_defect(pair)),
                Flavor::Spherical => skip("Euclidean ambient space has no causal structure"),
            };
            raws.push(("spacelike-faces", 0.0, spacelike));
        }
    }

    // Cascade annotation: the first failure in pipeline order is the root
    // cause; later failures are marked tainted by it.
    let mut sections = Vec::with_capacity(raws.len());
    let mut first_fail: Option<&'static str> = None;
    for (name, tolerance, raw) in raws {
        let (worst, outcome) = match raw {
            Raw::Skip(reason) => (None, CheckOutcome::Skipped(reason)),
            Raw::Value(v) => {
                // NaN compares false and therefore fails, as it must.
                if v <= tolerance {
                    (Some(v), CheckOutcome::Passed)
                } else if let Some(cause) = first_fail {
                    (Some(v), CheckOutcome::Tainted(cause.to_string()))
                } else {
                    first_fail = Some(name);
                    (Some(v), CheckOutcome::Failed)
                }
            }
        };
        sections.push(CheckSection {
            name,
            worst,
            tolerance,
            outcome,
        });
    }

    VerificationReport {
        sections,
        provenance: provenance(artifacts),
    }
}

// --- individual checks ------------------------------------------------------

/// Worst excursion of any variable outside `[0, 2K]` (0 when all inside).
fn variable_box_excess(sol: &PatternSolution) -> f64 {
    let hi = 2.0 * sol.modulus.quarter_period();
    sol.vars
        .iter()
        .map(|&v| {
            if v.is_finite() {
                (-v).max(v - hi).max(0.0)
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Interior whites must carry the fixed cone angle: `2π` spherical, `−2π`
/// hyperbolic.
fn interior_phi_defect(sol: &PatternSolution) -> f64 {
    let target = match sol.flavor {
        Flavor::Spherical => 2.0 * PI,
        Flavor::Hyperbolic => -2.0 * PI,
    };
    sol.graph
        .white_ids()
        .filter(|&w| !sol.graph.is_boundary(w))
        .map(|w| (sol.phi[w.index()] - target).abs())
        .fold(0.0, f64::max)
}

/// Recompute the functional's gradient directly from the quad list, the
/// elliptic kernel, and the *stored* Φ (a solution whose boundary rings
/// flipped satisfies the Φ it was solved with, which can differ from the
/// assignment its realized orientations would produce).  Returns the ∞-norm
/// over free (non-pinned) variables.
fn stationarity_residual(sol: &PatternSolution, boundary: &BoundaryData) -> f64 {
    let graph = &sol.graph;
    let m = &sol.modulus;
    let mut grad = sol.phi.clone();
    for q in graph.quad_ids() {
        let quad = graph.quad(q);
        let s = sol.vars[quad.ws.index()];
        let c = sol.vars[quad.wc.index()];
        let gm = m.kernel_g(s - c);
        let gp = m.kernel_g(s + c);
        match sol.flavor {
            Flavor::Spherical => {
                grad[quad.ws.index()] += gm - gp;
                grad[quad.wc.index()] += -gm - gp;
            }
            Flavor::Hyperbolic => {
                grad[quad.ws.index()] += gm + gp;
                grad[quad.wc.index()] += -gm + gp;
            }
        }
    }
    graph
        .white_ids()
        .filter(|w| !boundary.fixed.contains_key(w))
        .map(|w| grad[w.index()].abs())
        .fold(0.0, f64::max)
}

/// The global orthogonality relation between each ring's two radii, checked
/// from the stored radii alone: spherical `cos R = q·cos r`, hyperbolic
/// `cosh r = q·cosh R`.
fn q_relation_defect(pat: &EmbeddedRingPattern) -> f64 {
    let q = pat.modulus.q();
    pat.radii
        .iter()
        .map(|rr| match pat.flavor {
            Flavor::Spherical => (rr.big_r.cos() - q * rr.r.cos()).abs(),
            Flavor::Hyperbolic => (rr.r.cosh() - q * rr.big_r.cosh()).abs(),
        })
        .fold(0.0, f64::max)
}

/// Each touching point must sit on its ring at the circle selected by the
/// edge label: geodesic center-to-touch distance equals `|r|` on horizontal
/// edges and `R` on vertical ones.
fn incidence_defect(pat: &EmbeddedRingPattern) -> f64 {
    let mut worst = 0.0f64;
    for e in pat.graph.s_edges() {
        let measured = pat
            .flavor
            .distance(&pat.centers[e.white.index()], &pat.touch_points[e.black.index()]);
        let expected = touch_distance(&pat.graph, &pat.radii, e.white, e.black);
        worst = worst.max((measured - expected).abs());
    }
    worst
}

/// Diagonal (next-neighbor) rings intersect orthogonally: their center
/// distance is determined by the radii alone.
fn orthogonality_defect(pat: &EmbeddedRingPattern) -> f64 {
    let mut worst = 0.0f64;
    for q in pat.graph.quad_ids() {
        let quad = pat.graph.quad(q);
        let measured = pat
            .flavor
            .distance(&pat.centers[quad.ws.index()], &pat.centers[quad.wc.index()]);
        match neighbor_distance(
            pat.radii[quad.ws.index()],
            pat.radii[quad.wc.index()],
            pat.flavor,
        ) {
            Ok(expected) => worst = worst.max((measured - expected).abs()),
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

/// Every fundamental-piece edge length three ways: measured in the net,
/// closed form in the ring radii, closed form in the Jacobi functions.
fn piece_length_defect(kp: &KoebePair) -> f64 {
    let mut worst = 0.0f64;
    for q in kp.graph.quad_ids() {
        for edge in kp.fundamental_piece_lengths(q) {
            worst = worst
                .max((edge.measured - edge.from_radii).abs())
                .max((edge.measured - edge.from_elliptic).abs());
        }
    }
    worst
}

/// The Gauss map of the integrated pair must *be* the Koebe net: `c* − c`
/// equals the net point at every white and the touching point at every
/// black (exact by the integration gauge, up to spanning-tree noise).
fn gauss_map_defect(pair: &CmcPair, kp: &KoebePair) -> f64 {
    let mut worst = 0.0f64;
    for w in pair.graph.white_ids() {
        let net = match pair.graph.white(w).family {
            Family::Sphere => kp.vertices[w.index()],
            Family::Circle => kp.face_centers[w.index()],
        };
        worst = worst.max((pair.gauss_white[w.index()] - net).norm());
    }
    for b in pair.graph.black_ids() {
        worst = worst.max((pair.gauss_black[b.index()] - kp.piece_tangent_point(b)).norm());
    }
    worst
}

/// `d·d* = λ` at every white, and `λ = (1−q²)/(4q)` globally.
fn radius_product_defect(pair: &CmcPair) -> f64 {
    let q = pair.modulus.q();
    let expected = (1.0 - q * q) / (4.0 * q);
    pair.lambda_deviation().max((pair.lambda - expected).abs())
}

/// The Darboux-pencil constant: spread over vertex spheres, and the mean
/// against its closed form `α = ∓(1+q²)/(4q)`.
fn darboux_defect(pair: &CmcPair) -> f64 {
    let q = pair.modulus.q();
    let expected = match pair.flavor {
        Flavor::Spherical => -(1.0 + q * q) / (4.0 * q),
        Flavor::Hyperbolic => (1.0 + q * q) / (4.0 * q),
    };
    let (mean, spread) = pair.darboux_alpha();
    spread.max((mean - expected).abs())
}

/// Edge normals `c*_b − c_b` have exactly two lengths, one per edge color:
/// spherical `1/√q` (horizontal) and `√q` (vertical); Lorentz squared `−q`
/// and `−1/q`.
fn edge_normal_defect(pair: &CmcPair) -> f64 {
    let q = pair.modulus.q();
    let (eh, ev) = match pair.flavor {
        Flavor::Spherical => (1.0 / q.sqrt(), q.sqrt()),
        Flavor::Hyperbolic => (-q, -1.0 / q),
    };
    let (h, v, spread) = pair.edge_normal_lengths();
    spread.max((h - eh).abs()).max((v - ev).abs())
}

/// Ordering of the two normal lengths: vertical below horizontal in both
/// flavors, and both negative (timelike) in the Lorentz case.
fn normal_ordering_defect(pair: &CmcPair) -> f64 {
    let (h, v, _) = pair.edge_normal_lengths();
    match pair.flavor {
        Flavor::Spherical => (v - h).max(0.0),
        Flavor::Hyperbolic => (v - h).max(h).max(0.0),
    }
}

/// Integrate the Christoffel transform of the primal surface and compare it,
/// up to the translation fixed by the first vertex sphere, against the
/// integrated dual surface (vertex-sphere family; the transform is defined
/// on its edges only).  Dual radii are compared as well.
fn christoffel_defect(pair: &CmcPair) -> f64 {
    let (dual, dual_radii) =
        match christoffel_dual(&pair.graph, &pair.c_white, &pair.d, pair.lambda) {
            Ok(result) => result,
            Err(_) => return f64::INFINITY,
        };
    let Some(anchor) = pair
        .graph
        .white_ids()
        .find(|&w| pair.graph.white(w).family == Family::Sphere)
    else {
        return f64::INFINITY;
    };
    let shift = pair.c_star_white[anchor.index()] - dual[anchor.index()];
    let mut worst = 0.0f64;
    for w in pair.graph.white_ids() {
        if pair.graph.white(w).family != Family::Sphere {
            continue;
        }
        let i = w.index();
        worst = worst
            .max((dual[i] + shift - pair.c_star_white[i]).norm())
            .max((dual_radii[i] - pair.d_star[i]).abs());
    }
    worst
}

/// Lorentz flavor: every face of the primal surface must be spacelike,
/// i.e. its Euclidean face normal must be timelike.  Returns the worst
/// normalized Minkowski norm of a face normal (negative when spacelike).
fn spacelike_face_defect(pair: &CmcPair) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let mut seen = false;
    for w in pair.graph.white_ids() {
        let fan = pair.graph.fan(w);
        if pair.graph.white(w).family != Family::Circle || !fan.closed {
            continue;
        }
        let cycle: Vec<Vec3> = fan
            .entries
            .iter()
            .map(|e| pair.c_white[e.partner.index()])
            .collect();
        let mut normal = Vec3::zeros();
        for i in 0..cycle.len() {
            normal += cycle[i].cross(&cycle[(i + 1) % cycle.len()]);
        }
        let e2 = normal.norm_squared();
        if e2 <= 1e-30 {
            return f64::INFINITY;
        }
        worst = worst.max(MinkowskiForm::norm2(&normal) / e2);
        seen = true;
    }
    if seen {
        worst
    } else {
        f64::INFINITY
    }
}

// --- provenance ---------------------------------------------------------------

fn push_float(out: &mut String, x: f64) {
    write!(out, "{x:.17e};").expect("write to string");
}

fn push_vec3(out: &mut String, v: &Vec3) {
    push_float(out, v.x);
    push_float(out, v.y);
    push_float(out, v.z);
}

fn push_graph(out: &mut String, g: &SQuadGraph) {
    write!(
        out,
        "graph|w={}|b={}|q={}|",
        g.num_whites(),
        g.num_blacks(),
        g.num_quads()
    )
    .expect("write to string");
    for w in g.white_ids() {
        out.push(match g.white(w).family {
            Family::Sphere => 's',
            Family::Circle => 'c',
        });
    }
    out.push('|');
    for q in g.quad_ids() {
        let quad = g.quad(q);
        write!(
            out,
            "{},{},{},{};",
            quad.ws.0, quad.b_first.0, quad.wc.0, quad.b_second.0
        )
        .expect("write to string");
    }
}

fn flavor_tag(flavor: Flavor) -> &'static str {
    match flavor {
        Flavor::Spherical => "spherical",
        Flavor::Hyperbolic => "hyperbolic",
    }
}

fn sha256_hex(data: &str) -> String {
    let digest = Sha256::digest(data.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("write to string");
    }
    out
}

/// Canonical dumps feed the hashes; every field that defines the artifact
/// participates, printed with full float precision in fixed order.
fn provenance(artifacts: &PipelineArtifacts) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    if let Some(bd) = artifacts.boundary {
        let mut dump = String::from("boundary|theta|");
        for (w, theta) in &bd.theta {
            write!(dump, "{}:", w.0).expect("write to string");
            push_float(&mut dump, *theta);
        }
        dump.push_str("|fixed|");
        for (w, v) in &bd.fixed {
            write!(dump, "{}:", w.0).expect("write to string");
            push_float(&mut dump, *v);
        }
        dump.push_str("|orientation|");
        for (w, o) in &bd.orientation {
            let tag = match o {
                BoundaryOrientation::Positive => '+',
                BoundaryOrientation::Negative => '-',
            };
            write!(dump, "{}:{tag};", w.0).expect("write to string");
        }
        rows.push(("boundary-sha256".to_string(), sha256_hex(&dump)));
    }
    if let Some(sol) = artifacts.solution {
        let mut dump = format!("solution|{}|", flavor_tag(sol.flavor));
        push_float(&mut dump, sol.modulus.q());
        push_graph(&mut dump, &sol.graph);
        dump.push_str("|vars|");
        for &v in &sol.vars {
            push_float(&mut dump, v);
        }
        dump.push_str("|phi|");
        for &p in &sol.phi {
            push_float(&mut dump, p);
        }
        dump.push_str("|orientations|");
        for (w, o) in &sol.orientations {
            let tag = match o {
                BoundaryOrientation::Positive => '+',
                BoundaryOrientation::Negative => '-',
            };
            write!(dump, "{}:{tag};", w.0).expect("write to string");
        }
        rows.push(("solution-sha256".to_string(), sha256_hex(&dump)));
    }
    if let Some(pat) = artifacts.pattern {
        let mut dump = format!("pattern|{}|", flavor_tag(pat.flavor));
        push_float(&mut dump, pat.modulus.q());
        push_graph(&mut dump, &pat.graph);
        dump.push_str("|centers|");
        for c in &pat.centers {
            push_vec3(&mut dump, c);
        }
        dump.push_str("|touch|");
        for t in &pat.touch_points {
            push_vec3(&mut dump, t);
        }
        dump.push_str("|radii|");
        for rr in &pat.radii {
            push_float(&mut dump, rr.r);
            push_float(&mut dump, rr.big_r);
        }
        rows.push(("pattern-sha256".to_string(), sha256_hex(&dump)));
    }
    if let Some(kp) = artifacts.koebe {
        let mut dump = format!("koebe|{}|", flavor_tag(kp.flavor));
        push_float(&mut dump, kp.modulus.q());
        push_graph(&mut dump, &kp.graph);
        dump.push_str("|vertices|");
        for v in &kp.vertices {
            push_vec3(&mut dump, v);
        }
        dump.push_str("|face-centers|");
        for v in &kp.face_centers {
            push_vec3(&mut dump, v);
        }
        dump.push_str("|spheres|");
        push_float(&mut dump, kp.r_plus);
        push_float(&mut dump, kp.r_minus);
        rows.push(("koebe-sha256".to_string(), sha256_hex(&dump)));
    }
    if let Some(pair) = artifacts.pair {
        let mut dump = format!("cmc|{}|", flavor_tag(pair.flavor));
        push_float(&mut dump, pair.modulus.q());
        push_graph(&mut dump, &pair.graph);
        for (tag, points) in [
            ("c-white", &pair.c_white),
            ("c-black", &pair.c_black),
            ("c-star-white", &pair.c_star_white),
            ("c-star-black", &pair.c_star_black),
        ] {
            write!(dump, "|{tag}|").expect("write to string");
            for p in points {
                push_vec3(&mut dump, p);
            }
        }
        dump.push_str("|d|");
        for &d in &pair.d {
            push_float(&mut dump, d);
        }
        dump.push_str("|d-star|");
        for &d in &pair.d_star {
            push_float(&mut dump, d);
        }
        push_float(&mut dump, pair.lambda);
        rows.push(("cmc-sha256".to_string(), sha256_hex(&dump)));
    }
    if let Some(echo) = artifacts.config_echo {
        rows.push(("config".to_string(), echo.to_string()));
    }
    rows
}

// --- brute-force oracle --------------------------------------------------------

/// Solve the interior stationarity equation of a pattern with exactly one
/// interior white vertex, completely independently of the Newton solvers:
/// the boundary variables are pinned, the interior equation is written out
/// via the elliptic kernel, and its root on `(0, 2K)` is located by a dense
/// scan (4096 cells) followed by bisection to width `1e−12`.
///
/// The interior cone condition is `Φ = 2π` (spherical) respectively
/// `Φ = −2π` (hyperbolic); each quad containing the interior vertex
/// contributes its kernel terms with the sign matching the vertex's role in
/// the quad.
pub fn brute_force_interior(
    flavor: Flavor,
    graph: &SQuadGraph,
    modulus: &Modulus,
    boundary_vars: &BTreeMap<WhiteId, f64>,
) -> Result<f64, VerifyError> {
    if modulus.is_degenerate() {
        return Err(VerifyError::Precondition(
            "the degenerate modulus q = 1 has no finite variable box".into(),
        ));
    }
    let interior: Vec<WhiteId> = graph
        .white_ids()
        .filter(|&w| !graph.is_boundary(w))
        .collect();
    let [w0] = interior[..] else {
        return Err(VerifyError::Precondition(format!(
            "expected exactly one interior white vertex, found {}",
            interior.len()
        )));
    };
    let k = modulus.quarter_period();
    for w in graph.white_ids().filter(|&w| graph.is_boundary(w)) {
        let Some(&v) = boundary_vars.get(&w) else {
            return Err(VerifyError::Precondition(format!(
                "boundary white {} has no pinned value",
                w.0
            )));
        };
        if !(v > 0.0 && v < 2.0 * k && v.is_finite()) {
            return Err(VerifyError::Precondition(format!(
                "pinned value {v} at white {} lies outside (0, 2K)",
                w.0
            )));
        }
    }

    let phi = match flavor {
        Flavor::Spherical => 2.0 * PI,
        Flavor::Hyperbolic => -2.0 * PI,
    };
    let h = |x: f64| -> f64 {
        let mut total = phi;
        for q in graph.quad_ids() {
            let quad = graph.quad(q);
            if quad.ws == w0 {
                let c = boundary_vars[&quad.wc];
                let gm = modulus.kernel_g(x - c);
                let gp = modulus.kernel_g(x + c);
                total += match flavor {
                    Flavor::Spherical => gm - gp,
                    Flavor::Hyperbolic => gm + gp,
                };
            } else if quad.wc == w0 {
                let s = boundary_vars[&quad.ws];
                let gm = modulus.kernel_g(s - x);
                let gp = modulus.kernel_g(s + x);
                total += match flavor {
                    Flavor::Spherical => -gm - gp,
                    Flavor::Hyperbolic => -gm + gp,
                };
            }
        }
        total
    };

    let lo = 1e-9 * k;
    let hi = 2.0 * k - 1e-9 * k;
    const CELLS: usize = 4096;
    let mut prev_x = lo;
    let mut prev_h = h(lo);
    for i in 1..=CELLS {
        let x = lo + (hi - lo) * (i as f64 / CELLS as f64);
        let hx = h(x);
        if prev_h == 0.0 {
            return Ok(prev_x);
        }
        if prev_h * hx < 0.0 {
            let (mut a, mut b, mut ha) = (prev_x, x, prev_h);
            while b - a > 1e-12 {
                let mid = 0.5 * (a + b);
                let hm = h(mid);
                if hm == 0.0 {
                    return Ok(mid);
                }
                if ha * hm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    ha = hm;
                }
            }
            return Ok(0.5 * (a + b));
        }
        prev_x = x;
        prev_h = hx;
    }
    if prev_h == 0.0 {
        return Ok(prev_x);
    }
    Err(VerifyError::NoRoot { lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmc::{cmc_radii, integrate_one_forms};
    use crate::koebe::lift;
    use crate::layout::embed;
    use crate::quadgraph::SQuadGraph;
    use crate::ringpattern::{solve, SolveOptions};

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
    ) -> (PatternSolution, BoundaryData) {
        let graph = SQuadGraph::build_rectangle(nx, ny).unwrap();
        let bd = rectangle_boundary(&graph, corner, side);
        let sol = solve(
            flavor,
            &graph,
            Modulus::new(q).unwrap(),
            &bd,
            &SolveOptions::default(),
        )
        .unwrap();
        (sol, bd)
    }

    fn section<'r>(report: &'r VerificationReport, name: &str) -> &'r CheckSection {
        report
            .sections
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("section {name} missing"))
    }

    /// A complete valid pipeline passes every applicable check, in both
    /// flavors, with the flavor-specific checks skipped or run as
    /// appropriate and every artifact hashed into the provenance block.
    #[test]
    fn full_pipeline_reports_all_pass() {
        for (flavor, q, corner) in [
            (Flavor::Spherical, 0.9, 2.0 * PI / 3.0),
            (Flavor::Hyperbolic, 0.93, 2.0 * PI / 5.0),
        ] {
            let (sol, bd) = solved(flavor, q, 4, 4, corner, 0.9 * PI);
            let pat = embed(&sol).unwrap();
            let kp = lift(&pat).unwrap();
            let pair = integrate_one_forms(&kp, &cmc_radii(&sol).unwrap()).unwrap();
            let report = run_all(&PipelineArtifacts {
                solution: Some(&sol),
                boundary: Some(&bd),
                pattern: Some(&pat),
                koebe: Some(&kp),
                pair: Some(&pair),
                config_echo: Some("unit-test"),
            });
            assert!(report.pass(), "{flavor:?}:\n{}", report.render());
            assert_eq!(report.sections.len(), 24);
            assert_eq!(
                report.sections[..3]
                    .iter()
                    .map(|s| s.name)
                    .collect::<Vec<_>>(),
                ["variable-box", "interior-phi", "stationarity"],
            );
            for s in &report.sections {
                match flavor {
                    Flavor::Hyperbolic => assert!(
                        s.passed(),
                        "{}: {:?} should have run and passed",
                        s.name,
                        s.outcome
                    ),
                    Flavor::Spherical => {
                        if s.name == "koebe-sheet" || s.name == "spacelike-faces" {
                            assert!(
                                matches!(s.outcome, CheckOutcome::Skipped(_)),
                                "{} should be skipped for the spherical flavor",
                                s.name
                            );
                        } else {
                            assert!(s.passed(), "{}: {:?}", s.name, s.outcome);
                        }
                    }
                }
            }
            let keys: Vec<&str> = report.provenance.iter().map(|(k, _)| k.as_str()).collect();
            assert_eq!(
                keys,
                [
                    "boundary-sha256",
                    "solution-sha256",
                    "pattern-sha256",
                    "koebe-sha256",
                    "cmc-sha256",
                    "config"
                ]
            );
        }
    }

    /// Breaking the q-relation by editing one stored radius fails that check
    /// first; downstream pattern checks fail too but are annotated as
    /// tainted by it, and checks of missing artifacts stay skipped.
    #[test]
    fn edited_radius_fails_q_relation_and_taints_downstream() {
        let (sol, _) = solved(Flavor::Spherical, 0.9, 3, 3, 2.0 * PI / 3.0, 0.9 * PI);
        let mut pat = embed(&sol).unwrap();
        pat.radii[0].r += 0.05;
        let report = run_all(&PipelineArtifacts {
            pattern: Some(&pat),
            ..Default::default()
        });
        assert!(!report.pass());
        assert_eq!(section(&report, "q-relation").outcome, CheckOutcome::Failed);
        assert_eq!(
            section(&report, "ring-incidence").outcome,
            CheckOutcome::Tainted("q-relation".to_string())
        );
        assert!(matches!(
            section(&report, "variable-box").outcome,
            CheckOutcome::Skipped(_)
        ));
        assert!(matches!(
            section(&report, "mean-curvature").outcome,
            CheckOutcome::Skipped(_)
        ));
    }

    /// At q = 1 − 1e−9 the pattern is a hair away from a circle pattern
    /// (outer and inner radii nearly equal); the ring checks still pass.
    #[test]
    fn near_degenerate_spherical_ring_checks_pass() {
        let (sol, bd) = solved(
            Flavor::Spherical,
            1.0 - 1e-9,
            3,
            3,
            0.6 * PI,
            1.2 * PI,
        );
        let pat = embed(&sol).unwrap();
        let report = run_all(&PipelineArtifacts {
            solution: Some(&sol),
            boundary: Some(&bd),
            pattern: Some(&pat),
            ..Default::default()
        });
        assert!(report.pass(), "\n{}", report.render());
        let ring_gap = pat
            .radii
            .iter()
            .map(|rr| (rr.big_r - rr.r.abs()).abs())
            .fold(0.0, f64::max);
        assert!(ring_gap < 1e-3, "rings should be nearly circles: {ring_gap}");
    }

    /// Identical inputs produce byte-identical reports, all the way from a
    /// fresh solve: no container or float path in the pipeline is
    /// order-unstable.
    #[test]
    fn reports_are_byte_identical() {
        let build = || {
            let (sol, bd) = solved(Flavor::Hyperbolic, 0.93, 3, 3, 2.0 * PI / 5.0, 0.9 * PI);
            let pat = embed(&sol).unwrap();
            let kp = lift(&pat).unwrap();
            let pair = integrate_one_forms(&kp, &cmc_radii(&sol).unwrap()).unwrap();
            run_all(&PipelineArtifacts {
                solution: Some(&sol),
                boundary: Some(&bd),
                pattern: Some(&pat),
                koebe: Some(&kp),
                pair: Some(&pair),
                config_echo: Some("determinism-test"),
            })
            .render()
        };
        let first = build();
        let second = build();
        assert!(!first.is_empty());
        assert_eq!(first, second);
    }

    /// With every boundary variable at the quarter period the spherical
    /// interior equation closes exactly at the quarter period: each quad
    /// contributes g(0) = 0 and g(2K) = π/2 against the interior 2π.
    #[test]
    fn brute_force_anchor_at_quarter_period() {
        let graph = SQuadGraph::build_rectangle(2, 2).unwrap();
        let modulus = Modulus::new(0.9).unwrap();
        let k = modulus.quarter_period();
        let bvars: BTreeMap<WhiteId, f64> = graph
            .white_ids()
            .filter(|&w| graph.is_boundary(w))
            .map(|w| (w, k))
            .collect();
        let root = brute_force_interior(Flavor::Spherical, &graph, &modulus, &bvars).unwrap();
        assert!((root - k).abs() <= 1e-9, "root {root} vs K {k}");
    }

    /// The Newton solver and the scan-plus-bisection oracle agree to 1e−9 on
    /// one-interior hyperbolic instances (the spherical solver does not
    /// accept pinned boundaries, so oracle equivalence is hyperbolic-only).
    #[test]
    fn brute_force_matches_hyperbolic_solver() {
        let graph = SQuadGraph::build_rectangle(2, 2).unwrap();
        let modulus = Modulus::new(0.8).unwrap();
        let k = modulus.quarter_period();
        let boundary: Vec<WhiteId> = graph
            .white_ids()
            .filter(|&w| graph.is_boundary(w))
            .collect();
        let interior = graph
            .white_ids()
            .find(|&w| !graph.is_boundary(w))
            .unwrap();
        for scale in [0.85_f64, 1.0, 1.12] {
            let factors = [0.92_f64, 1.0, 1.07, 0.97];
            let bvars: BTreeMap<WhiteId, f64> = boundary
                .iter()
                .zip(factors)
                .map(|(&w, f)| (w, scale * f * k))
                .collect();
            let bd = BoundaryData {
                fixed: bvars.clone(),
                ..Default::default()
            };
            let sol = solve(
                Flavor::Hyperbolic,
                &graph,
                modulus,
                &bd,
                &SolveOptions::default(),
            )
            .unwrap();
            let oracle =
                brute_force_interior(Flavor::Hyperbolic, &graph, &modulus, &bvars).unwrap();
            let diff = (sol.vars[interior.index()] - oracle).abs();
            assert!(diff <= 1e-9, "scale {scale}: solver vs oracle differ {diff}");
        }
    }

    /// Raising one boundary variable raises the interior root: the kernel
    /// derivative is larger at the difference argument than at the sum, so
    /// the implicit-function slope is positive.
    #[test]
    fn brute_force_root_shifts_monotonically() {
        let graph = SQuadGraph::build_rectangle(2, 2).unwrap();
        let modulus = Modulus::new(0.8).unwrap();
        let k = modulus.quarter_period();
        let boundary: Vec<WhiteId> = graph
            .white_ids()
            .filter(|&w| graph.is_boundary(w))
            .collect();
        let mut roots = Vec::new();
        for bump in [0.0, 0.2, 0.4] {
            let mut bvars: BTreeMap<WhiteId, f64> =
                boundary.iter().map(|&w| (w, k)).collect();
            *bvars.get_mut(&boundary[0]).unwrap() = (1.0 + bump) * k;
            roots.push(
                brute_force_interior(Flavor::Hyperbolic, &graph, &modulus, &bvars).unwrap(),
            );
        }
        assert!(
            roots[0] < roots[1] && roots[1] < roots[2],
            "roots not increasing: {roots:?}"
        );
    }

    /// Precondition and no-root failures are reported, not mislocated: a
    /// multi-interior graph and a missing pinned value are precondition
    /// errors, and an all-but-flipped spherical boundary admits no interior
    /// critical point.
    #[test]
    fn brute_force_rejects_bad_inputs() {
        let modulus = Modulus::new(0.9).unwrap();

        let big = SQuadGraph::build_rectangle(3, 3).unwrap();
        let k = modulus.quarter_period();
        let bvars: BTreeMap<WhiteId, f64> = big
            .white_ids()
            .filter(|&w| big.is_boundary(w))
            .map(|w| (w, k))
            .collect();
        assert!(matches!(
            brute_force_interior(Flavor::Spherical, &big, &modulus, &bvars),
            Err(VerifyError::Precondition(_))
        ));

        let graph = SQuadGraph::build_rectangle(2, 2).unwrap();
        let mut partial: BTreeMap<WhiteId, f64> = graph
            .white_ids()
            .filter(|&w| graph.is_boundary(w))
            .map(|w| (w, k))
            .collect();
        let dropped = *partial.keys().next().unwrap();
        partial.remove(&dropped);
        assert!(matches!(
            brute_force_interior(Flavor::Spherical, &graph, &modulus, &partial),
            Err(VerifyError::Precondition(_))
        ));

        let flipped: BTreeMap<WhiteId, f64> = graph
            .white_ids()
            .filter(|&w| graph.is_boundary(w))
            .map(|w| (w, 1.99 * k))
            .collect();
        assert!(matches!(
            brute_force_interior(Flavor::Spherical, &graph, &modulus, &flipped),
            Err(VerifyError::NoRoot { .. })
        ));
    }
}
