//! Discrete constant mean curvature surfaces from orthogonal ring patterns.
//!
//! This crate builds discrete cmc surfaces in Euclidean space `R^3` and in
//! Lorentz space `R^{2,1}` out of purely combinatorial data plus boundary
//! conditions. The construction runs through a fixed pipeline:
//!
//! 1. [`quadgraph`] — build the S-quad graph (bipartite quad complex with
//!    white vertices of two families and black vertices) for a combinatorial
//!    rectangle or a user-supplied complex.
//! 2. [`ringpattern`] — solve a variational principle for an orthogonal ring
//!    pattern: a convex problem on the hyperbolic side, a reduced saddle
//!    problem on the spherical side. Ring data is encoded in one scalar per
//!    white vertex through Jacobi elliptic functions ([`elliptic`]).
//! 3. [`layout`] — realize the pattern as rings on the unit sphere or on the
//!    upper hyperboloid: centers, touching points, signed radii.
//! 4. [`koebe`] — lift the pattern off the surface to a pair of dual Koebe
//!    nets whose edges alternately touch two concentric spheres with
//!    (squared-)radii product one.
//! 5. [`cmc`] — integrate two edge one-forms into a Christoffel-dual pair of
//!    surfaces at sphere distance one (mean curvature identically 1, measured
//!    via mixed areas), plus the modulus-to-one limits (minimal/maximal
//!    surfaces).
//! 6. [`verify`] — aggregate every numeric invariant into a deterministic
//!    pass/fail report.
//! 7. [`cli_io`] — config parsing, pipeline orchestration, OBJ/SVG/text
//!    export, and a scalar root finder for the closing modulus.
//!
//! # Runnable examples
//!
//! Each major capability has a runnable example under `examples/`:
//!
//! ```text
//! cargo run --example elliptic_kernels    # sn/cn/dn, kernel g, antiderivative F
//! cargo run --example build_rectangle     # S-quad graph combinatorics
//! cargo run --example solve_hyperbolic    # convex Neumann problem on H^2
//! cargo run --example solve_spherical     # reduced saddle problem on S^2
//! cargo run --example embed_pattern       # ring layout on the surface
//! cargo run --example koebe_lift          # two-sphere Koebe net pair
//! cargo run --example cmc_pair            # Christoffel-dual cmc surfaces
//! cargo run --example lorentz_pipeline    # spacelike cmc surfaces end to end
//! cargo run --example minimal_limit      # modulus-to-one limit families
//! cargo run --example search_modulus      # root-finding the closing modulus
//! ```
//!
//! The thin `ringcmc` binary drives the same pipeline from a TOML config; see
//! the `pipeline`, `solve`, `embed`, `lift`, `build`, `verify`, and `search-q`
//! subcommands.

pub mod cli_io;
pub mod cmc;
pub mod elliptic;
pub mod geom;
pub mod koebe;
pub mod layout;
pub mod quadgraph;
pub mod ringpattern;
pub mod verify;

pub use geom::{Flavor, MinkowskiForm, Vec3};

/// Any error the pipeline can produce, with the stage it came from.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(#[from] cli_io::ConfigError),
    #[error("graph: {0}")]
    Graph(#[from] quadgraph::GraphError),
    #[error("solver: {0}")]
    Solve(#[from] ringpattern::SolveError),
    #[error("layout: {0}")]
    Layout(#[from] layout::LayoutError),
    #[error("koebe: {0}")]
    Koebe(#[from] koebe::KoebeError),
    #[error("cmc: {0}")]
    Cmc(#[from] cmc::CmcError),
    #[error("verify: {0}")]
    Verify(#[from] verify::VerifyError),
    #[error("search: {0}")]
    Search(#[from] cli_io::SearchError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 verification failure, 3 solver
    /// non-convergence, 4 config error, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 4,
            Error::Solve(ringpattern::SolveError::NonConvergence { .. }) => 3,
            Error::Solve(_) => 3,
            Error::Search(cli_io::SearchError::NoBracket { .. }) => 4,
            Error::Search(_) => 3,
            _ => 1,
        }
    }
}
