//! A front-propagation engine for 2D closed curves advected in their normal
//! direction with a prescribed speed `F(x, y, t)` that may vanish and change
//! sign.
//!
//! The engine builds a discrete sampling of the space-time surface traced by
//! the evolving curve. Where the speed is bounded away from zero it marches
//! arrival times with a fast-marching solver (time-dependent variant when `F`
//! depends on `t`). Where the speed crosses zero, the affected points are
//! handed to locally solved *sideways* initial value problems that describe
//! the surface as `x = ψ(y, t)`, `y = ψ(x, t)` or a rotated variant, and the
//! computed crossings are woven back into the march.
//!
//! The crate also ships the measurement side: closed-form solutions for the
//! bundled speed fields, a fine-grid level-set reference solver with
//! zero-contour sampling, and `L1`/`L∞` error aggregation for convergence
//! studies. The `frontweave` binary drives all of it from the command line.

pub mod cli;
pub mod eikonal;
pub mod engine;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod registry;
pub mod sideways;
pub mod weaving;

pub use grid::{GridSpec, MarchState, PointSource, SurfacePoint};
pub use sideways::{SidewaysPatch, SpeedField};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid spec invalid: {0}")]
    InvalidGrid(String),
    #[error("narrow band is empty")]
    EmptyBand,
    #[error("speed is zero; eikonal update undefined")]
    ZeroSpeed,
    #[error("both quadrant neighbors are at +inf")]
    BothInfinite,
    #[error("slope bound P = {0} must exceed 2")]
    InvalidP(f64),
    #[error("sideways normal stencil incomplete at column {col}, row {row}")]
    MissingNeighbor { col: usize, row: usize },
    #[error("not enough boundary data to seed a sideways patch ({0} finite values)")]
    InsufficientData(usize),
    #[error("initial curve does not intersect the grid")]
    CurveOffGrid,
    #[error(
        "sign test counted {count} sign changes on segment \
         ({x0}, {y0}, {t0}) -> ({x1}, {y1}, {t1}); grid must be refined"
    )]
    RefineNeeded {
        count: usize,
        x0: f64,
        y0: f64,
        t0: f64,
        x1: f64,
        y1: f64,
        t1: f64,
    },
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("no exact solution for `{example}` at t = {t}")]
    NoExact { example: String, t: f64 },
    #[error("time step {dt} violates the CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("no errors in region `{0}`")]
    EmptyRegion(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
