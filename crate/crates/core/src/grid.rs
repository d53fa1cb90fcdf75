//! Grid geometry and the marching bookkeeping.
//!
//! A point of the plane can be traversed by the front more than once when the
//! speed changes sign, so the usual fast-marching state is extended: the
//! `Accepted` list may hold several triplets with the same spatial
//! coordinates, and `Grid` keeps the latest (largest) arrival time per
//! coordinate, i.e. the upper semi-continuous envelope of the sampled
//! surface. `Norm` and `Orient` live on the triplets themselves.

use crate::{Error, Result};

/// Uniform square grid: `n` points per axis spaced `h` apart, marched up to
/// the time horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub y_min: f64,
    pub h: f64,
    pub n: usize,
    pub t_max: f64,
}

impl GridSpec {
    pub fn new(x_min: f64, y_min: f64, h: f64, n: usize, t_max: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("h = {h}")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("n = {n} < 3")));
        }
        if !(t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("T = {t_max}")));
        }
        Ok(GridSpec { x_min, y_min, h, n, t_max })
    }

    /// Grid over `[x_min, x_max]^2` with `cells` cells (`cells + 1` points)
    /// per axis.
    pub fn from_domain(x_min: f64, x_max: f64, cells: usize, t_max: f64) -> Result<Self> {
        let h = (x_max - x_min) / cells as f64;
        GridSpec::new(x_min, x_min, h, cells + 1, t_max)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.h
    }

    #[inline]
    pub fn contains(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.n && (j as usize) < self.n
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// The four nearest neighbours of `(i, j)` that lie on the grid.
    pub fn neighbors(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        const OFF: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        let (i, j) = (i as isize, j as isize);
        OFF.iter()
            .map(move |&(di, dj)| (i + di, j + dj))
            .filter(|&(a, b)| self.contains(a, b))
            .map(|(a, b)| (a as usize, b as usize))
    }
}

/// How a surface point obtained its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSource {
    Fmm,
    Tfmm,
    SidewaysYt,
    SidewaysXt,
    SidewaysSkew,
}

impl PointSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointSource::Fmm => "fmm",
            PointSource::Tfmm => "tfmm",
            PointSource::SidewaysYt => "sideways-yt",
            PointSource::SidewaysXt => "sideways-xt",
            PointSource::SidewaysSkew => "sideways-skew",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fmm" => Some(PointSource::Fmm),
            "tfmm" => Some(PointSource::Tfmm),
            "sideways-yt" => Some(PointSource::SidewaysYt),
            "sideways-xt" => Some(PointSource::SidewaysXt),
            "sideways-skew" => Some(PointSource::SidewaysSkew),
            _ => None,
        }
    }

    pub fn is_sideways(&self) -> bool {
        matches!(
            self,
            PointSource::SidewaysYt | PointSource::SidewaysXt | PointSource::SidewaysSkew
        )
    }
}

/// A sample `(x_i, y_j, ψ_ij)` of the space-time surface together with its
/// 3D normal, planar normal, orientation and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub normal3: [f64; 3],
    pub normal2: [f64; 2],
    pub orient: i8,
    pub source: PointSource,
    pub attempts: u8,
}

impl SurfacePoint {
    /// Builds a point from its 3D normal; `normal2` is the normalized spatial
    /// part and `orient = -sign(n3_t)`.
    pub fn new(
        i: usize,
        j: usize,
        x: f64,
        y: f64,
        psi: f64,
        normal3: [f64; 3],
        source: PointSource,
    ) -> Self {
        let normal2 = planar_normal(normal3);
        let orient = orient_of(normal3);
        SurfacePoint { i, j, x, y, psi, normal3, normal2, orient, source, attempts: 0 }
    }

    /// Spatial projection `π_s`.
    #[inline]
    pub fn project_space(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Time projection `π_t`.
    #[inline]
    pub fn project_time(&self) -> f64 {
        self.psi
    }
}

/// Normalized spatial part `(n1, n2)/|(n1, n2)|` of a 3D normal; zero vector
/// if the spatial part vanishes.
pub fn planar_normal(n3: [f64; 3]) -> [f64; 2] {
    let len = n3[0].hypot(n3[1]);
    if len > 0.0 {
        [n3[0] / len, n3[1] / len]
    } else {
        [0.0, 0.0]
    }
}

/// `Orient = -sign(n3_t)`; a zero time component counts as `+1` so the result
/// stays in `{-1, +1}`.
pub fn orient_of(n3: [f64; 3]) -> i8 {
    if n3[2] > 0.0 {
        -1
    } else {
        1
    }
}

pub fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / len, v[1] / len, v[2] / len]
}

/// Marching status of a spatial coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellStatus {
    Far,
    Banded,
    /// Accepted `count` times; may be banded again for a re-traversal.
    Traversed { count: u8, banded: bool },
}

/// Binary min-heap over band entries keyed on `(psi, i, j)` with a per-cell
/// position index so entries can be replaced in place.
#[derive(Debug, Default)]
struct BandHeap {
    entries: Vec<SurfacePoint>,
    /// Position of the heap entry for cell index `idx`, `usize::MAX` if none.
    pos: Vec<usize>,
}

const NO_POS: usize = usize::MAX;

impl BandHeap {
    fn new(cells: usize) -> Self {
        BandHeap { entries: Vec::new(), pos: vec![NO_POS; cells] }
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    fn less(a: &SurfacePoint, b: &SurfacePoint) -> bool {
        (a.psi, a.i, a.j) < (b.psi, b.i, b.j)
    }

    fn swap(&mut self, a: usize, b: usize, grid: &GridSpec) {
        self.entries.swap(a, b);
        let ia = grid.idx(self.entries[a].i, self.entries[a].j);
        let ib = grid.idx(self.entries[b].i, self.entries[b].j);
        self.pos[ia] = a;
        self.pos[ib] = b;
    }

    fn sift_up(&mut self, mut k: usize, grid: &GridSpec) {
        while k > 0 {
            let parent = (k - 1) / 2;
            if Self::less(&self.entries[k], &self.entries[parent]) {
                self.swap(k, parent, grid);
                k = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut k: usize, grid: &GridSpec) {
        loop {
            let (l, r) = (2 * k + 1, 2 * k + 2);
            let mut best = k;
            if l < self.entries.len() && Self::less(&self.entries[l], &self.entries[best]) {
                best = l;
            }
            if r < self.entries.len() && Self::less(&self.entries[r], &self.entries[best]) {
                best = r;
            }
            if best == k {
                break;
            }
            self.swap(k, best, grid);
            k = best;
        }
    }

    /// Inserts `p`, replacing any entry already keyed at the same cell.
    fn insert(&mut self, p: SurfacePoint, grid: &GridSpec) {
        let cell = grid.idx(p.i, p.j);
        let at = self.pos[cell];
        if at != NO_POS {
            self.entries[at] = p;
            self.sift_up(at, grid);
            self.sift_down(self.pos[cell], grid);
        } else {
            self.entries.push(p);
            let k = self.entries.len() - 1;
            self.pos[cell] = k;
            self.sift_up(k, grid);
        }
    }

    fn pop_min(&mut self, grid: &GridSpec) -> Option<SurfacePoint> {
        if self.entries.is_empty() {
            return None;
        }
        let last = self.entries.len() - 1;
        self.swap(0, last, grid);
        let p = self.entries.pop().expect("nonempty");
        self.pos[grid.idx(p.i, p.j)] = NO_POS;
        if !self.entries.is_empty() {
            self.sift_down(0, grid);
        }
        Some(p)
    }

    fn get(&self, cell: usize) -> Option<&SurfacePoint> {
        let at = self.pos[cell];
        (at != NO_POS).then(|| &self.entries[at])
    }
}

/// The four marching lists plus the `Grid`, `Norm` and `Orient` lookups.
#[derive(Debug)]
pub struct MarchState {
    pub spec: GridSpec,
    pub accepted: Vec<SurfacePoint>,
    band: BandHeap,
    pub pile: Vec<(usize, usize)>,
    status: Vec<CellStatus>,
    /// Latest arrival time per cell, `+inf` if never traversed.
    grid_fn: Vec<f64>,
    /// Index into `accepted` of the latest traversal per cell.
    latest: Vec<usize>,
    /// All accepted indices per cell, in acceptance order.
    accepted_at: Vec<Vec<u32>>,
    /// Which side of the initial curve each cell starts on (+1 outside,
    /// -1 inside, 0 on the curve); fixes the orientation of any first
    /// traversal.
    initial_side: Vec<i8>,
}

impl MarchState {
    pub fn new(spec: GridSpec) -> Self {
        let cells = spec.n * spec.n;
        MarchState {
            spec,
            accepted: Vec::new(),
            band: BandHeap::new(cells),
            pile: Vec::new(),
            status: vec![CellStatus::Far; cells],
            grid_fn: vec![f64::INFINITY; cells],
            latest: vec![usize::MAX; cells],
            accepted_at: vec![Vec::new(); cells],
            initial_side: vec![0; cells],
        }
    }

    pub fn set_initial_side(&mut self, i: usize, j: usize, side: i8) {
        let cell = self.spec.idx(i, j);
        self.initial_side[cell] = side;
    }

    /// Orientation any first traversal of `(i, j)` must carry: a cell outside
    /// the initial curve is first crossed by an expanding sheet, a cell
    /// inside by a receding one. Returns `None` once the cell has been
    /// traversed (re-traversals alternate freely) or for on-curve cells.
    pub fn required_first_orient(&self, i: usize, j: usize) -> Option<i8> {
        if self.times_traversed(i, j) > 0 {
            return None;
        }
        match self.initial_side[self.spec.idx(i, j)] {
            1 => Some(1),
            -1 => Some(-1),
            _ => None,
        }
    }

    /// `Grid(x_i, y_j)`: the latest arrival time recorded at `(i, j)`.
    #[inline]
    pub fn grid_value(&self, i: usize, j: usize) -> f64 {
        self.grid_fn[self.spec.idx(i, j)]
    }

    /// Overwrites the `Grid` record for `(i, j)`. Prior values survive only in
    /// the accepted list.
    pub fn grid_set(&mut self, i: usize, j: usize, psi: f64) {
        debug_assert!(psi.is_finite());
        self.grid_fn[self.spec.idx(i, j)] = psi;
    }

    /// The latest accepted triplet at `(i, j)`, if the cell was traversed.
    pub fn latest_accepted(&self, i: usize, j: usize) -> Option<&SurfacePoint> {
        let at = self.latest[self.spec.idx(i, j)];
        (at != usize::MAX).then(|| &self.accepted[at])
    }

    /// All accepted triplets at `(i, j)`, in acceptance order.
    pub fn accepted_here(&self, i: usize, j: usize) -> impl Iterator<Item = &SurfacePoint> {
        self.accepted_at[self.spec.idx(i, j)]
            .iter()
            .map(|&k| &self.accepted[k as usize])
    }

    pub fn times_traversed(&self, i: usize, j: usize) -> u8 {
        match self.status[self.spec.idx(i, j)] {
            CellStatus::Traversed { count, .. } => count,
            _ => 0,
        }
    }

    pub fn is_far(&self, i: usize, j: usize) -> bool {
        self.status[self.spec.idx(i, j)] == CellStatus::Far
    }

    pub fn is_banded(&self, i: usize, j: usize) -> bool {
        match self.status[self.spec.idx(i, j)] {
            CellStatus::Banded => true,
            CellStatus::Traversed { banded, .. } => banded,
            CellStatus::Far => false,
        }
    }

    pub fn band_len(&self) -> usize {
        self.band.len()
    }

    pub fn band_is_empty(&self) -> bool {
        self.band.is_empty()
    }

    pub fn band_entry(&self, i: usize, j: usize) -> Option<&SurfacePoint> {
        self.band.get(self.spec.idx(i, j))
    }

    /// Inserts a tentative point, replacing any band entry at the same cell.
    pub fn band_insert(&mut self, p: SurfacePoint) {
        let cell = self.spec.idx(p.i, p.j);
        self.status[cell] = match self.status[cell] {
            CellStatus::Traversed { count, .. } => CellStatus::Traversed { count, banded: true },
            _ => CellStatus::Banded,
        };
        self.band.insert(p, &self.spec);
    }

    /// Inserts a tentative point unless the cell already holds a strictly
    /// smaller value (information flows from smaller times; recomputes must
    /// never clobber a better entry, in particular an exactly seeded one).
    /// Returns whether the point went in.
    pub fn band_insert_min(&mut self, p: SurfacePoint) -> bool {
        if let Some(old) = self.band.get(self.spec.idx(p.i, p.j)) {
            if old.psi < p.psi {
                return false;
            }
        }
        self.band_insert(p);
        true
    }

    /// Removes and returns the band entry minimizing `π_t`, ties broken by
    /// lexicographic `(i, j)`. The caller is responsible for the acceptance
    /// bookkeeping (`accept`).
    pub fn nb_extract_min(&mut self) -> Result<SurfacePoint> {
        self.band.pop_min(&self.spec).ok_or(Error::EmptyBand)
    }

    /// Records an extracted point as accepted: updates `Grid`, the traversal
    /// count and the latest-triplet lookup.
    pub fn accept(&mut self, p: SurfacePoint) -> &SurfacePoint {
        let cell = self.spec.idx(p.i, p.j);
        self.grid_fn[cell] = p.psi;
        self.latest[cell] = self.accepted.len();
        self.accepted_at[cell].push(self.accepted.len() as u32);
        self.status[cell] = match self.status[cell] {
            CellStatus::Traversed { count, .. } => {
                CellStatus::Traversed { count: count.saturating_add(1), banded: false }
            }
            _ => CellStatus::Traversed { count: 1, banded: false },
        };
        self.accepted.push(p);
        self.accepted.last().expect("just pushed")
    }
}
