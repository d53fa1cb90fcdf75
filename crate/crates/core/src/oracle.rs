//! Error-measurement reference: a fine-grid level-set solver, zero-contour
//! sampling, and the per-point / aggregate error metrics.
//!
//! Two ways to measure a computed surface sample. Method 1 evaluates a known
//! signed-distance solution at the sample, giving its distance to the exact
//! curve directly. Method 2 measures the 3D distance to a dense cloud
//! sampled from the zero contours of a level-set run on a grid fine enough
//! to stand in for the exact solution.

use crate::grid::{GridSpec, SurfacePoint};
use crate::registry::ExampleSpec;
use crate::sideways::SpeedField;
use crate::{Error, Result};

/// Explicit level-set integrator for `phi_t + F |grad phi| = 0` with
/// second-order one-sided differences selected Godunov-style by the sign of
/// `F`, advanced with two-stage Runge-Kutta.
pub struct LsmSolver<'a> {
    pub spec: GridSpec,
    pub phi: Vec<f64>,
    pub t: f64,
    speed: &'a dyn SpeedField,
}

impl<'a> LsmSolver<'a> {
    pub fn new(
        speed: &'a dyn SpeedField,
        spec: GridSpec,
        phi0: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut phi = vec![0.0; spec.n * spec.n];
        for i in 0..spec.n {
            for j in 0..spec.n {
                phi[spec.idx(i, j)] = phi0(spec.x(i), spec.y(j));
            }
        }
        LsmSolver { spec, phi, t: 0.0, speed }
    }

    /// Largest `|F|` on the grid at time `t`, for the CFL check.
    pub fn max_speed(&self, t: f64) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.spec.n {
            for j in 0..self.spec.n {
                m = m.max(self.speed.eval(self.spec.x(i), self.spec.y(j), t).abs());
            }
        }
        m
    }

    fn rhs(&self, phi: &[f64], t: f64, out: &mut [f64]) {
        let n = self.spec.n;
        let h = self.spec.h;
        for i in 0..n {
            for j in 0..n {
                let at = |a: isize, b: isize| phi[self.spec.idx(a as usize, b as usize)];
                let (fi, fj) = (i as isize, j as isize);
                let c = at(fi, fj);
                // second-order one-sided differences, degrading to first
                // order on the outermost rings
                let dmx = if i >= 2 {
                    (3.0 * c - 4.0 * at(fi - 1, fj) + at(fi - 2, fj)) / (2.0 * h)
                } else if i >= 1 {
                    (c - at(fi - 1, fj)) / h
                } else {
                    0.0
                };
                let dpx = if i + 2 < n {
                    (-3.0 * c + 4.0 * at(fi + 1, fj) - at(fi + 2, fj)) / (2.0 * h)
                } else if i + 1 < n {
                    (at(fi + 1, fj) - c) / h
                } else {
                    0.0
                };
                let dmy = if j >= 2 {
                    (3.0 * c - 4.0 * at(fi, fj - 1) + at(fi, fj - 2)) / (2.0 * h)
                } else if j >= 1 {
                    (c - at(fi, fj - 1)) / h
                } else {
                    0.0
                };
                let dpy = if j + 2 < n {
                    (-3.0 * c + 4.0 * at(fi, fj + 1) - at(fi, fj + 2)) / (2.0 * h)
                } else if j + 1 < n {
                    (at(fi, fj + 1) - c) / h
                } else {
                    0.0
                };
                let f = self.speed.eval(self.spec.x(i), self.spec.y(j), t);
                let grad2 = if f >= 0.0 {
                    dmx.max(0.0).powi(2)
                        + dpx.min(0.0).powi(2)
                        + dmy.max(0.0).powi(2)
                        + dpy.min(0.0).powi(2)
                } else {
                    dpx.max(0.0).powi(2)
                        + dmx.min(0.0).powi(2)
                        + dpy.max(0.0).powi(2)
                        + dmy.min(0.0).powi(2)
                };
                out[self.spec.idx(i, j)] = -f * grad2.sqrt();
            }
        }
    }

    /// One two-stage Runge-Kutta step of size `dt`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let bound = 0.5 * self.spec.h / self.max_speed(self.t).max(1e-300);
        if dt > bound {
            return Err(Error::CflViolation { dt, bound });
        }
        let cells = self.phi.len();
        let mut k1 = vec![0.0; cells];
        self.rhs(&self.phi, self.t, &mut k1);
        let stage: Vec<f64> = (0..cells).map(|c| self.phi[c] + dt * k1[c]).collect();
        let mut k2 = vec![0.0; cells];
        self.rhs(&stage, self.t + dt, &mut k2);
        for c in 0..cells {
            self.phi[c] += 0.5 * dt * (k1[c] + k2[c]);
        }
        self.t += dt;
        Ok(())
    }
}

/// Integrates the level-set equation to `t_end`, invoking `on_step` with the
/// field after every step (including the initial state at `t = 0`).
pub fn lsm_solve(
    speed: &dyn SpeedField,
    phi0: impl Fn(f64, f64) -> f64,
    spec: GridSpec,
    t_end: f64,
    dt: f64,
    mut on_step: impl FnMut(&[f64], f64),
) -> Result<Vec<f64>> {
    let mut solver = LsmSolver::new(speed, spec, phi0);
    on_step(&solver.phi, solver.t);
    while solver.t < t_end - 1e-12 {
        let step = dt.min(t_end - solver.t);
        solver.step(step)?;
        on_step(&solver.phi, solver.t);
    }
    Ok(solver.phi)
}

/// Zero-contour samples of a level field by cell-edge linear interpolation;
/// duplicates within `spacing / 2` are merged.
pub fn contour_points(phi: &[f64], spec: &GridSpec, t: f64, spacing: f64) -> Vec<[f64; 3]> {
    let n = spec.n;
    let mut out: Vec<[f64; 3]> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let merge = spacing / 2.0;
    let mut push = |x: f64, y: f64| {
        let key = ((x / merge).round() as i64, (y / merge).round() as i64);
        if seen.insert(key) {
            out.push([x, y, t]);
        }
    };
    for i in 0..n {
        for j in 0..n {
            let a = phi[spec.idx(i, j)];
            if a == 0.0 {
                push(spec.x(i), spec.y(j));
                continue;
            }
            if i + 1 < n {
                let b = phi[spec.idx(i + 1, j)];
                if b != 0.0 && a.signum() != b.signum() {
                    let s = a / (a - b);
                    push(spec.x(i) + s * spec.h, spec.y(j));
                }
            }
            if j + 1 < n {
                let b = phi[spec.idx(i, j + 1)];
                if b != 0.0 && a.signum() != b.signum() {
                    let s = a / (a - b);
                    push(spec.x(i), spec.y(j) + s * spec.h);
                }
            }
        }
    }
    out
}

/// Method 1: distance to the exact curve through the closed-form
/// signed-distance level-set function.
pub fn error_method1(p: &SurfacePoint, exact: &ExampleSpec) -> Result<f64> {
    if !exact.signed_distance {
        return Err(Error::NoExact { example: exact.name.to_string(), t: p.psi });
    }
    if !p.psi.is_finite() {
        return Err(Error::NoExact { example: exact.name.to_string(), t: p.psi });
    }
    Ok(exact.exact_phi(p.x, p.y, p.psi)?.abs())
}

/// A dense sampling of the exact space-time surface with a uniform-bin
/// spatial index for nearest-distance queries.
pub struct OracleCloud {
    pub points: Vec<[f64; 3]>,
    bins: Vec<Vec<u32>>,
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
}

impl OracleCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        assert!(!points.is_empty(), "oracle cloud must not be empty");
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let max_extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max).max(1e-12);
        // aim for a few points per bin
        let target = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = (max_extent / target).max(1e-12);
        let dims = [0, 1, 2].map(|k| (((hi[k] - lo[k]) / cell).floor() as usize) + 1);
        let mut bins = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (idx, p) in points.iter().enumerate() {
            let b = Self::bin_of(p, &lo, cell, &dims);
            bins[b].push(idx as u32);
        }
        OracleCloud { points, bins, origin: lo, cell, dims }
    }

    fn bin_of(p: &[f64; 3], lo: &[f64; 3], cell: f64, dims: &[usize; 3]) -> usize {
        let c = [0, 1, 2].map(|k| {
            (((p[k] - lo[k]) / cell).floor() as isize).clamp(0, dims[k] as isize - 1) as usize
        });
        (c[0] * dims[1] + c[1]) * dims[2] + c[2]
    }

    fn clamped_coords(&self, p: &[f64; 3]) -> [isize; 3] {
        [0, 1, 2].map(|k| ((p[k] - self.origin[k]) / self.cell).floor() as isize)
    }

    /// Smallest 3D Euclidean distance from `p` to the cloud, by expanding
    /// shell search over the bins; exactly equals a brute-force scan.
    pub fn nearest_distance(&self, p: [f64; 3]) -> f64 {
        let c = self.clamped_coords(&p);
        let mut best = f64::INFINITY;
        let max_ring = self.dims.iter().copied().max().unwrap() as isize
            + c.iter().map(|v| v.abs()).max().unwrap()
            + 1;
        for ring in 0..=max_ring {
            // once a candidate is known, no farther shell can beat it
            if best.is_finite() && (ring - 1) as f64 * self.cell > best {
                break;
            }
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let b = [c[0] + dx, c[1] + dy, c[2] + dz];
                        if b.iter().zip(&self.dims).any(|(&v, &d)| v < 0 || v >= d as isize) {
                            continue;
                        }
                        let bin = (b[0] as usize * self.dims[1] + b[1] as usize) * self.dims[2]
                            + b[2] as usize;
                        for &idx in &self.bins[bin] {
                            let q = &self.points[idx as usize];
                            let d = ((p[0] - q[0]).powi(2)
                                + (p[1] - q[1]).powi(2)
                                + (p[2] - q[2]).powi(2))
                            .sqrt();
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// Reference implementation: linear scan over every point.
    pub fn nearest_distance_brute(&self, p: [f64; 3]) -> f64 {
        self.points
            .iter()
            .map(|q| {
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Method 2: smallest 3D distance to the oracle cloud.
pub fn error_method2(p: &SurfacePoint, cloud: &OracleCloud) -> f64 {
    cloud.nearest_distance([p.x, p.y, p.psi])
}

/// Which part of the accepted cloud a point belongs to for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Eikonal-computed, before the speed's sign-change time.
    Bottom,
    /// Eikonal-computed, after it.
    Top,
    /// Assigned by a sideways representation.
    Sideways,
    Global,
}

impl Region {
    pub fn parse(s: &str) -> Option<Region> {
        match s {
            "bottom" => Some(Region::Bottom),
            "top" => Some(Region::Top),
            "sideways" => Some(Region::Sideways),
            "global" => Some(Region::Global),
            _ => None,
        }
    }

    /// Measurement dimension: sideways points form one-dimensional sets.
    pub fn dim(&self) -> u32 {
        if *self == Region::Sideways {
            1
        } else {
            2
        }
    }
}

/// Region of one accepted point given the example's sign-change time.
pub fn region_of(p: &SurfacePoint, t_star: Option<f64>) -> Region {
    if p.source.is_sideways() {
        Region::Sideways
    } else {
        match t_star {
            Some(ts) if p.psi >= ts => Region::Top,
            _ => Region::Bottom,
        }
    }
}

/// `L1`, `Linf` and per-point relative errors of a region.
pub fn aggregate(errors: &[f64], dim: u32, h: f64) -> Result<(f64, f64, Vec<f64>)> {
    if errors.is_empty() {
        return Err(Error::EmptyRegion(format!("dim-{dim} aggregate")));
    }
    let l1 = h.powi(dim as i32) * errors.iter().sum::<f64>();
    let linf = errors.iter().fold(0.0f64, |m, e| m.max(*e));
    let rel = if linf > 0.0 {
        errors.iter().map(|e| e / linf).collect()
    } else {
        vec![0.0; errors.len()]
    };
    Ok((l1, linf, rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PointSource;
    use crate::registry::get_example;
    use crate::sideways::FnSpeed;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_speed() -> FnSpeed<impl Fn(f64, f64, f64) -> f64 + Sync> {
        FnSpeed { f: |_, _, _| 1.0, k: 0.0, time_dep: false }
    }

    #[test]
    fn lsm_constant_speed_circle_growth() {
        let spec = GridSpec::from_domain(-0.6, 0.6, 240, 1.0).unwrap();
        let speed = unit_speed();
        let h = spec.h;
        let dt = 0.25 * h;
        let phi =
            lsm_solve(&speed, |x, y| x.hypot(y) - 0.25, spec, 0.1, dt, |_, _| {}).unwrap();
        let pts = contour_points(&phi, &spec, 0.1, h);
        assert!(!pts.is_empty());
        for p in &pts {
            let r = p[0].hypot(p[1]);
            assert!((r - 0.35).abs() < 5.0 * h * h, "radius {} off", r);
        }
    }

    #[test]
    fn lsm_example_speed_matches_exact_radius() {
        let ex = get_example("ex1").unwrap();
        let spec = GridSpec::from_domain(-0.45, 0.45, 180, 1.0).unwrap();
        let speed = ex.speed();
        let dt = 0.25 * spec.h;
        let phi =
            lsm_solve(&speed, |x, y| x.hypot(y) - 0.25, spec, 0.1, dt, |_, _| {}).unwrap();
        let r_exact = ex.radius(0.1);
        for p in contour_points(&phi, &spec, 0.1, spec.h) {
            let r = p[0].hypot(p[1]);
            assert!((r - r_exact).abs() < 1e-3, "radius {} vs {}", r, r_exact);
        }
    }

    #[test]
    fn lsm_zero_speed_is_static() {
        let spec = GridSpec::from_domain(-0.5, 0.5, 40, 1.0).unwrap();
        let speed = FnSpeed { f: |_, _, _| 0.0, k: 0.0, time_dep: false };
        let mut solver = LsmSolver::new(&speed, spec, |x, y| (x * 17.0).sin() + y);
        let phi0 = solver.phi.clone();
        for _ in 0..10 {
            solver.step(0.01).unwrap();
        }
        assert_eq!(solver.phi, phi0);
    }

    #[test]
    fn lsm_rejects_cfl_violation() {
        let spec = GridSpec::from_domain(-0.5, 0.5, 40, 1.0).unwrap();
        let speed = unit_speed();
        let mut solver = LsmSolver::new(&speed, spec, |x, y| x.hypot(y) - 0.25);
        assert!(matches!(solver.step(spec.h), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn contour_linear_field_is_axis() {
        let spec = GridSpec::new(-1.0, -1.0, 1.0, 3, 1.0).unwrap();
        let mut phi = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                phi[spec.idx(i, j)] = spec.x(i);
            }
        }
        let pts = contour_points(&phi, &spec, 0.0, 0.5);
        assert!(!pts.is_empty());
        for p in &pts {
            assert_relative_eq!(p[0], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn contour_uniform_sign_is_empty() {
        let spec = GridSpec::new(0.0, 0.0, 0.1, 4, 1.0).unwrap();
        let phi = vec![1.0; 16];
        assert!(contour_points(&phi, &spec, 0.0, 0.1).is_empty());
    }

    fn sp(x: f64, y: f64, psi: f64) -> SurfacePoint {
        SurfacePoint::new(0, 0, x, y, psi, [1.0, 0.0, -0.5], PointSource::Tfmm)
    }

    #[test]
    fn method1_values() {
        let ex = get_example("ex1").unwrap();
        // a point exactly on the surface
        let r = ex.radius(0.05);
        assert_relative_eq!(
            error_method1(&sp(r, 0.0, 0.05), &ex).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        // derived: |0.3 - R(0.05)|
        let e = error_method1(&sp(0.3, 0.0, 0.05), &ex).unwrap();
        assert_relative_eq!(e, (0.3 - ex.radius(0.05)).abs(), epsilon = 1e-15);
        // sentinel psi excluded
        assert!(error_method1(&sp(0.3, 0.0, f64::INFINITY), &ex).is_err());
    }

    #[test]
    fn method2_basics() {
        let cloud = OracleCloud::new(vec![[0.1, 0.0, 0.0], [0.0, 0.2, 0.0]]);
        assert_relative_eq!(error_method2(&sp(0.1, 0.0, 0.0), &cloud), 0.0);
        assert_relative_eq!(error_method2(&sp(0.0, 0.0, 0.0), &cloud), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn method2_index_equals_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points: Vec<[f64; 3]> = (0..2000)
            .map(|_| {
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..0.5)]
            })
            .collect();
        let cloud = OracleCloud::new(points);
        for _ in 0..1000 {
            let p = [
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-0.1..0.6),
            ];
            let fast = cloud.nearest_distance(p);
            let slow = cloud.nearest_distance_brute(p);
            assert_eq!(fast.to_bits(), slow.to_bits());
        }
    }

    #[test]
    fn aggregate_matches_hand_values() {
        let (l1, _, _) = aggregate(&[0.5], 2, 0.1).unwrap();
        assert_relative_eq!(l1, 0.005, epsilon = 1e-15);
        let (_, linf, rel) = aggregate(&[1.0, 2.0], 2, 0.1).unwrap();
        assert_eq!(linf, 2.0);
        assert_eq!(rel, vec![0.5, 1.0]);
        assert!(aggregate(&[], 2, 0.1).is_err());
    }

    #[test]
    fn aggregate_l1_monotone_under_added_errors() {
        let (a, _, _) = aggregate(&[0.1, 0.2], 2, 0.1).unwrap();
        let (b, _, _) = aggregate(&[0.1, 0.2, 0.3], 2, 0.1).unwrap();
        assert!(b > a);
    }

    #[test]
    fn sideways_region_uses_dim_one() {
        assert_eq!(Region::Sideways.dim(), 1);
        assert_eq!(Region::Top.dim(), 2);
        let mut p = sp(0.0, 0.0, 0.2);
        p.source = PointSource::SidewaysYt;
        assert_eq!(region_of(&p, Some(0.1)), Region::Sideways);
        p.source = PointSource::Tfmm;
        assert_eq!(region_of(&p, Some(0.1)), Region::Top);
        p.psi = 0.05;
        assert_eq!(region_of(&p, Some(0.1)), Region::Bottom);
    }
}
