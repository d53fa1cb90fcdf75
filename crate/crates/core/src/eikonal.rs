//! Local arrival-time updates.
//!
//! Two update rules live here. `fmm_update` is the standard fast-marching
//! stencil for speeds that do not depend on time. `tfmm_update` handles
//! time-dependent speeds: each quadrant contributes the minimum over the
//! segment joining its two axis neighbours of the neighbour value plus the
//! travel time, with the slowness interpolated linearly along the segment.
//! The inner minimization reduces to the roots of a quartic, solved with
//! safeguarded Newton iterations from a fan of seeds.

use crate::sideways::SpeedField;
use crate::{Error, Result};

/// Neighbours below the cutoff are treated as inadmissible for eikonal
/// updates; the sideways machinery owns the sign-change region.
pub const SPEED_CUTOFF: f64 = 1e-12;

/// Standard fast-marching update from the axis minima `u` and `v`.
///
/// Returns `+inf` when both inputs are `+inf`; errors when the speed at the
/// centre vanishes (the caller must have routed such points to the sideways
/// path).
pub fn fmm_update(u: f64, v: f64, h: f64, f_ij: f64) -> Result<f64> {
    if f_ij == 0.0 {
        return Err(Error::ZeroSpeed);
    }
    if u.is_infinite() && v.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let tau = h / f_ij.abs();
    let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
    if hi - lo < tau {
        Ok(0.5 * ((u + v) + (2.0 * tau * tau - (u - v) * (u - v)).sqrt()))
    } else {
        Ok(lo + tau)
    }
}

/// Arrival values and slownesses at the two axis neighbours of one quadrant.
#[derive(Debug, Clone, Copy)]
pub struct QuadrantData {
    pub psi_v: f64,
    pub psi_u: f64,
    pub tau_v: f64,
    pub tau_u: f64,
}

/// Outcome of the quadrant minimization: the value and the minimizing
/// segment parameter (`xi = 0` uses only the `u` neighbour, `xi = 1` only
/// `v`).
#[derive(Debug, Clone, Copy)]
pub struct QuadrantMin {
    pub value: f64,
    pub xi: f64,
}

/// Objective of the quadrant minimization.
#[inline]
pub fn quadrant_objective(q: &QuadrantData, xi: f64) -> f64 {
    let quad = xi * xi + (1.0 - xi) * (1.0 - xi);
    xi * q.psi_v + (1.0 - xi) * q.psi_u + quad.sqrt() * (xi * q.tau_v + (1.0 - xi) * q.tau_u)
}

/// Minimum over `xi in [0, 1]` of the quadrant objective.
///
/// Interior critical points are located as roots of the quartic obtained by
/// squaring `f'(xi) = 0`; roots outside `(0, 1)` are dropped, and interior
/// candidates below either contributing neighbour value are discarded
/// (information must flow from smaller values). The one-dimensional endpoint
/// values `psi + tau` always compete.
pub fn quadrant_minimize(q: &QuadrantData) -> Result<QuadrantMin> {
    let v_ok = q.psi_v.is_finite();
    let u_ok = q.psi_u.is_finite();
    match (v_ok, u_ok) {
        (false, false) => Err(Error::BothInfinite),
        (true, false) => Ok(QuadrantMin { value: q.psi_v + q.tau_v, xi: 1.0 }),
        (false, true) => Ok(QuadrantMin { value: q.psi_u + q.tau_u, xi: 0.0 }),
        (true, true) => {
            let mut best = QuadrantMin { value: q.psi_u + q.tau_u, xi: 0.0 };
            let one_d_v = q.psi_v + q.tau_v;
            if one_d_v < best.value {
                best = QuadrantMin { value: one_d_v, xi: 1.0 };
            }
            let floor = q.psi_v.max(q.psi_u);
            for root in quartic_roots(q) {
                if root <= 0.0 || root >= 1.0 {
                    continue;
                }
                let val = quadrant_objective(q, root);
                if val < floor {
                    continue; // discarded: below a contributing neighbour
                }
                if val < best.value {
                    best = QuadrantMin { value: val, xi: root };
                }
            }
            Ok(best)
        }
    }
}

/// Brute-force oracle for [`quadrant_minimize`], independent of the Newton
/// path: scans a uniform grid for local minima of the objective, applies the
/// same causality discard (interior candidates below a contributing
/// neighbour's value are invalid), and competes them with the endpoint
/// values.
pub fn scan_oracle(q: &QuadrantData, samples: usize) -> f64 {
    let floor = q.psi_v.max(q.psi_u);
    let f = |k: usize| quadrant_objective(q, k as f64 / samples as f64);
    let mut best = quadrant_objective(q, 0.0).min(quadrant_objective(q, 1.0));
    let mut prev = f(0);
    let mut cur = f(1);
    for k in 1..samples {
        let next = f(k + 1);
        if cur <= prev && cur <= next && cur >= floor && cur < best {
            best = cur;
        }
        prev = cur;
        cur = next;
    }
    best
}

/// Coefficients `c0..c4` of the quartic `u(xi)^2 - A^2 q(xi) = 0` equivalent
/// to `f'(xi) = 0` after squaring, where `A = psi_v - psi_u`,
/// `B = tau_v - tau_u` and `u(xi) = 4B xi^2 + (2 tau_u - 3B) xi + (B - tau_u)`.
fn quartic_coeffs(q: &QuadrantData) -> [f64; 5] {
    let a = q.psi_v - q.psi_u;
    let b = q.tau_v - q.tau_u;
    let p2 = 4.0 * b;
    let p1 = 2.0 * q.tau_u - 3.0 * b;
    let p0 = b - q.tau_u;
    [
        p0 * p0 - a * a,
        2.0 * p1 * p0 + 2.0 * a * a,
        p1 * p1 + 2.0 * p2 * p0 - 2.0 * a * a,
        2.0 * p2 * p1,
        p2 * p2,
    ]
}

/// Real roots of the quartic in `(0, 1)`, by safeguarded Newton from eight
/// uniform seeds plus the sign-change brackets of a coarse presampling.
fn quartic_roots(q: &QuadrantData) -> Vec<f64> {
    let c = quartic_coeffs(q);
    let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let eval = |x: f64| {
        let g = ((c[4] * x + c[3]) * x + c[2]) * x * x + c[1] * x + c[0];
        let dg = ((4.0 * c[4] * x + 3.0 * c[3]) * x + 2.0 * c[2]) * x + c[1];
        (g, dg)
    };

    let mut seeds: Vec<f64> = (1..=8).map(|k| k as f64 / 9.0).collect();
    // bracket seeds from a presampling; Newton polishes them
    const SCAN: usize = 32;
    let mut prev = eval(0.0).0;
    for k in 1..=SCAN {
        let x = k as f64 / SCAN as f64;
        let g = eval(x).0;
        if prev.signum() != g.signum() {
            seeds.push(x - 0.5 / SCAN as f64);
        }
        prev = g;
    }

    let mut roots: Vec<f64> = Vec::new();
    for seed in seeds {
        let mut x = seed;
        let mut converged = false;
        for _ in 0..80 {
            let (g, dg) = eval(x);
            if g.abs() <= 1e-14 * scale {
                converged = true;
                break;
            }
            if dg == 0.0 {
                break;
            }
            let step = g / dg;
            x -= step;
            if !(-0.5..=1.5).contains(&x) {
                break;
            }
            if step.abs() < 1e-15 {
                converged = true;
                break;
            }
        }
        if converged && x > 0.
            && x < 1.0
            && !roots.iter().any(|r| (r - x).abs() < 1e-9)
        {
            roots.push(x);
        }
    }
    roots
}

/// Which axis neighbour feeds a quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisDir {
    XMinus,
    XPlus,
    YMinus,
    YPlus,
}

impl AxisDir {
    pub fn offset(&self) -> (isize, isize) {
        match self {
            AxisDir::XMinus => (-1, 0),
            AxisDir::XPlus => (1, 0),
            AxisDir::YMinus => (0, -1),
            AxisDir::YPlus => (0, 1),
        }
    }
}

/// Admissible neighbour arrival values around a point, `+inf` when absent.
#[derive(Debug, Clone, Copy)]
pub struct EikNeighbors {
    pub u_minus: f64,
    pub u_plus: f64,
    pub v_minus: f64,
    pub v_plus: f64,
}

impl EikNeighbors {
    pub fn none() -> Self {
        EikNeighbors {
            u_minus: f64::INFINITY,
            u_plus: f64::INFINITY,
            v_minus: f64::INFINITY,
            v_plus: f64::INFINITY,
        }
    }

    pub fn get(&self, dir: AxisDir) -> f64 {
        match dir {
            AxisDir::XMinus => self.u_minus,
            AxisDir::XPlus => self.u_plus,
            AxisDir::YMinus => self.v_minus,
            AxisDir::YPlus => self.v_plus,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.u_minus.is_finite()
            || self.u_plus.is_finite()
            || self.v_minus.is_finite()
            || self.v_plus.is_finite())
    }
}

/// Quadrants and their contributing directions, in evaluation order.
pub const QUADRANTS: [(AxisDir, AxisDir); 4] = [
    (AxisDir::XPlus, AxisDir::YPlus),   // I
    (AxisDir::XMinus, AxisDir::YPlus),  // II
    (AxisDir::XMinus, AxisDir::YMinus), // III
    (AxisDir::XPlus, AxisDir::YMinus),  // IV
];

/// Result of a time-dependent update.
#[derive(Debug, Clone, Copy)]
pub struct TfmmResult {
    pub psi: f64,
    /// Winning quadrant, 1-based; 0 when no quadrant was admissible.
    pub quadrant: u8,
    pub normal3: [f64; 3],
    /// Directions actually used by the winning candidate.
    pub used: [Option<(AxisDir, f64)>; 2],
}

/// Time-dependent fast-marching update at `(x, y)`.
///
/// Evaluates the quadrant minimization in all four quadrants with the
/// slowness taken at each neighbour (`tau = h / |F(x_nb, y_nb, psi_nb)|`),
/// and returns the minimising value together with the one-sided-difference
/// normal. Neighbours where `|F|` falls below [`SPEED_CUTOFF`] are treated
/// as inadmissible. Returns `psi = +inf` when no quadrant has data.
pub fn tfmm_update(
    x: f64,
    y: f64,
    h: f64,
    nb: &EikNeighbors,
    speed: &dyn SpeedField,
    orient: i8,
) -> TfmmResult {
    // slowness from one neighbour, frozen at the neighbour itself
    let tau_of = |dir: AxisDir| -> f64 {
        let psi = nb.get(dir);
        if !psi.is_finite() {
            return f64::INFINITY;
        }
        let (di, dj) = dir.offset();
        let f = speed.eval(x + di as f64 * h, y + dj as f64 * h, psi);
        if f.abs() < SPEED_CUTOFF {
            f64::INFINITY
        } else {
            h / f.abs()
        }
    };

    let mut best_psi = f64::INFINITY;
    let mut best_quadrant = 0u8;
    let mut best_used: [Option<(AxisDir, f64)>; 2] = [None, None];

    for (k, &(u_dir, v_dir)) in QUADRANTS.iter().enumerate() {
        let (tau_u, tau_v) = (tau_of(u_dir), tau_of(v_dir));
        let psi_u = if tau_u.is_finite() { nb.get(u_dir) } else { f64::INFINITY };
        let psi_v = if tau_v.is_finite() { nb.get(v_dir) } else { f64::INFINITY };
        let q = QuadrantData { psi_v, psi_u, tau_v, tau_u };
        let Ok(m) = quadrant_minimize(&q) else { continue };
        if m.value < best_psi {
            best_psi = m.value;
            best_quadrant = (k + 1) as u8;
            best_used = [
                (m.xi < 1.0).then_some((u_dir, psi_u)),
                (m.xi > 0.0).then_some((v_dir, psi_v)),
            ];
        }
    }

    let normal3 = if best_psi.is_finite() {
        crate::weaving::normal_from_fmm(
            best_psi,
            &best_used.iter().flatten().copied().collect::<Vec<_>>(),
            h,
            orient,
        )
    } else {
        [0.0, 0.0, -(orient as f64)]
    };
    TfmmResult { psi: best_psi, quadrant: best_quadrant, normal3, used: best_used }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sideways::FnSpeed;
    use approx::assert_relative_eq;

    #[test]
    fn fmm_symmetric_two_sided() {
        let psi = fmm_update(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(psi, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn fmm_one_sided_branches() {
        assert_relative_eq!(fmm_update(0.0, f64::INFINITY, 0.1, 2.0).unwrap(), 0.05);
        // |u - v| >= h/F forces the one-sided branch
        assert_relative_eq!(fmm_update(0.2, 0.6, 0.1, 1.0).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn fmm_edge_cases() {
        assert!(fmm_update(f64::INFINITY, f64::INFINITY, 0.1, 1.0)
            .unwrap()
            .is_infinite());
        assert!(matches!(fmm_update(0.0, 0.0, 0.1, 0.0), Err(Error::ZeroSpeed)));
    }

    #[test]
    fn quadrant_symmetric_case() {
        let q = QuadrantData { psi_v: 0.0, psi_u: 0.0, tau_v: 0.1, tau_u: 0.1 };
        let m = quadrant_minimize(&q).unwrap();
        assert_relative_eq!(m.value, 0.1 / 2.0_f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(m.xi, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn quadrant_one_dimensional_fallback() {
        let q = QuadrantData {
            psi_v: 0.3,
            psi_u: f64::INFINITY,
            tau_v: 0.05,
            tau_u: f64::INFINITY,
        };
        let m = quadrant_minimize(&q).unwrap();
        assert_relative_eq!(m.value, 0.35, epsilon = 1e-15);
        assert_eq!(m.xi, 1.0);
    }

    #[test]
    fn quadrant_both_infinite_is_an_error() {
        let q = QuadrantData {
            psi_v: f64::INFINITY,
            psi_u: f64::INFINITY,
            tau_v: f64::INFINITY,
            tau_u: f64::INFINITY,
        };
        assert!(matches!(quadrant_minimize(&q), Err(Error::BothInfinite)));
    }

    /// Brute-force scan oracle, kept independent of the Newton path.
    fn scan_min(q: &QuadrantData, samples: usize) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..=samples {
            let xi = k as f64 / samples as f64;
            best = best.min(quadrant_objective(q, xi));
        }
        best
    }

    #[test]
    fn quadrant_matches_scan_oracle() {
        let q = QuadrantData { psi_v: 0.0, psi_u: 0.05, tau_v: 0.1, tau_u: 0.12 };
        let m = quadrant_minimize(&q).unwrap();
        let oracle = scan_min(&q, 1_000_000);
        assert!(
            (m.value - oracle).abs() <= 1e-6,
            "newton {} vs scan {}",
            m.value,
            oracle
        );
    }

    #[test]
    fn quadrant_never_below_contributing_neighbors() {
        // interior minimum selected: result must be >= max of the neighbours
        let q = QuadrantData { psi_v: 0.1, psi_u: 0.1, tau_v: 0.2, tau_u: 0.25 };
        let m = quadrant_minimize(&q).unwrap();
        assert!(m.value >= q.psi_v.max(q.psi_u));
        assert!(m.value >= q.psi_v.min(q.psi_u));
    }

    fn unit_speed() -> FnSpeed<impl Fn(f64, f64, f64) -> f64 + Sync> {
        FnSpeed { f: |_, _, _| 1.0, k: 0.0, time_dep: false }
    }

    #[test]
    fn tfmm_reduces_to_fmm_for_constant_speed() {
        let h = 0.1;
        let cases = [
            (0.0, 0.0, 0.0, 0.0),
            (0.12, 0.17, f64::INFINITY, f64::INFINITY),
            (0.3, f64::INFINITY, 0.31, f64::INFINITY),
            (0.2, 0.24, 0.21, 0.27),
        ];
        for (um, up, vm, vp) in cases {
            let nb = EikNeighbors { u_minus: um, u_plus: up, v_minus: vm, v_plus: vp };
            let t = tfmm_update(0.0, 0.0, h, &nb, &unit_speed(), 1);
            let classical = fmm_update(um.min(up), vm.min(vp), h, 1.0).unwrap();
            assert_relative_eq!(t.psi, classical, epsilon = 1e-12);
        }
    }

    #[test]
    fn tfmm_no_neighbors_returns_infinity() {
        let t = tfmm_update(0.0, 0.0, 0.1, &EikNeighbors::none(), &unit_speed(), 1);
        assert!(t.psi.is_infinite());
        assert_eq!(t.quadrant, 0);
    }

    #[test]
    fn tfmm_invariant_under_axis_reflection() {
        let speed = FnSpeed { f: |_, _, t: f64| 1.0 - (10.0 * t - 1.0).exp(), k: 80.0, time_dep: true };
        let nb = EikNeighbors {
            u_minus: 0.03,
            u_plus: f64::INFINITY,
            v_minus: 0.05,
            v_plus: f64::INFINITY,
        };
        let reflected_x = EikNeighbors {
            u_minus: f64::INFINITY,
            u_plus: 0.03,
            v_minus: 0.05,
            v_plus: f64::INFINITY,
        };
        let reflected_y = EikNeighbors {
            u_minus: 0.03,
            u_plus: f64::INFINITY,
            v_minus: f64::INFINITY,
            v_plus: 0.05,
        };
        let a = tfmm_update(0.0, 0.0, 0.01, &nb, &speed, 1).psi;
        let b = tfmm_update(0.0, 0.0, 0.01, &reflected_x, &speed, 1).psi;
        let c = tfmm_update(0.0, 0.0, 0.01, &reflected_y, &speed, 1).psi;
        assert_relative_eq!(a, b, epsilon = 1e-13);
        assert_relative_eq!(a, c, epsilon = 1e-13);
    }

    #[test]
    fn tfmm_degenerate_speed_neighbor_is_inadmissible() {
        // F vanishes exactly at the u-neighbour's arrival time
        let speed = FnSpeed { f: |_, _, t: f64| 0.1 - t, k: 1.0, time_dep: true };
        let nb = EikNeighbors {
            u_minus: 0.1,
            u_plus: f64::INFINITY,
            v_minus: f64::INFINITY,
            v_plus: f64::INFINITY,
        };
        let t = tfmm_update(0.0, 0.0, 0.01, &nb, &speed, 1);
        assert!(t.psi.is_infinite());
    }

    #[test]
    fn tfmm_example1_local_truncation_first_order() {
        // Speed of the first bundled example; neighbours seeded from the
        // exact expanding-circle solution, error checked at two resolutions.
        let speed = FnSpeed {
            f: |_, _, t: f64| 1.0 - (10.0 * t - 1.0).exp(),
            k: 10.0 * (2.0_f64).exp(),
            time_dep: true,
        };
        let radius = |t: f64| 0.25 - ((10.0 * t).exp() - 1.0) / (10.0 * 1.0_f64.exp()) + t;
        // invert the (increasing) radius on the expansion phase by bisection
        let crossing = |r: f64| {
            let (mut lo, mut hi) = (0.0, 0.1);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if radius(mid) < r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let mut errs = Vec::new();
        for &h in &[0.01, 0.005] {
            // diagonal point so both quadrant-III neighbours arrive earlier
            let (x, y): (f64, f64) = (0.19, 0.19);
            let exact = crossing(x.hypot(y));
            let nb = EikNeighbors {
                u_minus: crossing((x - h).hypot(y)),
                u_plus: f64::INFINITY,
                v_minus: crossing(x.hypot(y - h)),
                v_plus: f64::INFINITY,
            };
            let t = tfmm_update(x, y, h, &nb, &speed, 1);
            errs.push((t.psi - exact).abs());
        }
        // local truncation error stays below C*h and shrinks with h
        assert!(errs[0] <= 0.5 * 0.01, "error too large: {}", errs[0]);
        assert!(errs[1] <= 0.5 * 0.005, "error too large: {}", errs[1]);
        assert!(errs[1] < 0.75 * errs[0], "errors {:?}", errs);
    }
}
