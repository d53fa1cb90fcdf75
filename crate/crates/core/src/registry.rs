//! The bundled speed fields, initial curves and exact solutions.
//!
//! Each example carries its domain, final time, per-representation time-step
//! multipliers and, where available, the closed-form level-set function used
//! for error measurement. Values follow the reference parameter sets verbatim.

use crate::sideways::SpeedField;
use crate::{Error, Result};

pub const R0: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleKind {
    /// `F = 1 - 2t`: circle expands, then collapses to the origin.
    Motivation,
    /// `F = 1 - e^{10t-1}`: expansion up to `t = 0.1`, then contraction.
    Ex1,
    /// `F = x`: the circle grows while its centre drifts right.
    Ex2,
    /// Space- and time-dependent speed; the circle grows, then translates.
    Ex3,
    /// Two circles under `F = 1 - e^{2t-1}`: merge, then pinch apart.
    Ex4,
    /// Slanted almond-shaped front whose shock is not grid aligned.
    Almond,
    /// `F = 1`: plain distance growth, the classical-reduction case.
    Unit,
}

/// A named, reproducible example configuration.
#[derive(Debug, Clone)]
pub struct ExampleSpec {
    pub kind: ExampleKind,
    pub name: &'static str,
    /// Square spatial domain `[lo, hi]^2`.
    pub domain: (f64, f64),
    /// Final time of the march.
    pub t_final: f64,
    /// `(r1, r2)` time-step multipliers for the axis representations.
    pub r_axis: (f64, f64),
    /// `(r1, r2)` for the skewed representation.
    pub r_skew: (f64, f64),
    /// Time at which the speed changes sign, when that is a plane `t = t*`.
    pub t_star: Option<f64>,
    /// Assign exact normals at acceptance (all reference runs except `ex1`,
    /// where normals are computed from one-sided differences).
    pub exact_normals: bool,
    /// Whether the exact `phi` is a signed distance (`|grad phi| = 1`).
    pub signed_distance: bool,
    /// Whether the exact `phi` solves the level-set equation (the `ex2`
    /// distance function does not).
    pub solves_lse: bool,
    /// `(z_lo, z_hi, t_lo, t_hi)` of the standalone sideways convergence
    /// study, in the yt-representation.
    pub conv_domain: Option<(f64, f64, f64, f64)>,
}

/// All registered example names, in presentation order.
pub const EXAMPLE_NAMES: [&str; 7] =
    ["motivation", "ex1", "ex2", "ex3", "ex4", "almond", "unit"];

pub fn get_example(name: &str) -> Result<ExampleSpec> {
    let spec = match name {
        "motivation" => ExampleSpec {
            kind: ExampleKind::Motivation,
            name: "motivation",
            domain: (-0.611, 0.589),
            t_final: 1.3,
            r_axis: (1.0 / 3.0, 2.0),
            r_skew: (1.0, 1.0),
            t_star: Some(0.5),
            exact_normals: false,
            signed_distance: true,
            solves_lse: true,
            conv_domain: Some((-0.25, 0.25, 0.0, 1.2)),
        },
        "ex1" => ExampleSpec {
            kind: ExampleKind::Ex1,
            name: "ex1",
            domain: (-0.321, 0.319),
            t_final: 0.3,
            r_axis: (1.0 / 3.0, 2.0),
            r_skew: (1.0, 1.0),
            t_star: Some(0.1),
            exact_normals: false,
            signed_distance: true,
            solves_lse: true,
            conv_domain: Some((-0.25, 0.25, 0.0, 0.3)),
        },
        "ex2" => ExampleSpec {
            kind: ExampleKind::Ex2,
            name: "ex2",
            domain: (-1.01, 0.99),
            t_final: 1.0,
            r_axis: (1.0 / 3.0, 2.0),
            r_skew: (1.0 / 3.0, 5.0),
            t_star: None,
            exact_normals: true,
            signed_distance: true,
            solves_lse: false,
            conv_domain: Some((-0.25, 0.25, 0.0, 1.0)),
        },
        "ex3" => ExampleSpec {
            kind: ExampleKind::Ex3,
            name: "ex3",
            domain: (-1.51, 1.49),
            t_final: 0.5,
            r_axis: (1.0 / 3.0, 2.0),
            r_skew: (1.0 / 3.0, 5.0),
            t_star: None,
            exact_normals: true,
            signed_distance: true,
            solves_lse: true,
            conv_domain: Some((-0.25, 0.25, 0.0, 0.5)),
        },
        "ex4" => ExampleSpec {
            kind: ExampleKind::Ex4,
            name: "ex4",
            domain: (-1.5 + 0.01 * std::f64::consts::E, 1.5 + 0.01 * std::f64::consts::E),
            t_final: 1.2,
            r_axis: (1.0 / 3.0, 2.0),
            r_skew: (1.0 / 3.0, 5.0),
            t_star: Some(0.5),
            exact_normals: true,
            signed_distance: true,
            solves_lse: true,
            conv_domain: Some((-0.5, 0.5, 0.2, 0.5)),
        },
        "almond" => ExampleSpec {
            kind: ExampleKind::Almond,
            name: "almond",
            domain: (-0.5, 0.5),
            t_final: 1.9,
            r_axis: (1.0 / 3.0, 2.0),
            r_skew: (0.5, 6.0),
            t_star: Some(1.0 + 1.65_f64.ln()),
            exact_normals: true,
            signed_distance: false,
            solves_lse: true,
            conv_domain: None,
        },
        "unit" => ExampleSpec {
            kind: ExampleKind::Unit,
            name: "unit",
            domain: (-0.321, 0.319),
            t_final: 0.3,
            r_axis: (1.0 / 3.0, 2.0),
            r_skew: (1.0, 1.0),
            t_star: None,
            exact_normals: false,
            signed_distance: true,
            solves_lse: true,
            conv_domain: None,
        },
        other => return Err(Error::UnknownExample(other.to_string())),
    };
    Ok(spec)
}

// Example 3 ingredients.
const EX3_B: f64 = 10.0;
const EX3_C: f64 = 0.5;

fn ex3_g(t: f64) -> f64 {
    (EX3_B * (t - 0.5)).atan() + std::f64::consts::FRAC_PI_2
}

fn ex3_dg(t: f64) -> f64 {
    EX3_B / (1.0 + EX3_B * EX3_B * (t - 0.5) * (t - 0.5))
}

// Almond ingredients (`phi = phi_tilde + g`).
const ALM_C: f64 = 1.0;
const ALM_CC: f64 = 0.65;

fn almond_parts(x: f64, y: f64, t: f64) -> ([f64; 3], [f64; 3]) {
    let r = x.hypot(y).max(1e-300);
    let e = std::f64::consts::E;
    let tilde = [x / r, y / r, (ALM_C * t).exp() / e - (1.0 + ALM_CC)];
    let u = x * t - y;
    let s = if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    };
    let root = (1.0 + t * t).sqrt();
    let g = [
        s * t * t / root,
        -s * t / root,
        (u.abs() + t * s * x) / root - t * t * u.abs() / (root * root * root),
    ];
    (tilde, g)
}

fn almond_phi(x: f64, y: f64, t: f64) -> f64 {
    let e = std::f64::consts::E;
    let tilde = x.hypot(y) - R0 + ((ALM_C * t).exp() - 1.0) / (ALM_C * e) - t * (1.0 + ALM_CC);
    let g = t * (x * t - y).abs() / (1.0 + t * t).sqrt();
    tilde + g
}

/// The almond speed comes from its level-set function; the gradient norm is
/// floored because it degenerates along the rotating shock.
const ALMOND_GRAD_FLOOR: f64 = 1e-2;

impl ExampleSpec {
    /// The speed field `F(x, y, t)`.
    pub fn speed(&self) -> ExampleSpeed {
        ExampleSpeed { kind: self.kind, t_cap: self.t_final }
    }

    /// Radius of the exact circle at time `t` (circle-family examples only).
    pub fn radius(&self, t: f64) -> f64 {
        let e = std::f64::consts::E;
        match self.kind {
            ExampleKind::Motivation => R0 + t - t * t,
            ExampleKind::Ex1 => R0 - ((10.0 * t).exp() - 1.0) / (10.0 * e) + t,
            ExampleKind::Ex4 => R0 - ((2.0 * t).exp() - 1.0) / (2.0 * e) + t,
            ExampleKind::Unit => R0 + t,
            ExampleKind::Ex2 => R0 * t.cosh(),
            ExampleKind::Ex3 => R0 + EX3_C * t,
            ExampleKind::Almond => f64::NAN,
        }
    }

    /// Time at which the front collapses to a point, where applicable.
    pub fn collapse_time(&self) -> Option<f64> {
        match self.kind {
            // positive root of r0 + t - t^2 = 0
            ExampleKind::Motivation => Some((1.0 + (1.0 + 4.0 * R0).sqrt()) / 2.0),
            ExampleKind::Ex1 | ExampleKind::Ex4 => {
                let (mut lo, mut hi) = (self.t_star.unwrap(), self.t_final + 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.radius(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(0.5 * (lo + hi))
            }
            _ => None,
        }
    }

    /// Closed-form level-set value at `(x, y, t)`.
    pub fn exact_phi(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        match self.kind {
            ExampleKind::Motivation | ExampleKind::Ex1 | ExampleKind::Unit => {
                Ok(x.hypot(y) - self.radius(t))
            }
            ExampleKind::Ex2 => {
                let xc = R0 * t.sinh();
                Ok((x - xc).hypot(y) - self.radius(t))
            }
            ExampleKind::Ex3 => {
                let gt = ex3_g(t) * t;
                Ok((x - gt).hypot(y) - self.radius(t))
            }
            ExampleKind::Ex4 => {
                if t >= 0.5 {
                    return Err(Error::NoExact { example: self.name.to_string(), t });
                }
                let r = self.radius(t);
                let left = (x + 0.3).hypot(y) - r;
                let right = (x - 0.3).hypot(y) - r;
                Ok(left.min(right))
            }
            ExampleKind::Almond => Ok(almond_phi(x, y, t)),
        }
    }

    /// Space-time gradient of the exact level-set function.
    pub fn grad_phi(&self, x: f64, y: f64, t: f64) -> Result<[f64; 3]> {
        match self.kind {
            ExampleKind::Motivation | ExampleKind::Ex1 | ExampleKind::Unit => {
                let r = x.hypot(y).max(1e-300);
                let dr = match self.kind {
                    ExampleKind::Motivation => 1.0 - 2.0 * t,
                    ExampleKind::Ex1 => 1.0 - (10.0 * t - 1.0).exp(),
                    _ => 1.0,
                };
                Ok([x / r, y / r, -dr])
            }
            ExampleKind::Ex2 => {
                let xc = R0 * t.sinh();
                let d = (x - xc).hypot(y).max(1e-300);
                Ok([(x - xc) / d, y / d, -R0 * t.cosh() * (x - xc) / d - R0 * t.sinh()])
            }
            ExampleKind::Ex3 => {
                let gt = ex3_g(t) * t;
                let d = (x - gt).hypot(y).max(1e-300);
                let dgt = ex3_dg(t) * t + ex3_g(t);
                Ok([(x - gt) / d, y / d, -(x - gt) * dgt / d - EX3_C])
            }
            ExampleKind::Ex4 => {
                if t >= 0.5 {
                    return Err(Error::NoExact { example: self.name.to_string(), t });
                }
                let dr = 1.0 - (2.0 * t - 1.0).exp();
                let dl = (x + 0.3).hypot(y);
                let drt = (x - 0.3).hypot(y);
                let (cx, d) =
                    if dl <= drt { (-0.3, dl.max(1e-300)) } else { (0.3, drt.max(1e-300)) };
                Ok([(x - cx) / d, y / d, -dr])
            }
            ExampleKind::Almond => {
                let (tilde, g) = almond_parts(x, y, t);
                Ok([tilde[0] + g[0], tilde[1] + g[1], tilde[2] + g[2]])
            }
        }
    }

    /// Exact outward space-time normal at `(x, y, t)`.
    pub fn exact_normal(&self, x: f64, y: f64, t: f64) -> Result<[f64; 3]> {
        Ok(crate::grid::normalize3(self.grad_phi(x, y, t)?))
    }

    /// First time in `(0, T]` at which the front traverses `(x, y)`:
    /// the first sign change of `t -> phi(x, y, t)`, refined by bisection.
    /// Points on the initial curve report `t = 0`.
    pub fn first_crossing(&self, x: f64, y: f64, t_max: f64) -> Option<f64> {
        let phi0 = self.exact_phi(x, y, 0.0).ok()?;
        if phi0 == 0.0 {
            return Some(0.0);
        }
        const STEPS: usize = 4096;
        let dt = t_max / STEPS as f64;
        let mut prev = phi0;
        for k in 1..=STEPS {
            let t = k as f64 * dt;
            let Ok(cur) = self.exact_phi(x, y, t) else {
                return None; // exact form expired before any crossing
            };
            if cur == 0.0 {
                return Some(t);
            }
            if prev.signum() != cur.signum() {
                let (mut lo, mut hi) = (t - dt, t);
                let lo_sign = prev.signum();
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let v = self.exact_phi(x, y, mid).ok()?;
                    if v == 0.0 || v.signum() == lo_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            prev = cur;
        }
        None
    }
}

/// [`SpeedField`] implementation for a registered example.
#[derive(Debug, Clone, Copy)]
pub struct ExampleSpeed {
    kind: ExampleKind,
    t_cap: f64,
}

impl ExampleSpeed {
    fn f(&self, x: f64, y: f64, t: f64) -> f64 {
        match self.kind {
            ExampleKind::Motivation => 1.0 - 2.0 * t,
            ExampleKind::Ex1 => 1.0 - (10.0 * t - 1.0).exp(),
            ExampleKind::Ex2 => x,
            ExampleKind::Ex3 => {
                let gt = ex3_g(t) * t;
                let d2 = (x - gt) * (x - gt) + y * y;
                if d2 < 1e-24 {
                    return EX3_C; // removable singularity at the centre
                }
                let dgt = ex3_dg(t) * t + ex3_g(t);
                (x - gt) * dgt / d2.sqrt() + EX3_C
            }
            ExampleKind::Ex4 => 1.0 - (2.0 * t - 1.0).exp(),
            ExampleKind::Almond => {
                let (tilde, g) = almond_parts(x, y, t);
                let gx = tilde[0] + g[0];
                let gy = tilde[1] + g[1];
                let norm = gx.hypot(gy).max(ALMOND_GRAD_FLOOR);
                -(tilde[2] + g[2]) / norm
            }
            ExampleKind::Unit => 1.0,
        }
    }
}

impl SpeedField for ExampleSpeed {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.f(x, y, t)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz_window(0.0, self.t_cap)
    }

    fn lipschitz_window(&self, t_lo: f64, t_hi: f64) -> f64 {
        let t_hi = t_hi.clamp(0.0, self.t_cap + 1.0);
        match self.kind {
            ExampleKind::Motivation => 2.0,
            ExampleKind::Ex1 => 10.0 * (10.0 * t_hi - 1.0).exp(),
            ExampleKind::Ex2 => 1.0,
            ExampleKind::Ex3 => {
                // |grad F| <= 2 (g' t + g)/d + |g'' t + 2 g'| with d >= r0
                let mut k: f64 = 1.0;
                for s in 0..=4 {
                    let t = t_lo + (t_hi - t_lo) * s as f64 / 4.0;
                    let (g, dg) = (ex3_g(t), ex3_dg(t));
                    let u = EX3_B * EX3_B * (t - 0.5) * (t - 0.5);
                    let ddg = 2.0 * EX3_B.powi(3) * (t - 0.5).abs() / (1.0 + u).powi(2);
                    k = k.max(2.0 * (dg * t + g) / R0 + ddg * t + 2.0 * dg);
                }
                k
            }
            ExampleKind::Ex4 => 2.0 * (2.0 * t_hi - 1.0).exp(),
            ExampleKind::Almond => 50.0,
            ExampleKind::Unit => 0.0,
        }
    }

    fn local_bound(&self, p: [f64; 3], rho: f64) -> f64 {
        let (t_lo, t_hi) = ((p[2] - rho).max(0.0), p[2] + rho);
        match self.kind {
            // |F| monotone in t: the interval ends dominate
            ExampleKind::Motivation | ExampleKind::Ex1 | ExampleKind::Ex4 => {
                self.f(p[0], p[1], t_lo).abs().max(self.f(p[0], p[1], t_hi).abs())
            }
            ExampleKind::Ex2 => p[0].abs() + rho,
            ExampleKind::Ex3 => {
                // |(x - gt)/d| <= 1, so |F| <= |g' t + g| + c over the window
                let mut m: f64 = 0.0;
                for k in 0..=4 {
                    let t = t_lo + (t_hi - t_lo) * k as f64 / 4.0;
                    m = m.max((ex3_dg(t) * t + ex3_g(t)).abs());
                }
                1.1 * m + EX3_C
            }
            ExampleKind::Almond => {
                let mut m = self.f(p[0], p[1], p[2]).abs();
                for &(dx, dy) in &[(0.0, 0.0), (rho, 0.0), (-rho, 0.0), (0.0, rho), (0.0, -rho)] {
                    for &t in &[t_lo, p[2], t_hi] {
                        m = m.max(self.f(p[0] + dx, p[1] + dy, t).abs());
                    }
                }
                1.2 * m + 0.05
            }
            ExampleKind::Unit => 1.0,
        }
    }

    fn time_dependent(&self) -> bool {
        !matches!(self.kind, ExampleKind::Ex2 | ExampleKind::Unit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unknown_example_errors() {
        assert!(matches!(get_example("nope"), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn ex1_speed_vanishes_at_one_tenth() {
        let s = get_example("ex1").unwrap().speed();
        assert_relative_eq!(s.eval(0.0, 0.0, 0.1), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ex4_circles_touch_near_008() {
        // R(t) reaches half the centre separation when the circles touch
        let ex4 = get_example("ex4").unwrap();
        let (mut lo, mut hi) = (0.0, 0.2);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ex4.radius(mid) < 0.3 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let touch = 0.5 * (lo + hi);
        assert!((touch - 0.08).abs() < 0.01, "touch time {touch}");
    }

    #[test]
    fn ex3_speed_is_c_for_small_t() {
        let s = get_example("ex3").unwrap().speed();
        // the drift term carries a residual g(0) = atan(-b/2) + pi/2 ~ 0.2,
        // so "close to c" holds only up to that residual for small t
        let residual = (-(EX3_B) * 0.5).atan() + std::f64::consts::FRAC_PI_2;
        assert!((s.eval(0.3, 0.0, 1e-4) - EX3_C).abs() <= residual + 1e-3);
        // exactly at the (removable) singular point
        assert_relative_eq!(s.eval(0.0, 0.0, 0.0), EX3_C, epsilon = 1e-12);
        // and the drift term vanishes on the y-axis through the centre
        assert_relative_eq!(s.eval(0.0, 0.4, 1e-6), EX3_C, epsilon = 1e-3);
    }

    #[test]
    fn exact_phi_values() {
        let ex1 = get_example("ex1").unwrap();
        assert_relative_eq!(ex1.exact_phi(0.3, 0.0, 0.0).unwrap(), 0.05, epsilon = 1e-15);
        let ex4 = get_example("ex4").unwrap();
        assert_relative_eq!(ex4.exact_phi(0.3, 0.0, 0.0).unwrap(), -0.25, epsilon = 1e-15);
        assert_relative_eq!(ex4.exact_phi(-0.3, 0.0, 0.0).unwrap(), -0.25, epsilon = 1e-15);
        assert!(ex4.exact_phi(0.0, 0.0, 0.6).is_err());
    }

    #[test]
    fn motivation_zero_set_matches_caption_radius() {
        let m = get_example("motivation").unwrap();
        // zero contour at r = r0 + t - t^2 for c = 2
        for &t in &[0.0, 0.3, 0.5, 1.0] {
            let r = m.radius(t);
            if r > 0.0 {
                assert_relative_eq!(m.exact_phi(r, 0.0, t).unwrap(), 0.0, epsilon = 1e-14);
            }
        }
        let collapse = m.collapse_time().unwrap();
        assert_relative_eq!(collapse, (1.0 + 2.0_f64.sqrt()) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn signed_distance_gradient_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["motivation", "ex1", "ex2", "ex3", "ex4", "unit"] {
            let ex = get_example(name).unwrap();
            assert!(ex.signed_distance);
            let t_hi = if ex.kind == ExampleKind::Ex4 { 0.49 } else { ex.t_final };
            let mut checked = 0;
            while checked < 1000 {
                let x = rng.gen_range(ex.domain.0..ex.domain.1);
                let y = rng.gen_range(ex.domain.0..ex.domain.1);
                let t = rng.gen_range(0.0..t_hi);
                // stay away from the centre where the distance is non-smooth
                if ex.exact_phi(x, y, t).unwrap() < -0.01 {
                    continue;
                }
                let g = ex.grad_phi(x, y, t).unwrap();
                let norm = g[0].hypot(g[1]);
                assert!(
                    (norm - 1.0).abs() < 1e-6,
                    "{name}: |grad| = {norm} at ({x}, {y}, {t})"
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn radius_rate_matches_speed() {
        // R'(t) = F(t) for the spatially uniform speeds, checked by
        // central finite differences at a thousand times
        for name in ["motivation", "ex1", "ex4", "unit"] {
            let ex = get_example(name).unwrap();
            let s = ex.speed();
            let eps = 1e-6;
            for k in 0..1000 {
                let t = 0.001 + ex.t_final * k as f64 / 1001.0;
                let fd = (ex.radius(t + eps) - ex.radius(t - eps)) / (2.0 * eps);
                let f = s.eval(0.0, 0.0, t);
                assert!(
                    (fd - f).abs() < 1e-5 * (1.0 + f.abs()),
                    "{name} at {t}: {fd} vs {f}"
                );
            }
        }
    }

    #[test]
    fn grad_phi_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 1e-6;
        for name in EXAMPLE_NAMES {
            let ex = get_example(name).unwrap();
            let t_hi = if ex.kind == ExampleKind::Ex4 { 0.49 } else { ex.t_final };
            for _ in 0..200 {
                let x = rng.gen_range(ex.domain.0..ex.domain.1);
                let y = rng.gen_range(ex.domain.0..ex.domain.1);
                let t = rng.gen_range(0.01..t_hi);
                // keep clear of the kink sets where one-sided limits differ
                if x.hypot(y) < 0.05 {
                    continue;
                }
                if ex.kind == ExampleKind::Almond && (x * t - y).abs() < 0.01 {
                    continue;
                }
                if ex.kind == ExampleKind::Ex4 && x.abs() < 0.01 {
                    continue;
                }
                if ex.kind == ExampleKind::Ex3 {
                    let gt = ex3_g(t) * t;
                    if (x - gt).hypot(y) < 0.05 {
                        continue;
                    }
                }
                let g = ex.grad_phi(x, y, t).unwrap();
                let phi = |x: f64, y: f64, t: f64| ex.exact_phi(x, y, t).unwrap();
                let fd = [
                    (phi(x + eps, y, t) - phi(x - eps, y, t)) / (2.0 * eps),
                    (phi(x, y + eps, t) - phi(x, y - eps, t)) / (2.0 * eps),
                    (phi(x, y, t + eps) - phi(x, y, t - eps)) / (2.0 * eps),
                ];
                for k in 0..3 {
                    assert!(
                        (g[k] - fd[k]).abs() < 1e-5 * (1.0 + fd[k].abs()),
                        "{name} grad[{k}] at ({x}, {y}, {t}): {} vs {}",
                        g[k],
                        fd[k]
                    );
                }
            }
        }
    }

    #[test]
    fn almond_phi_continuous_across_seam() {
        let alm = get_example("almond").unwrap();
        for k in 0..100 {
            let t = 0.1 + 1.7 * k as f64 / 100.0;
            let x = 0.3;
            let y = x * t; // on the seam y = xt
            let eps = 1e-9;
            let above = alm.exact_phi(x, y + eps, t).unwrap();
            let below = alm.exact_phi(x, y - eps, t).unwrap();
            assert!((above - below).abs() < 1e-7);
        }
    }

    #[test]
    fn first_crossing_inverts_exact_radius() {
        let ex1 = get_example("ex1").unwrap();
        // outside point crossed during expansion
        let t = ex1.first_crossing(0.27, 0.0, 0.3).unwrap();
        assert_relative_eq!(ex1.radius(t), 0.27, epsilon = 1e-10);
        // inside point crossed during contraction
        let t = ex1.first_crossing(0.2, 0.0, 0.3).unwrap();
        assert!(t > 0.1);
        assert_relative_eq!(ex1.radius(t), 0.2, epsilon = 1e-10);
        // never crossed within the horizon
        assert!(get_example("unit").unwrap().first_crossing(0.2, 0.0, 0.3).is_none());
    }

    #[test]
    fn local_bound_dominates_point_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for name in EXAMPLE_NAMES {
            let ex = get_example(name).unwrap();
            let s = ex.speed();
            for _ in 0..200 {
                let x = rng.gen_range(ex.domain.0..ex.domain.1);
                let y = rng.gen_range(ex.domain.0..ex.domain.1);
                let t = rng.gen_range(0.0..ex.t_final);
                let m = s.local_bound([x, y, t], 0.01);
                assert!(m >= s.eval(x, y, t).abs() - 1e-12, "{name}");
            }
        }
    }
}
