//! Smooth scalar profiles with two explicit derivatives.
//!
//! Every compactly supported shape in the crate is built from one primitive: the
//! `C^infinity` increasing step
//!
//! ```text
//! sstep(u) = g(u) / (g(u) + g(1-u)),   g(u) = exp(-1/u) for u > 0, else 0,
//! ```
//!
//! which is 0 for `u <= 0`, 1 for `u >= 1`, and strictly increasing between. Its
//! first two derivatives are implemented from the closed-form quotient rules, so
//! radial Hamiltonians, their vector fields, and the twist certificates of the
//! continuation selector all evaluate without numerical differentiation.
//!
//! Profiles are functions of `s = |x|^2` (not of `|x|`), which keeps every radial
//! Hamiltonian smooth across the origin.

use std::sync::Arc;

/// `g(u) = exp(-1/u)` for `u > 0`, else 0.
#[inline]
fn g(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// `g'(u) = g(u) / u^2` for `u > 0`, else 0.
#[inline]
fn g_d1(u: f64) -> f64 {
    if u > 0.0 {
        g(u) / (u * u)
    } else {
        0.0
    }
}

/// `g''(u) = g(u) (1/u^4 - 2/u^3)` for `u > 0`, else 0.
#[inline]
fn g_d2(u: f64) -> f64 {
    if u > 0.0 {
        let u2 = u * u;
        g(u) * (1.0 / (u2 * u2) - 2.0 / (u2 * u))
    } else {
        0.0
    }
}

/// Smooth increasing step: 0 for `u <= 0`, 1 for `u >= 1`.
pub fn sstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = g(u);
        let b = g(1.0 - u);
        a / (a + b)
    }
}

/// First derivative of [`sstep`].
pub fn sstep_d1(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let a = g(u);
        let b = g(1.0 - u);
        let ap = g_d1(u);
        let bp = -g_d1(1.0 - u);
        (ap * b - a * bp) / ((a + b) * (a + b))
    }
}

/// Second derivative of [`sstep`].
pub fn sstep_d2(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let a = g(u);
        let b = g(1.0 - u);
        let ap = g_d1(u);
        let bp = -g_d1(1.0 - u);
        let app = g_d2(u);
        let bpp = g_d2(1.0 - u);
        let den = a + b;
        (app * b - a * bpp) / (den * den) - 2.0 * (ap * b - a * bp) * (ap + bp) / (den * den * den)
    }
}

/// Smooth decreasing step: 1 for `u <= 0`, 0 for `u >= 1`.
#[inline]
pub fn fstep(u: f64) -> f64 {
    1.0 - sstep(u)
}

/// A scalar function with two derivatives, used for radial profiles `f(s)`,
/// time-rate profiles `a(t)`, and level clamps `c(y)`.
pub trait C2Scalar: Send + Sync {
    /// Value.
    fn v(&self, s: f64) -> f64;
    /// First derivative.
    fn d1(&self, s: f64) -> f64;
    /// Second derivative.
    fn d2(&self, s: f64) -> f64;
}

/// Shared handle to a profile.
pub type ProfileRef = Arc<dyn C2Scalar>;

// ---------------------------------------------------------------------------
// Concrete profiles
// ---------------------------------------------------------------------------

/// Descending plateau profile in `s`: `height` for `s <= s_in`, 0 for
/// `s >= s_out`, smooth monotone between. The sign of `height` is free.
#[derive(Clone, Debug)]
pub struct BumpProfile {
    pub height: f64,
    pub s_in: f64,
    pub s_out: f64,
}

impl BumpProfile {
    pub fn new(height: f64, s_in: f64, s_out: f64) -> Self {
        assert!(
            s_out > s_in && s_in >= 0.0,
            "bump profile needs 0 <= s_in < s_out"
        );
        Self { height, s_in, s_out }
    }

    #[inline]
    fn u(&self, s: f64) -> f64 {
        (s - self.s_in) / (self.s_out - self.s_in)
    }
}

impl C2Scalar for BumpProfile {
    fn v(&self, s: f64) -> f64 {
        self.height * fstep(self.u(s))
    }
    fn d1(&self, s: f64) -> f64 {
        let w = self.s_out - self.s_in;
        -self.height * sstep_d1(self.u(s)) / w
    }
    fn d2(&self, s: f64) -> f64 {
        let w = self.s_out - self.s_in;
        -self.height * sstep_d2(self.u(s)) / (w * w)
    }
}

/// Annular plateau profile: 0 up to `s_rise_lo`, rises to `height` by
/// `s_rise_hi`, stays flat until `s_fall_lo`, falls back to 0 by `s_fall_hi`.
#[derive(Clone, Debug)]
pub struct ShellProfile {
    pub height: f64,
    pub s_rise_lo: f64,
    pub s_rise_hi: f64,
    pub s_fall_lo: f64,
    pub s_fall_hi: f64,
}

impl ShellProfile {
    pub fn new(height: f64, s_rise_lo: f64, s_rise_hi: f64, s_fall_lo: f64, s_fall_hi: f64) -> Self {
        assert!(
            0.0 <= s_rise_lo && s_rise_lo < s_rise_hi && s_rise_hi <= s_fall_lo && s_fall_lo < s_fall_hi,
            "shell profile needs 0 <= rise_lo < rise_hi <= fall_lo < fall_hi"
        );
        Self {
            height,
            s_rise_lo,
            s_rise_hi,
            s_fall_lo,
            s_fall_hi,
        }
    }

    #[inline]
    fn up(&self, s: f64) -> f64 {
        (s - self.s_rise_lo) / (self.s_rise_hi - self.s_rise_lo)
    }

    #[inline]
    fn down(&self, s: f64) -> f64 {
        (s - self.s_fall_lo) / (self.s_fall_hi - self.s_fall_lo)
    }
}

impl C2Scalar for ShellProfile {
    fn v(&self, s: f64) -> f64 {
        self.height * sstep(self.up(s)) * fstep(self.down(s))
    }
    fn d1(&self, s: f64) -> f64 {
        let wu = self.s_rise_hi - self.s_rise_lo;
        let wd = self.s_fall_hi - self.s_fall_lo;
        self.height
            * (sstep_d1(self.up(s)) / wu * fstep(self.down(s))
                - sstep(self.up(s)) * sstep_d1(self.down(s)) / wd)
    }
    fn d2(&self, s: f64) -> f64 {
        let wu = self.s_rise_hi - self.s_rise_lo;
        let wd = self.s_fall_hi - self.s_fall_lo;
        self.height
            * (sstep_d2(self.up(s)) / (wu * wu) * fstep(self.down(s))
                - 2.0 * sstep_d1(self.up(s)) / wu * sstep_d1(self.down(s)) / wd
                - sstep(self.up(s)) * sstep_d2(self.down(s)) / (wd * wd))
    }
}

/// Plateau window in a single real variable (which may be negative, unlike the
/// radial profiles): 0 for `x <= lo`, rises to 1 by `rise_hi`, stays 1 until
/// `fall_lo`, back to 0 at `hi`. Used for translation-generating Hamiltonians
/// built from products of coordinate windows.
#[derive(Clone, Debug)]
pub struct WindowProfile {
    pub lo: f64,
    pub rise_hi: f64,
    pub fall_lo: f64,
    pub hi: f64,
}

impl WindowProfile {
    pub fn new(lo: f64, rise_hi: f64, fall_lo: f64, hi: f64) -> Self {
        assert!(
            lo < rise_hi && rise_hi <= fall_lo && fall_lo < hi,
            "window profile needs lo < rise_hi <= fall_lo < hi"
        );
        Self {
            lo,
            rise_hi,
            fall_lo,
            hi,
        }
    }
}

impl C2Scalar for WindowProfile {
    fn v(&self, x: f64) -> f64 {
        sstep((x - self.lo) / (self.rise_hi - self.lo))
            * fstep((x - self.fall_lo) / (self.hi - self.fall_lo))
    }
    fn d1(&self, x: f64) -> f64 {
        let wu = self.rise_hi - self.lo;
        let wd = self.hi - self.fall_lo;
        let up = (x - self.lo) / wu;
        let dn = (x - self.fall_lo) / wd;
        sstep_d1(up) / wu * fstep(dn) - sstep(up) * sstep_d1(dn) / wd
    }
    fn d2(&self, x: f64) -> f64 {
        let wu = self.rise_hi - self.lo;
        let wd = self.hi - self.fall_lo;
        let up = (x - self.lo) / wu;
        let dn = (x - self.fall_lo) / wd;
        sstep_d2(up) / (wu * wu) * fstep(dn) - 2.0 * sstep_d1(up) / wu * sstep_d1(dn) / wd
            - sstep(up) * sstep_d2(dn) / (wd * wd)
    }
}

/// Mollified descending ramp: `height` at `s = 0`, 0 for `s >= s_max`, with
/// derivative bounded by `height / s_max * G` where the mollification overhead
/// `G = 1 / mass` is reported by [`RampProfile::slope_factor`]. Used by capacity
/// lower-bound sweeps, where the steepness bound is the twist certificate.
///
/// Construction: `f(s) = height * (1 - I(u)/I(1))` with `u = s/s_max` and
/// `I(u) = \int_0^u beta`, `beta(v) = sstep(v/w) * sstep((1-v)/w)`.
#[derive(Clone, Debug)]
pub struct RampProfile {
    pub height: f64,
    pub s_max: f64,
    pub width: f64,
    mass: f64,
}

impl RampProfile {
    pub fn new(height: f64, s_max: f64, width: f64) -> Self {
        assert!(s_max > 0.0 && width > 0.0 && width < 0.5);
        let mass = adaptive_simpson(&|v| Self::beta_w(v, width), 0.0, 1.0, 1e-12);
        Self {
            height,
            s_max,
            width,
            mass,
        }
    }

    #[inline]
    fn beta_w(v: f64, w: f64) -> f64 {
        sstep(v / w) * sstep((1.0 - v) / w)
    }

    #[inline]
    fn beta(&self, v: f64) -> f64 {
        Self::beta_w(v, self.width)
    }

    /// The exact bound `sup |f'| = (height / s_max) * slope_factor()`.
    pub fn slope_factor(&self) -> f64 {
        1.0 / self.mass
    }
}

impl C2Scalar for RampProfile {
    fn v(&self, s: f64) -> f64 {
        let u = s / self.s_max;
        if u <= 0.0 {
            return self.height;
        }
        if u >= 1.0 {
            return 0.0;
        }
        let integral = adaptive_simpson(&|v| self.beta(v), 0.0, u, 1e-12);
        self.height * (1.0 - integral / self.mass)
    }
    fn d1(&self, s: f64) -> f64 {
        let u = s / self.s_max;
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        -self.height * self.beta(u) / (self.mass * self.s_max)
    }
    fn d2(&self, s: f64) -> f64 {
        let u = s / self.s_max;
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let w = self.width;
        let beta_d1 = sstep_d1(u / w) / w * sstep((1.0 - u) / w)
            - sstep(u / w) * sstep_d1((1.0 - u) / w) / w;
        -self.height * beta_d1 / (self.mass * self.s_max * self.s_max)
    }
}

/// Hat profile: the primitive of `scale * (up - c * down)` where `up` and
/// `down` are window profiles and `c` matches their masses, so the hat starts
/// at 0, rises with derivative exactly `scale` on the plateau of `up`, holds a
/// constant peak between the windows, and returns to 0 after `down`.
///
/// The constant-derivative stretch is what makes translation-generating
/// Hamiltonians translate exactly: `H(q, p) = hat(q) * window(p)` moves every
/// point with `q` in the plateau of `up` and `p` in the plateau of the `p`
/// window straight upward at speed `scale`.
#[derive(Clone, Debug)]
pub struct HatProfile {
    pub scale: f64,
    pub up: WindowProfile,
    pub down: WindowProfile,
    mass_ratio: f64,
}

impl HatProfile {
    pub fn new(scale: f64, up: WindowProfile, down: WindowProfile) -> Self {
        assert!(
            up.hi <= down.lo,
            "hat profile needs the up window before the down window"
        );
        let mass = |w: &WindowProfile| adaptive_simpson(&|x| w.v(x), w.lo, w.hi, 1e-12);
        let mass_ratio = mass(&up) / mass(&down);
        Self {
            scale,
            up,
            down,
            mass_ratio,
        }
    }

    /// Peak value `scale * mass(up)`, held between the windows.
    pub fn peak(&self) -> f64 {
        self.scale * adaptive_simpson(&|x| self.up.v(x), self.up.lo, self.up.hi, 1e-12)
    }

    /// Interval outside which the hat vanishes.
    pub fn support(&self) -> (f64, f64) {
        (self.up.lo, self.down.hi)
    }
}

impl C2Scalar for HatProfile {
    fn v(&self, x: f64) -> f64 {
        if x <= self.up.lo {
            return 0.0;
        }
        if x >= self.down.hi {
            return 0.0;
        }
        let up_part = adaptive_simpson(&|u| self.up.v(u), self.up.lo, x.min(self.up.hi), 1e-12);
        let down_part = if x > self.down.lo {
            adaptive_simpson(&|u| self.down.v(u), self.down.lo, x.min(self.down.hi), 1e-12)
        } else {
            0.0
        };
        self.scale * (up_part - self.mass_ratio * down_part)
    }
    fn d1(&self, x: f64) -> f64 {
        self.scale * (self.up.v(x) - self.mass_ratio * self.down.v(x))
    }
    fn d2(&self, x: f64) -> f64 {
        self.scale * (self.up.d1(x) - self.mass_ratio * self.down.d1(x))
    }
}

/// One floor of the sky-scraper: decreasing, support `[0, 1]`, equal to 1 on
/// `[0, 3/4]`: `h(u) = sstep(4 (1 - u))`.
pub fn floor_step(u: f64) -> f64 {
    sstep(4.0 * (1.0 - u))
}

/// First derivative of [`floor_step`].
pub fn floor_step_d1(u: f64) -> f64 {
    -4.0 * sstep_d1(4.0 * (1.0 - u))
}

/// Second derivative of [`floor_step`].
pub fn floor_step_d2(u: f64) -> f64 {
    16.0 * sstep_d2(4.0 * (1.0 - u))
}

/// Partial sum of the sky-scraper tower: `f_k(s) = sum_{i=1..k} h(2^i s)` with
/// `h` = [`floor_step`]. Equal to `k` on `[0, (3/4) 2^{-k}]`, supported in
/// `[0, 1/2]`, and each unit-height floor lives at scale `2^{-i}`.
#[derive(Clone, Debug)]
pub struct SkyScraperProfile {
    pub floors: u32,
}

impl C2Scalar for SkyScraperProfile {
    fn v(&self, s: f64) -> f64 {
        (1..=self.floors)
            .map(|i| floor_step((2.0f64).powi(i as i32) * s))
            .sum()
    }
    fn d1(&self, s: f64) -> f64 {
        (1..=self.floors)
            .map(|i| {
                let c = (2.0f64).powi(i as i32);
                c * floor_step_d1(c * s)
            })
            .sum()
    }
    fn d2(&self, s: f64) -> f64 {
        (1..=self.floors)
            .map(|i| {
                let c = (2.0f64).powi(i as i32);
                c * c * floor_step_d2(c * s)
            })
            .sum()
    }
}

/// Pointwise sum of profiles.
pub struct SumProfile(pub Vec<ProfileRef>);

impl C2Scalar for SumProfile {
    fn v(&self, s: f64) -> f64 {
        self.0.iter().map(|p| p.v(s)).sum()
    }
    fn d1(&self, s: f64) -> f64 {
        self.0.iter().map(|p| p.d1(s)).sum()
    }
    fn d2(&self, s: f64) -> f64 {
        self.0.iter().map(|p| p.d2(s)).sum()
    }
}

/// Scalar multiple of a profile.
pub struct ScaledProfile {
    pub factor: f64,
    pub inner: ProfileRef,
}

impl C2Scalar for ScaledProfile {
    fn v(&self, s: f64) -> f64 {
        self.factor * self.inner.v(s)
    }
    fn d1(&self, s: f64) -> f64 {
        self.factor * self.inner.d1(s)
    }
    fn d2(&self, s: f64) -> f64 {
        self.factor * self.inner.d2(s)
    }
}

/// Difference `a - b` of two profiles.
pub struct DiffProfile {
    pub a: ProfileRef,
    pub b: ProfileRef,
}

impl C2Scalar for DiffProfile {
    fn v(&self, s: f64) -> f64 {
        self.a.v(s) - self.b.v(s)
    }
    fn d1(&self, s: f64) -> f64 {
        self.a.d1(s) - self.b.d1(s)
    }
    fn d2(&self, s: f64) -> f64 {
        self.a.d2(s) - self.b.d2(s)
    }
}

/// The zero profile.
pub struct ZeroProfile;

impl C2Scalar for ZeroProfile {
    fn v(&self, _: f64) -> f64 {
        0.0
    }
    fn d1(&self, _: f64) -> f64 {
        0.0
    }
    fn d2(&self, _: f64) -> f64 {
        0.0
    }
}

/// Smooth level clamp: `c(y) = y` for `y <= level`, constant `level + 1/2` for
/// `y >= level + 1`, monotone increasing between (`c'(y) = 1 - sstep(y - level)`).
/// Used to truncate unbounded Hamiltonians at a chosen level.
#[derive(Clone, Debug)]
pub struct ClampProfile {
    pub level: f64,
}

impl C2Scalar for ClampProfile {
    fn v(&self, y: f64) -> f64 {
        if y <= self.level {
            y
        } else if y >= self.level + 1.0 {
            self.level + 0.5
        } else {
            let u = y - self.level;
            self.level + u - adaptive_simpson(&sstep, 0.0, u, 1e-12)
        }
    }
    fn d1(&self, y: f64) -> f64 {
        1.0 - sstep(y - self.level)
    }
    fn d2(&self, y: f64) -> f64 {
        -sstep_d1(y - self.level)
    }
}

/// Numeric range of a profile on `[0, s_hi]`: (min, max) found by dense scan with
/// golden-section refinement around the best cells.
pub fn profile_range(p: &dyn C2Scalar, s_hi: f64, samples: usize) -> (f64, f64) {
    let n = samples.max(64);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut lo_at = 0.0;
    let mut hi_at = 0.0;
    for i in 0..=n {
        let s = s_hi * i as f64 / n as f64;
        let val = p.v(s);
        if val < lo {
            lo = val;
            lo_at = s;
        }
        if val > hi {
            hi = val;
            hi_at = s;
        }
    }
    let h = s_hi / n as f64;
    let refine = |center: f64, sign: f64| -> f64 {
        let mut a = (center - h).max(0.0);
        let mut b = (center + h).min(s_hi);
        for _ in 0..60 {
            let m1 = a + (b - a) * 0.381_966_011_250_105;
            let m2 = b - (b - a) * 0.381_966_011_250_105;
            if sign * p.v(m1) < sign * p.v(m2) {
                a = m1;
            } else {
                b = m2;
            }
        }
        p.v(0.5 * (a + b))
    };
    let hi_ref = refine(hi_at, 1.0).max(hi);
    let lo_ref = refine(lo_at, -1.0).min(lo);
    (lo_ref, hi_ref)
}

/// Adaptive Simpson quadrature with absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_endpoints_and_symmetry() {
        assert_eq!(sstep(-1.0), 0.0);
        assert_eq!(sstep(0.0), 0.0);
        assert_eq!(sstep(1.0), 1.0);
        assert_eq!(sstep(2.0), 1.0);
        assert_relative_eq!(sstep(0.5), 0.5, epsilon = 1e-15);
        // Reflection symmetry sstep(u) + sstep(1-u) = 1.
        for u in [0.1, 0.25, 0.4, 0.77] {
            assert_relative_eq!(sstep(u) + sstep(1.0 - u), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn step_derivatives_match_finite_differences() {
        let h = 1e-5;
        for u in [0.15, 0.35, 0.5, 0.62, 0.9] {
            let fd1 = (sstep(u + h) - sstep(u - h)) / (2.0 * h);
            assert_relative_eq!(sstep_d1(u), fd1, max_relative = 1e-6);
            let fd2 = (sstep_d1(u + h) - sstep_d1(u - h)) / (2.0 * h);
            assert_relative_eq!(sstep_d2(u), fd2, max_relative = 1e-6, epsilon = 1e-9);
        }
        // Outside [0,1] everything is flat.
        assert_eq!(sstep_d1(-0.5), 0.0);
        assert_eq!(sstep_d2(1.5), 0.0);
    }

    #[test]
    fn bump_profile_plateau_and_support() {
        let b = BumpProfile::new(2.0, 1.0, 4.0);
        assert_eq!(b.v(0.0), 2.0);
        assert_eq!(b.v(1.0), 2.0);
        assert_eq!(b.v(4.0), 0.0);
        assert_eq!(b.v(9.0), 0.0);
        assert!(b.v(2.5) > 0.0 && b.v(2.5) < 2.0);
        let h = 1e-5;
        for s in [1.5, 2.0, 3.1] {
            let fd = (b.v(s + h) - b.v(s - h)) / (2.0 * h);
            assert_relative_eq!(b.d1(s), fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn shell_profile_shape() {
        let sh = ShellProfile::new(1.5, 0.5, 0.9, 1.1, 1.5);
        assert_eq!(sh.v(0.0), 0.0);
        assert_eq!(sh.v(0.5), 0.0);
        assert_relative_eq!(sh.v(1.0), 1.5, epsilon = 1e-12);
        assert_eq!(sh.v(1.5), 0.0);
        let h = 1e-5;
        for s in [0.7, 1.0, 1.3] {
            let fd = (sh.v(s + h) - sh.v(s - h)) / (2.0 * h);
            assert_relative_eq!(sh.d1(s), fd, max_relative = 1e-5, epsilon = 1e-9);
        }
    }

    #[test]
    fn window_profile_handles_negative_coordinates() {
        let w = WindowProfile::new(-2.0, -1.0, 1.0, 2.0);
        assert_eq!(w.v(-3.0), 0.0);
        assert_relative_eq!(w.v(0.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(w.v(-1.0), 1.0, epsilon = 1e-14);
        assert_eq!(w.v(2.5), 0.0);
        let h = 1e-5;
        for x in [-1.5, 0.3, 1.4] {
            let fd = (w.v(x + h) - w.v(x - h)) / (2.0 * h);
            assert_relative_eq!(w.d1(x), fd, max_relative = 1e-5, epsilon = 1e-9);
            let fd2 = (w.d1(x + h) - w.d1(x - h)) / (2.0 * h);
            assert_relative_eq!(w.d2(x), fd2, max_relative = 1e-4, epsilon = 1e-8);
        }
    }

    #[test]
    fn ramp_profile_slope_certificate() {
        let r = RampProfile::new(1.0, 1.0, 0.08);
        assert_relative_eq!(r.v(0.0), 1.0, epsilon = 1e-10);
        assert_eq!(r.v(1.0), 0.0);
        // Slope factor close to 1/(1 - width) and certifies sup |f'|.
        let gf = r.slope_factor();
        assert!(gf > 1.0 && gf < 1.15, "slope factor {gf}");
        let mut max_abs_d1 = 0.0f64;
        for i in 0..=2000 {
            let s = i as f64 / 2000.0;
            max_abs_d1 = max_abs_d1.max(r.d1(s).abs());
        }
        assert!(max_abs_d1 <= gf + 1e-9, "{max_abs_d1} vs {gf}");
        // Derivative consistency.
        let h = 1e-6;
        for s in [0.2, 0.5, 0.8] {
            let fd = (r.v(s + h) - r.v(s - h)) / (2.0 * h);
            assert_relative_eq!(r.d1(s), fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn hat_profile_rises_exactly_then_returns_to_zero() {
        let up = WindowProfile::new(-0.25, 0.0, 1.0, 1.25);
        let down = WindowProfile::new(1.5, 1.75, 1.75, 2.0);
        let hat = HatProfile::new(2.0, up, down);
        assert_eq!(hat.v(-0.5), 0.0);
        assert_eq!(hat.v(2.2), 0.0);
        // Derivative is exactly the scale on the up-window plateau.
        for q in [0.0, 0.3, 0.7, 1.0] {
            assert_relative_eq!(hat.d1(q), 2.0, epsilon = 1e-12);
        }
        // Constant peak between the windows.
        let peak = hat.peak();
        assert_relative_eq!(hat.v(1.3), peak, epsilon = 1e-9);
        assert_relative_eq!(hat.v(1.45), peak, epsilon = 1e-9);
        // Value/derivative consistency across the descent.
        let h = 1e-5;
        for q in [1.6, 1.75, 1.9] {
            let fd = (hat.v(q + h) - hat.v(q - h)) / (2.0 * h);
            assert_relative_eq!(hat.d1(q), fd, max_relative = 1e-4, epsilon = 1e-7);
        }
        // Mass matching: back to ~0 after the down window.
        assert!(hat.v(1.999).abs() < 1e-6);
    }

    #[test]
    fn sky_scraper_partial_sums() {
        let f3 = SkyScraperProfile { floors: 3 };
        // Equal to k near 0.
        assert_relative_eq!(f3.v(0.0), 3.0, epsilon = 1e-14);
        assert_relative_eq!(f3.v(0.75 / 8.0), 3.0, epsilon = 1e-14);
        // Supported in [0, 1/2]: h(2 s) needs 2 s <= 1.
        assert_eq!(f3.v(0.5), 0.0);
        assert!(f3.v(0.45) > 0.0);
        // At s in (3/8, 1/2] only the i = 1 floor is active.
        let s = 0.42;
        assert_relative_eq!(f3.v(s), floor_step(2.0 * s), epsilon = 1e-14);
        // Each added floor raises the sup by exactly 1.
        let f4 = SkyScraperProfile { floors: 4 };
        assert_relative_eq!(f4.v(0.0) - f3.v(0.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn clamp_profile_identity_below_and_flat_above() {
        let c = ClampProfile { level: 2.0 };
        assert_eq!(c.v(1.0), 1.0);
        assert_eq!(c.v(2.0), 2.0);
        assert_relative_eq!(c.v(5.0), 2.5, epsilon = 1e-10);
        assert_relative_eq!(c.v(3.0), 2.5, epsilon = 1e-10);
        assert!(c.v(2.3) > 2.0 && c.v(2.3) < 2.5);
        // Monotone: derivative in [0, 1].
        for y in [1.5, 2.1, 2.5, 2.9, 3.5] {
            let d = c.d1(y);
            assert!((0.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn quadrature_exactness() {
        let val = adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12);
        assert_relative_eq!(val, 4.0, epsilon = 1e-10);
        let val = adaptive_simpson(&f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert_relative_eq!(val, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn profile_range_finds_extrema() {
        let b = BumpProfile::new(-1.5, 0.5, 2.0);
        let (lo, hi) = profile_range(&b, 4.0, 512);
        assert_relative_eq!(lo, -1.5, epsilon = 1e-9);
        assert_relative_eq!(hi, 0.0, epsilon = 1e-12);
    }
}
