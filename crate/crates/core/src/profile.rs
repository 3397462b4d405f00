//! Closed-form compactly supported profiles used as convolution kernels,
//! cut-offs and partition-of-unity building blocks.

#[allow(unused_imports)]
use num_traits::Float;


/// A real function on `R^n` vanishing outside the cube `[-R, R]^n`.
pub trait Profile: Sync {
    fn eval(&self, x: &[f64]) -> f64;

    /// `R` such that `eval` vanishes whenever some `|x_d| > R`.
    fn support_radius(&self) -> f64;
}

impl<P: Profile + ?Sized> Profile for &P {
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }

    fn support_radius(&self) -> f64 {
        (**self).support_radius()
    }
}

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn flat(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// C-infinity step rising from 0 at `t <= 0` to 1 at `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = flat(t);
        a / (a + flat(1.0 - t))
    }
}

/// Radial bump `scale * exp(1 / (|x/rho|^2 - 1))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub n: usize,
    pub radius: f64,
    pub scale: f64,
}

/// `int_{|x|<1} exp(1/(|x|^2-1)) dx` in one and two dimensions.
pub fn bump_mass(n: usize) -> f64 {
    // Midpoint sums of a flat-ended smooth integrand converge faster than any
    // power of the step, so a few thousand nodes reach machine precision.
    let m = 4000;
    let step = 1.0 / m as f64;
    let mut acc = 0.0;
    for i in 0..m {
        let r = (i as f64 + 0.5) * step;
        let v = (1.0 / (r * r - 1.0)).exp();
        acc += if n == 1 { 2.0 * v } else { 2.0 * core::f64::consts::PI * r * v };
    }
    acc * step
}

impl Bump {
    pub fn new(n: usize, radius: f64) -> Self {
        Bump { n, radius, scale: 1.0 }
    }

    /// Bump with `int = 1`.
    pub fn unit_mass(n: usize, radius: f64) -> Self {
        let mass = bump_mass(n) * radius.powi(n as i32);
        Bump { n, radius, scale: 1.0 / mass }
    }
}

impl Profile for Bump {
    fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().take(self.n).map(|v| v * v).sum::<f64>() / (self.radius * self.radius);
        if r2 < 1.0 {
            self.scale * (1.0 / (r2 - 1.0)).exp()
        } else {
            0.0
        }
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// Tensor cut-off equal to 1 on `[-inner, inner]^n` and vanishing outside
/// `(-outer, outer)^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plateau {
    pub n: usize,
    pub inner: f64,
    pub outer: f64,
}

impl Plateau {
    /// The standard cut-off: 1 on `Q(0,1)` and supported in `Q(0,2)`.
    pub fn standard(n: usize) -> Self {
        Plateau { n, inner: 0.5, outer: 1.0 }
    }

    pub fn factor(&self, t: f64) -> f64 {
        smooth_step((self.outer - t.abs()) / (self.outer - self.inner))
    }
}

impl Profile for Plateau {
    fn eval(&self, x: &[f64]) -> f64 {
        x.iter().take(self.n).map(|t| self.factor(*t)).product()
    }

    fn support_radius(&self) -> f64 {
        self.outer
    }
}

/// Wraps a closure as a profile with a declared support radius.
pub struct FnProfile<F> {
    pub f: F,
    pub radius: f64,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Profile for FnProfile<F> {
    fn eval(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| v.abs() > self.radius) {
            0.0
        } else {
            (self.f)(x)
        }
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}
