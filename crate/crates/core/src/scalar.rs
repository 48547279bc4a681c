//! Scalar abstraction for running the engine in plain `f64` or in
//! forward-mode dual arithmetic.
//!
//! Every constitutive formula in this crate is written once, generically over
//! [`Real`]. Instantiated with `f64` it is the production path; instantiated
//! with [`Dual`] it propagates directional derivatives through the exact same
//! arithmetic, which is what the discovery module uses to differentiate a
//! full recurrent rollout with respect to the model weights.
//!
//! Kink conventions are part of the scalar contract so that value and
//! derivative paths can never disagree:
//! - `relu_pos` is max(x, 0) with derivative 1 at x = 0 (ties activate),
//! - `relu_neg` is max(-x, 0) with derivative -1 at x = 0,
//! - `abs_sg` is |x| with derivative 0 at x = 0.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar field the engine is generic over.
///
/// `re()` exposes the primal value; all branch decisions (comparisons,
/// eigenvalue ordering, convergence checks) are taken on primal values only.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Primal (value) part.
    fn re(self) -> f64;
    /// True when value and every derivative payload are exactly zero.
    fn is_exact_zero(self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn tanh(self) -> Self;
    /// self^e for self > 0; both base and exponent may carry derivatives.
    fn powf(self, e: Self) -> Self;

    /// |x| with subgradient 0 at x = 0.
    fn abs_sg(self) -> Self;
    /// max(x, 0) with subgradient 1 at x = 0.
    fn relu_pos(self) -> Self;
    /// max(-x, 0) with subgradient -1 at x = 0.
    fn relu_neg(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn is_exact_zero(self) -> bool {
        self == 0.0
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
    #[inline]
    fn abs_sg(self) -> Self {
        self.abs()
    }
    #[inline]
    fn relu_pos(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn relu_neg(self) -> Self {
        if self < 0.0 {
            -self
        } else {
            0.0
        }
    }
}

/// Forward-mode dual number with an `N`-wide derivative payload.
///
/// `re` is the value, `im[k]` the derivative along the k-th seed direction.
/// One rollout with `N` seeds yields the full gradient in a single pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub im: [f64; N],
}

impl<const N: usize> Dual<N> {
    #[inline]
    pub fn constant(re: f64) -> Self {
        Dual { re, im: [0.0; N] }
    }

    /// Value `re` seeded with derivative 1 along direction `k`.
    #[inline]
    pub fn seeded(re: f64, k: usize) -> Self {
        let mut im = [0.0; N];
        im[k] = 1.0;
        Dual { re, im }
    }

    /// Value `re` with an explicit derivative payload.
    #[inline]
    pub fn with_grad(re: f64, im: [f64; N]) -> Self {
        Dual { re, im }
    }

    /// Applies f(re) with chain factor df: im[k] <- df * im[k].
    #[inline]
    fn lift(self, f: f64, df: f64) -> Self {
        let mut im = [0.0; N];
        for k in 0..N {
            im[k] = df * self.im[k];
        }
        Dual { re: f, im }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let mut im = [0.0; N];
        for k in 0..N {
            im[k] = self.im[k] + rhs.im[k];
        }
        Dual {
            re: self.re + rhs.re,
            im,
        }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let mut im = [0.0; N];
        for k in 0..N {
            im[k] = self.im[k] - rhs.im[k];
        }
        Dual {
            re: self.re - rhs.re,
            im,
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut im = [0.0; N];
        for k in 0..N {
            im[k] = self.im[k] * rhs.re + self.re * rhs.im[k];
        }
        Dual {
            re: self.re * rhs.re,
            im,
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.re;
        let q = self.re * inv;
        let mut im = [0.0; N];
        for k in 0..N {
            im[k] = (self.im[k] - q * rhs.im[k]) * inv;
        }
        Dual { re: q, im }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut im = [0.0; N];
        for k in 0..N {
            im[k] = -self.im[k];
        }
        Dual { re: -self.re, im }
    }
}

impl<const N: usize> Real for Dual<N> {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn is_exact_zero(self) -> bool {
        self.re == 0.0 && self.im.iter().all(|&d| d == 0.0)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.lift(r, 0.5 / r)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.lift(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.lift(self.re.ln(), 1.0 / self.re)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        self.lift(self.re.ln_1p(), 1.0 / (1.0 + self.re))
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.lift(t, 1.0 - t * t)
    }
    #[inline]
    fn powf(self, e: Self) -> Self {
        // d(a^b) = a^b * (b/a * da + ln(a) * db), valid for a > 0.
        let v = self.re.powf(e.re);
        let fa = e.re * self.re.powf(e.re - 1.0);
        let fb = v * self.re.ln();
        let mut im = [0.0; N];
        for k in 0..N {
            im[k] = fa * self.im[k] + fb * e.im[k];
        }
        Dual { re: v, im }
    }
    #[inline]
    fn abs_sg(self) -> Self {
        if self.re > 0.0 {
            self
        } else if self.re < 0.0 {
            -self
        } else {
            Dual::constant(0.0)
        }
    }
    #[inline]
    fn relu_pos(self) -> Self {
        if self.re >= 0.0 {
            // Value is x (0 at the kink); tangent follows the active branch.
            Dual {
                re: self.re.max(0.0),
                im: self.im,
            }
        } else {
            Dual::constant(0.0)
        }
    }
    #[inline]
    fn relu_neg(self) -> Self {
        if self.re <= 0.0 {
            Dual {
                re: (-self.re).max(0.0),
                im: { (-self).im },
            }
        } else {
            Dual::constant(0.0)
        }
    }
}
