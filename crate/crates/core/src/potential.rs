//! Scaled pseudo-potential of growth (the homeostatic surface) and its
//! spectral derivative.
//!
//! The potential acts on the principal values of the driving force. Two
//! structurally identical neuron families contribute: one on the principal
//! stresses `sigma_i` (descending), one on the principal shears
//! `tau_1 = (sigma1 - sigma3)/2`, `tau_2 = (sigma1 - sigma2)/2`,
//! `tau_3 = (sigma2 - sigma3)/2`. Each family sums three activations,
//!
//! ```text
//! w1 * max(-x, 0) + w2 * ln cosh(w3 * x) + w4 * max(x, 0),
//! ```
//!
//! with `max(-x, 0)` replaceable by `|x|` (activation-mode variant). All
//! weights are non-negative, which makes the potential convex, zero at zero
//! and non-negative: a growth surface with no elastic interior.
//!
//! Kink convention: the derivative of `max(x, 0)` at `x = 0` is taken as 1
//! and that of `max(-x, 0)` as -1 (ties activate, matching the gradient
//! semantics of the reference training stack), while `|x|` gets 0. The
//! tie-active choice is load-bearing: it lets growth start from the
//! stress-free virgin state instead of freezing it into a fixed point.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{assemble, spec_t, Spectral3, SymTensor3};

/// Which activation replaces the first neuron of each family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ActivationMode {
    /// max(-x, 0): compression-sensitive gate (reference default).
    #[default]
    NegMax,
    /// |x|: symmetric gate variant.
    Abs,
}

/// Weights of the pseudo-potential, all non-negative.
///
/// `ws*` act on principal stresses, `wt*` on principal shears; the `*3`
/// entries are inner shape weights of the ln cosh neuron. `weta` is the
/// scaled relaxation weight of the rate equation (used by the material-point
/// residual, not by the potential value itself).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialWeights<T: Real = f64> {
    pub ws1: T,
    pub ws2: T,
    pub ws3: T,
    pub ws4: T,
    pub wt1: T,
    pub wt2: T,
    pub wt3: T,
    pub wt4: T,
    pub weta: T,
    pub mode: ActivationMode,
}

impl PotentialWeights<f64> {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            ("ws1", self.ws1),
            ("ws2", self.ws2),
            ("ws3", self.ws3),
            ("ws4", self.ws4),
            ("wt1", self.wt1),
            ("wt2", self.wt2),
            ("wt3", self.wt3),
            ("wt4", self.wt4),
            ("weta", self.weta),
        ];
        for (name, v) in vals {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "potential weight {name} must be finite"
                )));
            }
            if v < 0.0 {
                return Err(Error::Domain(format!(
                    "potential weight {name} must be non-negative (got {v})"
                )));
            }
        }
        Ok(())
    }

    pub fn lift<T: Real>(&self) -> PotentialWeights<T> {
        PotentialWeights {
            ws1: T::from_f64(self.ws1),
            ws2: T::from_f64(self.ws2),
            ws3: T::from_f64(self.ws3),
            ws4: T::from_f64(self.ws4),
            wt1: T::from_f64(self.wt1),
            wt2: T::from_f64(self.wt2),
            wt3: T::from_f64(self.wt3),
            wt4: T::from_f64(self.wt4),
            weta: T::from_f64(self.weta),
            mode: self.mode,
        }
    }
}

/// Overflow-safe ln cosh: |y| - ln 2 + ln(1 + e^(-2|y|)).
///
/// Exactly zero at y = 0 (short-circuited; the derivative there is zero
/// too, so dropping dual payload is exact).
pub(crate) fn ln_cosh<T: Real>(y: T) -> T {
    if y.re() == 0.0 {
        return T::zero();
    }
    let a = y.abs_sg();
    a - T::from_f64(std::f64::consts::LN_2) + (-(a + a)).exp().ln_1p()
}

/// One three-neuron activation family.
struct Family<T: Real> {
    w1: T,
    w2: T,
    w3: T,
    w4: T,
    mode: ActivationMode,
}

impl<T: Real> Family<T> {
    fn value(&self, x: T) -> T {
        let first = match self.mode {
            ActivationMode::NegMax => x.relu_neg(),
            ActivationMode::Abs => x.abs_sg(),
        };
        self.w1 * first + self.w2 * ln_cosh(self.w3 * x) + self.w4 * x.relu_pos()
    }

    /// First derivative; the gate slopes are piecewise constant, so they
    /// enter as payload-free constants (tie-active at the kinks).
    fn deriv(&self, x: T) -> T {
        let first = match self.mode {
            ActivationMode::NegMax => {
                if x.re() <= 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            ActivationMode::Abs => {
                if x.re() > 0.0 {
                    1.0
                } else if x.re() < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        };
        let pos = if x.re() >= 0.0 { 1.0 } else { 0.0 };
        self.w1 * T::from_f64(first)
            + self.w2 * self.w3 * (self.w3 * x).tanh()
            + self.w4 * T::from_f64(pos)
    }

    /// Curvature of the smooth (ln cosh) neuron only; the gates contribute
    /// no curvature away from their kinks.
    fn curvature(&self, x: T) -> T {
        let t = (self.w3 * x).tanh();
        self.w2 * self.w3 * self.w3 * (T::one() - t * t)
    }
}

impl<T: Real> PotentialWeights<T> {
    fn sigma_family(&self) -> Family<T> {
        Family {
            w1: self.ws1,
            w2: self.ws2,
            w3: self.ws3,
            w4: self.ws4,
            mode: self.mode,
        }
    }

    fn tau_family(&self) -> Family<T> {
        Family {
            w1: self.wt1,
            w2: self.wt2,
            w3: self.wt3,
            w4: self.wt4,
            mode: self.mode,
        }
    }
}

/// Principal stresses (descending), principal shears and eigenprojections
/// of a driving-force tensor.
#[derive(Clone, Debug)]
pub struct PrincipalStressState {
    /// sigma1 >= sigma2 >= sigma3.
    pub sigma: [f64; 3],
    /// tau1 = (s1-s3)/2, tau2 = (s1-s2)/2, tau3 = (s2-s3)/2, all >= 0.
    pub tau: [f64; 3],
    spec: Spectral3,
}

impl PrincipalStressState {
    /// Eigenprojection n_i (x) n_i belonging to sigma[i].
    pub fn projection(&self, i: usize) -> SymTensor3<f64> {
        self.spec.projection(i)
    }
}

pub fn principal_state(sigma_bar: &SymTensor3<f64>) -> Result<PrincipalStressState> {
    let spec = sigma_bar.eig_sym()?;
    let s = spec.lam;
    Ok(PrincipalStressState {
        sigma: s,
        tau: [
            0.5 * (s[0] - s[2]),
            0.5 * (s[0] - s[1]),
            0.5 * (s[1] - s[2]),
        ],
        spec,
    })
}

fn shears<T: Real>(s: &[T; 3]) -> [T; 3] {
    let half = T::from_f64(0.5);
    [
        (s[0] - s[2]) * half,
        (s[0] - s[1]) * half,
        (s[1] - s[2]) * half,
    ]
}

/// Scaled pseudo-potential value; >= 0, exactly 0 at zero stress.
pub fn phi_hat<T: Real>(sigma_bar: &SymTensor3<T>, w: &PotentialWeights<T>) -> Result<T> {
    let spec = spec_t(sigma_bar)?;
    let s = spec.lam;
    let tau = shears(&s);
    let fs = w.sigma_family();
    let ft = w.tau_family();
    Ok(fs.value(s[0]) + fs.value(s[1]) + fs.value(s[2])
        + ft.value(tau[0]) + ft.value(tau[1]) + ft.value(tau[2]))
}

/// Derivative of the potential with respect to the driving force: the flow
/// direction of growth. Coaxial with the input; the shear-family part is
/// trace-free by construction (its third coefficient is the negated sum of
/// the first two).
///
/// Shear coefficients are assigned per eigen-slot in the stable descending
/// order without intra-group averaging. At coincident eigenvalues this picks
/// one member of the subdifferential fan deterministically (laboratory-axis
/// tie order); any selection is admissible for the convex spectral function,
/// and this one keeps the uniaxial growth mode alive at sigma2 = sigma3.
pub fn dphihat_dsigma<T: Real>(
    sigma_bar: &SymTensor3<T>,
    w: &PotentialWeights<T>,
) -> Result<SymTensor3<T>> {
    let spec = spec_t(sigma_bar)?;
    let s = spec.lam;
    let tau = shears(&s);
    let fs = w.sigma_family();
    let ft = w.tau_family();
    let half = T::from_f64(0.5);
    let t = [ft.deriv(tau[0]), ft.deriv(tau[1]), ft.deriv(tau[2])];
    let ct0 = (t[0] + t[1]) * half;
    let ct1 = (t[2] - t[1]) * half;
    let ct = [ct0, ct1, -(ct0 + ct1)];
    let c = [
        fs.deriv(s[0]) + ct[0],
        fs.deriv(s[1]) + ct[1],
        fs.deriv(s[2]) + ct[2],
    ];
    Ok(assemble(&spec, c, |i, j| {
        if spec.grouped(i, j) {
            // Smooth-limit divided difference across a degenerate pair:
            // ln cosh curvature of the sigma neuron at the common stress,
            // plus the vanishing-shear and cross-shear curvature terms of
            // the tau family. The gate kinks contribute a divergent
            // subdifferential fan here and are deliberately dropped; exact
            // coaxial protocols never consult this branch.
            let sm = (s[i] + s[j]) * half;
            let k = 3 - i - j;
            let tau_other = ((sm - s[k]) * half).abs_sg();
            fs.curvature(sm)
                + ft.curvature(T::zero()) * half
                + ft.curvature(tau_other) * T::from_f64(0.25)
        } else {
            (c[i] - c[j]) / (s[i] - s[j])
        }
    }))
}
