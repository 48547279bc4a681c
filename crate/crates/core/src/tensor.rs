//! Exact spectral algebra on symmetric 3x3 tensors.
//!
//! [`SymTensor3`] stores six independent components and is the universal
//! value type of the engine: deformation, growth state, driving force and
//! flow directions are all symmetric second-order tensors. The module
//! provides closed-form determinant/inverse, a robust eigensolver
//! (closed-form characteristic polynomial with an iterative Jacobi fallback)
//! and spectral tensor functions (exp, sqrt) built on eigenprojections.
//!
//! Eigenvalues are always reported in descending order. Near-degenerate
//! eigenvalues (gap below `GROUP_TOL_REL * ||a||`) are grouped into a shared
//! eigenspace so that isotropic-function derivatives remain well defined.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative eigenvalue gap below which two eigenvalues share an eigenspace.
pub const GROUP_TOL_REL: f64 = 1e-10;

/// Eigenvalues above this make the spectral exponential overflow-prone.
pub const EXP_ARG_LIMIT: f64 = 300.0;

/// Relative gap below which the closed-form eigenvector extraction is
/// considered ill-conditioned and the Jacobi path is taken instead.
const CARDANO_GAP_REL: f64 = 1e-8;

/// Relative reconstruction residual accepted from the closed-form path.
const CARDANO_QUALITY_REL: f64 = 1e-13;

/// Off-diagonal index pairs of the eigenbasis representation.
const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Symmetric second-order tensor in three dimensions, six stored components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor3<T: Real = f64> {
    pub a11: T,
    pub a22: T,
    pub a33: T,
    pub a12: T,
    pub a13: T,
    pub a23: T,
}

impl<T: Real> SymTensor3<T> {
    #[inline]
    pub fn new(a11: T, a22: T, a33: T, a12: T, a13: T, a23: T) -> Self {
        SymTensor3 {
            a11,
            a22,
            a33,
            a12,
            a13,
            a23,
        }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::from_diag([T::zero(), T::zero(), T::zero()])
    }

    #[inline]
    pub fn identity() -> Self {
        Self::from_diag([T::one(), T::one(), T::one()])
    }

    #[inline]
    pub fn from_diag(d: [T; 3]) -> Self {
        SymTensor3 {
            a11: d[0],
            a22: d[1],
            a33: d[2],
            a12: T::zero(),
            a13: T::zero(),
            a23: T::zero(),
        }
    }

    #[inline]
    pub fn diag(&self) -> [T; 3] {
        [self.a11, self.a22, self.a33]
    }

    /// Promotes an `f64` tensor into any scalar type (constants, no payload).
    pub fn lift(s: &SymTensor3<f64>) -> Self {
        SymTensor3 {
            a11: T::from_f64(s.a11),
            a22: T::from_f64(s.a22),
            a33: T::from_f64(s.a33),
            a12: T::from_f64(s.a12),
            a13: T::from_f64(s.a13),
            a23: T::from_f64(s.a23),
        }
    }

    /// Primal (value) part of every component.
    pub fn primal(&self) -> SymTensor3<f64> {
        SymTensor3 {
            a11: self.a11.re(),
            a22: self.a22.re(),
            a33: self.a33.re(),
            a12: self.a12.re(),
            a13: self.a13.re(),
            a23: self.a23.re(),
        }
    }

    #[inline]
    pub fn tr(&self) -> T {
        self.a11 + self.a22 + self.a33
    }

    pub fn det(&self) -> T {
        self.a11 * (self.a22 * self.a33 - self.a23 * self.a23)
            - self.a12 * (self.a12 * self.a33 - self.a23 * self.a13)
            + self.a13 * (self.a12 * self.a23 - self.a22 * self.a13)
    }

    /// Deviatoric part a - tr(a)/3 * I.
    pub fn dev(&self) -> Self {
        let third = self.tr() / T::from_f64(3.0);
        SymTensor3 {
            a11: self.a11 - third,
            a22: self.a22 - third,
            a33: self.a33 - third,
            a12: self.a12,
            a13: self.a13,
            a23: self.a23,
        }
    }

    /// Double contraction a : b.
    pub fn dot(&self, b: &Self) -> T {
        let two = T::from_f64(2.0);
        self.a11 * b.a11
            + self.a22 * b.a22
            + self.a33 * b.a33
            + two * (self.a12 * b.a12 + self.a13 * b.a13 + self.a23 * b.a23)
    }

    /// Frobenius norm of the primal part.
    pub fn norm(&self) -> f64 {
        self.primal().dot(&self.primal()).sqrt()
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        SymTensor3 {
            a11: self.a11 * s,
            a22: self.a22 * s,
            a33: self.a33 * s,
            a12: self.a12 * s,
            a13: self.a13 * s,
            a23: self.a23 * s,
        }
    }

    /// True when all off-diagonal components are exactly zero, including any
    /// derivative payload. Diagonal tensors take an exact spectral fast path.
    pub fn is_diagonal_exact(&self) -> bool {
        self.a12.is_exact_zero() && self.a13.is_exact_zero() && self.a23.is_exact_zero()
    }

    pub fn to_full(&self) -> [[T; 3]; 3] {
        [
            [self.a11, self.a12, self.a13],
            [self.a12, self.a22, self.a23],
            [self.a13, self.a23, self.a33],
        ]
    }

    fn from_full_symmetrized(m: &[[T; 3]; 3]) -> Self {
        let half = T::from_f64(0.5);
        SymTensor3 {
            a11: m[0][0],
            a22: m[1][1],
            a33: m[2][2],
            a12: (m[0][1] + m[1][0]) * half,
            a13: (m[0][2] + m[2][0]) * half,
            a23: (m[1][2] + m[2][1]) * half,
        }
    }

    /// Congruence transform x * a * x for symmetric x (self) and a.
    pub fn congruence(&self, a: &Self) -> Self {
        let x = self.to_full();
        let af = a.to_full();
        let xa = mul3(&x, &af);
        let xax = mul3(&xa, &x);
        Self::from_full_symmetrized(&xax)
    }

    /// Inverse of a symmetric positive definite tensor (adjugate over det).
    ///
    /// Positive definiteness is checked on the primal part via Sylvester's
    /// criterion; failing it is a domain error.
    pub fn inv_spd(&self) -> Result<Self> {
        let p = self.primal();
        let m1 = p.a11;
        let m2 = p.a11 * p.a22 - p.a12 * p.a12;
        let m3 = p.det();
        if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
            return Err(Error::Domain(format!(
                "inv_spd requires a positive definite tensor (leading minors {m1:e}, {m2:e}, {m3:e})"
            )));
        }
        let det = self.det();
        let c11 = self.a22 * self.a33 - self.a23 * self.a23;
        let c22 = self.a11 * self.a33 - self.a13 * self.a13;
        let c33 = self.a11 * self.a22 - self.a12 * self.a12;
        let c12 = self.a13 * self.a23 - self.a12 * self.a33;
        let c13 = self.a12 * self.a23 - self.a13 * self.a22;
        let c23 = self.a12 * self.a13 - self.a11 * self.a23;
        let inv = SymTensor3::new(c11, c22, c33, c12, c13, c23);
        Ok(inv.scale(T::one() / det))
    }

    fn check_finite(&self) -> Result<()> {
        let p = self.primal();
        let comps = [p.a11, p.a22, p.a33, p.a12, p.a13, p.a23];
        if comps.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "tensor has non-finite components".to_string(),
            ));
        }
        Ok(())
    }

    /// Spectral exponential exp(a) = sum exp(lam_i) P_i.
    ///
    /// Eigenvalues above [`EXP_ARG_LIMIT`] are rejected as a range error so
    /// the caller can shrink its step instead of propagating infinities.
    pub fn exp_sym(&self) -> Result<SymTensor3<T>> {
        let spec = spec_t(self)?;
        for lam in &spec.lam {
            if lam.re() > EXP_ARG_LIMIT {
                return Err(Error::Range(format!(
                    "exp_sym eigenvalue {:e} exceeds limit {EXP_ARG_LIMIT}",
                    lam.re()
                )));
            }
        }
        let g = [spec.lam[0].exp(), spec.lam[1].exp(), spec.lam[2].exp()];
        Ok(assemble(&spec, g, |i, j| {
            if spec.grouped(i, j) {
                // Limit of the divided difference: exp'(mean).
                ((spec.lam[i] + spec.lam[j]) * T::from_f64(0.5)).exp()
            } else {
                (g[i] - g[j]) / (spec.lam[i] - spec.lam[j])
            }
        }))
    }

    /// Spectral square root of a symmetric positive definite tensor.
    pub fn sqrt_spd(&self) -> Result<SymTensor3<T>> {
        let spec = spec_t(self)?;
        if spec.lam[2].re() <= 0.0 {
            return Err(Error::Domain(format!(
                "sqrt_spd requires positive eigenvalues (smallest {:e})",
                spec.lam[2].re()
            )));
        }
        let g = [spec.lam[0].sqrt(), spec.lam[1].sqrt(), spec.lam[2].sqrt()];
        Ok(assemble(&spec, g, |i, j| {
            if spec.grouped(i, j) {
                let m = ((spec.lam[i] + spec.lam[j]) * T::from_f64(0.5)).sqrt();
                T::one() / (m + m)
            } else {
                (g[i] - g[j]) / (spec.lam[i] - spec.lam[j])
            }
        }))
    }
}

impl<T: Real> std::ops::Add for SymTensor3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        SymTensor3 {
            a11: self.a11 + rhs.a11,
            a22: self.a22 + rhs.a22,
            a33: self.a33 + rhs.a33,
            a12: self.a12 + rhs.a12,
            a13: self.a13 + rhs.a13,
            a23: self.a23 + rhs.a23,
        }
    }
}

impl<T: Real> std::ops::Sub for SymTensor3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        SymTensor3 {
            a11: self.a11 - rhs.a11,
            a22: self.a22 - rhs.a22,
            a33: self.a33 - rhs.a33,
            a12: self.a12 - rhs.a12,
            a13: self.a13 - rhs.a13,
            a23: self.a23 - rhs.a23,
        }
    }
}

fn mul3<T: Real>(a: &[[T; 3]; 3], b: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    m
}

/// Eigendecomposition of an `f64` symmetric tensor.
///
/// Eigenvalues are sorted descending; ties keep laboratory axis order, which
/// makes the eigenframe at degenerate states deterministic.
#[derive(Clone, Debug)]
pub struct Spectral3 {
    /// Eigenvalues, descending.
    pub lam: [f64; 3],
    /// Group labels: equal labels mark a shared (near-degenerate) eigenspace.
    pub groups: [u8; 3],
    vecs: [[f64; 3]; 3],
}

impl Spectral3 {
    /// i-th eigenprojection n_i (x) n_i.
    pub fn projection(&self, i: usize) -> SymTensor3<f64> {
        let v = self.vecs[i];
        SymTensor3::new(
            v[0] * v[0],
            v[1] * v[1],
            v[2] * v[2],
            v[0] * v[1],
            v[0] * v[2],
            v[1] * v[2],
        )
    }

    /// i-th unit eigenvector.
    pub fn eigenvector(&self, i: usize) -> [f64; 3] {
        self.vecs[i]
    }

    /// sum lam_i P_i; equals the input up to roundoff.
    pub fn reconstruct(&self) -> SymTensor3<f64> {
        let mut m = SymTensor3::zero();
        for i in 0..3 {
            m = m + self.projection(i).scale(self.lam[i]);
        }
        m
    }

    pub fn grouped(&self, i: usize, j: usize) -> bool {
        self.groups[i] == self.groups[j]
    }
}

impl SymTensor3<f64> {
    /// Full eigendecomposition with degeneracy grouping.
    ///
    /// Closed-form characteristic-polynomial solve on the fast path; Jacobi
    /// rotations when the closed form is ill-conditioned (small eigenvalue
    /// gaps or a failed reconstruction check).
    pub fn eig_sym(&self) -> Result<Spectral3> {
        self.check_finite()?;
        let norm = self.norm();
        if norm == 0.0 {
            return Ok(Spectral3 {
                lam: [0.0; 3],
                groups: [0; 3],
                vecs: AXES,
            });
        }
        if self.is_diagonal_exact() {
            return Ok(spectral_from_diag(self.diag(), norm));
        }

        let lam = cardano_eigenvalues(self);
        let min_gap = (lam[0] - lam[1]).min(lam[1] - lam[2]);
        if min_gap > CARDANO_GAP_REL * norm {
            if let Some(vecs) = cardano_eigenvectors(self, &lam) {
                let spec = Spectral3 {
                    lam,
                    groups: group_labels(&lam, norm),
                    vecs,
                };
                let res = (spec.reconstruct() - *self).norm();
                if res <= CARDANO_QUALITY_REL * norm {
                    return Ok(spec);
                }
            }
        }
        Ok(jacobi_eig(self, norm))
    }
}

const AXES: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn group_labels(lam: &[f64; 3], norm: f64) -> [u8; 3] {
    let tol = GROUP_TOL_REL * norm;
    let mut groups = [0u8; 3];
    for i in 1..3 {
        groups[i] = if lam[i - 1] - lam[i] <= tol {
            groups[i - 1]
        } else {
            groups[i - 1] + 1
        };
    }
    groups
}

/// Stable descending sort of three (value, axis) pairs; ties keep axis order.
fn sorted_axis_order(d: &[f64; 3]) -> [usize; 3] {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap());
    idx
}

fn spectral_from_diag(d: [f64; 3], norm: f64) -> Spectral3 {
    let order = sorted_axis_order(&d);
    let lam = [d[order[0]], d[order[1]], d[order[2]]];
    let mut vecs = [[0.0; 3]; 3];
    for i in 0..3 {
        vecs[i][order[i]] = 1.0;
    }
    Spectral3 {
        lam,
        groups: group_labels(&lam, norm),
        vecs,
    }
}

/// Eigenvalues by the trigonometric solution of the characteristic cubic.
fn cardano_eigenvalues(a: &SymTensor3<f64>) -> [f64; 3] {
    let q = a.tr() / 3.0;
    let p1 = a.a12 * a.a12 + a.a13 * a.a13 + a.a23 * a.a23;
    let d0 = a.a11 - q;
    let d1 = a.a22 - q;
    let d2 = a.a33 - q;
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q, q, q];
    }
    let b = SymTensor3::new(d0 / p, d1 / p, d2 / p, a.a12 / p, a.a13 / p, a.a23 / p);
    let r = (b.det() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let lam1 = q + 2.0 * p * phi.cos();
    let lam3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    // lam2 from the trace keeps the eigenvalue sum exact.
    let lam2 = 3.0 * q - lam1 - lam3;
    [lam1, lam2, lam3]
}

/// Eigenvectors via cross products of rows of (a - lam I).
///
/// Returns None when a cross product degenerates, signalling the caller to
/// fall back to Jacobi.
fn cardano_eigenvectors(a: &SymTensor3<f64>, lam: &[f64; 3]) -> Option<[[f64; 3]; 3]> {
    let v1 = null_direction(a, lam[0])?;
    let v3_raw = null_direction(a, lam[2])?;
    // Orthogonalize v3 against v1, then close the frame with a cross product.
    let d = dot3(&v3_raw, &v1);
    let mut v3 = [v3_raw[0] - d * v1[0], v3_raw[1] - d * v1[1], v3_raw[2] - d * v1[2]];
    let n3 = norm3(&v3);
    if n3 < 1e-6 {
        return None;
    }
    for c in &mut v3 {
        *c /= n3;
    }
    let v2 = cross3(&v3, &v1);
    Some([v1, v2, v3])
}

fn null_direction(a: &SymTensor3<f64>, lam: f64) -> Option<[f64; 3]> {
    let m = [
        [a.a11 - lam, a.a12, a.a13],
        [a.a12, a.a22 - lam, a.a23],
        [a.a13, a.a23, a.a33 - lam],
    ];
    let c01 = cross3(&m[0], &m[1]);
    let c02 = cross3(&m[0], &m[2]);
    let c12 = cross3(&m[1], &m[2]);
    let (n01, n02, n12) = (norm3(&c01), norm3(&c02), norm3(&c12));
    let (mut v, n) = if n01 >= n02 && n01 >= n12 {
        (c01, n01)
    } else if n02 >= n12 {
        (c02, n02)
    } else {
        (c12, n12)
    };
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    for c in &mut v {
        *c /= n;
    }
    Some(v)
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Cyclic Jacobi rotations; robust for any symmetric input.
fn jacobi_eig(t: &SymTensor3<f64>, norm: f64) -> Spectral3 {
    let mut a = t.to_full();
    let mut v = AXES;
    let stop = norm * norm * 1e-30;
    for _ in 0..30 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off <= stop {
            break;
        }
        for &(p, q) in PAIRS.iter() {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t_rot = if theta.abs() > 1e12 {
                1.0 / (2.0 * theta)
            } else {
                theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (t_rot * t_rot + 1.0).sqrt();
            let s = t_rot * c;
            // Apply the rotation R(p,q) on both sides of a, accumulate in v.
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for k in 0..3 {
                let vkp = v[k][p];
                let vkq = v[k][q];
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }
    let d = [a[0][0], a[1][1], a[2][2]];
    let order = sorted_axis_order(&d);
    let lam = [d[order[0]], d[order[1]], d[order[2]]];
    let mut vecs = [[0.0; 3]; 3];
    for i in 0..3 {
        // v holds eigenvectors as columns; export row i as the i-th vector.
        vecs[i] = [v[0][order[i]], v[1][order[i]], v[2][order[i]]];
    }
    Spectral3 {
        lam,
        groups: group_labels(&lam, norm),
        vecs,
    }
}

/// Spectral data of a tensor over any scalar type.
///
/// The eigenframe is computed on the primal part in `f64`; the scalar-typed
/// eigenvalues `lam` and residual off-diagonal couplings `off` carry any
/// derivative payload. `off` holds the eigenbasis components B_ij = n_i.A.n_j
/// for i < j with the primal part removed (it is eigensolver noise); for
/// plain `f64` tensors `off` is exactly zero and spectral functions reduce to
/// sum g_i P_i.
pub(crate) struct SpecT<T: Real> {
    pub lam: [T; 3],
    pub groups: [u8; 3],
    vecs: [[f64; 3]; 3],
    off: [T; 3],
}

impl<T: Real> SpecT<T> {
    pub fn grouped(&self, i: usize, j: usize) -> bool {
        self.groups[i] == self.groups[j]
    }
}

pub(crate) fn spec_t<T: Real>(a: &SymTensor3<T>) -> Result<SpecT<T>> {
    a.check_finite()?;
    let p = a.primal();
    let norm = p.norm();
    if a.is_diagonal_exact() {
        let order = sorted_axis_order(&[p.a11, p.a22, p.a33]);
        let d = a.diag();
        let lam = [d[order[0]], d[order[1]], d[order[2]]];
        let mut vecs = [[0.0; 3]; 3];
        for i in 0..3 {
            vecs[i][order[i]] = 1.0;
        }
        let plam = [lam[0].re(), lam[1].re(), lam[2].re()];
        return Ok(SpecT {
            lam,
            groups: group_labels(&plam, norm),
            vecs,
            off: [T::zero(); 3],
        });
    }
    let spec = p.eig_sym()?;
    // Rotate the full tensor into the primal eigenbasis: B = V^T A V.
    let full = a.to_full();
    let mut b = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let vi = spec.vecs[i];
            let vj = spec.vecs[j];
            let mut s = T::zero();
            for k in 0..3 {
                let mut row = T::zero();
                for l in 0..3 {
                    row = row + full[k][l] * T::from_f64(vj[l]);
                }
                s = s + T::from_f64(vi[k]) * row;
            }
            b[i][j] = s;
        }
    }
    let lam = [b[0][0], b[1][1], b[2][2]];
    // The primal off-diagonal is eigensolver roundoff; only the derivative
    // payload is physical.
    let strip = |x: T| x - T::from_f64(x.re());
    let off = [strip(b[0][1]), strip(b[0][2]), strip(b[1][2])];
    Ok(SpecT {
        lam,
        groups: spec.groups,
        vecs: spec.vecs,
        off,
    })
}

/// Assembles sum_i g_i P_i plus divided-difference couplings for the
/// derivative payload of the off-diagonal eigenbasis components.
///
/// `dd(i, j)` must return the divided difference (g_i - g_j)/(lam_i - lam_j)
/// or its limit on grouped pairs.
pub(crate) fn assemble<T: Real>(
    spec: &SpecT<T>,
    g: [T; 3],
    dd: impl Fn(usize, usize) -> T,
) -> SymTensor3<T> {
    let mut m = SymTensor3::zero();
    for i in 0..3 {
        let v = spec.vecs[i];
        let p = SymTensor3::new(
            T::from_f64(v[0] * v[0]),
            T::from_f64(v[1] * v[1]),
            T::from_f64(v[2] * v[2]),
            T::from_f64(v[0] * v[1]),
            T::from_f64(v[0] * v[2]),
            T::from_f64(v[1] * v[2]),
        );
        m = m + p.scale(g[i]);
    }
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        if spec.off[k].is_exact_zero() {
            continue;
        }
        let c = dd(i, j) * spec.off[k];
        let vi = spec.vecs[i];
        let vj = spec.vecs[j];
        let sym = SymTensor3::new(
            T::from_f64(2.0 * vi[0] * vj[0]),
            T::from_f64(2.0 * vi[1] * vj[1]),
            T::from_f64(2.0 * vi[2] * vj[2]),
            T::from_f64(vi[0] * vj[1] + vi[1] * vj[0]),
            T::from_f64(vi[0] * vj[2] + vi[2] * vj[0]),
            T::from_f64(vi[1] * vj[2] + vi[2] * vj[1]),
        );
        m = m + sym.scale(c);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn random_sym(rng: &mut ChaCha8Rng, scale: f64) -> SymTensor3<f64> {
        SymTensor3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    fn random_spd(rng: &mut ChaCha8Rng, scale: f64) -> SymTensor3<f64> {
        let a = random_sym(rng, scale);
        let f = a.to_full();
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    m[i][j] += f[i][k] * f[j][k];
                }
            }
        }
        SymTensor3::new(
            m[0][0] + 0.05 * scale * scale,
            m[1][1] + 0.05 * scale * scale,
            m[2][2] + 0.05 * scale * scale,
            m[0][1],
            m[0][2],
            m[1][2],
        )
    }

    #[test]
    fn eig_of_sorted_diagonal() {
        let a = SymTensor3::from_diag([3.0, 1.0, 2.0]);
        let s = a.eig_sym().unwrap();
        assert_eq!(s.lam, [3.0, 2.0, 1.0]);
        // Projections are the axis projectors matching the sort.
        assert_eq!(s.projection(0).a11, 1.0);
        assert_eq!(s.projection(1).a33, 1.0);
        assert_eq!(s.projection(2).a22, 1.0);
        assert_eq!(s.groups, [0, 1, 2]);
    }

    #[test]
    fn eig_of_identity_groups_everything() {
        let s = SymTensor3::identity().eig_sym().unwrap();
        assert_eq!(s.lam, [1.0, 1.0, 1.0]);
        assert_eq!(s.groups, [0, 0, 0]);
        let sum = s.projection(0) + s.projection(1) + s.projection(2);
        assert!((sum - SymTensor3::identity()).norm() < 1e-15);
    }

    #[test]
    fn eig_groups_near_degenerate_pair() {
        let a = SymTensor3::from_diag([1.0, 1.0 + 1e-12, 2.0]);
        let s = a.eig_sym().unwrap();
        assert_eq!(s.groups, [0, 1, 1]);
    }

    #[test]
    fn eig_ties_keep_axis_order() {
        let a = SymTensor3::from_diag([2.0, 2.0, 1.0]);
        let s = a.eig_sym().unwrap();
        // First eigenvector is axis 1, second axis 2: a deterministic frame.
        assert_eq!(s.eigenvector(0), [1.0, 0.0, 0.0]);
        assert_eq!(s.eigenvector(1), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn eig_reconstructs_random_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let a = random_sym(&mut rng, 3.0);
            let s = a.eig_sym().unwrap();
            let norm = a.norm().max(1e-300);
            assert!(((s.reconstruct() - a).norm()) <= 1e-12 * norm);
            assert!(s.lam[0] >= s.lam[1] && s.lam[1] >= s.lam[2]);
        }
    }

    #[test]
    fn eig_projections_form_orthogonal_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = random_sym(&mut rng, 2.0);
            let s = a.eig_sym().unwrap();
            let mut sum = SymTensor3::zero();
            for i in 0..3 {
                let pi = s.projection(i);
                sum = sum + pi;
                // Idempotent: P_i P_i = P_i.
                let pp = pi.congruence(&pi);
                assert!((pp - pi).norm() < 1e-12);
                for j in (i + 1)..3 {
                    // Mutually orthogonal: P_i : P_j = 0.
                    assert!(pi.dot(&s.projection(j)).abs() < 1e-12);
                }
            }
            assert!((sum - SymTensor3::identity()).norm() < 1e-12);
        }
    }

    #[test]
    fn eig_rejects_non_finite() {
        let a = SymTensor3::new(f64::NAN, 1.0, 1.0, 0.0, 0.0, 0.0);
        assert!(matches!(a.eig_sym(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn characteristic_invariants_match_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let a = random_sym(&mut rng, 2.0);
            let s = a.eig_sym().unwrap();
            let [l1, l2, l3] = s.lam;
            assert!(close(l1 + l2 + l3, a.tr(), 1e-12));
            assert!(close(l1 * l2 * l3, a.det(), 1e-10));
            let full = a.to_full();
            let mut tr_sq = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    tr_sq += full[i][k] * full[k][i];
                }
            }
            let i2 = 0.5 * (a.tr() * a.tr() - tr_sq);
            assert!(close(l1 * l2 + l1 * l3 + l2 * l3, i2, 1e-10));
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = SymTensor3::<f64>::zero().exp_sym().unwrap();
        assert!((e - SymTensor3::identity()).norm() == 0.0);
    }

    #[test]
    fn exp_of_diagonal() {
        let a = SymTensor3::from_diag([2f64.ln(), 0.0, -(2f64.ln())]);
        let e = a.exp_sym().unwrap();
        assert!(close(e.a11, 2.0, 1e-15));
        assert!(close(e.a22, 1.0, 1e-15));
        assert!(close(e.a33, 0.5, 1e-15));
        assert_eq!(e.a12, 0.0);
    }

    #[test]
    fn exp_overflow_is_a_range_error() {
        let a = SymTensor3::from_diag([301.0, 0.0, 0.0]);
        assert!(matches!(a.exp_sym(), Err(Error::Range(_))));
    }

    #[test]
    fn sqrt_of_diagonal_and_identity() {
        let a = SymTensor3::from_diag([4.0, 9.0, 16.0]);
        let s = a.sqrt_spd().unwrap();
        assert!(close(s.a11, 2.0, 1e-15));
        assert!(close(s.a22, 3.0, 1e-15));
        assert!(close(s.a33, 4.0, 1e-15));
        let i = SymTensor3::<f64>::identity().sqrt_spd().unwrap();
        assert!((i - SymTensor3::identity()).norm() == 0.0);
    }

    #[test]
    fn sqrt_rejects_indefinite_input() {
        let a = SymTensor3::from_diag([1.0, -0.1, 2.0]);
        assert!(matches!(a.sqrt_spd(), Err(Error::Domain(_))));
    }

    #[test]
    fn sqrt_squares_back_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = random_spd(&mut rng, 1.5);
            let s = a.sqrt_spd().unwrap();
            let back = s.congruence(&SymTensor3::identity());
            // s * I * s = s^2
            assert!(((back - a).norm()) <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn inv_spd_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let a = random_spd(&mut rng, 1.2);
            let inv = a.inv_spd().unwrap();
            let prod = mul3(&inv.to_full(), &a.to_full());
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((prod[i][j] - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn inv_spd_rejects_indefinite() {
        let a = SymTensor3::from_diag([1.0, 0.0, 1.0]);
        assert!(matches!(a.inv_spd(), Err(Error::Domain(_))));
        let b = SymTensor3::from_diag([-1.0, 1.0, 1.0]);
        assert!(matches!(b.inv_spd(), Err(Error::Domain(_))));
    }

    #[test]
    fn congruence_with_identity_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_sym(&mut rng, 2.0);
        let c = SymTensor3::identity().congruence(&a);
        assert!((c - a).norm() < 1e-15);
    }

    #[test]
    fn det_tr_dev_basics() {
        let a = SymTensor3::from_diag([2.0, 3.0, 4.0]);
        assert_eq!(a.det(), 24.0);
        assert_eq!(a.tr(), 9.0);
        assert_eq!(a.dev().tr(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let b = random_sym(&mut rng, 5.0);
            assert!(b.dev().tr().abs() <= 1e-14 * b.norm().max(1.0));
        }
    }

    #[test]
    fn dual_diagonal_fast_path_keeps_payload() {
        use crate::scalar::Dual;
        // Diagonal tensor whose 22-entry carries a derivative seed.
        let a = SymTensor3::<Dual<1>>::from_diag([
            Dual::constant(4.0),
            Dual::seeded(1.0, 0),
            Dual::constant(0.25),
        ]);
        let s = a.sqrt_spd().unwrap();
        // d sqrt(x)/dx at 1 = 0.5 stays on the 22 slot.
        assert_eq!(s.a22.re, 1.0);
        assert_eq!(s.a22.im[0], 0.5);
        assert_eq!(s.a11.im[0], 0.0);
    }
}
