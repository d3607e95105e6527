//! Q-tensor algebra: the traceless symmetric order parameter, material
//! constants, the co-rotating orthonormal basis, bulk potential and its
//! gradient, biaxiality, boundary data and the Oseen-Frank constant map.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Tolerance scale for symmetry/trace validation of a [`QTensor`].
pub const TENSOR_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("matrix is not symmetric: |A - A^t| = {0:.3e}")]
    NotSymmetric(f64),
    #[error("matrix is not traceless: |tr| = {0:.3e}")]
    NotTraceless(f64),
    #[error("entries are not finite")]
    NotFinite,
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("bulk constant {name} must satisfy {cond}, got {value}")]
    Bulk {
        name: &'static str,
        cond: &'static str,
        value: f64,
    },
    #[error("elastic constants violate Dirichlet coercivity: L = {l}, M = {m} (need L > 0 and L + 4M/3 > 0)")]
    Coercivity { l: f64, m: f64 },
    #[error("winding number k must be nonzero")]
    ZeroWinding,
    #[error("disk radius must be positive, got {0}")]
    BadRadius(f64),
}

/// Traceless symmetric 3x3 order parameter.
///
/// Stored as the full matrix; symmetry and tracelessness are checked on
/// construction and preserved by every operation in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QTensor(Matrix3<f64>);

impl QTensor {
    /// Validating constructor. The trace test is relative to the Frobenius
    /// norm so that large tensors are not rejected for benign rounding.
    pub fn new(m: Matrix3<f64>) -> Result<Self, TensorError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(TensorError::NotFinite);
        }
        let asym = (m - m.transpose()).norm();
        if asym > TENSOR_TOL * (1.0 + m.norm()) {
            return Err(TensorError::NotSymmetric(asym));
        }
        let tr = m.trace().abs();
        if tr > TENSOR_TOL * (1.0 + m.norm()) {
            return Err(TensorError::NotTraceless(tr));
        }
        // Remove the numerical dust so downstream identities hold exactly.
        let sym = (m + m.transpose()) * 0.5;
        let dev = sym - Matrix3::identity() * (sym.trace() / 3.0);
        Ok(QTensor(dev))
    }

    /// Symmetrize and remove the trace, then wrap. For inputs that are
    /// structurally symmetric/traceless up to rounding.
    pub fn project(m: Matrix3<f64>) -> Self {
        let sym = (m + m.transpose()) * 0.5;
        QTensor(sym - Matrix3::identity() * (sym.trace() / 3.0))
    }

    pub fn zero() -> Self {
        QTensor(Matrix3::zeros())
    }

    /// `s (n⊗n - I/3)` for a unit director `n`.
    pub fn uniaxial(s: f64, n: Vector3<f64>) -> Self {
        let n = n.normalize();
        QTensor::project((n * n.transpose()) * s - Matrix3::identity() * (s / 3.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Frobenius inner product tr(Q Q̃).
    pub fn dot(&self, other: &QTensor) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// tr(Q²) = |Q|².
    pub fn norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    /// tr(Q³).
    pub fn trace_cubed(&self) -> f64 {
        (self.0 * self.0 * self.0).trace()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut ev: Vec<f64> = self.0.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        [ev[0], ev[1], ev[2]]
    }

    /// Eigenvalues (ascending) together with the matching orthonormal frame,
    /// one eigenvector per column.
    pub fn eigen_frame(&self) -> ([f64; 3], Matrix3<f64>) {
        let eig = self.0.symmetric_eigen();
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals = [
            eig.eigenvalues[idx[0]],
            eig.eigenvalues[idx[1]],
            eig.eigenvalues[idx[2]],
        ];
        let vecs = Matrix3::from_columns(&[
            eig.eigenvectors.column(idx[0]).into_owned(),
            eig.eigenvectors.column(idx[1]).into_owned(),
            eig.eigenvectors.column(idx[2]).into_owned(),
        ]);
        (vals, vecs)
    }
}

impl std::ops::Add for QTensor {
    type Output = QTensor;
    fn add(self, rhs: QTensor) -> QTensor {
        QTensor(self.0 + rhs.0)
    }
}

impl std::ops::Sub for QTensor {
    type Output = QTensor;
    fn sub(self, rhs: QTensor) -> QTensor {
        QTensor(self.0 - rhs.0)
    }
}

impl std::ops::Mul<f64> for QTensor {
    type Output = QTensor;
    fn mul(self, rhs: f64) -> QTensor {
        QTensor(self.0 * rhs)
    }
}

impl std::ops::Neg for QTensor {
    type Output = QTensor;
    fn neg(self) -> QTensor {
        QTensor(-self.0)
    }
}

/// Material and geometry constants for one solve.
///
/// `a2`, `b2`, `c2` are the bulk coefficients (a², b², c² ≥ 0, c² > 0);
/// `l` and `m` are the two independent elastic constants of the reduced
/// elastic energy; `k` is the boundary winding number and `radius` the
/// disk radius.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaterialParams {
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub l: f64,
    pub m: f64,
    pub k: i32,
    pub radius: f64,
}

impl MaterialParams {
    pub fn new(
        a2: f64,
        b2: f64,
        c2: f64,
        l: f64,
        m: f64,
        k: i32,
        radius: f64,
    ) -> Result<Self, ParamError> {
        if !(c2 > 0.0) {
            return Err(ParamError::Bulk {
                name: "c2",
                cond: "c2 > 0",
                value: c2,
            });
        }
        if !(a2 >= 0.0) {
            return Err(ParamError::Bulk {
                name: "a2",
                cond: "a2 >= 0",
                value: a2,
            });
        }
        if !(b2 >= 0.0) {
            return Err(ParamError::Bulk {
                name: "b2",
                cond: "b2 >= 0",
                value: b2,
            });
        }
        if !(l > 0.0 && l + 4.0 * m / 3.0 > 0.0) {
            return Err(ParamError::Coercivity { l, m });
        }
        if k == 0 {
            return Err(ParamError::ZeroWinding);
        }
        if !(radius > 0.0) {
            return Err(ParamError::BadRadius(radius));
        }
        Ok(MaterialParams {
            a2,
            b2,
            c2,
            l,
            m,
            k,
            radius,
        })
    }

    /// Scalar order parameter of the uniaxial bulk minimizer,
    /// `s₊ = (b² + √(b⁴ + 24 a² c²)) / (4 c²)`.
    pub fn s_plus(&self) -> f64 {
        s_plus(self.a2, self.b2, self.c2)
    }

    /// Characteristic core length √(L / (a² + c² s₊²)); used to scale seeds.
    pub fn core_length(&self) -> f64 {
        let s = self.s_plus();
        (self.l / (self.a2 + self.c2 * s * s).max(f64::MIN_POSITIVE)).sqrt()
    }
}

pub fn s_plus(a2: f64, b2: f64, c2: f64) -> f64 {
    (b2 + (b2 * b2 + 24.0 * a2 * c2).sqrt()) / (4.0 * c2)
}

/// Bulk potential `f_B(Q) = -a²/2 tr(Q²) - b²/3 tr(Q³) + c²/4 (tr Q²)²`.
pub fn bulk_potential(q: &QTensor, p: &MaterialParams) -> f64 {
    let t2 = q.norm_sq();
    let t3 = q.trace_cubed();
    -0.5 * p.a2 * t2 - p.b2 / 3.0 * t3 + 0.25 * p.c2 * t2 * t2
}

/// Gradient of `f_B` constrained to the traceless symmetric space:
/// `-a² Q - b² (Q² - |Q|²I/3) + c² |Q|² Q`.
pub fn bulk_gradient(q: &QTensor, p: &MaterialParams) -> QTensor {
    let m = q.matrix();
    let q2 = m * m;
    let t2 = q.norm_sq();
    let g = m * (-p.a2) - (q2 - Matrix3::identity() * (t2 / 3.0)) * p.b2 + m * (p.c2 * t2);
    QTensor::project(g)
}

/// Biaxiality parameter `β = 1 - 6 (tr Q³)² / (tr Q²)³`, clamped to [0, 1].
///
/// β = 0 exactly for uniaxial tensors and β = 1 for maximally biaxial ones
/// (det Q = 0). The degenerate point Q = 0 is assigned β = 0, continuing the
/// uniaxial value along rays into the origin.
pub fn biaxiality(q: &QTensor) -> f64 {
    let t2 = q.norm_sq();
    if t2.sqrt() < 1e-12 {
        return 0.0;
    }
    let t3 = q.trace_cubed();
    let beta = 1.0 - 6.0 * t3 * t3 / (t2 * t2 * t2);
    beta.clamp(0.0, 1.0)
}

/// In-plane director of the boundary data at polar angle `phi`:
/// `n = (cos(kφ/2), sin(kφ/2), 0)`.
pub fn boundary_director(phi: f64, k: i32) -> Vector3<f64> {
    let half = 0.5 * k as f64 * phi;
    Vector3::new(half.cos(), half.sin(), 0.0)
}

/// Dirichlet boundary value `s₊ (n⊗n - I/3)` at polar angle `phi`.
/// 2π-periodic in `phi` for every integer winding `k` because `n⊗n` kills
/// the sign flip of `n`.
pub fn boundary_data(phi: f64, p: &MaterialParams) -> QTensor {
    QTensor::uniaxial(p.s_plus(), boundary_director(phi, p.k))
}

/// Rotation about e₃ by angle `kψ/2`.
pub fn winding_rotation(psi: f64, k: i32) -> Matrix3<f64> {
    let a = 0.5 * k as f64 * psi;
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Conjugate `Q` by the winding rotation: `R_k(ψ) Q R_k(ψ)^t`.
pub fn rotate_tensor(q: &QTensor, psi: f64, k: i32) -> QTensor {
    let r = winding_rotation(psi, k);
    QTensor::project(r * q.matrix() * r.transpose())
}

/// Moving orthonormal frame of the traceless symmetric space at polar
/// angle `phi`.
///
/// The first three tensors are built from the in-plane pair (n, m); the
/// out-of-plane pair couples n, m to e₃ for even `k` and is frozen to the
/// fixed tensors built from e₁, e₂ for odd `k`, where the rotating pair
/// would not be 2π-periodic.
#[derive(Debug, Clone)]
pub struct BasisFrame {
    pub phi: f64,
    pub k: i32,
    tensors: [QTensor; 5],
}

impl BasisFrame {
    pub fn new(phi: f64, k: i32) -> Self {
        assert!(k != 0, "winding number must be nonzero");
        let n = boundary_director(phi, k);
        let m = {
            let half = 0.5 * k as f64 * phi;
            Vector3::new(-half.sin(), half.cos(), 0.0)
        };
        let e3 = Vector3::new(0.0, 0.0, 1.0);
        let sq32 = (1.5f64).sqrt();
        let sq2 = std::f64::consts::SQRT_2;

        let e0 = QTensor::project(
            ((e3 * e3.transpose()) - Matrix3::identity() * (1.0 / 3.0)) * sq32,
        );
        let e1 = QTensor::project({
            let i2 = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
            ((n * n.transpose()) - i2 * 0.5) * sq2
        });
        let e2 = QTensor::project((n * m.transpose() + m * n.transpose()) / sq2);
        let (e3t, e4t) = if k % 2 == 0 {
            (
                QTensor::project((n * e3.transpose() + e3 * n.transpose()) / sq2),
                QTensor::project((m * e3.transpose() + e3 * m.transpose()) / sq2),
            )
        } else {
            let ex = Vector3::new(1.0, 0.0, 0.0);
            let ey = Vector3::new(0.0, 1.0, 0.0);
            (
                QTensor::project((ex * e3.transpose() + e3 * ex.transpose()) / sq2),
                QTensor::project((ey * e3.transpose() + e3 * ey.transpose()) / sq2),
            )
        };
        BasisFrame {
            phi,
            k,
            tensors: [e0, e1, e2, e3t, e4t],
        }
    }

    pub fn tensor(&self, i: usize) -> &QTensor {
        &self.tensors[i]
    }

    /// Coefficients `w_i = tr(Q E_i)` of `Q` in this frame.
    pub fn components(&self, q: &QTensor) -> [f64; 5] {
        std::array::from_fn(|i| q.dot(&self.tensors[i]))
    }

    /// Reassemble `Q = Σ w_i E_i`.
    pub fn from_components(&self, w: &[f64; 5]) -> QTensor {
        let mut m = Matrix3::zeros();
        for i in 0..5 {
            m += self.tensors[i].matrix() * w[i];
        }
        QTensor::project(m)
    }
}

/// Oseen-Frank constants induced on the uniaxial manifold by the three-term
/// elastic density, plus the Ericksen admissibility flag 2K₁ > K₂ + K₄ > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OseenFrankConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub ericksen_ok: bool,
}

pub fn oseen_frank_constants(l1: f64, l2: f64, l3: f64) -> OseenFrankConstants {
    let k1 = l1 + 0.5 * (l2 + l3);
    let k2 = l1;
    let k4 = 0.5 * l2;
    OseenFrankConstants {
        k1,
        k2,
        k3: k1,
        k4,
        ericksen_ok: 2.0 * k1 > k2 + k4 && k2 + k4 > 0.0,
    }
}
