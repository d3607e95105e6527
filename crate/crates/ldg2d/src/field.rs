//! Nodal Q-tensor fields on a disk mesh: P1 energy assembly, minimization,
//! defect detection, symmetry classification, radial-component extraction
//! and glyph export.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::mesh::{DiskMesh, MESH_SYMMETRY};
use crate::opt::{self, MinimizeOptions};
use crate::radial::{M0Profile, RadialProfile};
use crate::tensor::{
    biaxiality, boundary_data, rotate_tensor, BasisFrame, MaterialParams, QTensor,
};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("field has {got} nodal values for a mesh with {want} nodes")]
    SizeMismatch { got: usize, want: usize },
    #[error("boundary node {node} does not carry the Dirichlet data (|Δ| = {err:.3e})")]
    BoundaryMismatch { node: usize, err: f64 },
    #[error("profile grid does not reach the disk radius")]
    ProfileTooShort,
}

/// Fixed orthonormal basis of the traceless symmetric space used for the
/// optimization unknowns (five coefficients per node).
pub fn s0_basis() -> [Matrix3<f64>; 5] {
    let s6 = 6.0f64.sqrt();
    let s2 = std::f64::consts::SQRT_2;
    [
        Matrix3::new(
            -1.0 / s6,
            0.0,
            0.0,
            0.0,
            -1.0 / s6,
            0.0,
            0.0,
            0.0,
            2.0 / s6,
        ),
        Matrix3::new(1.0 / s2, 0.0, 0.0, 0.0, -1.0 / s2, 0.0, 0.0, 0.0, 0.0),
        Matrix3::new(0.0, 1.0 / s2, 0.0, 1.0 / s2, 0.0, 0.0, 0.0, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, 1.0 / s2, 0.0, 0.0, 0.0, 1.0 / s2, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / s2, 0.0, 1.0 / s2, 0.0),
    ]
}

fn coeffs_of(q: &QTensor) -> [f64; 5] {
    let m = q.matrix();
    let s6 = 6.0f64.sqrt();
    let s2 = std::f64::consts::SQRT_2;
    [
        (-m[(0, 0)] - m[(1, 1)] + 2.0 * m[(2, 2)]) / s6,
        (m[(0, 0)] - m[(1, 1)]) / s2,
        s2 * m[(0, 1)],
        s2 * m[(0, 2)],
        s2 * m[(1, 2)],
    ]
}

fn tensor_of(c: &[f64]) -> Matrix3<f64> {
    let s6 = 6.0f64.sqrt();
    let s2 = std::f64::consts::SQRT_2;
    let d0 = -c[0] / s6;
    Matrix3::new(
        d0 + c[1] / s2,
        c[2] / s2,
        c[3] / s2,
        c[2] / s2,
        d0 - c[1] / s2,
        c[4] / s2,
        c[3] / s2,
        c[4] / s2,
        2.0 * c[0] / s6,
    )
}

/// Nodal Q-tensor field with fixed Dirichlet boundary ring.
#[derive(Debug, Clone)]
pub struct Field2D {
    pub mesh: Arc<DiskMesh>,
    pub params: MaterialParams,
    pub q: Vec<QTensor>,
}

impl Field2D {
    pub fn new(
        mesh: Arc<DiskMesh>,
        params: MaterialParams,
        q: Vec<QTensor>,
    ) -> Result<Self, FieldError> {
        if q.len() != mesh.n_nodes() {
            return Err(FieldError::SizeMismatch {
                got: q.len(),
                want: mesh.n_nodes(),
            });
        }
        let f = Field2D { mesh, params, q };
        f.check_boundary()?;
        Ok(f)
    }

    /// Fill from a pointwise map; boundary nodes always receive the exact
    /// Dirichlet data.
    pub fn from_fn(
        mesh: Arc<DiskMesh>,
        params: MaterialParams,
        mut f: impl FnMut(f64, f64) -> QTensor,
    ) -> Self {
        let mut q: Vec<QTensor> = mesh
            .nodes
            .iter()
            .map(|p| f(p[0], p[1]))
            .collect();
        for &(b, phi) in &mesh.boundary {
            q[b] = boundary_data(phi, &params);
        }
        Field2D { mesh, params, q }
    }

    pub fn check_boundary(&self) -> Result<(), FieldError> {
        for &(b, phi) in &self.mesh.boundary {
            let err = (self.q[b] - boundary_data(phi, &self.params)).norm();
            if err > 1e-9 * (1.0 + self.params.s_plus()) {
                return Err(FieldError::BoundaryMismatch { node: b, err });
            }
        }
        Ok(())
    }

    pub fn dofs(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.q.len() * 5];
        for (n, q) in self.q.iter().enumerate() {
            let c = coeffs_of(q);
            x[n * 5..n * 5 + 5].copy_from_slice(&c);
        }
        x
    }

    pub fn set_dofs(&mut self, x: &[f64]) {
        for (n, q) in self.q.iter_mut().enumerate() {
            *q = QTensor::project(tensor_of(&x[n * 5..n * 5 + 5]));
        }
    }

    /// Barycentric interpolation at an interior point.
    pub fn value_at(&self, x: f64, y: f64) -> Option<QTensor> {
        let (t, b) = self.mesh.locate(x, y)?;
        let tri = self.mesh.triangles[t];
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            m += self.q[tri[i]].matrix() * b[i];
        }
        Some(QTensor::project(m))
    }

    /// L² norm over the disk (exact for the P1 interpolant).
    pub fn l2_norm(&self) -> f64 {
        l2_norm_nodal(&self.mesh, &self.q)
    }
}

pub fn l2_norm_nodal(mesh: &DiskMesh, q: &[QTensor]) -> f64 {
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let f0 = q[tri[0]];
        let f1 = q[tri[1]];
        let f2 = q[tri[2]];
        let sum = f0 + f1 + f2;
        acc += mesh.areas[t] / 12.0
            * (sum.norm_sq() + f0.norm_sq() + f1.norm_sq() + f2.norm_sq());
    }
    acc.sqrt()
}

pub fn l2_distance(a: &Field2D, b: &Field2D) -> f64 {
    assert_eq!(a.q.len(), b.q.len());
    let diff: Vec<QTensor> = a.q.iter().zip(&b.q).map(|(x, y)| *x - *y).collect();
    l2_norm_nodal(&a.mesh, &diff)
}

/// Discrete Landau-de Gennes energy on a mesh, with fixed boundary values.
///
/// The quadratic gradient terms are integrated exactly on each triangle and
/// the bulk term with one-point (centroid) quadrature.
pub struct FieldProblem {
    pub mesh: Arc<DiskMesh>,
    pub params: MaterialParams,
    boundary_values: Vec<(usize, QTensor)>,
    basis: [Matrix3<f64>; 5],
}

impl FieldProblem {
    pub fn new(mesh: Arc<DiskMesh>, params: MaterialParams) -> Self {
        let boundary_values = mesh
            .boundary
            .iter()
            .map(|&(b, phi)| (b, boundary_data(phi, &params)))
            .collect();
        FieldProblem {
            mesh,
            params,
            boundary_values,
            basis: s0_basis(),
        }
    }

    /// Replace the Dirichlet data (testing hook; the solvers use the
    /// winding boundary condition).
    pub fn with_boundary_values(mut self, values: Vec<(usize, QTensor)>) -> Self {
        self.boundary_values = values;
        self
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes() * 5
    }

    pub fn apply_boundary(&self, x: &mut [f64]) {
        for &(b, q) in &self.boundary_values {
            let c = coeffs_of(&q);
            x[b * 5..b * 5 + 5].copy_from_slice(&c);
        }
    }

    fn zero_boundary_rows(&self, g: &mut [f64]) {
        for &(b, _) in &self.boundary_values {
            for d in 0..5 {
                g[b * 5 + d] = 0.0;
            }
        }
    }

    /// Energy and its exact gradient with respect to interior nodal
    /// coefficients (boundary rows are zeroed).
    pub fn energy_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let e = self.assemble(x, Some(grad));
        self.zero_boundary_rows(grad);
        e
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        self.assemble(x, None)
    }

    fn assemble(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mesh = &*self.mesh;
        let p = &self.params;
        let (l, m) = (p.l, p.m);
        let mut energy = 0.0;

        for (t, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.areas[t];
            let hg = &mesh.hat_grads[t];

            let q0 = tensor_of(&x[tri[0] * 5..tri[0] * 5 + 5]);
            let q1 = tensor_of(&x[tri[1] * 5..tri[1] * 5 + 5]);
            let q2 = tensor_of(&x[tri[2] * 5..tri[2] * 5 + 5]);

            let g1 = q0 * hg[0][0] + q1 * hg[1][0] + q2 * hg[2][0];
            let g2 = q0 * hg[0][1] + q1 * hg[1][1] + q2 * hg[2][1];

            let i1 = g1.norm_squared() + g2.norm_squared();
            let mut i2 = 0.0;
            for i in 0..3 {
                i2 += g1[(i, 0)] * g1[(i, 0)]
                    + 2.0 * g1[(i, 1)] * g2[(i, 0)]
                    + g2[(i, 1)] * g2[(i, 1)];
            }

            let qbar = (q0 + q1 + q2) / 3.0;
            let t2 = qbar.norm_squared();
            let qbar2 = qbar * qbar;
            let t3 = qbar2.dot(&qbar.transpose()); // tr(Qbar³), Qbar symmetric
            let fb = -0.5 * p.a2 * t2 - p.b2 / 3.0 * t3 + 0.25 * p.c2 * t2 * t2;

            energy += area * (0.5 * l * i1 + m * i2 + fb);

            if let Some(g) = grad.as_deref_mut() {
                // dI2/dG1 and dI2/dG2 (third column zero).
                let mut p1 = Matrix3::zeros();
                let mut p2 = Matrix3::zeros();
                for i in 0..3 {
                    p1[(i, 0)] = 2.0 * g1[(i, 0)];
                    p1[(i, 1)] = 2.0 * g2[(i, 0)];
                    p2[(i, 0)] = 2.0 * g1[(i, 1)];
                    p2[(i, 1)] = 2.0 * g2[(i, 1)];
                }
                // Bulk derivative; terms proportional to the identity drop
                // in the contraction with a traceless basis.
                let dbulk = qbar * (-p.a2 + p.c2 * t2) - qbar2 * p.b2;
                for v in 0..3 {
                    let d = (g1 * hg[v][0] + g2 * hg[v][1]) * l
                        + (p1 * hg[v][0] + p2 * hg[v][1]) * m
                        + dbulk * (1.0 / 3.0);
                    let base = tri[v] * 5;
                    for a in 0..5 {
                        g[base + a] += area * d.dot(&self.basis[a].transpose());
                    }
                }
            }
        }
        energy
    }

    /// Gradient of the anisotropic term ∫ Q_ij,k Q_ik,j alone (unit
    /// coefficient), used by the perturbation cross-check.
    pub fn anisotropy_gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let mesh = &*self.mesh;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.areas[t];
            let hg = &mesh.hat_grads[t];
            let q0 = tensor_of(&x[tri[0] * 5..tri[0] * 5 + 5]);
            let q1 = tensor_of(&x[tri[1] * 5..tri[1] * 5 + 5]);
            let q2 = tensor_of(&x[tri[2] * 5..tri[2] * 5 + 5]);
            let g1 = q0 * hg[0][0] + q1 * hg[1][0] + q2 * hg[2][0];
            let g2 = q0 * hg[0][1] + q1 * hg[1][1] + q2 * hg[2][1];
            let mut p1 = Matrix3::zeros();
            let mut p2 = Matrix3::zeros();
            for i in 0..3 {
                p1[(i, 0)] = 2.0 * g1[(i, 0)];
                p1[(i, 1)] = 2.0 * g2[(i, 0)];
                p2[(i, 0)] = 2.0 * g1[(i, 1)];
                p2[(i, 1)] = 2.0 * g2[(i, 1)];
            }
            for v in 0..3 {
                let d = p1 * hg[v][0] + p2 * hg[v][1];
                let base = tri[v] * 5;
                for a in 0..5 {
                    grad[base + a] += area * d.dot(&self.basis[a].transpose());
                }
            }
        }
        self.zero_boundary_rows(grad);
    }
}

/// Total discrete energy of a field.
pub fn total_energy(f: &Field2D) -> f64 {
    let problem = FieldProblem::new(f.mesh.clone(), f.params);
    problem.energy(&f.dofs())
}

/// Exact gradient of the discrete energy as one tensor per node
/// (boundary rows zero).
pub fn total_gradient(f: &Field2D) -> Vec<QTensor> {
    let problem = FieldProblem::new(f.mesh.clone(), f.params);
    let mut g = vec![0.0; problem.n_dofs()];
    problem.energy_and_gradient(&f.dofs(), &mut g);
    (0..f.q.len())
        .map(|n| QTensor::project(tensor_of(&g[n * 5..n * 5 + 5])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOptimizer {
    /// Limited-memory quasi-Newton with backtracking (default).
    LimitedMemory,
    /// Trust-region Newton-CG.
    TrustRegion,
}

#[derive(Debug, Clone, Copy)]
pub struct FieldSolveOptions {
    /// Gradient tolerance; `None` means 1e-6 · √(#dof).
    pub grad_tol: Option<f64>,
    pub max_iter: usize,
    pub optimizer: FieldOptimizer,
}

impl Default for FieldSolveOptions {
    fn default() -> Self {
        FieldSolveOptions {
            grad_tol: None,
            max_iter: 200_000,
            optimizer: FieldOptimizer::LimitedMemory,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldSolve {
    pub field: Field2D,
    pub energy: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimize the discrete energy starting from `init`; the boundary ring is
/// pinned to the Dirichlet data throughout.
pub fn minimize_field(init: &Field2D, opts: &FieldSolveOptions) -> FieldSolve {
    let problem = FieldProblem::new(init.mesh.clone(), init.params);
    let mut x0 = init.dofs();
    problem.apply_boundary(&mut x0);
    let tol = opts
        .grad_tol
        .unwrap_or(1e-6 * (problem.n_dofs() as f64).sqrt());
    let mopts = MinimizeOptions {
        grad_tol: tol,
        max_iter: opts.max_iter,
    };
    let result = match opts.optimizer {
        FieldOptimizer::LimitedMemory => {
            opt::lbfgs(|x, g| problem.energy_and_gradient(x, g), x0, &mopts)
        }
        FieldOptimizer::TrustRegion => {
            opt::trust_region_ncg(|x, g| problem.energy_and_gradient(x, g), x0, &mopts)
        }
    };
    let mut field = init.clone();
    field.set_dofs(&result.x);
    for &(b, q) in &problem.boundary_values {
        field.q[b] = q; // bit-identical Dirichlet ring
    }
    FieldSolve {
        field,
        energy: result.energy,
        grad_norm: result.grad_norm,
        converged: result.converged,
        iterations: result.iterations,
    }
}

/// Assemble the tensor field of a radial profile, `Q(x) = Σ w_i(r) E_i(φ)`.
pub fn field_from_profile(
    mesh: Arc<DiskMesh>,
    params: MaterialParams,
    profile: &RadialProfile,
) -> Result<Field2D, FieldError> {
    if profile.r.last().copied().unwrap_or(0.0) < mesh.radius * (1.0 - 1e-9) {
        return Err(FieldError::ProfileTooShort);
    }
    Ok(Field2D::from_fn(mesh, params, |x, y| {
        let r = (x * x + y * y).sqrt();
        let phi = y.atan2(x);
        let w = profile.sample(r);
        BasisFrame::new(phi, profile.k).from_components(&w)
    }))
}

/// Assemble the field of an (u, v) profile: `u(r) E₁(φ) + v(r) E₀`.
pub fn field_from_m0_profile(
    mesh: Arc<DiskMesh>,
    params: MaterialParams,
    profile: &M0Profile,
) -> Result<Field2D, FieldError> {
    if profile.r.last().copied().unwrap_or(0.0) < mesh.radius * (1.0 - 1e-9) {
        return Err(FieldError::ProfileTooShort);
    }
    Ok(Field2D::from_fn(mesh, params, |x, y| {
        let r = (x * x + y * y).sqrt();
        let phi = y.atan2(x);
        let (u, v) = profile.sample(r);
        BasisFrame::new(phi, profile.k).from_components(&[v, u, 0.0, 0.0, 0.0])
    }))
}

/// Deterministic symmetry-broken seed: the boundary winding split into two
/// half-winding defects at `(±separation, 0)`, uniaxial in-plane with the
/// amplitude melted near the defect points. e₃ is an eigenvector
/// everywhere, so descent from here stays in the vertical class unless it
/// leaves it on its own.
pub fn seed_split_pair(
    mesh: Arc<DiskMesh>,
    params: MaterialParams,
    separation: f64,
) -> Field2D {
    let s = params.s_plus();
    let xi = params.core_length();
    let k_over_4 = params.k as f64 / 4.0;
    Field2D::from_fn(mesh, params, |x, y| {
        let th = k_over_4 * ((y).atan2(x - separation) + (y).atan2(x + separation));
        let d1 = ((x - separation) * (x - separation) + y * y).sqrt();
        let d2 = ((x + separation) * (x + separation) + y * y).sqrt();
        let amp = s * (d1 / xi).tanh() * (d2 / xi).tanh();
        QTensor::uniaxial(amp, Vector3::new(th.cos(), th.sin(), 0.0))
    })
}

/// Split-pair seed plus an out-of-plane bump that removes e₃ from the
/// eigenframe near the origin; seeds the tilted non-radial branch.
pub fn seed_tilted(
    mesh: Arc<DiskMesh>,
    params: MaterialParams,
    separation: f64,
    tilt: f64,
) -> Field2D {
    let base = seed_split_pair(mesh.clone(), params, separation);
    let s = params.s_plus();
    let sigma = separation.max(2.0 * params.core_length());
    let e4 = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0) / std::f64::consts::SQRT_2;
    let mut q = base.q.clone();
    for (i, p) in mesh.nodes.iter().enumerate() {
        if mesh.is_boundary[i] {
            continue;
        }
        let r2 = p[0] * p[0] + p[1] * p[1];
        let bump = tilt * s * (-r2 / (sigma * sigma)).exp();
        q[i] = QTensor::project(q[i].matrix() + e4 * bump);
    }
    Field2D {
        mesh,
        params,
        q,
    }
}

#[derive(Debug, Clone)]
pub struct Defect {
    pub node: usize,
    pub position: [f64; 2],
    pub beta: f64,
}

/// Interior local minima of the nodal biaxiality below `beta_tol`, merged
/// within a 2h radius. Boundary nodes never count (the boundary ring is
/// uniaxial by construction).
pub fn detect_defects(f: &Field2D, beta_tol: f64) -> Vec<Defect> {
    let mesh = &*f.mesh;
    let beta: Vec<f64> = f.q.iter().map(biaxiality).collect();
    let mut candidates: Vec<usize> = Vec::new();
    for n in 0..mesh.n_nodes() {
        if mesh.is_boundary[n] || beta[n] >= beta_tol {
            continue;
        }
        if mesh.neighbors[n].iter().all(|&nb| beta[n] <= beta[nb]) {
            candidates.push(n);
        }
    }
    candidates.sort_by(|&a, &b| beta[a].partial_cmp(&beta[b]).unwrap().then(a.cmp(&b)));
    let merge_r2 = (2.0 * mesh.h) * (2.0 * mesh.h);
    let mut out: Vec<Defect> = Vec::new();
    for n in candidates {
        let p = mesh.nodes[n];
        let close = out.iter().any(|d| {
            let dx = d.position[0] - p[0];
            let dy = d.position[1] - p[1];
            dx * dx + dy * dy < merge_r2
        });
        if !close {
            out.push(Defect {
                node: n,
                position: p,
                beta: beta[n],
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldClass {
    Radial,
    NrVertical,
    NrTilted,
}

#[derive(Debug, Clone)]
pub struct FieldClassification {
    pub class: FieldClass,
    /// Max over the exact mesh rotations of the RMS equivariance defect.
    pub symmetry_residual: f64,
    /// Max over nodes of |Q e₃ - (e₃·Q e₃) e₃|.
    pub vertical_residual: f64,
}

/// Equivariance residual under rotation by `steps·2π/6`, computed on the
/// exact node permutation (no interpolation enters).
pub fn symmetry_residual(f: &Field2D, steps: usize) -> f64 {
    let map = f.mesh.rotation_node_map(steps);
    let psi = std::f64::consts::TAU * steps as f64 / MESH_SYMMETRY as f64;
    let mut acc = 0.0;
    for n in 0..f.q.len() {
        let rotated = rotate_tensor(&f.q[n], psi, f.params.k);
        acc += (f.q[map[n]] - rotated).norm_sq();
    }
    (acc / f.q.len() as f64).sqrt()
}

pub fn classify_field(f: &Field2D, tol: f64) -> FieldClassification {
    let sym = (1..MESH_SYMMETRY)
        .map(|s| symmetry_residual(f, s))
        .fold(0.0f64, f64::max);
    let e3 = Vector3::new(0.0, 0.0, 1.0);
    let mut vert = 0.0f64;
    for q in &f.q {
        let qe3 = q.matrix() * e3;
        let lam = qe3[2];
        let res = (qe3 - e3 * lam).norm();
        vert = vert.max(res);
    }
    let class = if sym < tol {
        FieldClass::Radial
    } else if vert < tol {
        FieldClass::NrVertical
    } else {
        FieldClass::NrTilted
    };
    FieldClassification {
        class,
        symmetry_residual: sym,
        vertical_residual: vert,
    }
}

#[derive(Debug, Clone)]
pub struct RadialComponentTable {
    pub r: Vec<f64>,
    /// Angular mean of tr(Q E_i(φ)) per radius.
    pub w: Vec<[f64; 5]>,
    /// RMS angular variation summed over components, per radius.
    pub anisotropy: Vec<f64>,
}

/// Angular averages of the frame components at the mesh ring radii.
pub fn extract_radial_components(f: &Field2D, n_phi: usize) -> RadialComponentTable {
    let mesh = &*f.mesh;
    let mut table = RadialComponentTable {
        r: Vec::new(),
        w: Vec::new(),
        anisotropy: Vec::new(),
    };
    for j in 1..=mesh.n_rings {
        let r = mesh.radius * j as f64 / mesh.n_rings as f64;
        let mut vals = vec![[0.0f64; 5]; n_phi];
        for (qi, val) in vals.iter_mut().enumerate() {
            let phi = std::f64::consts::TAU * qi as f64 / n_phi as f64;
            let q = f
                .value_at(r * phi.cos(), r * phi.sin())
                .unwrap_or_else(QTensor::zero);
            *val = BasisFrame::new(phi, f.params.k).components(&q);
        }
        let mut mean = [0.0f64; 5];
        for v in &vals {
            for c in 0..5 {
                mean[c] += v[c];
            }
        }
        for m in mean.iter_mut() {
            *m /= n_phi as f64;
        }
        let mut var = 0.0;
        for v in &vals {
            for c in 0..5 {
                var += (v[c] - mean[c]) * (v[c] - mean[c]);
            }
        }
        table.r.push(r);
        table.w.push(mean);
        table.anisotropy.push((var / n_phi as f64).sqrt());
    }
    table
}

#[derive(Debug, Clone)]
pub struct GlyphRecord {
    pub position: [f64; 2],
    /// Orthonormal eigenframe, one eigenvector per column, ascending
    /// eigenvalue order.
    pub frame: Matrix3<f64>,
    /// Eigenvalues augmented by √(2/3)|Q|; nonnegative for traceless
    /// symmetric input.
    pub lengths: [f64; 3],
    pub beta: f64,
}

pub fn glyph_export(f: &Field2D) -> Vec<GlyphRecord> {
    f.q.iter()
        .zip(&f.mesh.nodes)
        .map(|(q, p)| {
            let (vals, frame) = q.eigen_frame();
            let aug = (2.0f64 / 3.0).sqrt() * q.norm();
            let lengths = [
                (vals[0] + aug).max(0.0),
                (vals[1] + aug).max(0.0),
                (vals[2] + aug).max(0.0),
            ];
            GlyphRecord {
                position: *p,
                frame,
                lengths,
                beta: biaxiality(q),
            }
        })
        .collect()
}

/// Nodal values of the field transported by the joint rotation action:
/// (ψ·f)(x) = R_k(ψ) f(R₂(-ψ)x) R_k(ψ)ᵗ, with barycentric interpolation
/// at the rotated sample points.
pub fn rotate_field_values(f: &Field2D, psi: f64) -> Vec<QTensor> {
    let k = f.params.k;
    let (s, c) = psi.sin_cos();
    f.mesh
        .nodes
        .iter()
        .map(|p| {
            // R₂(-ψ) x
            let x = c * p[0] + s * p[1];
            let y = -s * p[0] + c * p[1];
            let q = f.value_at(x, y).unwrap_or_else(QTensor::zero);
            rotate_tensor(&q, psi, k)
        })
        .collect()
}

/// Area-weighted recovery of nodal gradients of a P1 scalar field.
pub fn recover_gradients(mesh: &DiskMesh, values: &[f64]) -> Vec<[f64; 2]> {
    let mut grad = vec![[0.0f64; 2]; mesh.n_nodes()];
    let mut weight = vec![0.0f64; mesh.n_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let hg = &mesh.hat_grads[t];
        let mut gx = 0.0;
        let mut gy = 0.0;
        for i in 0..3 {
            gx += values[tri[i]] * hg[i][0];
            gy += values[tri[i]] * hg[i][1];
        }
        for &v in tri {
            grad[v][0] += mesh.areas[t] * gx;
            grad[v][1] += mesh.areas[t] * gy;
            weight[v] += mesh.areas[t];
        }
    }
    for (g, w) in grad.iter_mut().zip(&weight) {
        g[0] /= w;
        g[1] /= w;
    }
    grad
}

/// Recovered nodal gradients of all five coefficient fields, as the pair
/// (∂Q/∂x, ∂Q/∂y) per node.
pub fn recover_field_gradients(f: &Field2D) -> Vec<[QTensor; 2]> {
    let n = f.q.len();
    let mut comp = vec![vec![0.0f64; n]; 5];
    for (i, q) in f.q.iter().enumerate() {
        let c = coeffs_of(q);
        for a in 0..5 {
            comp[a][i] = c[a];
        }
    }
    let grads: Vec<Vec<[f64; 2]>> = comp
        .iter()
        .map(|vals| recover_gradients(&f.mesh, vals))
        .collect();
    (0..n)
        .map(|i| {
            let cx: Vec<f64> = (0..5).map(|a| grads[a][i][0]).collect();
            let cy: Vec<f64> = (0..5).map(|a| grads[a][i][1]).collect();
            [
                QTensor::project(tensor_of(&cx)),
                QTensor::project(tensor_of(&cy)),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::tensor::bulk_potential;
    use crate::testutil::{rel_err, rng};
    use rand::Rng;

    fn params() -> MaterialParams {
        MaterialParams::new(1.0, 1.0, 1.0, 1.0, 0.5, 2, 2.0).unwrap()
    }

    #[test]
    fn constant_field_energy_is_area_times_bulk() {
        let mesh = Arc::new(build_mesh(2.0, 0.25).unwrap());
        let p = params();
        let s = p.s_plus();
        let q0 = QTensor::uniaxial(s, Vector3::new(1.0, 0.0, 0.0));
        let problem = FieldProblem::new(mesh.clone(), p).with_boundary_values(
            mesh.boundary.iter().map(|&(b, _)| (b, q0)).collect(),
        );
        let x = vec![q0; mesh.n_nodes()]
            .iter()
            .flat_map(|q| coeffs_of(q))
            .collect::<Vec<_>>();
        let mut g = vec![0.0; problem.n_dofs()];
        let e = problem.energy_and_gradient(&x, &mut g);
        let area: f64 = mesh.areas.iter().sum();
        assert!(rel_err(e, area * bulk_potential(&q0, &p)) < 1e-12);
        let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(gnorm < 1e-10, "constant minimizer must have zero gradient, got {gnorm}");
    }

    #[test]
    fn field_gradient_matches_finite_differences() {
        let mesh = Arc::new(build_mesh(1.0, 0.35).unwrap());
        let p = MaterialParams::new(1.3, 0.8, 1.0, 1.0, -0.3, 2, 1.0).unwrap();
        let problem = FieldProblem::new(mesh.clone(), p);
        let mut r = rng(31);
        let mut x: Vec<f64> = (0..problem.n_dofs())
            .map(|_| r.random_range(-0.5..0.5))
            .collect();
        problem.apply_boundary(&mut x);
        let mut g = vec![0.0; x.len()];
        problem.energy_and_gradient(&x, &mut g);
        let h = 1e-6;
        for _ in 0..20 {
            // Random interior perturbation direction.
            let mut d = vec![0.0; x.len()];
            for v in d.iter_mut() {
                *v = r.random_range(-1.0..1.0);
            }
            problem.zero_boundary_rows(&mut d);
            let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
            let fd = (problem.energy(&xp) - problem.energy(&xm)) / (2.0 * h);
            let an: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            assert!(rel_err(an, fd) < 1e-6, "{an} vs {fd}");
        }
    }

    #[test]
    fn glyph_lengths_for_uniaxial_tensor() {
        let mesh = Arc::new(build_mesh(1.0, 0.5).unwrap());
        let p = params();
        let s = 0.9;
        let f = Field2D::from_fn(mesh, p, |_, _| {
            QTensor::uniaxial(s, Vector3::new(0.0, 0.0, 1.0))
        });
        let glyphs = glyph_export(&f);
        // Interior nodes hold the uniaxial tensor with lengths {s/3, s/3, 4s/3}.
        let g = &glyphs[0];
        assert!((g.lengths[0] - s / 3.0).abs() < 1e-12);
        assert!((g.lengths[1] - s / 3.0).abs() < 1e-12);
        assert!((g.lengths[2] - 4.0 * s / 3.0).abs() < 1e-12);
        for g in &glyphs {
            assert!(g.lengths.iter().all(|&l| l >= 0.0));
        }
    }

    #[test]
    fn recovery_is_exact_on_linear_fields() {
        let mesh = build_mesh(1.0, 0.2).unwrap();
        let vals: Vec<f64> = mesh.nodes.iter().map(|p| 3.0 * p[0] - 2.0 * p[1]).collect();
        let g = recover_gradients(&mesh, &vals);
        for gi in &g {
            assert!((gi[0] - 3.0).abs() < 1e-10 && (gi[1] + 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_ring_is_pinned_by_minimizer() {
        let mesh = Arc::new(build_mesh(1.0, 0.3).unwrap());
        let p = MaterialParams::new(1.0, 0.0, 1.0, 1.0, 0.0, 2, 1.0).unwrap();
        let init = seed_split_pair(mesh.clone(), p, 0.3);
        let before: Vec<QTensor> = mesh.boundary.iter().map(|&(b, _)| init.q[b]).collect();
        let solve = minimize_field(
            &init,
            &FieldSolveOptions {
                grad_tol: Some(1e-7),
                max_iter: 5_000,
                optimizer: FieldOptimizer::LimitedMemory,
            },
        );
        for (i, &(b, _)) in mesh.boundary.iter().enumerate() {
            assert_eq!(
                solve.field.q[b].matrix(),
                before[i].matrix(),
                "Dirichlet node {b} moved"
            );
        }
        assert!(solve.converged);
    }
}
