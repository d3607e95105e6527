//! Elastic densities and their admissibility: the three quadratic gradient
//! invariants, pointwise and Dirichlet coercivity with a sampled
//! brute-force certificate, the null-Lagrangian boundary identity, the
//! strong-form Euler-Lagrange residual of a field, the per-mode action of
//! the anisotropic second-order operator on radial ansätze, and the
//! residual obstructing z-independent extension to a cylinder.

use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::field::{recover_field_gradients, recover_gradients, Field2D};
use crate::tensor::{bulk_gradient, QTensor};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Two-dimensional gradient of a Q-tensor field at a point: ∂Q/∂x and
/// ∂Q/∂y, each traceless symmetric (the third spatial derivative is zero
/// throughout).
#[derive(Debug, Clone, Copy)]
pub struct GradientQ {
    pub d: [QTensor; 2],
}

/// The three quadratic invariants (I₁, I₂, I₃) of a tensor gradient:
/// I₁ = Q_ij,k Q_ij,k, I₂ = Q_ik,j Q_ij,k, I₃ = Q_ij,j Q_ik,k, tensor
/// indices over 1..3 and derivatives over the two in-plane directions.
pub fn elastic_invariants(g: &GradientQ) -> (f64, f64, f64) {
    let d0 = g.d[0].matrix();
    let d1 = g.d[1].matrix();
    let i1 = d0.norm_squared() + d1.norm_squared();
    let mut i2 = 0.0;
    let mut i3 = 0.0;
    for i in 0..3 {
        i2 += d0[(i, 0)] * d0[(i, 0)] + 2.0 * d0[(i, 1)] * d1[(i, 0)] + d1[(i, 1)] * d1[(i, 1)];
        let div = d0[(i, 0)] + d1[(i, 1)];
        i3 += div * div;
    }
    (i1, i2, i3)
}

/// The three independent elastic constants of the general quadratic
/// density (L₁/2)I₁ + (L₂/2)I₂ + (L₃/2)I₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticTriple {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

pub fn elastic_density(g: &GradientQ, t: &ElasticTriple) -> f64 {
    let (i1, i2, i3) = elastic_invariants(g);
    0.5 * (t.l1 * i1 + t.l2 * i2 + t.l3 * i3)
}

/// Two-constant density (L/2)I₁ + M·I₂ used by the solvers; equals the
/// triple (L, 2M, 0).
pub fn elastic_density_lm(g: &GradientQ, l: f64, m: f64) -> f64 {
    let (i1, i2, _) = elastic_invariants(g);
    0.5 * l * i1 + m * i2
}

/// Pointwise coercivity of the triple over all admissible tensor
/// gradients: the closed-form inequalities together with a sampled
/// estimate of the best constant μ₀.
#[derive(Debug, Clone, Copy)]
pub struct CoercivityReport {
    pub ok: bool,
    pub mu0_estimate: f64,
}

pub fn coercivity_pointwise_predicate(t: &ElasticTriple) -> bool {
    t.l1 + t.l2 > 0.0 && 2.0 * t.l1 - t.l2 > 0.0 && t.l1 + t.l2 / 6.0 + 5.0 / 3.0 * t.l3 > 0.0
}

pub fn coercivity_pointwise(t: &ElasticTriple) -> CoercivityReport {
    let sampler = CoercivitySampler::new(20_000, 0x5eed);
    CoercivityReport {
        ok: coercivity_pointwise_predicate(t),
        mu0_estimate: sampler.min_ratio(t, 200),
    }
}

/// Dirichlet coercivity of the reduced two-constant energy:
/// L > 0 and L + 4M/3 > 0.
pub fn coercivity_dirichlet(l: f64, m: f64) -> bool {
    l > 0.0 && l + 4.0 / 3.0 * m > 0.0
}

/// Brute-force minimizer of the elastic density over the constrained
/// third-order tensor space (symmetric and traceless in the first index
/// pair): random unit samples plus projected gradient polish.
///
/// The density restricted to the unit sphere is L₁/2 + (L₂/2)h₁ + (L₃/2)h₂
/// with two quadratic shape invariants (h₁, h₂) precomputed per sample, so
/// one sampler serves many triples.
pub struct CoercivitySampler {
    samples: Vec<[Matrix3<f64>; 3]>,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

type P3 = [Matrix3<f64>; 3];

fn p3_project(p: &mut P3) {
    for s in p.iter_mut() {
        *s = (*s + s.transpose()) * 0.5;
        let tr = s.trace() / 3.0;
        for i in 0..3 {
            s[(i, i)] -= tr;
        }
    }
}

fn p3_norm(p: &P3) -> f64 {
    p.iter().map(|s| s.norm_squared()).sum::<f64>().sqrt()
}

fn p3_scale(p: &mut P3, f: f64) {
    for s in p.iter_mut() {
        *s *= f;
    }
}

fn p3_dot(a: &P3, b: &P3) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// h₁ = P_ikj P_ijk and h₂ = P_ijj P_ikk on a unit sample.
fn shape_invariants(p: &P3) -> (f64, f64) {
    let mut h1 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                h1 += p[j][(i, k)] * p[k][(i, j)];
            }
        }
    }
    let mut h2 = 0.0;
    for i in 0..3 {
        let mut div = 0.0;
        for j in 0..3 {
            div += p[j][(i, j)];
        }
        h2 += div * div;
    }
    (h1, h2)
}

fn density_ratio(t: &ElasticTriple, h1: f64, h2: f64) -> f64 {
    0.5 * (t.l1 + t.l2 * h1 + t.l3 * h2)
}

impl CoercivitySampler {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(n_samples);
        let mut h1 = Vec::with_capacity(n_samples);
        let mut h2 = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let mut p: P3 = std::array::from_fn(|_| {
                Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0))
            });
            p3_project(&mut p);
            let nrm = p3_norm(&p);
            if nrm < 1e-8 {
                continue;
            }
            p3_scale(&mut p, 1.0 / nrm);
            let (a, b) = shape_invariants(&p);
            samples.push(p);
            h1.push(a);
            h2.push(b);
        }
        CoercivitySampler { samples, h1, h2 }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Minimum of density/|P|² over the sample set, sharpened by projected
    /// gradient descent on the unit sphere from the best candidates.
    pub fn min_ratio(&self, t: &ElasticTriple, polish_iters: usize) -> f64 {
        let mut best = f64::INFINITY;
        let mut best_idx = 0usize;
        for i in 0..self.h1.len() {
            let v = density_ratio(t, self.h1[i], self.h2[i]);
            if v < best {
                best = v;
                best_idx = i;
            }
        }
        if polish_iters == 0 || self.samples.is_empty() {
            return best;
        }
        let mut p = self.samples[best_idx];
        let mut val = best;
        let mut step = 0.5;
        for _ in 0..polish_iters {
            let g = density_gradient(t, &p);
            // Project out the radial direction to stay on the sphere.
            let radial = p3_dot(&g, &p);
            let mut gt = g;
            for (gs, ps) in gt.iter_mut().zip(p.iter()) {
                *gs -= ps * radial;
            }
            let gn = p3_norm(&gt);
            if gn < 1e-14 {
                break;
            }
            let mut advanced = false;
            for _ in 0..30 {
                let mut cand = p;
                for (cs, gs) in cand.iter_mut().zip(gt.iter()) {
                    *cs -= gs * (step / gn);
                }
                p3_project(&mut cand);
                let nrm = p3_norm(&cand);
                p3_scale(&mut cand, 1.0 / nrm);
                let (a, b) = shape_invariants(&cand);
                let v = density_ratio(t, a, b);
                if v < val - 1e-16 {
                    p = cand;
                    val = v;
                    advanced = true;
                    step *= 1.3;
                    break;
                }
                step *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        val.min(best)
    }
}

/// Euclidean gradient of the density ratio numerator at P (the ratio's
/// sphere-restricted gradient is its tangential part).
fn density_gradient(t: &ElasticTriple, p: &P3) -> P3 {
    let mut g: P3 = std::array::from_fn(|_| Matrix3::zeros());
    let mut div = [0.0f64; 3];
    for i in 0..3 {
        for j in 0..3 {
            div[i] += p[j][(i, j)];
        }
    }
    for c in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                // d/dP[c]_{ab} of (1/2)(L1 P:P + L2 h1 + L3 h2)
                let mut v = t.l1 * p[c][(a, b)];
                v += t.l2 * p[b][(a, c)];
                if b == c {
                    v += t.l3 * div[a];
                }
                g[c][(a, b)] = v;
            }
        }
    }
    let mut g = g;
    p3_project(&mut g);
    g
}

/// Volume and boundary sides of the null-Lagrangian identity
/// ∫(I₂ − I₃) dx = boundary integral of the tangential-derivative form.
#[derive(Debug, Clone, Copy)]
pub struct NullLagrangianCheck {
    pub volume: f64,
    pub boundary: f64,
}

pub fn null_lagrangian_check(f: &Field2D) -> NullLagrangianCheck {
    let mesh = &*f.mesh;
    // Volume: P1 gradients are constant per triangle.
    let mut volume = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let hg = &mesh.hat_grads[t];
        let mut dx = Matrix3::zeros();
        let mut dy = Matrix3::zeros();
        for v in 0..3 {
            dx += f.q[tri[v]].matrix() * hg[v][0];
            dy += f.q[tri[v]].matrix() * hg[v][1];
        }
        let g = GradientQ {
            d: [QTensor::project(dx), QTensor::project(dy)],
        };
        let (_, i2, i3) = elastic_invariants(&g);
        volume += mesh.areas[t] * (i2 - i3);
    }
    // Boundary: midpoint rule on each boundary edge; t_j (∂_t Q_il Q_ij −
    // ∂_t Q_ij Q_il) n_l with the polygonal tangent and outward normal.
    let nb = mesh.boundary.len();
    let mut boundary = 0.0;
    for e in 0..nb {
        let (na, _) = mesh.boundary[e];
        let (nbn, _) = mesh.boundary[(e + 1) % nb];
        let pa = mesh.nodes[na];
        let pb = mesh.nodes[nbn];
        let ex = pb[0] - pa[0];
        let ey = pb[1] - pa[1];
        let len = (ex * ex + ey * ey).sqrt();
        let tv = [ex / len, ey / len, 0.0];
        let nv = [tv[1], -tv[0], 0.0];
        let qa = f.q[na].matrix();
        let qb = f.q[nbn].matrix();
        let dq = (qb - qa) / len;
        let qm = (qa + qb) * 0.5;
        let mut sum = 0.0;
        for i in 0..3 {
            for j in 0..2 {
                for l in 0..2 {
                    sum += tv[j] * (dq[(i, l)] * qm[(i, j)] - dq[(i, j)] * qm[(i, l)]) * nv[l];
                }
            }
        }
        boundary += sum * len;
    }
    NullLagrangianCheck { volume, boundary }
}

/// Strong-form Euler-Lagrange residual of a field at interior nodes,
/// L·ΔQ + M·ℒQ − ∂f_B(Q), via doubly recovered nodal derivatives. Nodes
/// within one ring of the boundary are excluded.
#[derive(Debug, Clone)]
pub struct ElResidual {
    /// One entry per node; None where the stencil reaches the boundary.
    pub per_node: Vec<Option<QTensor>>,
    /// Area-weighted RMS over included nodes.
    pub l2: f64,
    pub n_excluded: usize,
}

pub fn el_residual(f: &Field2D) -> ElResidual {
    let mesh = &*f.mesh;
    let n = mesh.n_nodes();
    let first = recover_field_gradients(f);
    // Second derivatives: recover the gradient of each first-derivative
    // coefficient field.
    let coeffs = |qs: &dyn Fn(usize) -> QTensor, a: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let q = qs(i);
                let m = q.matrix();
                match a {
                    0 => (-m[(0, 0)] - m[(1, 1)] + 2.0 * m[(2, 2)]) / 6.0f64.sqrt(),
                    1 => (m[(0, 0)] - m[(1, 1)]) / std::f64::consts::SQRT_2,
                    2 => std::f64::consts::SQRT_2 * m[(0, 1)],
                    3 => std::f64::consts::SQRT_2 * m[(0, 2)],
                    _ => std::f64::consts::SQRT_2 * m[(1, 2)],
                }
            })
            .collect()
    };
    let basis = crate::field::s0_basis();
    // second[d1][d2][node] as tensors: ∂_{d1}∂_{d2} Q
    let mut second: Vec<Vec<[Matrix3<f64>; 2]>> = Vec::with_capacity(2);
    for d1 in 0..2 {
        let getter = |i: usize| first[i][d1];
        let mut per_alpha: Vec<Vec<[f64; 2]>> = Vec::with_capacity(5);
        for a in 0..5 {
            let vals = coeffs(&getter, a);
            per_alpha.push(recover_gradients(mesh, &vals));
        }
        let mut row: Vec<[Matrix3<f64>; 2]> = Vec::with_capacity(n);
        for i in 0..n {
            let mut mx = Matrix3::zeros();
            let mut my = Matrix3::zeros();
            for a in 0..5 {
                mx += basis[a] * per_alpha[a][i][0];
                my += basis[a] * per_alpha[a][i][1];
            }
            row.push([mx, my]);
        }
        second.push(row);
    }

    let lumped = mesh.lumped_areas();
    let mut per_node: Vec<Option<QTensor>> = vec![None; n];
    let mut acc = 0.0;
    let mut area_acc = 0.0;
    let mut n_excluded = 0;
    for i in 0..n {
        if mesh.boundary_depth[i] < 2 {
            n_excluded += 1;
            continue;
        }
        // Symmetrized second partials.
        let sxx = second[0][i][0];
        let syy = second[1][i][1];
        let sxy = (second[0][i][1] + second[1][i][0]) * 0.5;
        let lap = sxx + syy;
        let lop = lop_from_second(&sxx, &sxy, &syy);
        let bulk = bulk_gradient(&f.q[i], &f.params);
        let res = QTensor::project(
            lap * f.params.l + lop * f.params.m - bulk.matrix() * 1.0,
        );
        acc += lumped[i] * res.norm_sq();
        area_acc += lumped[i];
        per_node[i] = Some(res);
    }
    ElResidual {
        per_node,
        l2: (acc / area_acc.max(1e-300)).sqrt(),
        n_excluded,
    }
}

/// ℒQ_ij = ∂_j∂_k Q_ik + ∂_i∂_k Q_jk − (2/3) ∂_l∂_k Q_lk δ_ij assembled
/// from the symmetrized second partials (in-plane derivatives only).
pub fn lop_from_second(
    sxx: &Matrix3<f64>,
    sxy: &Matrix3<f64>,
    syy: &Matrix3<f64>,
) -> Matrix3<f64> {
    let s = |a: usize, b: usize| -> &Matrix3<f64> {
        match (a, b) {
            (0, 0) => sxx,
            (1, 1) => syy,
            _ => sxy,
        }
    };
    // ∂_j D_i with D_i = ∂_k Q_ik, derivative indices j,k ∈ {0,1}.
    let mut dd = [[0.0f64; 3]; 2]; // dd[j][i] = ∂_j D_i
    for j in 0..2 {
        for i in 0..3 {
            dd[j][i] = s(j, 0)[(i, 0)] + s(j, 1)[(i, 1)];
        }
    }
    let div_d = dd[0][0] + dd[1][1];
    let mut out = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let a = if j < 2 { dd[j][i] } else { 0.0 };
            let b = if i < 2 { dd[i][j] } else { 0.0 };
            out[(i, j)] = a + b;
            if i == j {
                out[(i, j)] -= 2.0 / 3.0 * div_d;
            }
        }
    }
    out
}

/// Per-mode coefficients of the anisotropic operator ℒ applied to
/// w₀E₀ + w₁E₁ + w₂E₂ at one radius: the constant parts and the
/// cos((k−2)φ) / sin((k−2)φ) parts on E₀, E₁, E₂.
///
/// Inputs are (value, first, second derivative) triples at radius r.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModeCoefficients {
    pub e0_const: f64,
    pub e1_const: f64,
    pub e2_const: f64,
    pub e0_cos: f64,
    pub e0_sin: f64,
    pub e1_cos: f64,
    pub e2_sin: f64,
}

pub fn mode_coupling(
    k: i32,
    r: f64,
    w0: [f64; 3],
    w1: [f64; 3],
    w2: [f64; 3],
) -> ModeCoefficients {
    assert!(k != 0, "winding must be nonzero");
    let kf = k as f64;
    let k2 = kf * kf;
    let radial2 = |w: [f64; 3]| w[2] + (2.0 * kf - 1.0) * w[1] / r + kf * (kf - 2.0) * w[0] / (r * r);
    ModeCoefficients {
        e0_const: (w0[2] + w0[1] / r) / 3.0,
        e1_const: w1[2] + w1[1] / r - k2 * w1[0] / (r * r),
        e2_const: w2[2] + w2[1] / r - k2 * w2[0] / (r * r),
        e0_cos: -radial2(w1) / SQRT3,
        e0_sin: radial2(w2) / SQRT3,
        e1_cos: -(w0[2] - w0[1] / r) / SQRT3,
        e2_sin: (w0[2] - w0[1] / r) / SQRT3,
    }
}

/// Residual obstructing the z-independent extension of a 2D critical point
/// to the 3D cylinder: L₂(∂_j Q_i3 + ∂_i Q_j3) + L₃(∂_k Q_ik δ_3j +
/// ∂_k Q_jk δ_3i) per node, from recovered first derivatives.
#[derive(Debug, Clone)]
pub struct ZExtensionResidual {
    pub per_node: Vec<Matrix3<f64>>,
    pub max_norm: f64,
    /// (|L₂| + |L₃|) · max |∇Q|, the natural magnitude scale.
    pub scale: f64,
}

pub fn z_extension_residual(f: &Field2D, l2: f64, l3: f64) -> ZExtensionResidual {
    let grads = recover_field_gradients(f);
    let mut per_node = Vec::with_capacity(grads.len());
    let mut max_norm = 0.0f64;
    let mut max_grad = 0.0f64;
    for g in &grads {
        let dx = g[0].matrix();
        let dy = g[1].matrix();
        max_grad = max_grad.max((dx.norm_squared() + dy.norm_squared()).sqrt());
        let dq = |j: usize, i: usize, col: usize| -> f64 {
            match j {
                0 => dx[(i, col)],
                1 => dy[(i, col)],
                _ => 0.0,
            }
        };
        let div = |i: usize| dq(0, i, 0) + dq(1, i, 1);
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut v = l2 * (dq(j, i, 2) + dq(i, j, 2));
                if j == 2 {
                    v += l3 * div(i);
                }
                if i == 2 {
                    v += l3 * div(j);
                }
                m[(i, j)] = v;
            }
        }
        max_norm = max_norm.max(m.norm());
        per_node.push(m);
    }
    ZExtensionResidual {
        per_node,
        max_norm,
        scale: (l2.abs() + l3.abs()) * max_grad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rel_err, rng, random_qtensor};
    use nalgebra::Vector3;
    use rand::Rng;

    #[test]
    fn invariants_on_reference_gradient() {
        let a = QTensor::project(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 0.0)));
        let g = GradientQ {
            d: [a, QTensor::zero()],
        };
        let (i1, i2, i3) = elastic_invariants(&g);
        assert!((i1 - 2.0).abs() < 1e-14);
        assert!((i2 - 1.0).abs() < 1e-14);
        assert!((i3 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_gradient_gives_zero_invariants() {
        let g = GradientQ {
            d: [QTensor::zero(), QTensor::zero()],
        };
        assert_eq!(elastic_invariants(&g), (0.0, 0.0, 0.0));
        assert_eq!(
            elastic_density(
                &g,
                &ElasticTriple {
                    l1: 1.0,
                    l2: 2.0,
                    l3: 3.0
                }
            ),
            0.0
        );
    }

    #[test]
    fn i1_is_frobenius_norm_and_lm_matches_triple() {
        let mut r = rng(2);
        for _ in 0..50 {
            let g = GradientQ {
                d: [random_qtensor(&mut r, 1.0), random_qtensor(&mut r, 1.0)],
            };
            let (i1, _, _) = elastic_invariants(&g);
            assert!(i1 >= 0.0);
            assert!(
                rel_err(i1, g.d[0].norm_sq() + g.d[1].norm_sq()) < 1e-13
            );
            let (l, m) = (1.3, -0.4);
            let lm = elastic_density_lm(&g, l, m);
            let triple = elastic_density(
                &g,
                &ElasticTriple {
                    l1: l,
                    l2: 2.0 * m,
                    l3: 0.0,
                },
            );
            assert!(rel_err(lm, triple) < 1e-13);
        }
    }

    #[test]
    fn density_is_frame_covariant_under_joint_rotation() {
        // Q(x) -> P Q(P⁻¹x) Pᵗ for a rotation P about e₃ maps the gradient
        // pair to (P d P^t) composed with the in-plane rotation.
        let mut r = rng(7);
        let t = ElasticTriple {
            l1: 0.8,
            l2: 0.5,
            l3: -0.2,
        };
        for _ in 0..40 {
            let g = GradientQ {
                d: [random_qtensor(&mut r, 1.0), random_qtensor(&mut r, 1.0)],
            };
            let ang: f64 = r.random_range(0.0..std::f64::consts::TAU);
            let (s, c) = ang.sin_cos();
            let p = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
            // Chain rule: new ∂_a(PQPᵗ) = Σ_b R_ab P (∂_b Q) Pᵗ with R the
            // in-plane rotation (inverse of the domain map's Jacobian).
            let d0 = p * g.d[0].matrix() * p.transpose();
            let d1 = p * g.d[1].matrix() * p.transpose();
            let rot = GradientQ {
                d: [
                    QTensor::project(d0 * c - d1 * s),
                    QTensor::project(d0 * s + d1 * c),
                ],
            };
            assert!(
                (elastic_density(&g, &t) - elastic_density(&rot, &t)).abs() < 1e-10,
                "density must be invariant"
            );
        }
    }

    #[test]
    fn coercivity_predicate_reference_points() {
        let ok = |l1, l2, l3| {
            coercivity_pointwise_predicate(&ElasticTriple { l1, l2, l3 })
        };
        assert!(ok(1.0, 0.0, 0.0));
        assert!(!ok(1.0, 2.5, 0.0));
        assert!(ok(1.0, 0.0, -0.5));
    }

    #[test]
    fn dirichlet_coercivity_reference_points() {
        assert!(coercivity_dirichlet(1.0, 0.0));
        assert!(!coercivity_dirichlet(1.0, -0.75));
        assert!(coercivity_dirichlet(1.0, -0.74));
    }

    #[test]
    fn sampled_h1_extremes_match_analytic_critical_values() {
        // Minimizing ±h₁ isolates the two critical values {1, -1/2} of the
        // swap form on the constrained unit sphere.
        let sampler = CoercivitySampler::new(30_000, 42);
        let lo = sampler.min_ratio(
            &ElasticTriple {
                l1: 0.0,
                l2: 1.0,
                l3: 0.0,
            },
            400,
        );
        assert!((lo - (-0.25)).abs() < 2e-3, "min h1/2 = {lo}, want -1/4");
        let hi = sampler.min_ratio(
            &ElasticTriple {
                l1: 0.0,
                l2: -1.0,
                l3: 0.0,
            },
            400,
        );
        assert!((hi - (-0.5)).abs() < 2e-3, "-max h1/2 = {hi}, want -1/2");
    }

    #[test]
    fn sampled_minimum_agrees_with_predicate_near_reference_triples() {
        let sampler = CoercivitySampler::new(30_000, 9);
        for (l1, l2, l3) in [
            (1.0, 0.0, 0.0),
            (1.0, 1.5, 0.2),
            (1.0, 2.5, 0.0),
            (1.0, -1.0, 0.4),
            (0.5, 0.2, -0.4),
            (1.0, 0.0, -0.7),
        ] {
            let t = ElasticTriple { l1, l2, l3 };
            let mu = sampler.min_ratio(&t, 300);
            assert_eq!(
                mu > 0.0,
                coercivity_pointwise_predicate(&t),
                "triple ({l1},{l2},{l3}) sampled {mu}"
            );
        }
    }

    #[test]
    fn mode_coupling_reference_evaluations() {
        // k=1, w0 = r²: coefficient of the symmetry-breaking channel is
        // -(w0'' - w0'/r)/√3 = 0; for w0 = r³ it is -√3 r.
        let r = 0.7;
        let quad = mode_coupling(1, r, [r * r, 2.0 * r, 2.0], [0.0; 3], [0.0; 3]);
        assert!(quad.e1_cos.abs() < 1e-14);
        let cubic = mode_coupling(1, r, [r * r * r, 3.0 * r * r, 6.0 * r], [0.0; 3], [0.0; 3]);
        assert!((cubic.e1_cos - (-SQRT3 * r)).abs() < 1e-12);
        assert!((cubic.e2_sin - (SQRT3 * r)).abs() < 1e-12);
    }
}
