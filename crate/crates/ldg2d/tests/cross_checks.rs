//! Cross-module consistency: the radial reduction against the 2D assembly,
//! the closed-form per-mode operator action against finite-difference
//! stencils on analytic fields, the strong-form residual operators, and
//! the perturbation solve against a coarse 2D linear solve.

use std::sync::Arc;

use nalgebra::Matrix3;

use ldg2d::elastic::{
    el_residual, lop_from_second, mode_coupling, null_lagrangian_check, z_extension_residual,
};
use ldg2d::field::{
    field_from_profile, minimize_field, seed_split_pair, total_energy, Field2D,
    FieldOptimizer, FieldProblem, FieldSolveOptions,
};
use ldg2d::mesh::build_mesh;
use ldg2d::perturbation::{perturbation_nodal, solve_perturbation};
use ldg2d::radial::{
    minimize_radial, minimize_radial_m0, radial_energy, BranchPreset, RadialInit, RadialProfile,
};
use ldg2d::tensor::{BasisFrame, MaterialParams, QTensor};

fn params(a2: f64, b2: f64, m: f64, k: i32, radius: f64) -> MaterialParams {
    MaterialParams::new(a2, b2, 1.0, 1.0, m, k, radius).unwrap()
}

/// Smooth five-component test profile compatible with the standard
/// boundary data.
fn smooth_profile(p: &MaterialParams, n: usize) -> RadialProfile {
    let rad = p.radius;
    let s = p.s_plus();
    let grid: Vec<f64> = (0..=n).map(|i| rad * i as f64 / n as f64).collect();
    let pi = std::f64::consts::PI;
    let w0 = grid
        .iter()
        .map(|&r| -s / 6.0f64.sqrt() * (r / rad).powi(2) - 0.3 * (1.0 - r / rad))
        .collect();
    let w1 = grid
        .iter()
        .map(|&r| s / 2.0f64.sqrt() * (r / rad).powi(2))
        .collect();
    let w2 = grid.iter().map(|&r| 0.2 * (pi * r / rad).sin()).collect();
    let w3 = grid
        .iter()
        .map(|&r| -0.25 * (pi * r / rad).sin())
        .collect();
    let w4 = grid
        .iter()
        .map(|&r| 0.15 * (pi * r / rad).sin() * (r / rad))
        .collect();
    let mut prof = RadialProfile {
        r: grid,
        w: [w0, w1, w2, w3, w4],
        k: 2,
    };
    let last = prof.r.len() - 1;
    prof.w[0][last] = -s / 6.0f64.sqrt();
    prof.w[1][last] = s / 2.0f64.sqrt();
    prof
}

#[test]
fn disk_energy_is_two_pi_times_radial_energy() {
    let p = params(1.0, 1.0, 5.0, 2, 10.0);
    let prof = smooth_profile(&p, 1500);
    let e1d = radial_energy(&prof, &p).unwrap();
    let mut errs = Vec::new();
    for h in [0.2, 0.1] {
        let mesh = Arc::new(build_mesh(10.0, h).unwrap());
        let f = field_from_profile(mesh, p, &prof).unwrap();
        let e2d = total_energy(&f);
        errs.push((e2d - 2.0 * std::f64::consts::PI * e1d).abs());
    }
    assert!(
        errs[0] < 5e-3 * (1.0 + e1d.abs()),
        "coarse-mesh agreement failed: {errs:?}"
    );
    let rate = errs[0] / errs[1].max(1e-300);
    assert!(rate > 2.0, "expected roughly O(h²) agreement, rate {rate}");
}

/// 5-point finite-difference stencil of ℒ on an analytic field.
fn lop_fd(field: &dyn Fn(f64, f64) -> QTensor, x: f64, y: f64, h: f64) -> Matrix3<f64> {
    let q = |dx: f64, dy: f64| *field(x + dx, y + dy).matrix();
    let sxx = (q(h, 0.0) - q(0.0, 0.0) * 2.0 + q(-h, 0.0)) / (h * h);
    let syy = (q(0.0, h) - q(0.0, 0.0) * 2.0 + q(0.0, -h)) / (h * h);
    let sxy = (q(h, h) - q(h, -h) - q(-h, h) + q(-h, -h)) / (4.0 * h * h);
    lop_from_second(&sxx, &sxy, &syy)
}

#[test]
fn mode_coupling_matches_2d_stencil() {
    // Analytic radial components with all derivatives known.
    let w0 = |r: f64| 0.3 * r * r - 0.1 * r * r * r;
    let dw0 = |r: f64| 0.6 * r - 0.3 * r * r;
    let ddw0 = |r: f64| 0.6 - 0.6 * r;
    let w1 = |r: f64| 0.2 * r * r;
    let dw1 = |r: f64| 0.4 * r;
    let ddw1 = |_: f64| 0.4;
    let w2 = |r: f64| 0.15 * r * r * r;
    let dw2 = |r: f64| 0.45 * r * r;
    let ddw2 = |r: f64| 0.9 * r;

    for k in [1i32, 2, 3, -1] {
        let field = move |x: f64, y: f64| -> QTensor {
            let r = (x * x + y * y).sqrt();
            let phi = y.atan2(x);
            BasisFrame::new(phi, k).from_components(&[w0(r), w1(r), w2(r), 0.0, 0.0])
        };
        // Compare per-mode coefficients at a sample radius via angular
        // projection of the stencil values.
        let r0 = 0.8;
        let n_phi = 64;
        let mut anal = vec![Matrix3::zeros(); n_phi];
        let mut numer = vec![Matrix3::zeros(); n_phi];
        for q in 0..n_phi {
            let phi = std::f64::consts::TAU * q as f64 / n_phi as f64;
            let (x, y) = (r0 * phi.cos(), r0 * phi.sin());
            numer[q] = lop_fd(&field, x, y, 1e-4);
            let mc = mode_coupling(
                k,
                r0,
                [w0(r0), dw0(r0), ddw0(r0)],
                [w1(r0), dw1(r0), ddw1(r0)],
                [w2(r0), dw2(r0), ddw2(r0)],
            );
            let frame = BasisFrame::new(phi, k);
            let ang = (k - 2) as f64 * phi;
            let (c, s) = (ang.cos(), ang.sin());
            let coeff0 = mc.e0_const + c * mc.e0_cos + s * mc.e0_sin;
            let coeff1 = mc.e1_const + c * mc.e1_cos;
            let coeff2 = mc.e2_const + s * mc.e2_sin;
            anal[q] = *frame.tensor(0).matrix() * coeff0
                + *frame.tensor(1).matrix() * coeff1
                + *frame.tensor(2).matrix() * coeff2;
        }
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for q in 0..n_phi {
            worst = worst.max((anal[q] - numer[q]).norm());
            scale = scale.max(numer[q].norm());
        }
        assert!(
            worst < 1e-5 * scale.max(1.0),
            "k={k}: closed-form vs stencil mismatch {worst} at scale {scale}"
        );
    }
}

#[test]
fn lop_image_has_symmetry_breaking_modes_iff_k_not_two() {
    // Angular variance of the ℒ image: zero for k = 2, O(1) otherwise.
    let w0 = |r: f64| 0.3 * r * r;
    let w1 = |r: f64| 0.2 * r * r;
    for (k, expect_breaking) in [(1i32, true), (2, false), (3, true)] {
        let field = move |x: f64, y: f64| -> QTensor {
            let r = (x * x + y * y).sqrt();
            let phi = y.atan2(x);
            BasisFrame::new(phi, k).from_components(&[w0(r), w1(r), 0.0, 0.0, 0.0])
        };
        let r0 = 0.7;
        let n_phi = 48;
        // Components of the image in the co-rotating frame; for a closed
        // radial system these must be φ-independent.
        let mut comps = vec![[0.0f64; 5]; n_phi];
        for q in 0..n_phi {
            let phi = std::f64::consts::TAU * q as f64 / n_phi as f64;
            let (x, y) = (r0 * phi.cos(), r0 * phi.sin());
            let img = QTensor::project(lop_fd(&field, x, y, 1e-4));
            comps[q] = BasisFrame::new(phi, k).components(&img);
        }
        let mut variance = 0.0;
        let mut scale = 0.0f64;
        for c in 0..5 {
            let mean: f64 = comps.iter().map(|v| v[c]).sum::<f64>() / n_phi as f64;
            variance += comps
                .iter()
                .map(|v| (v[c] - mean) * (v[c] - mean))
                .sum::<f64>()
                / n_phi as f64;
            scale = scale.max(mean.abs());
        }
        let aniso = variance.sqrt();
        if expect_breaking {
            assert!(
                aniso > 1e-3 * scale.max(1.0),
                "k={k} must break the rotating-frame closure, aniso {aniso}"
            );
        } else {
            assert!(
                aniso < 1e-5 * scale.max(1.0),
                "k=2 must stay closed, aniso {aniso}"
            );
        }
    }
}

#[test]
fn null_lagrangian_identity_is_exact_for_p1_fields() {
    // Piecewise-linear gradients jump only in the edge-normal direction,
    // so the divergence structure telescopes exactly: the volume integral
    // equals the boundary integral to rounding for any nodal field.
    let p = params(1.0, 0.0, 0.0, 2, 1.0);
    for h in [0.05, 0.025] {
        let mesh = Arc::new(build_mesh(1.0, h).unwrap());
        let f = Field2D::from_fn(mesh, p, |x, y| {
            let r2 = x * x + y * y;
            let phi = y.atan2(x);
            let qb = ldg2d::tensor::boundary_data(phi, &p);
            QTensor::project(qb.matrix() * (r2 * (1.3 - 0.3 * r2) + 0.1 * x * (1.0 - r2)))
        });
        let check = null_lagrangian_check(&f);
        assert!(
            check.boundary.abs() > 1e-3,
            "boundary integral should be nonzero for winding data"
        );
        let gap = (check.volume - check.boundary).abs() / check.boundary.abs();
        assert!(gap < 1e-10, "identity must be discretely exact, gap {gap:.2e}");
    }
}

#[test]
fn constant_field_has_zero_null_lagrangian_sides() {
    let p = params(1.0, 0.0, 0.0, 2, 1.0);
    let mesh = Arc::new(build_mesh(1.0, 0.2).unwrap());
    let q0 = QTensor::uniaxial(1.0, nalgebra::Vector3::new(1.0, 0.0, 0.0));
    let f = Field2D {
        mesh,
        params: p,
        q: vec![q0; 91],
    };
    let f = Field2D {
        q: vec![q0; f.mesh.n_nodes()],
        ..f
    };
    let check = null_lagrangian_check(&f);
    assert_eq!(check.volume, 0.0);
    assert!(check.boundary.abs() < 1e-14);
}

#[test]
fn el_residual_vanishes_on_constant_minimizer_and_tracks_convergence() {
    let p = params(1.0, 0.5, 0.7, 2, 4.0);
    let mesh = Arc::new(build_mesh(4.0, 0.15).unwrap());
    // Spatially constant uniaxial field at s₊ (test boundary override).
    let s = p.s_plus();
    let q0 = QTensor::uniaxial(s, nalgebra::Vector3::new(1.0, 0.0, 0.0));
    let f = Field2D {
        q: vec![q0; mesh.n_nodes()],
        mesh: mesh.clone(),
        params: p,
    };
    let res = el_residual(&f);
    assert!(
        res.l2 < 1e-8 * (1.0 + p.a2 * s),
        "constant bulk minimizer must be residual-free, got {}",
        res.l2
    );
    assert!(res.n_excluded > 0);

    // Residual decreases as the optimizer tolerance tightens.
    let seed = seed_split_pair(mesh.clone(), p, 1.0);
    let loose = minimize_field(
        &seed,
        &FieldSolveOptions {
            grad_tol: Some(3.0),
            max_iter: 60,
            optimizer: FieldOptimizer::LimitedMemory,
        },
    );
    let tight = minimize_field(
        &loose.field,
        &FieldSolveOptions {
            grad_tol: Some(1e-6),
            max_iter: 100_000,
            optimizer: FieldOptimizer::LimitedMemory,
        },
    );
    let r_loose = el_residual(&loose.field).l2;
    let r_tight = el_residual(&tight.field).l2;
    assert!(
        r_tight <= r_loose * 1.05,
        "residual should not grow as the solve tightens: {r_loose} -> {r_tight}"
    );
}

#[test]
fn z_extension_residual_zero_cases_and_positive_for_anisotropy() {
    let p = params(1.0, 0.0, 1.0, 2, 8.0);
    let mesh = Arc::new(build_mesh(8.0, 0.2).unwrap());
    // Constant field: all derivatives vanish.
    let q0 = QTensor::uniaxial(1.0, nalgebra::Vector3::new(0.0, 1.0, 0.0));
    let constf = Field2D {
        q: vec![q0; mesh.n_nodes()],
        mesh: mesh.clone(),
        params: p,
    };
    let res = z_extension_residual(&constf, 2.0, 0.5);
    assert!(res.max_norm < 1e-12);

    // Converged radial minimizer with the anisotropic mapping (L₂, L₃) =
    // (2M, 0): obstruction strictly positive.
    let solve = minimize_radial(&p, 800, &RadialInit::Preset(BranchPreset::Q2Minus), None)
        .unwrap();
    assert!(solve.converged);
    let f = field_from_profile(mesh.clone(), p, &solve.profile).unwrap();
    let res = z_extension_residual(&f, 2.0 * p.m, 0.0);
    assert!(
        res.max_norm > 1e-3 * res.scale,
        "two-constant radial solution must not extend: {} vs scale {}",
        res.max_norm,
        res.scale
    );
    // With L₂ = L₃ = 0 the residual is identically zero.
    let res0 = z_extension_residual(&f, 0.0, 0.0);
    assert_eq!(res0.max_norm, 0.0);
}

#[test]
fn perturbation_solution_matches_coarse_2d_linear_solve() {
    // Independent oracle: solve Hess(E₀)[W] = -∇(I₂ term) on a coarse mesh
    // with CG (Hessian-vector products by finite differences of the
    // gradient) and compare the assembled mode solution.
    let p = params(4.0, 0.0, 0.0, 1, 3.0);
    let (y, wsolve) = solve_perturbation(&p, 400).unwrap();
    let mesh = Arc::new(build_mesh(3.0, 0.09).unwrap());
    let yf = ldg2d::field::field_from_m0_profile(mesh.clone(), p, &y).unwrap();
    let tol = 1e-7 * (5.0 * mesh.n_nodes() as f64).sqrt();
    let y2d = minimize_field(
        &yf,
        &FieldSolveOptions {
            grad_tol: Some(tol),
            max_iter: 30_000,
            optimizer: FieldOptimizer::LimitedMemory,
        },
    );
    assert!(y2d.converged);
    let problem = FieldProblem::new(mesh.clone(), p);
    let x0 = y2d.field.dofs();
    let mut rhs = vec![0.0; x0.len()];
    problem.anisotropy_gradient(&x0, &mut rhs);
    for v in rhs.iter_mut() {
        *v = -*v;
    }
    // CG on H w = rhs with FD Hessian products.
    let mut w = vec![0.0; x0.len()];
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut g1 = vec![0.0; x0.len()];
    let mut g2 = vec![0.0; x0.len()];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let rr0 = rr;
    for _ in 0..600 {
        if rr < 1e-10 * rr0 {
            break;
        }
        let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let eps = 1e-6 * (1.0 + x0.iter().map(|v| v * v).sum::<f64>().sqrt()) / dn;
        let xp: Vec<f64> = x0.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let xm: Vec<f64> = x0.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
        problem.energy_and_gradient(&xp, &mut g1);
        problem.energy_and_gradient(&xm, &mut g2);
        let hd: Vec<f64> = g1
            .iter()
            .zip(&g2)
            .map(|(a, b)| (a - b) / (2.0 * eps))
            .collect();
        let dhd: f64 = d.iter().zip(&hd).map(|(a, b)| a * b).sum();
        assert!(dhd > 0.0, "second variation must be positive along CG directions");
        let alpha = rr / dhd;
        for j in 0..w.len() {
            w[j] += alpha * d[j];
            r[j] -= alpha * hd[j];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for j in 0..d.len() {
            d[j] = r[j] + beta * d[j];
        }
    }
    // Compare against the mode solution on the nodes.
    let w_modes = perturbation_nodal(&mesh, &wsolve.profile);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, node_w) in w_modes.iter().enumerate() {
        let c = &w[i * 5..i * 5 + 5];
        let from_2d = ldg2d::field::s0_basis()
            .iter()
            .zip(c)
            .fold(Matrix3::zeros(), |acc, (b, &v)| acc + b * v);
        num += (from_2d - node_w.matrix()).norm_squared();
        den += node_w.matrix().norm_squared();
    }
    let rel = (num / den.max(1e-300)).sqrt();
    assert!(
        rel < 0.1,
        "mode solution must match the 2D linear solve, rel {rel}"
    );
}
