use ldg2d::field::*;
use ldg2d::mesh::build_mesh;
use ldg2d::perturbation::*;
use ldg2d::tensor::{MaterialParams, QTensor};
use nalgebra::Matrix3;
use std::sync::Arc;

fn main() {
    // 1) Criterion-10 pipeline exactly as acceptance will run it.
    let p = MaterialParams::new(400.0, 0.0, 1.0, 1.0, 0.0, -1, 5.0).unwrap();
    let t0 = std::time::Instant::now();
    match epsilon_scaling_check(&p, &[0.025, 0.05, 0.1], 2000, 0.04, Some(5e-3)) {
        Ok(c) => {
            println!("crit10 a2=400: slope={:?} yl2={:.2} [{:?}]", c.slope, c.y_l2, t0.elapsed());
            for r in &c.rows {
                println!("   eps={} delta={:.4e} raw={:.4e} rel={:.4e} conv={}", r.eps, r.delta, r.delta_raw, r.delta_rel, r.converged);
            }
        }
        Err(e) => println!("crit10: ERR {e}"),
    }
    // 2) attribution probe: a2=1, R=5 and R=2; print |W| norms for ladder analysis.
    for (a2, radius) in [(1.0f64, 5.0f64), (1.0, 2.0)] {
        let p = MaterialParams::new(a2, 0.0, 1.0, 1.0, 0.0, -1, radius).unwrap();
        match epsilon_scaling_check(&p, &[0.05, 0.1], 1500, radius / 60.0, Some(2e-5)) {
            Ok(c) => {
                println!("probe a2={a2} R={radius}: slope={:?} yl2={:.3}", c.slope, c.y_l2);
                for r in &c.rows {
                    println!("   eps={} delta={:.4e} rel={:.4e}", r.eps, r.delta, r.delta_rel);
                }
            }
            Err(e) => println!("probe a2={a2} R={radius}: ERR {e}"),
        }
    }
    // 3) v/t gap at R/150 plus M sensitivity at R/60.
    let sep = 12.5;
    let e4 = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0) / std::f64::consts::SQRT_2;
    for (m, div) in [(-0.5f64, 150.0f64), (-0.4, 60.0), (-0.6, 60.0)] {
        let pp = MaterialParams::new(1.0, 0.0, 1.0, 1.0, m, 2, 50.0).unwrap();
        let mesh = Arc::new(build_mesh(50.0, 50.0 / div).unwrap());
        let s = pp.s_plus();
        let opts = FieldSolveOptions { grad_tol: Some(5e-6 * (mesh.n_nodes() as f64 / 11000.0).sqrt()), max_iter: 300_000, optimizer: FieldOptimizer::LimitedMemory };
        let v = minimize_field(&seed_split_pair(mesh.clone(), pp, sep), &opts);
        let base = seed_split_pair(mesh.clone(), pp, sep);
        let mut q = base.q.clone();
        for (i, pnt) in mesh.nodes.iter().enumerate() {
            if mesh.is_boundary[i] { continue; }
            let bump = (-(pnt[0] * pnt[0] + pnt[1] * pnt[1]) / (50.0f64 * 50.0 / 9.0)).exp();
            q[i] = QTensor::project(q[i].matrix() + e4 * (0.8 * s * bump));
        }
        let t = minimize_field(&Field2D { mesh: mesh.clone(), params: pp, q }, &opts);
        let ct = classify_field(&t.field, 1e-3 * s);
        println!("vt M={m} div={div}: Ev={:.8} Et={:.8} gap={:+.6} t-class={:?} vert={:.2}", v.energy, t.energy, t.energy - v.energy, ct.class, ct.vertical_residual);
    }
}
