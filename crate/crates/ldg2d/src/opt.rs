//! Unconstrained minimizers shared by the radial and field solvers:
//! limited-memory BFGS with Armijo backtracking, a damped block-Newton
//! method for one-dimensional discretizations, and a Steihaug trust-region
//! Newton-CG variant with finite-difference Hessian products.

use crate::linalg::BlockTridiag;

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            grad_tol: 1e-8,
            max_iter: 50_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub energy: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with Armijo backtracking.
///
/// `f` evaluates the objective and writes its gradient; the caller is
/// responsible for zeroing gradient entries of fixed (Dirichlet) dofs so
/// they never move.
pub fn lbfgs<F>(mut f: F, x0: Vec<f64>, opts: &MinimizeOptions) -> MinimizeResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const MEMORY: usize = 12;
    const C1: f64 = 1e-4;

    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut e = f(&x, &mut g);
    let mut gnorm = norm(&g);

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut iterations = 0;
    let mut stalled = 0usize;

    for it in 0..opts.max_iter {
        iterations = it;
        if gnorm <= opts.grad_tol {
            return MinimizeResult {
                x,
                energy: e,
                grad_norm: gnorm,
                converged: true,
                iterations,
            };
        }

        // Two-loop recursion.
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &q);
            for j in 0..n {
                q[j] -= alpha[i] * y_hist[i][j];
            }
        }
        let gamma = if m > 0 {
            let ys = 1.0 / rho_hist[m - 1];
            let yy = dot(&y_hist[m - 1], &y_hist[m - 1]);
            (ys / yy).max(1e-12)
        } else {
            1.0 / gnorm.max(1.0)
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for i in 0..m {
            let beta = rho_hist[i] * dot(&y_hist[i], &q);
            for j in 0..n {
                q[j] += (alpha[i] - beta) * s_hist[i][j];
            }
        }
        // q now approximates H^{-1} g; the step direction is -q.
        let mut descent = -dot(&q, &g);
        if !(descent < 0.0) {
            // Bad curvature information: drop memory, fall back to steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            q.copy_from_slice(&g);
            let sc = gamma.max(1e-12);
            for v in q.iter_mut() {
                *v *= sc;
            }
            descent = -dot(&q, &g);
        }

        // Armijo backtracking.
        let mut t = 1.0;
        let mut accepted = false;
        let mut en = e;
        for _ in 0..40 {
            for j in 0..n {
                xn[j] = x[j] - t * q[j];
            }
            en = f(&xn, &mut gn);
            if en <= e + C1 * t * descent {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // The direction is numerically exhausted.
            return MinimizeResult {
                x,
                energy: e,
                grad_norm: gnorm,
                converged: gnorm <= opts.grad_tol,
                iterations,
            };
        }
        // Stagnation at the floating-point floor: energy decreases are in
        // the rounding noise, further iterations only burn line searches.
        if e - en <= 8.0 * f64::EPSILON * e.abs() {
            stalled += 1;
            if stalled >= 8 {
                std::mem::swap(&mut x, &mut xn);
                std::mem::swap(&mut g, &mut gn);
                let gnorm = norm(&g);
                return MinimizeResult {
                    x,
                    energy: en,
                    grad_norm: gnorm,
                    converged: gnorm <= opts.grad_tol,
                    iterations,
                };
            }
        } else {
            stalled = 0;
        }

        let mut s = vec![0.0; n];
        let mut yv = vec![0.0; n];
        for j in 0..n {
            s[j] = xn[j] - x[j];
            yv[j] = gn[j] - g[j];
        }
        let ys = dot(&yv, &s);
        if ys > 1e-12 * norm(&yv) * norm(&s) {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / ys);
            s_hist.push(s);
            y_hist.push(yv);
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        e = en;
        gnorm = norm(&g);
    }

    MinimizeResult {
        x,
        energy: e,
        grad_norm: gnorm,
        converged: gnorm <= opts.grad_tol,
        iterations,
    }
}

/// Discretized 1D functional with nearest-neighbour coupling, so the exact
/// Hessian is symmetric block-tridiagonal. Fixed dofs are flagged inactive;
/// their gradient rows are zero and their Hessian rows are identity.
pub trait BlockNewtonProblem<const D: usize> {
    fn n_nodes(&self) -> usize;
    fn energy_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64;
    fn assemble_hessian(&self, x: &[f64], h: &mut BlockTridiag<D>);
    fn active(&self) -> &[bool];
}

/// Damped Newton with Armijo line search on the energy.
///
/// The Newton system is regularized with an adaptive Levenberg shift; far
/// from the minimum the method degrades gracefully toward gradient descent
/// and near it the shift decays to zero, recovering quadratic convergence.
pub fn newton_block<const D: usize, P: BlockNewtonProblem<D>>(
    problem: &P,
    x0: Vec<f64>,
    opts: &MinimizeOptions,
) -> MinimizeResult {
    const C1: f64 = 1e-4;
    let n = problem.n_nodes() * D;
    assert_eq!(x0.len(), n);
    let active = problem.active().to_vec();
    assert_eq!(active.len(), n);

    let mask = |g: &mut [f64]| {
        for (v, &a) in g.iter_mut().zip(&active) {
            if !a {
                *v = 0.0;
            }
        }
    };

    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut e = problem.energy_and_gradient(&x, &mut g);
    mask(&mut g);
    let mut gnorm = norm(&g);

    let mut h = BlockTridiag::<D>::zeros(problem.n_nodes());
    let mut p = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut lambda = 0.0f64;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        iterations = it;
        if gnorm <= opts.grad_tol {
            return MinimizeResult {
                x,
                energy: e,
                grad_norm: gnorm,
                converged: true,
                iterations,
            };
        }

        problem.assemble_hessian(&x, &mut h);
        // Inactive dofs: identity row, zero coupling.
        for i in 0..problem.n_nodes() {
            for d in 0..D {
                if !active[i * D + d] {
                    for q in 0..D {
                        h.diag[i][(d, q)] = 0.0;
                        h.diag[i][(q, d)] = 0.0;
                        if i > 0 {
                            h.lower[i - 1][(d, q)] = 0.0;
                        }
                        if i + 1 < problem.n_nodes() {
                            h.lower[i][(q, d)] = 0.0;
                        }
                    }
                    h.diag[i][(d, d)] = 1.0;
                }
            }
        }
        let scale = h
            .diag
            .iter()
            .flat_map(|b| (0..D).map(move |d| b[(d, d)].abs()))
            .fold(0.0f64, f64::max)
            .max(1e-30);

        let mut stepped = false;
        let mut en = e;
        for _try in 0..60 {
            let mut shifted = h.clone();
            if lambda > 0.0 {
                let w = vec![scale; n];
                shifted.add_diagonal(lambda, &w);
            }
            let fac = match shifted.factor() {
                Ok(f) => f,
                Err(_) => {
                    lambda = (lambda * 10.0).max(1e-10);
                    continue;
                }
            };
            fac.solve(&g, &mut p);
            mask(&mut p);
            let descent = -dot(&p, &g);
            if !(descent < 0.0) {
                lambda = (lambda * 10.0).max(1e-10);
                continue;
            }
            let mut t = 1.0;
            let mut ok = false;
            for _ in 0..40 {
                for j in 0..n {
                    xn[j] = x[j] - t * p[j];
                }
                en = problem.energy_and_gradient(&xn, &mut gn);
                mask(&mut gn);
                if en <= e + C1 * t * descent && en.is_finite() {
                    ok = true;
                    break;
                }
                t *= 0.5;
            }
            if ok {
                stepped = true;
                lambda = if t >= 0.99 { lambda / 10.0 } else { lambda };
                if lambda < 1e-14 {
                    lambda = 0.0;
                }
                break;
            }
            lambda = (lambda * 10.0).max(1e-10);
        }
        if !stepped {
            return MinimizeResult {
                x,
                energy: e,
                grad_norm: gnorm,
                converged: false,
                iterations,
            };
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        e = en;
        gnorm = norm(&g);
    }

    MinimizeResult {
        x,
        energy: e,
        grad_norm: gnorm,
        converged: gnorm <= opts.grad_tol,
        iterations,
    }
}

/// Trust-region Newton with Steihaug-Toint CG; Hessian-vector products are
/// taken by central differences of the gradient.
pub fn trust_region_ncg<F>(mut f: F, x0: Vec<f64>, opts: &MinimizeOptions) -> MinimizeResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut e = f(&x, &mut g);
    let mut gnorm = norm(&g);
    let mut radius = 1.0f64.max(0.1 * norm(&x));
    let mut iterations = 0;

    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];

    for it in 0..opts.max_iter {
        iterations = it;
        if gnorm <= opts.grad_tol {
            return MinimizeResult {
                x,
                energy: e,
                grad_norm: gnorm,
                converged: true,
                iterations,
            };
        }

        // Steihaug CG on the local quadratic model.
        let mut p = vec![0.0; n];
        let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut d = r.clone();
        let mut rr = dot(&r, &r);
        let cg_tol = (gnorm * gnorm.sqrt().min(0.1)).max(1e-14);
        let mut hd = vec![0.0; n];
        let max_cg = 200.min(n);
        for _ in 0..max_cg {
            if rr.sqrt() <= cg_tol {
                break;
            }
            // hd = H d by central differences.
            let dn = norm(&d).max(1e-30);
            let eps = 1e-6 * (1.0 + norm(&x)) / dn;
            let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
            let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
            f(&xp, &mut gp);
            f(&xm, &mut gm);
            for j in 0..n {
                hd[j] = (gp[j] - gm[j]) / (2.0 * eps);
            }
            let dhd = dot(&d, &hd);
            if dhd <= 0.0 {
                // Follow d to the trust-region boundary.
                let (tau, _) = boundary_step(&p, &d, radius);
                for j in 0..n {
                    p[j] += tau * d[j];
                }
                break;
            }
            let alpha = rr / dhd;
            let mut hit = false;
            let pn2: f64 = p
                .iter()
                .zip(&d)
                .map(|(a, b)| (a + alpha * b) * (a + alpha * b))
                .sum();
            if pn2.sqrt() >= radius {
                let (tau, _) = boundary_step(&p, &d, radius);
                for j in 0..n {
                    p[j] += tau * d[j];
                }
                hit = true;
            } else {
                for j in 0..n {
                    p[j] += alpha * d[j];
                    r[j] -= alpha * hd[j];
                }
            }
            if hit {
                break;
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for j in 0..n {
                d[j] = r[j] + beta * d[j];
            }
        }

        let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let mut gn = vec![0.0; n];
        let en = f(&xn, &mut gn);
        // Model decrease: -g·p - p·Hp/2 estimated without an extra product:
        // use the actual decrease ratio against the linear part as a proxy.
        let pred = -dot(&g, &p) * 0.5;
        let actual = e - en;
        let rho = if pred.abs() > 1e-300 { actual / pred } else { 0.0 };
        if actual > 0.0 && rho > 0.05 {
            x = xn;
            g = gn;
            e = en;
            gnorm = norm(&g);
            if rho > 0.7 {
                radius = (radius * 2.0).min(1e6);
            }
        } else {
            radius *= 0.25;
            if radius < 1e-14 {
                return MinimizeResult {
                    x,
                    energy: e,
                    grad_norm: gnorm,
                    converged: gnorm <= opts.grad_tol,
                    iterations,
                };
            }
        }
    }

    MinimizeResult {
        x,
        energy: e,
        grad_norm: gnorm,
        converged: gnorm <= opts.grad_tol,
        iterations,
    }
}

/// Positive root of |p + τ d| = radius.
fn boundary_step(p: &[f64], d: &[f64], radius: f64) -> (f64, f64) {
    let dd = dot(d, d).max(1e-300);
    let pd = dot(p, d);
    let pp = dot(p, p);
    let disc = (pd * pd + dd * (radius * radius - pp)).max(0.0);
    let tau = (-pd + disc.sqrt()) / dd;
    (tau, disc)
}
