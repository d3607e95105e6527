//! Continuation sweeps over the anisotropy constant and disk radius:
//! branch bookkeeping with warm starts in both sweep directions, global
//! minimizer selection per grid point, and transition bracketing.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elastic::coercivity_dirichlet;
use crate::field::{
    classify_field, detect_defects, field_from_profile, minimize_field, seed_split_pair,
    seed_tilted, total_energy, Field2D, FieldClass, FieldSolveOptions,
};
use crate::mesh::{build_mesh, DiskMesh, MeshError};
use crate::radial::{
    classify_profile, minimize_radial, reduced_hessian_min_eig, BranchPreset, RadialError,
    RadialInit, RadialProfile,
};
use crate::tensor::{MaterialParams, ParamError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("config invalid: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Radial(#[from] RadialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Q2Minus,
    Q2PlusMinus,
    Q3,
    Q5,
    NrVertical,
    NrTilted,
}

impl BranchKind {
    pub fn is_radial(&self) -> bool {
        !matches!(self, BranchKind::NrVertical | BranchKind::NrTilted)
    }

    fn preset(&self) -> Option<BranchPreset> {
        match self {
            BranchKind::Q2Minus => Some(BranchPreset::Q2Minus),
            BranchKind::Q2PlusMinus => Some(BranchPreset::Q2PlusMinus),
            BranchKind::Q3 => Some(BranchPreset::Q3 { negative_w3: true }),
            BranchKind::Q5 => Some(BranchPreset::Q5),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BranchKind::Q2Minus => "q2minus",
            BranchKind::Q2PlusMinus => "q2pm",
            BranchKind::Q3 => "q3",
            BranchKind::Q5 => "q5",
            BranchKind::NrVertical => "nr_vertical",
            BranchKind::NrTilted => "nr_tilted",
        }
    }
}

fn default_radial_n() -> usize {
    2000
}
fn default_mesh_fraction() -> f64 {
    1.0 / 60.0
}
fn default_m_min() -> f64 {
    -0.75
}
fn default_true() -> bool {
    true
}

/// Sweep configuration; mirrors the CLI config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub l: f64,
    pub k: i32,
    pub m_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub branches: Vec<BranchKind>,
    #[serde(default = "default_radial_n")]
    pub radial_n: usize,
    /// Mesh target edge length as a fraction of R.
    #[serde(default = "default_mesh_fraction")]
    pub mesh_h_fraction: f64,
    /// Lower bound accepted for M (kept explicit: the coercivity bound is
    /// -3L/4, and the sweep refuses anything at or below it).
    #[serde(default = "default_m_min")]
    pub m_min: f64,
    #[serde(default = "default_true")]
    pub compute_stability: bool,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.m_grid.is_empty() || self.r_grid.is_empty() {
            return Err(SweepError::BadConfig("empty grid".into()));
        }
        if self.branches.is_empty() {
            return Err(SweepError::BadConfig("no branches".into()));
        }
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !sorted(&self.m_grid) || !sorted(&self.r_grid) {
            return Err(SweepError::BadConfig("grids must be strictly increasing".into()));
        }
        for &m in &self.m_grid {
            if m <= self.m_min {
                return Err(SweepError::BadConfig(format!(
                    "M = {m} at or below the configured bound {}",
                    self.m_min
                )));
            }
            if !coercivity_dirichlet(self.l, m) {
                return Err(SweepError::BadConfig(format!(
                    "(L, M) = ({}, {m}) violates Dirichlet coercivity",
                    self.l
                )));
            }
        }
        Ok(())
    }

    fn params(&self, m: f64, r: f64) -> Result<MaterialParams, ParamError> {
        MaterialParams::new(self.a2, self.b2, self.c2, self.l, m, self.k, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPass {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub branch: BranchKind,
    pub pass: SweepPass,
    pub m: f64,
    pub r: f64,
    pub label: String,
    /// Disk energy comparable across branches at this grid point: FEM
    /// energy on the shared mesh when 2D branches participate, otherwise
    /// 2π times the reduced radial energy.
    pub energy: f64,
    pub energy_radial_1d: Option<f64>,
    pub converged: bool,
    pub min_eig: Option<f64>,
    pub defects: Vec<[f64; 2]>,
    pub symmetry_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GlobalPoint {
    pub m: f64,
    pub r: f64,
    pub label: Option<String>,
    pub branch: Option<BranchKind>,
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    FirstOrder,
    Bifurcation,
    Unresolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transition {
    pub r: f64,
    pub pass: SweepPass,
    pub m_lo: f64,
    pub m_hi: f64,
    pub from: String,
    pub to: String,
    pub kind: TransitionKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseDiagram {
    pub records: Vec<BranchRecord>,
    pub global: Vec<GlobalPoint>,
    pub unresolved: Vec<(f64, f64)>,
}

enum WarmState {
    Radial(RadialProfile, [bool; 5]),
    Field(Field2D),
}

/// Walk the M grid at fixed R for every branch, warm-starting each solve
/// from its neighbour; ascending and descending passes are both recorded
/// so first-order hysteresis stays visible.
pub fn continuation_sweep(cfg: &SweepConfig) -> Result<PhaseDiagram, SweepError> {
    cfg.validate()?;
    let mut records = Vec::new();
    for &r in &cfg.r_grid {
        let need_mesh = cfg.branches.iter().any(|b| !b.is_radial());
        let mesh: Option<Arc<DiskMesh>> = if need_mesh || cfg.branches.iter().any(|b| b.is_radial())
        {
            // One common mesh per radius keeps branch energies comparable.
            Some(Arc::new(build_mesh(r, r * cfg.mesh_h_fraction)?))
        } else {
            None
        };
        for &branch in &cfg.branches {
            for pass in [SweepPass::Ascending, SweepPass::Descending] {
                let order: Vec<f64> = match pass {
                    SweepPass::Ascending => cfg.m_grid.clone(),
                    SweepPass::Descending => {
                        cfg.m_grid.iter().rev().copied().collect()
                    }
                };
                let mut warm: Option<WarmState> = None;
                for &m in &order {
                    let params = cfg.params(m, r)?;
                    let record = solve_branch(cfg, &params, branch, pass, mesh.clone(), &mut warm);
                    records.push(record);
                }
            }
        }
    }
    let (global, unresolved) = global_minimizers(cfg, &records);
    Ok(PhaseDiagram {
        records,
        global,
        unresolved,
    })
}

fn solve_branch(
    cfg: &SweepConfig,
    params: &MaterialParams,
    branch: BranchKind,
    pass: SweepPass,
    mesh: Option<Arc<DiskMesh>>,
    warm: &mut Option<WarmState>,
) -> BranchRecord {
    let mut rec = BranchRecord {
        branch,
        pass,
        m: params.m,
        r: params.radius,
        label: String::new(),
        energy: f64::NAN,
        energy_radial_1d: None,
        converged: false,
        min_eig: None,
        defects: Vec::new(),
        symmetry_residual: None,
    };
    if branch.is_radial() {
        let preset = branch.preset().unwrap();
        let init = match warm {
            Some(WarmState::Radial(p, mask)) => RadialInit::Warm {
                profile: p.clone(),
                mask: *mask,
            },
            _ => RadialInit::Preset(preset),
        };
        let solve = match minimize_radial(params, cfg.radial_n, &init, None) {
            Ok(s) => s,
            Err(_) => {
                *warm = None;
                rec.label = "failed".into();
                return rec;
            }
        };
        rec.converged = solve.converged;
        rec.energy_radial_1d = Some(solve.energy);
        if solve.converged {
            let tol = 1e-3 * params.s_plus();
            rec.label = classify_profile(&solve, tol)
                .map(|c| c.to_string())
                .unwrap_or_else(|_| "unclassified".into());
            if cfg.compute_stability {
                rec.min_eig = reduced_hessian_min_eig(&solve.profile, params).ok();
            }
            rec.energy = match &mesh {
                Some(mesh) => field_from_profile(mesh.clone(), *params, &solve.profile)
                    .map(|f| total_energy(&f))
                    .unwrap_or(f64::NAN),
                None => 2.0 * std::f64::consts::PI * solve.energy,
            };
            *warm = Some(WarmState::Radial(solve.profile, solve.mask));
        } else {
            *warm = None;
            rec.label = "unconverged".into();
        }
    } else {
        let mesh = mesh.expect("field branches need a mesh");
        let init = match warm {
            Some(WarmState::Field(f)) => {
                let mut f = f.clone();
                f.params = *params;
                // Re-pin the ring in case s₊ changed (it does not under M
                // sweeps, but R-independent reuse is cheap to make safe).
                for &(b, phi) in &mesh.boundary {
                    f.q[b] = crate::tensor::boundary_data(phi, params);
                }
                f
            }
            _ => match branch {
                BranchKind::NrVertical => {
                    seed_split_pair(mesh.clone(), *params, params.radius / 4.0)
                }
                BranchKind::NrTilted => {
                    seed_tilted(mesh.clone(), *params, params.radius / 4.0, 0.4)
                }
                _ => unreachable!(),
            },
        };
        let solve = minimize_field(&init, &FieldSolveOptions::default());
        rec.converged = solve.converged;
        rec.energy = solve.energy;
        if solve.converged {
            let tol = 1e-3 * params.s_plus();
            let class = classify_field(&solve.field, tol);
            rec.label = match class.class {
                FieldClass::Radial => "radial".into(),
                FieldClass::NrVertical => "nr_vertical".into(),
                FieldClass::NrTilted => "nr_tilted".into(),
            };
            rec.symmetry_residual = Some(class.symmetry_residual);
            rec.defects = detect_defects(&solve.field, 0.05)
                .into_iter()
                .map(|d| d.position)
                .collect();
            *warm = Some(WarmState::Field(solve.field));
        } else {
            *warm = None;
            rec.label = "unconverged".into();
        }
    }
    rec
}

fn global_minimizers(
    cfg: &SweepConfig,
    records: &[BranchRecord],
) -> (Vec<GlobalPoint>, Vec<(f64, f64)>) {
    let mut global = Vec::new();
    let mut unresolved = Vec::new();
    for &r in &cfg.r_grid {
        for &m in &cfg.m_grid {
            let best = records
                .iter()
                .filter(|rec| rec.m == m && rec.r == r && rec.converged && rec.energy.is_finite())
                .min_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
            match best {
                Some(rec) => global.push(GlobalPoint {
                    m,
                    r,
                    label: Some(rec.label.clone()),
                    branch: Some(rec.branch),
                    energy: Some(rec.energy),
                }),
                None => {
                    unresolved.push((m, r));
                    global.push(GlobalPoint {
                        m,
                        r,
                        label: None,
                        branch: None,
                        energy: None,
                    });
                }
            }
        }
    }
    (global, unresolved)
}

/// Bracket global-label changes between adjacent M grid points, per radius
/// and per sweep direction; never interpolates a transition point.
pub fn detect_transitions(cfg: &SweepConfig, pd: &PhaseDiagram) -> Vec<Transition> {
    let mut out = Vec::new();
    for &r in &cfg.r_grid {
        for pass in [SweepPass::Ascending, SweepPass::Descending] {
            // Per-pass global labels.
            let labels: Vec<(f64, Option<String>)> = cfg
                .m_grid
                .iter()
                .map(|&m| {
                    let best = pd
                        .records
                        .iter()
                        .filter(|rec| {
                            rec.m == m && rec.r == r && rec.pass == pass && rec.converged
                        })
                        .min_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
                    (m, best.map(|b| b.label.clone()))
                })
                .collect();
            for w in labels.windows(2) {
                let (m_lo, ref lab_lo) = w[0];
                let (m_hi, ref lab_hi) = w[1];
                let (Some(lo), Some(hi)) = (lab_lo.as_ref(), lab_hi.as_ref()) else {
                    continue;
                };
                if lo == hi {
                    continue;
                }
                let kind = classify_transition(pd, r, pass, m_lo, m_hi, lo, hi);
                out.push(Transition {
                    r,
                    pass,
                    m_lo,
                    m_hi,
                    from: lo.clone(),
                    to: hi.clone(),
                    kind,
                });
            }
        }
    }
    out
}

fn classify_transition(
    pd: &PhaseDiagram,
    r: f64,
    pass: SweepPass,
    m_lo: f64,
    m_hi: f64,
    lab_lo: &str,
    lab_hi: &str,
) -> TransitionKind {
    let find = |m: f64, label: &str| {
        pd.records.iter().find(|rec| {
            rec.m == m && rec.r == r && rec.pass == pass && rec.label == label && rec.converged
        })
    };
    let lo_at_lo = find(m_lo, lab_lo);
    let lo_at_hi = find(m_hi, lab_lo);
    let hi_at_lo = find(m_lo, lab_hi);
    let hi_at_hi = find(m_hi, lab_hi);

    // Both branches persist across the bracket with an energy crossing:
    // first-order transition.
    if let (Some(a0), Some(a1), Some(b0), Some(b1)) = (lo_at_lo, lo_at_hi, hi_at_lo, hi_at_hi) {
        let d0 = a0.energy - b0.energy;
        let d1 = a1.energy - b1.energy;
        if d0 * d1 <= 0.0 {
            return TransitionKind::FirstOrder;
        }
    }
    // Branch appearance/disappearance or a stability change brackets a
    // bifurcation.
    let appeared = lo_at_hi.is_none() || hi_at_lo.is_none();
    let eig_flip = [lo_at_lo, lo_at_hi, hi_at_lo, hi_at_hi]
        .iter()
        .flatten()
        .filter_map(|rec| rec.min_eig)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), e| {
            (mn.min(e), mx.max(e))
        });
    if appeared || (eig_flip.0 < 0.0 && eig_flip.1 > 0.0) {
        return TransitionKind::Bifurcation;
    }
    TransitionKind::Unresolved
}
