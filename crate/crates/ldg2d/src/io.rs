//! File formats: columnar CSV for profiles, checkpoints and glyphs, JSON
//! for reports and manifests. Floats are written in shortest round-trip
//! form, so re-reading reproduces the bits.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::field::{Field2D, GlyphRecord};
use crate::mesh::{build_mesh, DiskMesh};
use crate::perturbation::{PerturbationProfile, ScalingCheck};
use crate::radial::{M0Profile, RadialProfile};
use crate::tensor::{boundary_data, MaterialParams, QTensor};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checkpoint is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Params(#[from] crate::tensor::ParamError),
}

fn params_header(p: &MaterialParams) -> String {
    format!(
        "a2,{}\nb2,{}\nc2,{}\nL,{}\nM,{}\nk,{}\nR,{}\n",
        p.a2, p.b2, p.c2, p.l, p.m, p.k, p.radius
    )
}

fn parse_kv(lines: &mut std::iter::Peekable<std::str::Lines>, lineno: &mut usize) -> Vec<(String, String)> {
    let mut out = Vec::new();
    while let Some(line) = lines.peek() {
        let l = line.trim();
        if l.starts_with('#') || l.is_empty() {
            lines.next();
            *lineno += 1;
            continue;
        }
        let parts: Vec<&str> = l.split(',').collect();
        if parts.len() == 2 && parts[0].chars().all(|c| c.is_alphanumeric() || c == '_') {
            out.push((parts[0].to_string(), parts[1].to_string()));
            lines.next();
            *lineno += 1;
        } else {
            break;
        }
    }
    out
}

fn kv_get(kv: &[(String, String)], key: &str) -> Result<f64, IoError> {
    kv.iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| IoError::Parse {
            line: 0,
            msg: format!("missing key {key}"),
        })?
        .1
        .parse()
        .map_err(|e| IoError::Parse {
            line: 0,
            msg: format!("bad value for {key}: {e}"),
        })
}

fn read_params(kv: &[(String, String)]) -> Result<MaterialParams, IoError> {
    Ok(MaterialParams::new(
        kv_get(kv, "a2")?,
        kv_get(kv, "b2")?,
        kv_get(kv, "c2")?,
        kv_get(kv, "L")?,
        kv_get(kv, "M")?,
        kv_get(kv, "k")? as i32,
        kv_get(kv, "R")?,
    )?)
}

/// Radial profile: header (k, R, N, material constants), then rows
/// r, w0..w4.
pub fn write_profile_csv(
    path: &Path,
    profile: &RadialProfile,
    params: &MaterialParams,
) -> Result<(), IoError> {
    let mut s = String::new();
    s.push_str("# radial profile\n");
    let _ = write!(s, "N,{}\n", profile.n_intervals());
    s.push_str(&params_header(params));
    s.push_str("r,w0,w1,w2,w3,w4\n");
    for i in 0..profile.r.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            profile.r[i],
            profile.w[0][i],
            profile.w[1][i],
            profile.w[2][i],
            profile.w[3][i],
            profile.w[4][i]
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_profile_csv(path: &Path) -> Result<(RadialProfile, MaterialParams), IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().peekable();
    let mut lineno = 0usize;
    let kv = parse_kv(&mut lines, &mut lineno);
    let params = read_params(&kv)?;
    let header = lines.next().ok_or(IoError::Parse {
        line: lineno,
        msg: "missing column header".into(),
    })?;
    lineno += 1;
    if !header.starts_with("r,w0") {
        return Err(IoError::Parse {
            line: lineno,
            msg: "unexpected column header".into(),
        });
    }
    let mut r = Vec::new();
    let mut w: [Vec<f64>; 5] = Default::default();
    for line in lines {
        lineno += 1;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        if vals.len() != 6 {
            return Err(IoError::Parse {
                line: lineno,
                msg: "expected 6 columns".into(),
            });
        }
        r.push(vals[0]);
        for c in 0..5 {
            w[c].push(vals[c + 1]);
        }
    }
    Ok((
        RadialProfile {
            r,
            w,
            k: params.k,
        },
        params,
    ))
}

pub fn write_m0_profile_csv(
    path: &Path,
    profile: &M0Profile,
    params: &MaterialParams,
) -> Result<(), IoError> {
    let mut s = String::new();
    s.push_str("# radial (u,v) profile\n");
    let _ = write!(s, "N,{}\n", profile.n_intervals());
    s.push_str(&params_header(params));
    s.push_str("r,u,v\n");
    for i in 0..profile.r.len() {
        let _ = writeln!(s, "{},{},{}", profile.r[i], profile.u[i], profile.v[i]);
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_perturbation_csv(path: &Path, p: &PerturbationProfile) -> Result<(), IoError> {
    let mut s = String::new();
    s.push_str("# symmetry-breaking correction modes\n");
    let _ = write!(s, "k,{}\n", p.k);
    s.push_str("r,a0,a1,b0,b1,b2\n");
    for i in 0..p.r.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.r[i], p.a0[i], p.a1[i], p.b0[i], p.b1[i], p.b2[i]
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_scaling_csv(path: &Path, check: &ScalingCheck) -> Result<(), IoError> {
    let mut s = String::new();
    s.push_str("eps,delta,delta_rel,delta_raw,converged\n");
    for row in &check.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            row.eps, row.delta, row.delta_rel, row.delta_raw, row.converged
        );
    }
    if let Some(slope) = check.slope {
        let _ = writeln!(s, "# slope,{slope}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Field checkpoint: parameter header, node table with the six stored
/// tensor entries (five independent plus the trace closure, kept
/// redundantly so integrity checks can detect corruption), triangle table.
pub fn write_field_checkpoint(path: &Path, f: &Field2D) -> Result<(), IoError> {
    let mesh = &*f.mesh;
    let mut s = String::new();
    s.push_str("# field checkpoint\n");
    let _ = write!(s, "n_rings,{}\n", mesh.n_rings);
    let _ = write!(s, "n_nodes,{}\n", mesh.n_nodes());
    let _ = write!(s, "n_triangles,{}\n", mesh.triangles.len());
    s.push_str(&params_header(&f.params));
    s.push_str("node,x,y,q11,q22,q33,q12,q13,q23\n");
    for (i, q) in f.q.iter().enumerate() {
        let m = q.matrix();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            i,
            mesh.nodes[i][0],
            mesh.nodes[i][1],
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 2)]
        );
    }
    s.push_str("tri,a,b,c\n");
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", t, tri[0], tri[1], tri[2]);
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Checkpoint contents before projection; the raw entries keep whatever
/// the file said, so invariant violations remain observable.
pub struct Checkpoint {
    pub params: MaterialParams,
    pub mesh: Arc<DiskMesh>,
    pub raw: Vec<Matrix3<f64>>,
}

impl Checkpoint {
    /// Violations of the structural invariants: symmetry/trace of the
    /// nodal tensors, Dirichlet ring data, mesh integrity.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if let Err(e) = self.mesh.validate() {
            problems.push(format!("mesh: {e}"));
        }
        for (i, m) in self.raw.iter().enumerate() {
            let tr = m.trace().abs();
            if tr > 1e-10 * (1.0 + m.norm()) {
                problems.push(format!("node {i}: trace violation |tr| = {tr:.3e}"));
            }
        }
        let s = self.params.s_plus();
        for &(b, phi) in &self.mesh.boundary {
            let want = boundary_data(phi, &self.params);
            let err = (self.raw[b] - want.matrix()).norm();
            if err > 1e-8 * (1.0 + s) {
                problems.push(format!(
                    "boundary node {b}: Dirichlet data off by {err:.3e}"
                ));
            }
        }
        problems
    }

    pub fn into_field(self) -> Field2D {
        let q: Vec<QTensor> = self.raw.iter().map(|m| QTensor::project(*m)).collect();
        Field2D {
            mesh: self.mesh,
            params: self.params,
            q,
        }
    }
}

pub fn read_field_checkpoint(path: &Path) -> Result<Checkpoint, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().peekable();
    let mut lineno = 0usize;
    let kv = parse_kv(&mut lines, &mut lineno);
    let params = read_params(&kv)?;
    let n_rings = kv_get(&kv, "n_rings")? as usize;
    let n_nodes = kv_get(&kv, "n_nodes")? as usize;
    let mesh = Arc::new(build_mesh(params.radius, params.radius / n_rings as f64)?);
    if mesh.n_nodes() != n_nodes {
        return Err(IoError::Inconsistent(format!(
            "node count {} does not match the deterministic mesh ({})",
            n_nodes,
            mesh.n_nodes()
        )));
    }
    let header = lines.next().ok_or(IoError::Parse {
        line: lineno,
        msg: "missing node header".into(),
    })?;
    lineno += 1;
    if !header.starts_with("node,") {
        return Err(IoError::Parse {
            line: lineno,
            msg: "unexpected node header".into(),
        });
    }
    let mut raw = vec![Matrix3::zeros(); n_nodes];
    let mut seen = 0usize;
    for line in lines.by_ref() {
        lineno += 1;
        if line.starts_with("tri,") {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        if vals.len() != 9 {
            return Err(IoError::Parse {
                line: lineno,
                msg: "expected 9 columns in node table".into(),
            });
        }
        let i = vals[0] as usize;
        if i >= n_nodes {
            return Err(IoError::Inconsistent(format!("node index {i} out of range")));
        }
        let (q11, q22, q33, q12, q13, q23) =
            (vals[3], vals[4], vals[5], vals[6], vals[7], vals[8]);
        raw[i] = Matrix3::new(q11, q12, q13, q12, q22, q23, q13, q23, q33);
        seen += 1;
    }
    if seen != n_nodes {
        return Err(IoError::Inconsistent(format!(
            "node table has {seen} rows, expected {n_nodes}"
        )));
    }
    Ok(Checkpoint { params, mesh, raw })
}

pub fn write_glyphs_csv(path: &Path, glyphs: &[GlyphRecord]) -> Result<(), IoError> {
    let mut s = String::new();
    s.push_str(
        "x,y,e1x,e1y,e1z,e2x,e2y,e2z,e3x,e3y,e3z,len1,len2,len3,beta\n",
    );
    for g in glyphs {
        let f = &g.frame;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            g.position[0],
            g.position[1],
            f[(0, 0)],
            f[(1, 0)],
            f[(2, 0)],
            f[(0, 1)],
            f[(1, 1)],
            f[(2, 1)],
            f[(0, 2)],
            f[(1, 2)],
            f[(2, 2)],
            g.lengths[0],
            g.lengths[1],
            g.lengths[2],
            g.beta
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Biaxiality field export: node position and β.
pub fn write_beta_csv(path: &Path, f: &Field2D) -> Result<(), IoError> {
    let mut s = String::new();
    s.push_str("x,y,beta\n");
    for (i, q) in f.q.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{}",
            f.mesh.nodes[i][0],
            f.mesh.nodes[i][1],
            crate::tensor::biaxiality(q)
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}
