//! Structured quasi-uniform triangulation of a disk.
//!
//! Nodes are laid out on concentric rings, with 6j nodes on ring j. This
//! gives near-equilateral triangles, O(h²) boundary resolution of the
//! circle, and an exact six-fold rotational symmetry of the node set that
//! the symmetry classifier exploits: rotating by a multiple of π/3 permutes
//! nodes, so equivariance can be tested without interpolation error.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("target edge length {h} out of range for radius {r}")]
    BadTargetH { h: f64, r: f64 },
    #[error("requested resolution needs {0} nodes, above the budget")]
    TooFine(usize),
    #[error("degenerate triangle {0} (area {1:.3e})")]
    Degenerate(usize, f64),
}

/// Rotational symmetry order of the node layout.
pub const MESH_SYMMETRY: usize = 6;

const NODE_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct DiskMesh {
    pub radius: f64,
    /// Nominal edge length R / n_rings.
    pub h: f64,
    pub n_rings: usize,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
    /// Gradients of the three hat functions per triangle.
    pub hat_grads: Vec<[[f64; 2]; 3]>,
    pub is_boundary: Vec<bool>,
    /// Boundary node indices ordered by polar angle, with the angle.
    pub boundary: Vec<(usize, f64)>,
    pub neighbors: Vec<Vec<usize>>,
    /// Graph distance (in edges) to the nearest boundary node, capped at 2.
    pub boundary_depth: Vec<u8>,
    ring_start: Vec<usize>,
    grid: LocatorGrid,
}

#[derive(Debug, Clone)]
struct LocatorGrid {
    nx: usize,
    cell: f64,
    origin: f64,
    bins: Vec<Vec<u32>>,
}

pub fn build_mesh(radius: f64, target_h: f64) -> Result<DiskMesh, MeshError> {
    if !(target_h > 0.0 && target_h < radius && radius.is_finite()) {
        return Err(MeshError::BadTargetH {
            h: target_h,
            r: radius,
        });
    }
    let n_rings = ((radius / target_h).round() as usize).max(2);
    let node_count = 1 + 3 * n_rings * (n_rings + 1);
    if node_count > NODE_BUDGET {
        return Err(MeshError::TooFine(node_count));
    }

    let mut nodes = Vec::with_capacity(node_count);
    let mut ring_start = Vec::with_capacity(n_rings + 1);
    nodes.push([0.0, 0.0]);
    ring_start.push(0);
    for j in 1..=n_rings {
        ring_start.push(nodes.len());
        let m = MESH_SYMMETRY * j;
        let rj = radius * j as f64 / n_rings as f64;
        for l in 0..m {
            let th = std::f64::consts::TAU * l as f64 / m as f64;
            nodes.push([rj * th.cos(), rj * th.sin()]);
        }
    }

    let mut triangles: Vec<[usize; 3]> = Vec::new();
    // Centre fan.
    {
        let m1 = MESH_SYMMETRY;
        let s1 = ring_start[1];
        for l in 0..m1 {
            triangles.push([0, s1 + l, s1 + (l + 1) % m1]);
        }
    }
    // Annulus strips: advance the pointer whose next node has the smaller angle.
    for j in 1..n_rings {
        let (mi, mo) = (MESH_SYMMETRY * j, MESH_SYMMETRY * (j + 1));
        let (si, so) = (ring_start[j], ring_start[j + 1]);
        let ang_i = |l: usize| std::f64::consts::TAU * l as f64 / mi as f64;
        let ang_o = |l: usize| std::f64::consts::TAU * l as f64 / mo as f64;
        let (mut i, mut o) = (0usize, 0usize);
        while i < mi || o < mo {
            let next_i = if i < mi { ang_i(i + 1) } else { f64::INFINITY };
            let next_o = if o < mo { ang_o(o + 1) } else { f64::INFINITY };
            if next_o <= next_i {
                triangles.push([si + i % mi, so + o % mo, so + (o + 1) % mo]);
                o += 1;
            } else {
                triangles.push([si + i % mi, so + o % mo, si + (i + 1) % mi]);
                i += 1;
            }
        }
    }

    let n = nodes.len();
    let mut areas = Vec::with_capacity(triangles.len());
    let mut hat_grads = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter_mut().enumerate() {
        let mut a = signed_area(&nodes, tri);
        if a < 0.0 {
            tri.swap(1, 2);
            a = -a;
        }
        if a <= 1e-14 * radius * radius {
            return Err(MeshError::Degenerate(t, a));
        }
        areas.push(a);
        let [p0, p1, p2] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
        let inv2a = 1.0 / (2.0 * a);
        hat_grads.push([
            [(p1[1] - p2[1]) * inv2a, (p2[0] - p1[0]) * inv2a],
            [(p2[1] - p0[1]) * inv2a, (p0[0] - p2[0]) * inv2a],
            [(p0[1] - p1[1]) * inv2a, (p1[0] - p0[0]) * inv2a],
        ]);
    }

    let mut is_boundary = vec![false; n];
    let mut boundary = Vec::new();
    {
        let m = MESH_SYMMETRY * n_rings;
        let s = ring_start[n_rings];
        for l in 0..m {
            is_boundary[s + l] = true;
            boundary.push((s + l, std::f64::consts::TAU * l as f64 / m as f64));
        }
    }

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for tri in &triangles {
        for a in 0..3 {
            for b in 0..3 {
                if a != b && !neighbors[tri[a]].contains(&tri[b]) {
                    neighbors[tri[a]].push(tri[b]);
                }
            }
        }
    }
    for nb in neighbors.iter_mut() {
        nb.sort_unstable();
    }

    let mut boundary_depth = vec![2u8; n];
    for &(b, _) in &boundary {
        boundary_depth[b] = 0;
    }
    for &(b, _) in &boundary {
        for &nb in &neighbors[b] {
            if boundary_depth[nb] > 1 {
                boundary_depth[nb] = 1;
            }
        }
    }

    let grid = LocatorGrid::build(&nodes, &triangles, radius, radius / n_rings as f64);

    Ok(DiskMesh {
        radius,
        h: radius / n_rings as f64,
        n_rings,
        nodes,
        triangles,
        areas,
        hat_grads,
        is_boundary,
        boundary,
        neighbors,
        boundary_depth,
        ring_start,
        grid,
    })
}

fn signed_area(nodes: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let [p0, p1, p2] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

impl LocatorGrid {
    fn build(nodes: &[[f64; 2]], triangles: &[[usize; 3]], radius: f64, h: f64) -> Self {
        let cell = 1.5 * h;
        let nx = ((2.0 * radius / cell).ceil() as usize + 2).max(1);
        let origin = -radius - cell;
        let mut bins = vec![Vec::new(); nx * nx];
        let clampi = |v: f64| -> usize { (v.max(0.0) as usize).min(nx - 1) };
        for (t, tri) in triangles.iter().enumerate() {
            let xs: Vec<f64> = tri.iter().map(|&i| nodes[i][0]).collect();
            let ys: Vec<f64> = tri.iter().map(|&i| nodes[i][1]).collect();
            let (x0, x1) = (
                xs.iter().cloned().fold(f64::INFINITY, f64::min),
                xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
            let (y0, y1) = (
                ys.iter().cloned().fold(f64::INFINITY, f64::min),
                ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
            let (i0, i1) = (clampi((x0 - origin) / cell), clampi((x1 - origin) / cell));
            let (j0, j1) = (clampi((y0 - origin) / cell), clampi((y1 - origin) / cell));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(t as u32);
                }
            }
        }
        LocatorGrid {
            nx,
            cell,
            origin,
            bins,
        }
    }
}

impl DiskMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Ring index of a node (0 = centre).
    pub fn ring_of(&self, node: usize) -> usize {
        match self.ring_start.binary_search(&node) {
            Ok(j) => j,
            Err(j) => j - 1,
        }
    }

    /// Containing triangle and barycentric coordinates. The boundary
    /// polygon is inscribed in the circle, so queries on or near the
    /// circle are pulled radially onto the polygon's inradius (an O(h²/R)
    /// shift) before the search.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        let (mut px, mut py) = (x, y);
        let r = (x * x + y * y).sqrt();
        let inradius = self.radius
            * (std::f64::consts::PI / (MESH_SYMMETRY * self.n_rings) as f64).cos();
        if r > inradius * (1.0 - 1e-12) && r > 0.0 {
            let shrink = inradius * (1.0 - 1e-12) / r;
            px = x * shrink;
            py = y * shrink;
        }
        let g = &self.grid;
        let gi = (((px - g.origin) / g.cell).max(0.0) as usize).min(g.nx - 1);
        let gj = (((py - g.origin) / g.cell).max(0.0) as usize).min(g.nx - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        // Search the cell and, if needed, its ring of neighbours.
        for pass in 0..2 {
            let span = pass; // 0 then 1
            for dj in -(span as i64)..=(span as i64) {
                for di in -(span as i64)..=(span as i64) {
                    if pass == 1 && di.abs() != 1 && dj.abs() != 1 {
                        continue;
                    }
                    let ci = gi as i64 + di;
                    let cj = gj as i64 + dj;
                    if ci < 0 || cj < 0 || ci >= g.nx as i64 || cj >= g.nx as i64 {
                        continue;
                    }
                    for &t in &g.bins[cj as usize * g.nx + ci as usize] {
                        let t = t as usize;
                        let b = self.barycentric(t, px, py);
                        let worst = b[0].min(b[1]).min(b[2]);
                        if worst >= -1e-10 {
                            return Some((t, clamp_bary(b)));
                        }
                        if best.map_or(true, |(_, _, w)| worst > w) {
                            best = Some((t, b, worst));
                        }
                    }
                }
            }
            if let Some((t, b, w)) = best {
                if pass == 1 && w > -1e-6 {
                    return Some((t, clamp_bary(b)));
                }
            }
        }
        best.and_then(|(t, b, w)| {
            if w > -1e-6 {
                Some((t, clamp_bary(b)))
            } else {
                None
            }
        })
    }

    fn barycentric(&self, t: usize, x: f64, y: f64) -> [f64; 3] {
        let tri = self.triangles[t];
        let [p0, p1, p2] = [
            self.nodes[tri[0]],
            self.nodes[tri[1]],
            self.nodes[tri[2]],
        ];
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let l1 = ((x - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (y - p0[1])) / det;
        let l2 = ((p1[0] - p0[0]) * (y - p0[1]) - (x - p0[0]) * (p1[1] - p0[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Node permutation realizing rotation by `steps * 2π / MESH_SYMMETRY`.
    pub fn rotation_node_map(&self, steps: usize) -> Vec<usize> {
        let s = steps % MESH_SYMMETRY;
        let mut map = vec![0usize; self.n_nodes()];
        for j in 1..=self.n_rings {
            let m = MESH_SYMMETRY * j;
            let start = self.ring_start[j];
            let shift = j * s; // rotation advances j*s positions on ring j
            for l in 0..m {
                map[start + l] = start + (l + shift) % m;
            }
        }
        map
    }

    /// Lumped nodal area (one third of incident triangle area).
    pub fn lumped_areas(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.n_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                a[v] += self.areas[t] / 3.0;
            }
        }
        a
    }

    /// Structural invariants: containment, boundary placement, orientation.
    pub fn validate(&self) -> Result<(), MeshError> {
        for (i, p) in self.nodes.iter().enumerate() {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if r > self.radius * (1.0 + 1e-10) {
                return Err(MeshError::BadTargetH {
                    h: self.h,
                    r: self.radius,
                });
            }
            if self.is_boundary[i] && (r - self.radius).abs() > 1e-10 * self.radius {
                return Err(MeshError::BadTargetH {
                    h: self.h,
                    r: self.radius,
                });
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = signed_area(&self.nodes, tri);
            if a <= 1e-14 * self.radius * self.radius {
                return Err(MeshError::Degenerate(t, a));
            }
        }
        Ok(())
    }
}

fn clamp_bary(mut b: [f64; 3]) -> [f64; 3] {
    for v in b.iter_mut() {
        *v = v.max(0.0);
    }
    let s = b[0] + b[1] + b[2];
    [b[0] / s, b[1] / s, b[2] / s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_mesh_smoke() {
        let m = build_mesh(1.0, 0.5).unwrap();
        assert!(m.n_nodes() >= 5);
        m.validate().unwrap();
        let total: f64 = m.areas.iter().sum();
        // Polygon area approaches π R².
        assert!((total - std::f64::consts::PI).abs() < 0.2);
    }

    #[test]
    fn refinement_quadruples_node_count() {
        let a = build_mesh(2.0, 0.2).unwrap();
        let b = build_mesh(2.0, 0.1).unwrap();
        let ratio = b.n_nodes() as f64 / a.n_nodes() as f64;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn boundary_angles_cover_circle() {
        let m = build_mesh(3.0, 0.4).unwrap();
        let mut max_gap = 0.0f64;
        for w in m.boundary.windows(2) {
            max_gap = max_gap.max(w[1].1 - w[0].1);
        }
        max_gap = max_gap.max(std::f64::consts::TAU + m.boundary[0].1 - m.boundary.last().unwrap().1);
        assert!(max_gap < 3.0 * m.h / m.radius);
    }

    #[test]
    fn locate_finds_containing_triangle() {
        let m = build_mesh(1.0, 0.1).unwrap();
        let pts = [
            (0.0, 0.0),
            (0.5, 0.3),
            (-0.7, 0.1),
            (0.0, 0.999),
            (0.999, 0.0),
            (0.3, -0.8),
        ];
        for (x, y) in pts {
            let (t, b) = m.locate(x, y).expect("point inside disk must be located");
            let tri = m.triangles[t];
            let rx: f64 = (0..3).map(|i| b[i] * m.nodes[tri[i]][0]).sum();
            let ry: f64 = (0..3).map(|i| b[i] * m.nodes[tri[i]][1]).sum();
            assert!(((rx - x).powi(2) + (ry - y).powi(2)).sqrt() < 1e-8 + 2e-3 * (x * x + y * y).sqrt());
        }
    }

    #[test]
    fn rotation_map_is_exact_permutation() {
        let m = build_mesh(1.5, 0.2).unwrap();
        for steps in 1..MESH_SYMMETRY {
            let map = m.rotation_node_map(steps);
            let ang = std::f64::consts::TAU * steps as f64 / MESH_SYMMETRY as f64;
            let (s, c) = ang.sin_cos();
            for i in 0..m.n_nodes() {
                let p = m.nodes[i];
                let rot = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
                let q = m.nodes[map[i]];
                assert!(
                    ((rot[0] - q[0]).powi(2) + (rot[1] - q[1]).powi(2)).sqrt() < 1e-12,
                    "node {i} step {steps}"
                );
            }
        }
    }

    #[test]
    fn too_fine_mesh_is_rejected() {
        assert!(matches!(
            build_mesh(1.0, 1e-5),
            Err(MeshError::TooFine(_))
        ));
    }
}
