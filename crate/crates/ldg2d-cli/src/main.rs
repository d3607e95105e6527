//! Command-line frontend: radial and 2D solves, symmetry-breaking
//! perturbation runs, continuation sweeps, checkpoint validation and glyph
//! export. Every command writes its outputs as CSV/JSON plus a manifest
//! recording the full parameter provenance.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ldg2d::elastic::coercivity_dirichlet;
use ldg2d::field::{
    classify_field, detect_defects, extract_radial_components, field_from_profile,
    glyph_export, minimize_field, seed_split_pair, seed_tilted, Field2D, FieldClass,
    FieldOptimizer, FieldSolveOptions,
};
use ldg2d::io;
use ldg2d::mesh::build_mesh;
use ldg2d::perturbation::{epsilon_scaling_check, solve_perturbation};
use ldg2d::radial::{
    classify_profile, gamma_limit_residual, minimize_radial, minimize_radial_m0,
    ode_residual, reduced_hessian_min_eig, BranchPreset, RadialInit,
};
use ldg2d::sweep::{continuation_sweep, detect_transitions, SweepConfig};
use ldg2d::tensor::MaterialParams;

#[derive(Parser)]
#[command(name = "ldg2d", version, about = "Landau-de Gennes defect solver on 2D disks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct MaterialArgs {
    /// Bulk constant a².
    #[arg(long, default_value_t = 1.0)]
    a2: f64,
    /// Bulk constant b².
    #[arg(long, default_value_t = 0.0)]
    b2: f64,
    /// Bulk constant c².
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    /// Elastic constant L.
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    /// Elastic constant M.
    #[arg(long = "M", default_value_t = 0.0)]
    m: f64,
    /// Boundary winding number k.
    #[arg(long, default_value_t = 2)]
    k: i32,
    /// Disk radius R.
    #[arg(long = "R", default_value_t = 10.0)]
    radius: f64,
}

impl MaterialArgs {
    fn params(&self) -> Result<MaterialParams> {
        MaterialParams::new(self.a2, self.b2, self.c2, self.l, self.m, self.k, self.radius)
            .context("invalid material parameters")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a reduced radial branch and write the profile.
    SolveRadial {
        #[command(flatten)]
        material: MaterialArgs,
        /// Branch seed: q2minus | q2pm | q3 | q3neg | q5.
        #[arg(long, default_value = "q2minus")]
        branch: String,
        /// Grid intervals.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Minimize the full 2D energy on a disk mesh.
    SolveField {
        #[command(flatten)]
        material: MaterialArgs,
        /// Mesh target edge length (defaults to R/60).
        #[arg(long)]
        target_h: Option<f64>,
        /// Seed: radial:<branch> | split | tilted.
        #[arg(long, default_value = "radial:q2minus")]
        seed: String,
        /// Defect split separation for the non-radial seeds (defaults R/4).
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Use the trust-region optimizer instead of L-BFGS.
        #[arg(long)]
        trust_region: bool,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Symmetry-breaking perturbation at small anisotropy (|k| = 1).
    Perturb {
        #[command(flatten)]
        material: MaterialArgs,
        /// Anisotropy values ε for the scaling table.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.025, 0.05, 0.1])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Mesh target edge length (defaults to R/100).
        #[arg(long)]
        target_h: Option<f64>,
        /// Skip the 2D scaling table (perturbation modes only).
        #[arg(long)]
        modes_only: bool,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Continuation sweep over (M, R) from a JSON config.
    Sweep {
        /// JSON config file matching the SweepConfig schema.
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Validate the invariants of a stored field checkpoint.
    Check {
        #[arg(long)]
        input: PathBuf,
    },
    /// Export per-node eigenframe glyphs and biaxiality from a checkpoint.
    ExportGlyphs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn write_manifest(dir: &Path, command: &str, params: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "parameters": params,
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn parse_branch(name: &str) -> Result<BranchPreset> {
    Ok(match name {
        "q2minus" => BranchPreset::Q2Minus,
        "q2pm" => BranchPreset::Q2PlusMinus,
        "q3" => BranchPreset::Q3 { negative_w3: false },
        "q3neg" => BranchPreset::Q3 { negative_w3: true },
        "q5" => BranchPreset::Q5,
        other => bail!("unknown branch '{other}' (expected q2minus|q2pm|q3|q3neg|q5)"),
    })
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::SolveRadial {
            material,
            branch,
            n,
            tol,
            out_dir,
        } => {
            let params = material.params()?;
            let preset = parse_branch(&branch)?;
            std::fs::create_dir_all(&out_dir)?;
            let solve = minimize_radial(&params, n, &RadialInit::Preset(preset), tol)?;
            let label = classify_profile(&solve, 1e-3 * params.s_plus())
                .map(|c| c.to_string())
                .unwrap_or_else(|_| "unconverged".into());
            let min_eig = reduced_hessian_min_eig(&solve.profile, &params).ok();
            let res = ode_residual(&solve.profile, &params, (0.02, 0.98));
            let gamma = gamma_limit_residual(&solve.profile);
            io::write_profile_csv(&out_dir.join("profile.csv"), &solve.profile, &params)?;
            let report = json!({
                "label": label,
                "energy": solve.energy,
                "disk_energy": 2.0 * std::f64::consts::PI * solve.energy,
                "converged": solve.converged,
                "iterations": solve.iterations,
                "grad_norm": solve.grad_norm,
                "min_hessian_eigenvalue": min_eig,
                "ode_residual_l2": res.l2,
                "gamma_constraint_relative": gamma.relative,
            });
            std::fs::write(
                out_dir.join("report.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            write_manifest(
                &out_dir,
                "solve-radial",
                json!({"params": params, "branch": branch, "n": n, "tol": tol}),
            )?;
            println!(
                "solve-radial: label={label} energy={:.6} converged={}",
                solve.energy, solve.converged
            );
            Ok(if solve.converged { 0 } else { 2 })
        }
        Command::SolveField {
            material,
            target_h,
            seed,
            separation,
            tol,
            trust_region,
            out_dir,
        } => {
            let params = material.params()?;
            if !coercivity_dirichlet(params.l, params.m) {
                bail!("elastic constants violate coercivity");
            }
            std::fs::create_dir_all(&out_dir)?;
            let h = target_h.unwrap_or(params.radius / 60.0);
            let mesh = Arc::new(build_mesh(params.radius, h)?);
            let sep = separation.unwrap_or(params.radius / 4.0);
            let init: Field2D = if let Some(branch) = seed.strip_prefix("radial:") {
                let preset = parse_branch(branch)?;
                let rs = minimize_radial(&params, 2000, &RadialInit::Preset(preset), None)?;
                field_from_profile(mesh.clone(), params, &rs.profile)?
            } else {
                match seed.as_str() {
                    "split" => seed_split_pair(mesh.clone(), params, sep),
                    "tilted" => seed_tilted(mesh.clone(), params, sep, 0.4),
                    other => bail!("unknown seed '{other}'"),
                }
            };
            let opts = FieldSolveOptions {
                grad_tol: tol,
                max_iter: 200_000,
                optimizer: if trust_region {
                    FieldOptimizer::TrustRegion
                } else {
                    FieldOptimizer::LimitedMemory
                },
            };
            let solve = minimize_field(&init, &opts);
            let class = classify_field(&solve.field, 1e-3 * params.s_plus());
            let defects = detect_defects(&solve.field, 0.05);
            io::write_field_checkpoint(&out_dir.join("checkpoint.csv"), &solve.field)?;
            io::write_beta_csv(&out_dir.join("beta.csv"), &solve.field)?;
            let comp = extract_radial_components(&solve.field, 128);
            let report = json!({
                "class": match class.class {
                    FieldClass::Radial => "radial",
                    FieldClass::NrVertical => "nr_vertical",
                    FieldClass::NrTilted => "nr_tilted",
                },
                "energy": solve.energy,
                "converged": solve.converged,
                "iterations": solve.iterations,
                "grad_norm": solve.grad_norm,
                "symmetry_residual": class.symmetry_residual,
                "vertical_residual": class.vertical_residual,
                "defects": defects.iter().map(|d| json!({"x": d.position[0], "y": d.position[1], "beta": d.beta})).collect::<Vec<_>>(),
                "max_anisotropy": comp.anisotropy.iter().cloned().fold(0.0f64, f64::max),
            });
            std::fs::write(
                out_dir.join("report.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            write_manifest(
                &out_dir,
                "solve-field",
                json!({"params": params, "seed": seed, "target_h": h, "separation": sep, "tol": tol, "trust_region": trust_region}),
            )?;
            println!(
                "solve-field: class={:?} energy={:.6} defects={} converged={}",
                class.class,
                solve.energy,
                defects.len(),
                solve.converged
            );
            Ok(if solve.converged { 0 } else { 2 })
        }
        Command::Perturb {
            material,
            eps,
            n,
            target_h,
            modes_only,
            out_dir,
        } => {
            let mut material = material;
            material.m = 0.0; // the expansion is around the isotropic point
            let params = material.params()?;
            if params.k.abs() != 1 {
                bail!("the perturbation analysis applies to k = ±1 (got k = {})", params.k);
            }
            std::fs::create_dir_all(&out_dir)?;
            let (y, solve) = solve_perturbation(&params, n)?;
            io::write_m0_profile_csv(&out_dir.join("radial_uv.csv"), &y, &params)?;
            io::write_perturbation_csv(&out_dir.join("perturbation.csv"), &solve.profile)?;
            let mut report = json!({
                "residual_rel": solve.residual_rel,
                "k": params.k,
            });
            let mut exit = 0;
            if !modes_only {
                let h = target_h.unwrap_or(params.radius / 100.0);
                let check = epsilon_scaling_check(&params, &eps, n, h, None)?;
                io::write_scaling_csv(&out_dir.join("scaling.csv"), &check)?;
                report["slope"] = json!(check.slope);
                report["y_l2"] = json!(check.y_l2);
                report["rows"] = json!(check
                    .rows
                    .iter()
                    .map(|r| json!({"eps": r.eps, "delta": r.delta, "delta_rel": r.delta_rel, "delta_raw": r.delta_raw, "converged": r.converged}))
                    .collect::<Vec<_>>());
                if check.rows.iter().any(|r| !r.converged) {
                    exit = 2;
                }
                if let Some(slope) = check.slope {
                    println!("perturb: slope={slope:.3}");
                }
                for r in &check.rows {
                    println!(
                        "  eps={:<7} delta={:.6e} delta/|Y|={:.6e} converged={}",
                        r.eps, r.delta, r.delta_rel, r.converged
                    );
                }
            }
            std::fs::write(
                out_dir.join("report.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            write_manifest(
                &out_dir,
                "perturb",
                json!({"params": params, "eps": eps, "n": n, "modes_only": modes_only}),
            )?;
            Ok(exit)
        }
        Command::Sweep { config, out_dir } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: SweepConfig = serde_json::from_str(&text).context("parsing config")?;
            if let Some(dir) = out_dir {
                cfg.out_dir = Some(dir.display().to_string());
            }
            cfg.validate()?;
            let pd = continuation_sweep(&cfg)?;
            let transitions = detect_transitions(&cfg, &pd);
            let dir = PathBuf::from(cfg.out_dir.clone().unwrap_or_else(|| "out".into()));
            std::fs::create_dir_all(&dir)?;
            // phase_diagram.csv
            let mut s = String::from("m,r,branch,pass,label,energy,converged,min_eig\n");
            for rec in &pd.records {
                use std::fmt::Write as _;
                let _ = writeln!(
                    s,
                    "{},{},{},{:?},{},{},{},{}",
                    rec.m,
                    rec.r,
                    rec.branch.name(),
                    rec.pass,
                    rec.label,
                    rec.energy,
                    rec.converged,
                    rec.min_eig.map(|e| e.to_string()).unwrap_or_default()
                );
            }
            std::fs::write(dir.join("phase_diagram.csv"), s)?;
            std::fs::write(
                dir.join("global.json"),
                serde_json::to_string_pretty(&pd.global)?,
            )?;
            std::fs::write(
                dir.join("transitions.json"),
                serde_json::to_string_pretty(&transitions)?,
            )?;
            write_manifest(&dir, "sweep", serde_json::to_value(&cfg)?)?;
            println!(
                "sweep: {} records, {} transitions, {} unresolved points",
                pd.records.len(),
                transitions.len(),
                pd.unresolved.len()
            );
            Ok(if pd.unresolved.is_empty() { 0 } else { 2 })
        }
        Command::Check { input } => {
            let ck = io::read_field_checkpoint(&input)?;
            let problems = ck.check();
            if problems.is_empty() {
                println!("check: ok");
                Ok(0)
            } else {
                for p in &problems {
                    eprintln!("violation: {p}");
                }
                eprintln!("check: {} violation(s)", problems.len());
                Ok(1)
            }
        }
        Command::ExportGlyphs { input, out_dir } => {
            let ck = io::read_field_checkpoint(&input)?;
            let field = ck.into_field();
            std::fs::create_dir_all(&out_dir)?;
            let glyphs = glyph_export(&field);
            io::write_glyphs_csv(&out_dir.join("glyphs.csv"), &glyphs)?;
            io::write_beta_csv(&out_dir.join("beta.csv"), &field)?;
            write_manifest(&out_dir, "export-glyphs", json!({"input": input.display().to_string()}))?;
            println!("export-glyphs: {} records", glyphs.len());
            Ok(0)
        }
    }
}
