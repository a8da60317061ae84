//! The four experiment drivers. Each writes CSV (and field exports) into the
//! output directory and prints a one-line summary per run.

use std::path::Path;

use anyhow::Context;

use asdec::export::{fmt_float, write_csv, write_matrix_triplets, write_point_fields_csv, write_vtk};
use asdec::inversion::{add_noise, asi_solve, build_convolution, direct_solve, tsvd_solve, AsiOptions};
use asdec::media::FeFunction;
use asdec::quadrature::{l2_error_exact_vs_fe, rule_deg8_19pt};
use asdec::spectral::{build_as_basis, SpectralBasis};

use crate::config::{ExperimentConfig, LoadedMedium};

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn project_exact(
    basis: &SpectralBasis,
    medium: &LoadedMedium,
    affine: bool,
) -> asdec::Result<FeFunction> {
    let rule = rule_deg8_19pt();
    if affine {
        basis.project_qk_exact(|p| medium.value(p), &rule)
    } else {
        Ok(basis.project_pik_exact(|p| medium.value(p), &rule)?.0)
    }
}

fn project_fe(basis: &SpectralBasis, v: &FeFunction, affine: bool) -> asdec::Result<FeFunction> {
    if affine {
        basis.project_qk(v)
    } else {
        Ok(basis.project_pik(v)?.0)
    }
}

/// Error decay against the mesh size at fixed epsilon.
pub fn run_convergence_delta(
    cfg: &ExperimentConfig,
    medium: &LoadedMedium,
    out: &Path,
) -> anyhow::Result<()> {
    let rule = rule_deg8_19pt();
    let eps = cfg.epsilons[0];
    let affine = cfg.use_affine_projector(medium);
    let mut rows = Vec::new();
    let mut pts_exact = Vec::new();
    let mut pts_interp = Vec::new();
    for &level in &cfg.mesh.levels {
        let mesh = cfg.mesh_for_level(medium.domain(), level)?;
        let delta = mesh.h();
        let u = medium.interpolate(&mesh)?;
        let spec = cfg.weight_spec(eps)?;
        let basis = build_as_basis(&u, &spec, cfg.k)?;

        let proj_exact = project_exact(&basis, medium, affine)?;
        let err_exact = l2_error_exact_vs_fe(|p| medium.value(p), &proj_exact, &rule);
        let proj_interp = project_fe(&basis, &u, affine)?;
        let err_interp = basis.l2_error(&u, &proj_interp)?;

        println!("level {level}: delta={delta:.6} error_exact={err_exact:.6e} error_interp={err_interp:.6e}");
        rows.push(vec![fmt_float(delta), fmt_float(err_exact), fmt_float(err_interp)]);
        pts_exact.push((delta.ln(), err_exact.ln()));
        pts_interp.push((delta.ln(), err_interp.ln()));
    }
    if rows.len() > 1 {
        rows.push(vec![
            "slope".into(),
            fmt_float(least_squares_slope(&pts_exact)),
            fmt_float(least_squares_slope(&pts_interp)),
        ]);
    }
    write_csv(&out.join("convergence_delta.csv"), &["delta", "error_exact", "error_interp"], &rows)?;
    Ok(())
}

/// Error decay against epsilon at a fixed mesh level (the first one).
pub fn run_convergence_eps(
    cfg: &ExperimentConfig,
    medium: &LoadedMedium,
    out: &Path,
) -> anyhow::Result<()> {
    let affine = cfg.use_affine_projector(medium);
    let mesh = cfg.mesh_for_level(medium.domain(), cfg.mesh.levels[0])?;
    let u = medium.interpolate(&mesh)?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &eps in &cfg.epsilons {
        let spec = cfg.weight_spec(eps)?;
        let basis = build_as_basis(&u, &spec, cfg.k)?;
        let proj = project_fe(&basis, &u, affine)?;
        let err = basis.l2_error(&u, &proj)?;
        println!("epsilon {eps:.3e}: error={err:.6e}");
        rows.push(vec![fmt_float(eps), fmt_float(err)]);
        errors.push((eps, err));
    }
    if errors.len() > 1 {
        // fit the slope over the pre-floor range: points still a factor 3
        // above the smallest error of the sweep
        let floor = errors.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min);
        let pts: Vec<(f64, f64)> = errors
            .iter()
            .filter(|&&(_, e)| e > 3.0 * floor)
            .map(|&(eps, e)| (eps.ln(), e.ln()))
            .collect();
        let pts = if pts.len() >= 2 {
            pts
        } else {
            errors.iter().map(|&(eps, e)| (eps.ln(), e.ln())).collect()
        };
        rows.push(vec!["slope".into(), fmt_float(least_squares_slope(&pts))]);
    }
    write_csv(&out.join("convergence_eps.csv"), &["epsilon", "error"], &rows)?;
    Ok(())
}

/// Export the lifting, the eigenfunctions and the eigenvalues.
pub fn run_decompose(
    cfg: &ExperimentConfig,
    medium: &LoadedMedium,
    out: &Path,
) -> anyhow::Result<()> {
    let mesh = cfg.mesh_for_level(medium.domain(), cfg.mesh.levels[0])?;
    let u = medium.interpolate(&mesh)?;
    let spec = cfg.weight_spec(cfg.epsilons[0])?;
    let basis = build_as_basis(&u, &spec, cfg.k)?;

    let mut eig_rows = Vec::new();
    for (k, (l, r)) in basis.eigenvalues.iter().zip(basis.residuals.iter()).enumerate() {
        eig_rows.push(vec![format!("{}", k + 1), fmt_float(*l), fmt_float(*r)]);
    }
    write_csv(&out.join("eigenvalues.csv"), &["k", "lambda", "residual"], &eig_rows)?;

    let mut names = vec!["phi0".to_string()];
    for k in 1..=basis.k() {
        names.push(format!("phi{k}"));
    }
    let mut fields: Vec<(&str, &[f64])> = vec![(names[0].as_str(), basis.phi0.coeffs())];
    for (k, f) in basis.eigenfunctions.iter().enumerate() {
        fields.push((names[k + 1].as_str(), f.coeffs()));
    }
    write_point_fields_csv(&out.join("fields.csv"), &mesh, &fields)?;
    write_vtk(&out.join("fields.vtk"), &mesh, &fields)?;

    if cfg.dump_matrices {
        let a = asdec::fem::assemble_stiffness(&mesh, &u, &spec);
        let m = asdec::fem::assemble_mass(&mesh);
        write_matrix_triplets(&out.join("stiffness.txt"), &a)?;
        write_matrix_triplets(&out.join("mass.txt"), &m)?;
    }
    println!(
        "decompose: K={} eigenvalues {:?}",
        basis.k(),
        basis.eigenvalues
    );
    Ok(())
}

/// The deconvolution study: ASI, TSVD and a plain dense solve.
pub fn run_invert(
    cfg: &ExperimentConfig,
    medium: &LoadedMedium,
    out: &Path,
) -> anyhow::Result<()> {
    let inv = &cfg.inversion;
    let mesh = cfg.mesh_for_level(medium.domain(), cfg.mesh.levels[0])?;
    let u_true = medium.interpolate(&mesh)?;
    let op = build_convolution(&mesh, inv.gamma)?;
    let y = op.apply(&u_true)?;
    let (y_noisy, eta) = add_noise(&y, inv.rho, cfg.seed)?;
    if !(eta > 0.0) {
        anyhow::bail!("inversion.rho must be positive: the discrepancy principle needs a noise level");
    }

    let spec = cfg.weight_spec(cfg.epsilons[0])?;
    let mut opts = AsiOptions::new(cfg.k, spec);
    opts.tau_max = inv.tau_max;
    opts.iter_max = inv.iter_max;

    let asi = asi_solve(&op, &y_noisy, eta, &u_true, &opts)
        .context("ASI solve failed")?;
    let tsvd = tsvd_solve(&op, &y_noisy, eta, &u_true).context("TSVD solve failed")?;
    let direct = direct_solve(&op, &y_noisy, eta, &u_true).context("direct solve failed")?;

    let mut rows = Vec::new();
    for r in [&asi, &tsvd, &direct] {
        println!(
            "{}: e_r={:.6} tau={:.6} iterations={} converged={}",
            r.method, r.e_r, r.tau, r.iterations, r.converged
        );
        rows.push(vec![
            r.method.clone(),
            fmt_float(r.e_r),
            fmt_float(r.tau),
            format!("{}", r.iterations),
            format!("{}", r.converged),
        ]);
    }
    write_csv(
        &out.join("inversion.csv"),
        &["method", "e_r", "tau", "iterations", "converged"],
        &rows,
    )?;

    let fields: Vec<(&str, &[f64])> = vec![
        ("u_true", u_true.coeffs()),
        ("y_noisy", y_noisy.coeffs()),
        ("asi", asi.reconstruction.coeffs()),
        ("tsvd", tsvd.reconstruction.coeffs()),
        ("direct", direct.reconstruction.coeffs()),
    ];
    write_point_fields_csv(&out.join("reconstructions.csv"), &mesh, &fields)?;
    write_vtk(&out.join("reconstructions.vtk"), &mesh, &fields)?;
    Ok(())
}
