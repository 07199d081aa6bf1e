//! Fixed-point perturbation of sampled isotropic immersions into exactly
//! isotropic meshes: `ρ_N = τ_N − J δ*_τ φ_N` with `φ_N` the fixed point of
//! `T_N(φ) = −G_N(η_N + μ^r(J δ*_τ φ))`.

use serde::Serialize;
use std::f64::consts::PI;

use crate::analysis_norms::{weak_holder_norm, MAX_EXACT_FACES};
use crate::discrete_ops::{delta_star, laplacian, moment_map_r};
use crate::error::{Error, Result};
use crate::mesh_core::{FaceFunction, Immersion, Mesh};

/// Configuration of the Green operator `G_N`.
#[derive(Debug, Clone)]
pub struct GreenConfig {
    /// Relative residual target of the conjugate-gradient solve.
    pub cg_tol: f64,
    /// Iteration cap; `None` means `50 · |faces|`.
    pub cg_max_iters: Option<usize>,
    /// Deflated directions in addition to the constant function.
    pub extra_deflation: Vec<FaceFunction>,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            cg_tol: 1e-10,
            cg_max_iters: None,
            extra_deflation: Vec::new(),
        }
    }
}

impl GreenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0) {
            return Err(Error::InvalidArgument("cg_tol must be positive".into()));
        }
        Ok(())
    }
}

/// `η_N = μ^r(τ_N)`, the isotropy defect of the samples.
pub fn error_term(tau: &Mesh) -> FaceFunction {
    moment_map_r(tau)
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal (Euclidean) basis of the deflation space.
fn deflation_basis(tau: &Mesh, cfg: &GreenConfig) -> Result<Vec<Vec<f64>>> {
    let m = tau.grid().num_faces();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (m as f64).sqrt(); m]];
    for extra in &cfg.extra_deflation {
        extra.check_same_grid(tau.grid())?;
        let mut w = extra.values().to_vec();
        for _ in 0..2 {
            for b in &basis {
                let c = dotv(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dotv(&w, &w).sqrt();
        if n > 1e-12 {
            w.iter_mut().for_each(|x| *x /= n);
            basis.push(w);
        }
    }
    Ok(basis)
}

fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dotv(x, b);
        x.iter_mut().zip(b).for_each(|(a, y)| *a -= c * y);
    }
}

/// `G_N ψ`: the solution `φ ⟂ K` of `Δ_τ φ = ψ̂`, where `ψ̂` is `ψ` with its
/// deflation components removed, computed by conjugate gradients with
/// re-projection at every iteration. `guess` warm-starts the solve.
pub fn green_apply_from(
    tau: &Mesh,
    psi: &FaceFunction,
    guess: Option<&FaceFunction>,
    cfg: &GreenConfig,
) -> Result<FaceFunction> {
    cfg.validate()?;
    psi.check_same_grid(tau.grid())?;
    let grid = tau.grid().clone();
    let m = grid.num_faces();
    let basis = deflation_basis(tau, cfg)?;
    let mut b = psi.values().to_vec();
    project_out(&mut b, &basis);
    let bnorm = dotv(&b, &b).sqrt();
    if bnorm == 0.0 {
        return Ok(FaceFunction::zeros(grid));
    }
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let mut y = laplacian(tau, &FaceFunction::from_raw(grid.clone(), x.to_vec()))?.into_values();
        project_out(&mut y, &basis);
        Ok(y)
    };
    let mut x = match guess {
        Some(g) => {
            g.check_same_grid(&grid)?;
            let mut x = g.values().to_vec();
            project_out(&mut x, &basis);
            x
        }
        None => vec![0.0; m],
    };
    let ax = apply(&x)?;
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let mut p = r.clone();
    let mut rr = dotv(&r, &r);
    let max_iters = cfg.cg_max_iters.unwrap_or(50 * m);
    let mut scale_ref: Option<f64> = None;
    for _ in 0..=max_iters {
        if rr.sqrt() <= cfg.cg_tol * bnorm {
            return Ok(FaceFunction::from_raw(grid, x));
        }
        let ap = apply(&p)?;
        let pap = dotv(&p, &ap);
        let pp = dotv(&p, &p);
        let rayleigh = pap / pp;
        let reference = *scale_ref.get_or_insert(rayleigh.abs());
        if !(rayleigh > 1e-12 * reference) {
            return Err(Error::DegenerateKernel);
        }
        let a = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += a * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= a * api);
        project_out(&mut r, &basis);
        let rr_new = dotv(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::SolverDiverged(
                "non-finite residual in conjugate gradients".into(),
            ));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    Err(Error::SolverDiverged(format!(
        "conjugate gradients stalled at relative residual {:.3e} after {max_iters} iterations",
        rr.sqrt() / bnorm
    )))
}

/// [`green_apply_from`] started from zero.
pub fn green_apply(tau: &Mesh, psi: &FaceFunction, cfg: &GreenConfig) -> Result<FaceFunction> {
    green_apply_from(tau, psi, None, cfg)
}

/// `J δ*_τ φ` viewed as a mesh.
fn jds(tau: &Mesh, phi: &FaceFunction) -> Result<Mesh> {
    let field = delta_star(tau, phi)?.apply_j();
    Mesh::new(tau.grid().clone(), tau.n(), field.values().to_vec())
}

/// `ρ = τ − J δ*_τ φ`.
pub fn perturbed_mesh(tau: &Mesh, phi: &FaceFunction) -> Result<Mesh> {
    tau.add_field(&delta_star(tau, phi)?.apply_j(), -1.0)
}

/// One application of `T_N(φ) = −G_N(η + μ^r(J δ*_τ φ))`.
pub fn t_map(tau: &Mesh, eta: &FaceFunction, phi: &FaceFunction, cfg: &GreenConfig) -> Result<FaceFunction> {
    t_map_from(tau, eta, phi, None, cfg)
}

fn t_map_from(
    tau: &Mesh,
    eta: &FaceFunction,
    phi: &FaceFunction,
    guess: Option<&FaceFunction>,
    cfg: &GreenConfig,
) -> Result<FaceFunction> {
    let quad = moment_map_r(&jds(tau, phi)?);
    let rhs = eta.lin_comb(1.0, &quad, 1.0)?;
    let neg_guess = guess.map(|g| g.scaled(-1.0));
    Ok(green_apply_from(tau, &rhs, neg_guess.as_ref(), cfg)?.scaled(-1.0))
}

/// Outcome of the fixed-point scheme.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbReport {
    pub iterations: usize,
    pub converged: bool,
    /// `‖φ_{k+1} − φ_k‖_{C⁰}` per iteration.
    pub increments: Vec<f64>,
    /// Weak `C^{2,1/2}` norm of `φ_N`.
    pub phi_weak_norm: f64,
    /// `true` if the Hölder part of `phi_weak_norm` was sampled.
    pub phi_norm_sampled: bool,
    /// `max |η_N|`.
    pub eta_max: f64,
    /// `max |μ^r(ρ_N)|`.
    pub max_density: f64,
    /// Mean of `μ^r(ρ_N)` over faces (zero by Stokes).
    pub stokes_constant: f64,
    /// `sup_v ‖ρ_N(v) − τ_N(v)‖`.
    pub sup_distance: f64,
}

fn sup_diff(a: &FaceFunction, b: &FaceFunction) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Iterates `φ ← T_N(φ)` from `φ = 0` until the `C⁰` increment drops below
/// `fp_tol` or `fp_max_iters` is reached, and returns `(φ_N, ρ_N, report)`.
pub fn fixed_point_solve(
    tau: &Mesh,
    cfg: &GreenConfig,
    fp_tol: f64,
    fp_max_iters: usize,
) -> Result<(FaceFunction, Mesh, PerturbReport)> {
    if !(fp_tol > 0.0) {
        return Err(Error::InvalidArgument("fixed-point tolerance must be positive".into()));
    }
    let eta = error_term(tau);
    let mut phi = FaceFunction::zeros(tau.grid().clone());
    let mut increments = Vec::new();
    let mut converged = false;
    for k in 0..fp_max_iters {
        let next = t_map_from(tau, &eta, &phi, Some(&phi), cfg)?;
        let inc = sup_diff(&next, &phi);
        increments.push(inc);
        phi = next;
        log::debug!("fixed point iteration {}: increment {inc:.3e}", k + 1);
        if k >= 1 && inc > 10.0 * increments[k - 1] && inc > fp_tol {
            return Err(Error::NoContraction {
                iteration: k + 1,
                growth: inc / increments[k - 1],
            });
        }
        if inc <= fp_tol {
            converged = true;
            break;
        }
        // Increments at round-off level cannot decrease further.
        if k >= 3 && inc <= 1e3 * fp_tol && increments[k - 3..k].iter().all(|&p| p <= inc * 1.5) {
            converged = true;
            break;
        }
    }
    let rho = perturbed_mesh(tau, &phi)?;
    let mu = moment_map_r(&rho);
    let exact = phi.len() <= MAX_EXACT_FACES;
    let norm = weak_holder_norm(&phi, 2, 0.5, exact)?;
    let report = PerturbReport {
        iterations: increments.len(),
        converged,
        phi_weak_norm: norm.weak_total,
        phi_norm_sampled: norm.sampled,
        eta_max: eta.max_abs(),
        max_density: mu.max_abs(),
        stokes_constant: mu.sum() / mu.len() as f64,
        sup_distance: rho.sup_distance(tau)?,
        increments,
    };
    if !report.max_density.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok((phi, rho, report))
}

/// `max E` over a `samples × samples` grid of the fundamental domain.
pub fn degeneracy_scan(imm: &Immersion, samples: usize) -> Result<f64> {
    Ok(scan(imm, samples)?.0)
}

/// `(max E, max ‖Hess ℓ‖²)` over the sample grid.
fn scan(imm: &Immersion, samples: usize) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let b = imm.lattice_basis()?;
    let (mut e, mut h) = (0.0f64, 0.0f64);
    for i in 0..samples {
        for j in 0..samples {
            let (s, t) = ((i as f64 + 0.5) / samples as f64, (j as f64 + 0.5) / samples as f64);
            let x = s * b.gamma1[0] + t * b.gamma2[0];
            let y = s * b.gamma1[1] + t * b.gamma2[1];
            let jet = imm.jet(x, y);
            e = e.max(jet.e_density());
            h = h.max(jet.hessian_scale2());
        }
    }
    Ok((e, h))
}

/// `max E < 1e-10 · scale²`, with `scale²` the largest squared Hessian norm.
pub fn is_degenerate(imm: &Immersion, samples: usize) -> Result<bool> {
    let (e, h) = scan(imm, samples)?;
    Ok(e < 1e-10 * h)
}

/// Returns `(angle, rotated immersion)` for the first nondegenerate cover
/// among angle 0 and `kπ/16`, `k = 1..15`.
pub fn nondegenerate_rotation(imm: &Immersion, samples: usize) -> Result<(f64, Immersion)> {
    if !is_degenerate(imm, samples)? {
        return Ok((0.0, imm.clone()));
    }
    for k in 1..16 {
        let angle = k as f64 * PI / 16.0;
        let rotated = imm.rotate_cover(angle);
        if !is_degenerate(&rotated, samples)? {
            return Ok((angle, rotated));
        }
    }
    Err(Error::NoNondegenerateRotation)
}
