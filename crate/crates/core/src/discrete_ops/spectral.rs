//! Smallest eigenvalue of `Δ_τ` on the orthogonal complement of a deflation
//! space, by Lanczos with full reorthogonalization, and a dense oracle.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::laplacian;
use crate::error::{Error, Result};
use crate::mesh_core::{dot, FaceFunction, Mesh};

/// Options for [`spectral_gap`].
#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Relative eigenvalue tolerance.
    pub tol: f64,
    /// Iteration cap; `None` means `10·|faces|`.
    pub max_iters: Option<usize>,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            tol: 1e-8,
            max_iters: None,
            seed: 0x5eed,
        }
    }
}

fn orthonormalize(vecs: &[FaceFunction]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vecs {
        let mut w = v.values().to_vec();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nrm = dot(&w, &w).sqrt();
        if nrm > 1e-12 {
            w.iter_mut().for_each(|x| *x /= nrm);
            basis.push(w);
        }
    }
    basis
}

fn project_out(w: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(w, b);
        w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

fn smallest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tridiagonal");
    (theta, eig.eigenvectors[(k - 1, idx)].abs())
}

/// Smallest Rayleigh quotient of `Δ_τ` on the complement of `deflate`
/// (orthogonality for the discrete `L²` product, which is a multiple of the
/// Euclidean one).
pub fn spectral_gap(mesh: &Mesh, deflate: &[FaceFunction], opts: SpectralOptions) -> Result<f64> {
    let grid = mesh.grid();
    let m = grid.num_faces();
    for d in deflate {
        d.check_same_grid(grid)?;
    }
    let basis = orthonormalize(deflate);
    let dim = m.saturating_sub(basis.len());
    if dim == 0 {
        return Err(Error::InvalidArgument("deflation space fills the whole space".into()));
    }
    let max_iters = opts.max_iters.unwrap_or(10 * m).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    project_out(&mut q, &basis);
    let nrm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= nrm);

    let mut qs: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut anorm: f64 = 0.0;
    let mut next_check = 8usize;
    let mut last = (f64::NAN, f64::INFINITY);
    for j in 0..max_iters {
        let qj = FaceFunction::from_raw(grid.clone(), qs[j].clone());
        let mut w = laplacian(mesh, &qj)?.into_values();
        project_out(&mut w, &basis);
        if j > 0 {
            let b = beta[j - 1];
            w.iter_mut().zip(&qs[j - 1]).for_each(|(x, y)| *x -= b * y);
        }
        let a = dot(&qs[j], &w);
        w.iter_mut().zip(&qs[j]).for_each(|(x, y)| *x -= a * y);
        for _ in 0..2 {
            project_out(&mut w, &qs);
            project_out(&mut w, &basis);
        }
        let b = dot(&w, &w).sqrt();
        alpha.push(a);
        anorm = anorm.max(a.abs() + b + beta.last().copied().unwrap_or(0.0));
        let exhausted = b <= 1e-13 * anorm.max(f64::MIN_POSITIVE) || alpha.len() >= dim;
        if exhausted || j + 1 >= next_check {
            let (theta, s_last) = smallest_ritz(&alpha, &beta);
            let residual = b * s_last;
            last = (theta, residual);
            if exhausted || residual <= opts.tol * theta.abs() {
                return Ok(theta.max(0.0));
            }
            next_check = (j + 1 + 4).max(((j + 1) as f64 * 1.15) as usize);
        }
        beta.push(b);
        qs.push(w.iter().map(|x| x / b).collect());
    }
    Err(Error::SolverDiverged(format!(
        "Lanczos did not converge in {max_iters} iterations (ritz {:e}, residual {:e})",
        last.0, last.1
    )))
}

/// Dense matrix of `Δ_τ` in the face basis (intended for small grids).
pub fn laplacian_dense(mesh: &Mesh) -> Result<DMatrix<f64>> {
    let grid = mesh.grid();
    let m = grid.num_faces();
    let mut a = DMatrix::zeros(m, m);
    for j in 0..m {
        let col = laplacian(mesh, &FaceFunction::indicator(grid.clone(), j))?;
        a.set_column(j, &DVector::from_vec(col.into_values()));
    }
    Ok(a)
}

/// Dense reference for [`spectral_gap`]: all eigenvalues of the compressed
/// operator, with deflated directions shifted above the spectrum.
pub fn dense_gap(mesh: &Mesh, deflate: &[FaceFunction]) -> Result<f64> {
    let a = laplacian_dense(mesh)?;
    let m = a.nrows();
    let basis = orthonormalize(deflate);
    let mut p = DMatrix::<f64>::identity(m, m);
    let mut dd = DMatrix::<f64>::zeros(m, m);
    for b in &basis {
        let v = DVector::from_column_slice(b);
        let outer = &v * v.transpose();
        p -= &outer;
        dd += outer;
    }
    let shift = 2.0 * a.norm() + 1.0;
    let compressed = &p * a * &p + dd * shift;
    let sym = (&compressed + compressed.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_grid::QuadGrid;
    use crate::mesh_core::{sample_immersion, Immersion};
    use std::sync::Arc;

    #[test]
    fn constant_mesh_has_zero_gap() {
        let g = Arc::new(QuadGrid::square(4).unwrap());
        let m = Mesh::zeros(g.clone(), 2);
        let gap = spectral_gap(&m, &[FaceFunction::ones(g)], SpectralOptions::default()).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn lanczos_matches_dense_on_product_torus() {
        let imm = Immersion::product_of_circles(1.0, 1.0);
        for n in [8usize, 12] {
            let g = Arc::new(imm.grid(n).unwrap());
            let m = sample_immersion(&imm, &g).unwrap();
            let one = [FaceFunction::ones(g.clone())];
            let lz = spectral_gap(&m, &one, SpectralOptions::default()).unwrap();
            let dn = dense_gap(&m, &one).unwrap();
            assert!(lz > 0.0);
            assert!((lz - dn).abs() <= 1e-6 * dn, "{lz} vs {dn}");
        }
    }
}
