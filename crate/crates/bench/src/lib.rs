//! Shared fixtures for the benchmarks in `benches/`.

use std::sync::Arc;

use isomesh::{sample_immersion, FaceFunction, Immersion, Mesh};

/// Samples of the named library immersion at resolution `n_res`.
pub fn sample(name: &str, n_res: usize) -> Mesh {
    let imm = Immersion::library(name).expect("library immersion");
    let grid = Arc::new(imm.grid(n_res).expect("grid"));
    sample_immersion(&imm, &grid).expect("sample")
}

/// A smooth, mean-free face function on the grid of `mesh`.
pub fn smooth_face_function(mesh: &Mesh) -> FaceFunction {
    let grid = mesh.grid().clone();
    let n = grid.resolution() as f64;
    let phi = FaceFunction::from_fn(grid.clone(), |f| {
        let [k, l] = grid.rep(f);
        (std::f64::consts::TAU * (k as f64 + 2.0 * l as f64) / n).sin()
    });
    let mean = phi.sum() / phi.len() as f64;
    phi.lin_comb(1.0, &FaceFunction::ones(grid), -mean).expect("same grid")
}
