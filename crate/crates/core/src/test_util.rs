//! Seeded random inputs shared by unit tests, integration tests and benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::lattice_grid::QuadGrid;
use crate::mesh_core::{FaceFunction, Mesh, VertexField};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(len: usize, r: &mut TestRng) -> Vec<f64> {
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Mesh with independent uniform coordinates in `[−1, 1]`.
pub fn random_mesh(grid: &Arc<QuadGrid>, n: usize, r: &mut TestRng) -> Mesh {
    Mesh::new(grid.clone(), n, random_vec(grid.num_vertices() * 2 * n, r)).expect("finite")
}

/// Mesh whose coordinates are multiples of `2⁻²⁰` in `[−1, 1]`, so that sums
/// and differences of coordinates are exact in floating point.
pub fn dyadic_mesh(grid: &Arc<QuadGrid>, n: usize, r: &mut TestRng) -> Mesh {
    let pts = (0..grid.num_vertices() * 2 * n).map(|_| dyadic(r)).collect();
    Mesh::new(grid.clone(), n, pts).expect("finite")
}

pub fn dyadic(r: &mut TestRng) -> f64 {
    r.random_range(-(1i64 << 20)..=(1i64 << 20)) as f64 / (1u64 << 20) as f64
}

pub fn random_field(grid: &Arc<QuadGrid>, n: usize, r: &mut TestRng) -> VertexField {
    VertexField::new(grid.clone(), n, random_vec(grid.num_vertices() * 2 * n, r)).expect("finite")
}

pub fn random_face_function(grid: &Arc<QuadGrid>, r: &mut TestRng) -> FaceFunction {
    FaceFunction::new(grid.clone(), random_vec(grid.num_faces(), r)).expect("finite")
}

/// A unitary map of `C^n = R²ⁿ` (commutes with `J`), as a real `2n × 2n`
/// matrix: a real orthogonal mixing, per-coordinate phase rotations and a
/// second real orthogonal mixing.
pub fn random_unitary(n: usize, r: &mut TestRng) -> nalgebra::DMatrix<f64> {
    let orth = |r: &mut TestRng| {
        let g = nalgebra::DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        g.qr().q()
    };
    let lift = |o: &nalgebra::DMatrix<f64>| {
        nalgebra::DMatrix::from_fn(
            2 * n,
            2 * n,
            |i, j| if i % 2 == j % 2 { o[(i / 2, j / 2)] } else { 0.0 },
        )
    };
    let mut phases = nalgebra::DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let (s, c) = r.random_range(0.0..std::f64::consts::TAU).sin_cos();
        phases[(2 * i, 2 * i)] = c;
        phases[(2 * i, 2 * i + 1)] = -s;
        phases[(2 * i + 1, 2 * i)] = s;
        phases[(2 * i + 1, 2 * i + 1)] = c;
    }
    lift(&orth(r)) * phases * lift(&orth(r))
}

/// Random isotropic quadrilateral `[A₀, A₁, A₂, A₃]` in `R²ⁿ`: the diagonals
/// span the image of `Rⁿ × {0}` under a random unitary map. With `flat`, the
/// side `A₁ − A₀` lies in the diagonal plane (all four points coplanar).
pub fn random_isotropic_quad(n: usize, flat: bool, r: &mut TestRng) -> [Vec<f64>; 4] {
    let u = random_unitary(n, r);
    let real = |r: &mut TestRng| {
        let mut x = nalgebra::DVector::zeros(2 * n);
        for i in 0..n {
            x[2 * i] = r.random_range(-1.0..1.0);
        }
        &u * x
    };
    let d0 = real(r);
    let d1 = real(r);
    let a0 = nalgebra::DVector::from_vec(random_vec(2 * n, r));
    let v = if flat {
        d0.scale(r.random_range(-1.0..1.0)) + d1.scale(r.random_range(-1.0..1.0))
    } else {
        nalgebra::DVector::from_vec(random_vec(2 * n, r))
    };
    let a1 = &a0 + &v;
    let a2 = &a0 + &d0;
    let a3 = &a1 + &d1;
    [a0, a1, a2, a3].map(|a| a.as_slice().to_vec())
}
