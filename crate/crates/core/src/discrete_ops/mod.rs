//! Symplectic density and the operators `δ_τ`, `δ*_τ`, `Δ_τ = δ_τ δ*_τ`.

mod spectral;

pub use spectral::{dense_gap, laplacian_dense, spectral_gap, SpectralOptions};

use crate::error::{Error, Result};
use crate::lattice_grid::CORNER_OFFSETS;
use crate::mesh_core::{dot, omega, FaceFunction, Mesh, VertexField};

fn n2(mesh: &Mesh) -> f64 {
    (mesh.grid().resolution() as f64).powi(2)
}

/// Symplectic area of each face, `μ_N(f) = ½ ω(Dᵘ, Dᵛ)`.
pub fn moment_map(mesh: &Mesh) -> FaceFunction {
    let grid = mesh.grid();
    FaceFunction::from_fn(grid.clone(), |f| {
        let (du, dv) = mesh.diagonals(f);
        0.5 * omega(&du, &dv)
    })
}

/// Symplectic density `μ_N^r = N² μ_N = ω(U, V)`.
pub fn moment_map_r(mesh: &Mesh) -> FaceFunction {
    let s = 0.5 * n2(mesh);
    let grid = mesh.grid();
    FaceFunction::from_fn(grid.clone(), |f| {
        let (du, dv) = mesh.diagonals(f);
        s * omega(&du, &dv)
    })
}

/// `‖μ^r‖²` for the discrete `L²` product.
pub fn energy(mesh: &Mesh) -> f64 {
    let mu = moment_map_r(mesh);
    mu.values().iter().map(|x| x * x).sum::<f64>() / n2(mesh)
}

/// Symmetric bilinear form polarizing `μ^r`:
/// `Ψ(τ, τ′) = ½[ω(U_τ, V_τ′) + ω(U_τ′, V_τ)]`, so that `Ψ(τ, τ) = μ^r(τ)`.
pub fn bilinear_r(a: &Mesh, b: &Mesh) -> Result<FaceFunction> {
    a.check_same_grid(b.grid())?;
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.n(),
        });
    }
    let s = 0.25 * n2(a);
    Ok(FaceFunction::from_fn(a.grid().clone(), |f| {
        let (ua, va) = a.diagonals(f);
        let (ub, vb) = b.diagonals(f);
        s * (omega(&ua, &vb) + omega(&ub, &va))
    }))
}

/// `(δ_τ V)(f) = −(N²/2) Σ_{v ∈ f} g(V(v), D_{v,f}) = −Dμ^r|_τ(JV)`.
///
/// The overall sign makes `δ_τ` minus the linearized density along `J`
/// for `ω(a, b) = g(Ja, b)`, so that `J δ*_τ μ^r` is the downward gradient
/// of `½‖μ^r‖²`. Grouped as `−(N²/2)[g(V₀ − V₂, Dᵛ) + g(V₃ − V₁, Dᵘ)]`,
/// which vanishes exactly on constant fields.
pub fn delta(mesh: &Mesh, field: &VertexField) -> Result<FaceFunction> {
    field.check_same_grid(mesh.grid())?;
    if field.n() != mesh.n() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n(),
            got: field.n(),
        });
    }
    let s = -0.5 * n2(mesh);
    let grid = mesh.grid();
    let d = mesh.dim();
    Ok(FaceFunction::from_raw(
        grid.clone(),
        (0..grid.num_faces())
            .map(|f| {
                let c = grid.face_vertices(f);
                let (du, dv) = mesh.diagonals(f);
                let (v0, v1, v2, v3) = (field.at(c[0]), field.at(c[1]), field.at(c[2]), field.at(c[3]));
                let mut acc = 0.0;
                for i in 0..d {
                    acc += (v0[i] - v2[i]) * dv[i] + (v3[i] - v1[i]) * du[i];
                }
                s * acc
            })
            .collect(),
    ))
}

/// `(δ*_τ φ)(v) = −(N²/2) Σ_{f ∋ v} φ(f) D_{v,f}`, the adjoint of `δ_τ`.
///
/// Summed over the four edge neighbours `w` of `v` with weights given by
/// differences of `φ` on the two faces sharing the edge `vw`; constants are
/// mapped to exactly zero.
pub fn delta_star(mesh: &Mesh, phi: &FaceFunction) -> Result<VertexField> {
    phi.check_same_grid(mesh.grid())?;
    let s = -0.5 * n2(mesh);
    let grid = mesh.grid();
    let d = mesh.dim();
    let mut out = vec![0.0; grid.num_vertices() * d];
    let p = phi.values();
    for v in 0..grid.num_vertices() {
        let fs = grid.vertex_faces(v);
        let nb = grid.vertex_neighbors(v);
        let ph = fs.map(|f| p[f]);
        // Edge to neighbour nbᵢ lies between two consecutive faces.
        let weights = [ph[3] - ph[0], ph[0] - ph[1], ph[1] - ph[2], ph[2] - ph[3]];
        let center = mesh.point(v);
        let dst = &mut out[v * d..(v + 1) * d];
        for (w, &nbi) in weights.iter().zip(&nb) {
            if *w == 0.0 {
                continue;
            }
            let q = mesh.point(nbi);
            for i in 0..d {
                dst[i] += w * (q[i] - center[i]);
            }
        }
        dst.iter_mut().for_each(|x| *x *= s);
    }
    Ok(VertexField::from_raw(grid.clone(), mesh.n(), out))
}

/// `Δ_τ = δ_τ ∘ δ*_τ`.
pub fn laplacian(mesh: &Mesh, phi: &FaceFunction) -> Result<FaceFunction> {
    delta(mesh, &delta_star(mesh, phi)?)
}

/// The local stencil decomposition of `Δ_τ` together with the geometric
/// coefficients `θᵘ = |U|²`, `θᵛ = |V|²` and the curvature term `κ`.
#[derive(Debug, Clone)]
pub struct StencilParts {
    /// Couplings within a checkers component (same face, diagonal neighbours).
    pub exterior: FaceFunction,
    /// Couplings across components (edge neighbours).
    pub interior: FaceFunction,
    pub theta_u: FaceFunction,
    pub theta_v: FaceFunction,
    pub kappa: FaceFunction,
}

/// Opposite diagonals of every face at its four cyclic positions.
fn opposite_diagonals(mesh: &Mesh) -> Vec<[Vec<f64>; 4]> {
    (0..mesh.grid().num_faces())
        .map(|f| [0, 1, 2, 3].map(|pos| mesh.opposite_diagonal_at(f, pos)))
        .collect()
}

/// `Δ_τ φ` evaluated by the explicit stencil
/// `(N⁴/4) Σ_{v ∈ f} Σ_{f₂ ∋ v} φ(f₂) g(D_{v,f₂}, D_{v,f})`, split by whether
/// `f₂` lies on the same checkers component as `f`.
pub fn laplacian_stencil(mesh: &Mesh, phi: &FaceFunction) -> Result<(FaceFunction, FaceFunction)> {
    phi.check_same_grid(mesh.grid())?;
    let grid = mesh.grid();
    let s = n2(mesh) * n2(mesh) / 4.0;
    let diags = opposite_diagonals(mesh);
    let p = phi.values();
    let mut ext = vec![0.0; grid.num_faces()];
    let mut int = vec![0.0; grid.num_faces()];
    for f in 0..grid.num_faces() {
        let [k, l] = grid.rep(f);
        for pos in 0..4 {
            let [ck, cl] = CORNER_OFFSETS[pos];
            for q in 0..4 {
                // f₂ has the same vertex at its cyclic position q.
                let [qk, ql] = CORNER_OFFSETS[q];
                let (dk, dl) = (ck - qk, cl - ql);
                let f2 = grid.index(k + dk, l + dl);
                let term = p[f2] * dot(&diags[f2][q], &diags[f][pos]);
                if (dk + dl) % 2 == 0 {
                    ext[f] += term;
                } else {
                    int[f] += term;
                }
            }
        }
        ext[f] *= s;
        int[f] *= s;
    }
    Ok((
        FaceFunction::from_raw(grid.clone(), ext),
        FaceFunction::from_raw(grid.clone(), int),
    ))
}

/// Stencil split of `Δ_τ φ` plus `θᵘ`, `θᵛ` and `κ`, where
/// `κ = −g(∂²_{uu}V, V) − g(∂²_{vv}U, U)` with centered second differences
/// along the face diagonals.
pub fn stencil_parts(mesh: &Mesh, phi: &FaceFunction) -> Result<StencilParts> {
    let (exterior, interior) = laplacian_stencil(mesh, phi)?;
    let grid = mesh.grid();
    let m = grid.num_faces();
    let uv: Vec<(Vec<f64>, Vec<f64>)> = (0..m).map(|f| mesh.renormalized_diagonals(f)).collect();
    let half_n2 = 0.5 * n2(mesh);
    let theta_u = FaceFunction::from_raw(grid.clone(), uv.iter().map(|(u, _)| dot(u, u)).collect());
    let theta_v = FaceFunction::from_raw(grid.clone(), uv.iter().map(|(_, v)| dot(v, v)).collect());
    let kappa = FaceFunction::from_raw(
        grid.clone(),
        (0..m)
            .map(|f| {
                let nb = grid.diagonal_neighbors(f);
                let (u, v) = &uv[f];
                let (vu_f, vu_b) = (&uv[nb[0]].1, &uv[nb[1]].1);
                let (uv_f, uv_b) = (&uv[nb[2]].0, &uv[nb[3]].0);
                let mut a = 0.0;
                let mut b = 0.0;
                for i in 0..v.len() {
                    a += half_n2 * (vu_f[i] + vu_b[i] - 2.0 * v[i]) * v[i];
                    b += half_n2 * (uv_f[i] + uv_b[i] - 2.0 * u[i]) * u[i];
                }
                -a - b
            })
            .collect(),
    );
    Ok(StencilParts {
        exterior,
        interior,
        theta_u,
        theta_v,
        kappa,
    })
}
