//! Optimal isotropic pyramids over isotropic quadrilaterals, triangular
//! refinement of isotropic quad meshes, genericity perturbations and
//! immersion diagnostics of the resulting piecewise-linear maps.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::discrete_ops::moment_map_r;
use crate::error::{Error, Result};
use crate::mesh_core::{apply_j, dot, norm, omega, sub, Identification, Immersion, Mesh};

/// Default tolerance of the quadrilateral isotropy and independence checks.
pub const DEFAULT_TOL: f64 = 1e-8;
/// `refine` refuses meshes whose density exceeds this value.
pub const REFINEMENT_GATE: f64 = 1e-8;
/// Relative threshold on `max(|β₀|, |β₁|)` below which a quad counts as flat.
pub const FLAT_THRESHOLD: f64 = 1e-9;

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn j(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    apply_j(x, &mut out);
    out
}

/// Frame attached to an isotropic quadrilateral `A₀A₁A₂A₃`.
///
/// `L = span(D₀, D₁)` is the isotropic plane of the diagonals `D₀ = A₂ − A₀`,
/// `D₁ = A₃ − A₁`; `D′ⱼ` is the dual basis of `L`, `Bⱼ = J D′ⱼ` spans `JL`,
/// and the side `V = A₁ − A₀` decomposes as
/// `V = α₀D₀ + α₁D₁ + β₀B₀ + β₁B₁ + (part orthogonal to L ⊕ JL)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApexFrame {
    pub g: Vec<f64>,
    pub d: [Vec<f64>; 2],
    pub d_dual: [Vec<f64>; 2],
    pub b: [Vec<f64>; 2],
    pub v: Vec<f64>,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub xi: f64,
}

impl ApexFrame {
    pub fn new(a: [&[f64]; 4], tol: f64) -> Result<Self> {
        let dim = a[0].len();
        if a.iter().any(|p| p.len() != dim) || !dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.iter().map(|p| p.len()).max().unwrap_or(0),
            });
        }
        let d0 = sub(a[2], a[0]);
        let d1 = sub(a[3], a[1]);
        let (n0, n1) = (norm(&d0), norm(&d1));
        let gram = [[dot(&d0, &d0), dot(&d0, &d1)], [dot(&d0, &d1), dot(&d1, &d1)]];
        let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
        if !(det > tol * tol * gram[0][0] * gram[1][1]) {
            return Err(Error::DegenerateDiagonals);
        }
        let iso = omega(&d0, &d1) / (n0 * n1);
        if !(iso.abs() <= tol) {
            return Err(Error::NotIsotropic(iso));
        }
        let inv = [
            [gram[1][1] / det, -gram[0][1] / det],
            [-gram[1][0] / det, gram[0][0] / det],
        ];
        let dual = |row: [f64; 2]| {
            let mut out = vec![0.0; dim];
            axpy(row[0], &d0, &mut out);
            axpy(row[1], &d1, &mut out);
            out
        };
        let dp = [dual(inv[0]), dual(inv[1])];
        let b = [j(&dp[0]), j(&dp[1])];
        let v = sub(a[1], a[0]);
        let alpha = [dot(&v, &dp[0]), dot(&v, &dp[1])];
        let beta = [omega(&d0, &v), omega(&d1, &v)];
        let xi = (beta[0] * (1.0 - 2.0 * alpha[0]) + beta[1] * (1.0 + 2.0 * alpha[1])) / 4.0;
        let mut g = vec![0.0; dim];
        for p in a {
            axpy(0.25, p, &mut g);
        }
        Ok(ApexFrame {
            g,
            d: [d0, d1],
            d_dual: dp,
            b,
            v,
            alpha,
            beta,
            xi,
        })
    }

    /// `max(|β₀|, |β₁|) ≤ 1e-9 · ‖V‖ · max‖Dⱼ‖`: the projection of the quad
    /// onto `L ⊕ JL` lies in `L`.
    pub fn is_flat(&self) -> bool {
        let scale = norm(&self.v) * norm(&self.d[0]).max(norm(&self.d[1]));
        self.beta[0].abs().max(self.beta[1].abs()) <= FLAT_THRESHOLD * scale
    }

    /// Optimal apex: the barycenter for flat quads, otherwise `G + X` with
    /// `X = −ξ(β₀D₀ + β₁D₁)/(β₀² + β₁²) + (β₀/2)B₀ − (β₁/2)B₁`.
    pub fn apex(&self) -> Vec<f64> {
        let mut p = self.g.clone();
        if self.is_flat() {
            return p;
        }
        let [b0, b1] = self.beta;
        let s = -self.xi / (b0 * b0 + b1 * b1);
        axpy(s * b0, &self.d[0], &mut p);
        axpy(s * b1, &self.d[1], &mut p);
        axpy(0.5 * b0, &self.b[0], &mut p);
        axpy(-0.5 * b1, &self.b[1], &mut p);
        p
    }
}

/// The optimal isotropic pyramid apex over `A₀A₁A₂A₃`.
pub fn optimal_apex(a: [&[f64]; 4], tol: f64) -> Result<Vec<f64>> {
    Ok(ApexFrame::new(a, tol)?.apex())
}

/// `ω(P − Aᵢ, Aᵢ₊₁ − Aᵢ)` for the four side triangles of the pyramid.
pub fn pyramid_residuals(p: &[f64], a: [&[f64]; 4]) -> [f64; 4] {
    [0, 1, 2, 3].map(|i| omega(&sub(p, a[i]), &sub(a[(i + 1) % 4], a[i])))
}

/// The linear system `M P = r` of the four pyramid isotropy conditions:
/// rows `−J(Aᵢ₊₁ − Aᵢ)`, right-hand side `ω(Aᵢ, Aᵢ₊₁ − Aᵢ)`.
pub fn constraint_system(a: [&[f64]; 4]) -> (DMatrix<f64>, DVector<f64>) {
    let dim = a[0].len();
    let mut m = DMatrix::zeros(4, dim);
    let mut r = DVector::zeros(4);
    for i in 0..4 {
        let e = sub(a[(i + 1) % 4], a[i]);
        let row = j(&e);
        for c in 0..dim {
            m[(i, c)] = -row[c];
        }
        r[i] = omega(a[i], &e);
    }
    (m, r)
}

fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().svd(false, false).singular_values
}

/// Number of singular values above `threshold`.
pub fn numeric_rank(m: &DMatrix<f64>, threshold: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > threshold).count()
}

/// Rank of a family of vectors with threshold `1e-8 · (largest norm)`.
pub fn vector_rank(vectors: &[&[f64]]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let dim = vectors[0].len();
    let scale = vectors.iter().map(|v| norm(v)).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |i, c| vectors[c][i]);
    numeric_rank(&m, 1e-8 * scale)
}

/// Dimension of the affine space of isotropic apexes, `2n − rank M`.
pub fn apex_space_dimension(a: [&[f64]; 4]) -> usize {
    let (m, _) = constraint_system(a);
    let sv = singular_values(&m);
    let top = sv.max();
    a[0].len() - sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

/// An isotropic quad mesh with one apex per face, i.e. a triangulation with
/// four triangles `(P_f, Aᵢ, Aᵢ₊₁)` per quadrilateral.
///
/// Vertices of the triangulation are numbered base vertices first, then
/// apexes (`num_vertices + f`).
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub base: Mesh,
    apex: Vec<f64>,
}

impl TriMesh {
    pub fn new(base: Mesh, apex: Vec<f64>) -> Result<Self> {
        let expected = base.grid().num_faces() * base.dim();
        if apex.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: apex.len(),
            });
        }
        if apex.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(TriMesh { base, apex })
    }

    pub fn apex(&self, f: usize) -> &[f64] {
        let d = self.base.dim();
        &self.apex[f * d..(f + 1) * d]
    }

    pub fn apexes(&self) -> &[f64] {
        &self.apex
    }

    pub fn num_triangles(&self) -> usize {
        4 * self.base.grid().num_faces()
    }

    fn corners(&self, f: usize) -> [&[f64]; 4] {
        self.base.grid().face_vertices(f).map(|v| self.base.point(v))
    }

    /// Triangle `i` of face `f`: `(P_f, Aᵢ, Aᵢ₊₁)`.
    pub fn triangle(&self, f: usize, i: usize) -> [&[f64]; 3] {
        let c = self.corners(f);
        [self.apex(f), c[i % 4], c[(i + 1) % 4]]
    }

    /// `|ω(P − Aᵢ, Aᵢ₊₁ − Aᵢ)|` for every triangle, face-major.
    pub fn triangle_residuals(&self) -> Vec<f64> {
        (0..self.base.grid().num_faces())
            .flat_map(|f| pyramid_residuals(self.apex(f), self.corners(f)).map(f64::abs))
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.triangle_residuals().into_iter().fold(0.0, f64::max)
    }
}

/// Refines an isotropic quad mesh by its optimal pyramids.
pub fn refine(rho: &Mesh, tol: f64) -> Result<TriMesh> {
    let density = moment_map_r(rho).max_abs();
    if !(density <= REFINEMENT_GATE) {
        return Err(Error::NotIsotropic(density));
    }
    let grid = rho.grid();
    let mut apex = Vec::with_capacity(grid.num_faces() * rho.dim());
    for f in 0..grid.num_faces() {
        let corners = grid.face_vertices(f).map(|v| rho.point(v));
        let p = optimal_apex(corners, tol).map_err(|e| Error::Face {
            face: f,
            source: Box::new(e),
        })?;
        apex.extend(p);
    }
    TriMesh::new(rho.clone(), apex)
}

fn diameter(points: &[&[f64]]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max(norm(&sub(p, q)));
        }
    }
    d
}

/// `max_f d′_f / (d_f + c)`, with `d_f` the diameter of quad `f`, `d′_f` that
/// of its pyramid and `c = √θ̄ / N` the characteristic edge length
/// (`θ̄` the mean of `(|U|² + |V|²)/2`).
pub fn apex_diameter_ratio(tm: &TriMesh) -> f64 {
    let grid = tm.base.grid();
    let faces = grid.num_faces();
    let theta_bar = (0..faces)
        .map(|f| {
            let (u, v) = tm.base.renormalized_diagonals(f);
            0.5 * (dot(&u, &u) + dot(&v, &v))
        })
        .sum::<f64>()
        / faces as f64;
    let c = theta_bar.sqrt() / grid.resolution() as f64;
    (0..faces)
        .map(|f| {
            let q = tm.corners(f);
            let pyr = [q[0], q[1], q[2], q[3], tm.apex(f)];
            diameter(&pyr) / (diameter(&q) + c)
        })
        .fold(0.0, f64::max)
}

/// Checks the three genericity conditions on an isotropic mesh; returns the
/// first violated condition.
pub fn genericity_violation(rho: &Mesh, tol: f64) -> Result<Option<String>> {
    let grid = rho.grid();
    let frames = (0..grid.num_faces())
        .map(|f| {
            ApexFrame::new(grid.face_vertices(f).map(|v| rho.point(v)), tol).map_err(|e| Error::Face {
                face: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let floor = 1e-6
        * frames
            .iter()
            .map(|fr| norm(&fr.v) * norm(&fr.d[0]).max(norm(&fr.d[1])))
            .sum::<f64>()
        / frames.len() as f64;
    for (f, fr) in frames.iter().enumerate() {
        if fr.beta[0].abs().max(fr.beta[1].abs()) <= floor {
            return Ok(Some(format!("(1) face {f} has a flat projection")));
        }
    }
    for v in 0..grid.num_vertices() {
        let diags: Vec<Vec<f64>> = grid
            .vertex_faces(v)
            .iter()
            .map(|&f| rho.opposite_diagonal(v, f))
            .collect();
        let refs: Vec<&[f64]> = diags.iter().map(|d| d.as_slice()).collect();
        if vector_rank(&refs) < 3 {
            return Ok(Some(format!("(2) diagonals at vertex {v} span less than 3 dimensions")));
        }
        for skip in 0..4 {
            let three: Vec<&[f64]> = (0..4).filter(|&i| i != skip).map(|i| refs[i]).collect();
            if vector_rank(&three) < 3 {
                return Ok(Some(format!("(2) dependent diagonal triple at vertex {v}")));
            }
        }
    }
    for (f, fr) in frames.iter().enumerate() {
        if fr.beta[0].abs().min(fr.beta[1].abs()) <= floor {
            return Ok(Some(format!("(3) face {f} has β₀β₁ = 0")));
        }
        let p = fr.apex();
        let rays: Vec<Vec<f64>> = grid.face_vertices(f).iter().map(|&v| sub(rho.point(v), &p)).collect();
        let refs: Vec<&[f64]> = rays.iter().map(|r| r.as_slice()).collect();
        if vector_rank(&refs) < 4 {
            return Ok(Some(format!("(3) optimal pyramid of face {f} has dependent rays")));
        }
    }
    Ok(None)
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Shears `ρ` by `(s T₊, 0)` with `T₊` a seeded random unit vector, redrawn
/// up to 100 times until the genericity conditions hold.
pub fn genericity_perturb(rho: &Mesh, s: f64, seed: u64) -> Result<Mesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = vec![0.0; rho.dim()];
    let mut reason = String::new();
    for _ in 0..100 {
        let t: Vec<f64> = random_unit(rho.dim(), &mut rng).into_iter().map(|x| s * x).collect();
        let candidate = rho.shear(&t, &zero)?;
        match genericity_violation(&candidate, DEFAULT_TOL)? {
            None => return Ok(candidate),
            Some(r) => reason = r,
        }
        if s == 0.0 {
            break;
        }
    }
    Err(Error::GenericityFailed(reason))
}

/// Triangulation vertices at which the piecewise-linear map fails to be an
/// immersion: apexes whose four rays are dependent, and base vertices where
/// two incident triangles fail to span three dimensions (or a triangle is
/// degenerate).
pub fn immersion_check(tm: &TriMesh) -> Vec<usize> {
    let grid = tm.base.grid();
    let nv = grid.num_vertices();
    let mut bad = Vec::new();
    for v in 0..nv {
        let p = tm.base.point(v);
        let mut tris: Vec<[Vec<f64>; 2]> = Vec::with_capacity(8);
        for (pos, &f) in grid.vertex_faces(v).iter().enumerate() {
            let c = grid.face_vertices(f);
            debug_assert_eq!(c[pos], v);
            let to_apex = sub(tm.apex(f), p);
            tris.push([to_apex.clone(), sub(tm.base.point(c[(pos + 1) % 4]), p)]);
            tris.push([to_apex, sub(tm.base.point(c[(pos + 3) % 4]), p)]);
        }
        let degenerate = tris.iter().any(|t| vector_rank(&[&t[0], &t[1]]) < 2);
        let coplanar = (0..tris.len()).any(|a| {
            (a + 1..tris.len()).any(|b| vector_rank(&[&tris[a][0], &tris[a][1], &tris[b][0], &tris[b][1]]) < 3)
        });
        if degenerate || coplanar {
            bad.push(v);
        }
    }
    for f in 0..grid.num_faces() {
        let p = tm.apex(f);
        let rays: Vec<Vec<f64>> = grid
            .face_vertices(f)
            .iter()
            .map(|&v| sub(tm.base.point(v), p))
            .collect();
        let refs: Vec<&[f64]> = rays.iter().map(|r| r.as_slice()).collect();
        if vector_rank(&refs) < 4 {
            bad.push(nv + f);
        }
    }
    bad
}

/// Projection of `delta` onto the null space of the constraint matrix of
/// face `f` (the directions preserving the isotropy of its pyramid).
pub fn project_nudge(tm: &TriMesh, f: usize, delta: &[f64]) -> Result<Vec<f64>> {
    let corners = tm.corners(f);
    if delta.len() != corners[0].len() {
        return Err(Error::DimensionMismatch {
            expected: corners[0].len(),
            got: delta.len(),
        });
    }
    let (m, _) = constraint_system(corners);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let top = svd.singular_values.max();
    let mut out = delta.to_vec();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-10 * top {
            let row: Vec<f64> = vt.row(i).iter().copied().collect();
            axpy(-dot(&row, delta), &row, &mut out);
        }
    }
    Ok(out)
}

/// Moves the apex of face `f` by the projection of `delta`.
pub fn apex_nudge(tm: &TriMesh, f: usize, delta: &[f64]) -> Result<TriMesh> {
    if f >= tm.base.grid().num_faces() {
        return Err(Error::InvalidArgument(format!("face {f} out of range")));
    }
    let step = project_nudge(tm, f, delta)?;
    let mut out = tm.clone();
    let d = tm.base.dim();
    axpy(1.0, &step, &mut out.apex[f * d..(f + 1) * d]);
    Ok(out)
}

/// Randomized apex nudges of size `size` on the faces around offending
/// vertices, for at most `rounds` rounds. Returns the mesh and the number of
/// rounds used, or the last offending list in an error.
pub fn nudge_to_immersion(tm: &TriMesh, rounds: usize, size: f64, seed: u64) -> Result<(TriMesh, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = tm.clone();
    let grid = tm.base.grid().clone();
    let nv = grid.num_vertices();
    for round in 0..=rounds {
        let bad = immersion_check(&cur);
        if bad.is_empty() {
            return Ok((cur, round));
        }
        if round == rounds {
            return Err(Error::GenericityFailed(format!(
                "{} vertices still fail the immersion check after {rounds} rounds",
                bad.len()
            )));
        }
        let mut faces: Vec<usize> = bad
            .iter()
            .flat_map(|&v| {
                if v >= nv {
                    vec![v - nv]
                } else {
                    grid.vertex_faces(v).to_vec()
                }
            })
            .collect();
        faces.sort_unstable();
        faces.dedup();
        for f in faces {
            let delta: Vec<f64> = random_unit(cur.base.dim(), &mut rng)
                .into_iter()
                .map(|x| size * x)
                .collect();
            cur = apex_nudge(&cur, f, &delta)?;
        }
    }
    unreachable!("loop returns on its last round")
}

fn barycentric(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 3] {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let lb = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let lc = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - lb - lc, lb, lc]
}

/// The piecewise-linear map at grid-plane point `(s, t)` (vertex `(k, l)` at
/// `(k/N, l/N)`): the containing unit cell, then one of its four triangles by
/// sign tests against the cell diagonals, then barycentric interpolation.
pub fn pl_eval(tm: &TriMesh, s: f64, t: f64) -> Vec<f64> {
    let grid = tm.base.grid();
    let n = grid.resolution() as f64;
    let (xs, ys) = (s * n, t * n);
    let (k, l) = (xs.floor(), ys.floor());
    let (a, b) = (xs - k, ys - l);
    let f = grid.index(k as i64, l as i64);
    let corner = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let (d1, d2) = (b - a, a + b - 1.0);
    let i = match (d1 <= 0.0, d2 <= 0.0) {
        (true, true) => 0,
        (true, false) => 1,
        (false, false) => 2,
        (false, true) => 3,
    };
    let w = barycentric([a, b], [0.5, 0.5], corner[i], corner[(i + 1) % 4]);
    let tri = tm.triangle(f, i);
    let mut out = vec![0.0; tm.base.dim()];
    for (wi, p) in w.iter().zip(tri) {
        axpy(*wi, p, &mut out);
    }
    out
}

/// `sup ‖ℓ_N − ℓ‖` over a `5N × 5N` probe grid of the fundamental domain.
pub fn pl_sup_error(tm: &TriMesh, imm: &Immersion) -> Result<f64> {
    let grid: &Arc<_> = tm.base.grid();
    let ident = Identification::new(&imm.lattice_basis()?, grid);
    let [c1, c2] = {
        let b = grid.plane_basis();
        [[b[0][0], b[1][0]], [b[0][1], b[1][1]]]
    };
    let m = 5 * grid.resolution();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for jj in 0..m {
            let (a, b) = (i as f64 / m as f64, jj as f64 / m as f64);
            let (s, t) = (a * c1[0] + b * c2[0], a * c1[1] + b * c2[1]);
            let [x, y] = ident.apply(s, t);
            worst = worst.max(norm(&sub(&pl_eval(tm, s, t), &imm.eval(x, y))));
        }
    }
    Ok(worst)
}
