//! Meshes, vertex fields and face functions on a quadrangulated torus.
//!
//! Conventions: points of `R²ⁿ` use canonical coordinates
//! `(x₁, y₁, …, xₙ, yₙ)`, `ω(a, b) = Σ (a_{xᵢ} b_{yᵢ} − a_{yᵢ} b_{xᵢ})` and
//! `J(x₁, y₁, …) = (−y₁, x₁, …)`, so that `ω(a, b) = g(Ja, b)`. Faces are
//! oriented counterclockwise: `v_{kl} → v_{k+1,l} → v_{k+1,l+1} → v_{k,l+1}`.

mod immersion;

pub use immersion::{Bump, Curve, Factor, Immersion, ImmersionSpec, Jet, ScalarField, TrigField};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice_grid::{Component, LatticeBasis, QuadGrid};

/// Symplectic form `ω(a, b)`.
#[inline]
pub fn omega(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in (0..a.len()).step_by(2) {
        s += a[i] * b[i + 1] - a[i + 1] * b[i];
    }
    s
}

/// Euclidean inner product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Complex structure `J`, written into `out`.
#[inline]
pub fn apply_j(a: &[f64], out: &mut [f64]) {
    for i in (0..a.len()).step_by(2) {
        out[i] = -a[i + 1];
        out[i + 1] = a[i];
    }
}

pub fn j_of(a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    apply_j(a, &mut out);
    out
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// A quadrangular mesh: one point of `R²ⁿ` per vertex of the grid.
#[derive(Debug, Clone)]
pub struct Mesh {
    grid: Arc<QuadGrid>,
    n: usize,
    points: Vec<f64>,
}

impl Mesh {
    pub fn new(grid: Arc<QuadGrid>, n: usize, points: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("half-dimension must be positive".into()));
        }
        let expected = grid.num_vertices() * 2 * n;
        if points.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: points.len(),
            });
        }
        check_finite(&points)?;
        Ok(Mesh { grid, n, points })
    }

    /// Mesh with every vertex at the origin.
    pub fn zeros(grid: Arc<QuadGrid>, n: usize) -> Self {
        let len = grid.num_vertices() * 2 * n;
        Mesh {
            grid,
            n,
            points: vec![0.0; len],
        }
    }

    pub fn grid(&self) -> &Arc<QuadGrid> {
        &self.grid
    }

    /// Half-dimension `n` of the target `R²ⁿ`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn point(&self, v: usize) -> &[f64] {
        let d = self.dim();
        &self.points[v * d..(v + 1) * d]
    }

    pub fn point_mut(&mut self, v: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.points[v * d..(v + 1) * d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.points
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.points
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|x| x.is_finite())
    }

    pub fn check_same_grid(&self, grid: &QuadGrid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `τ + s·V`.
    pub fn add_field(&self, field: &VertexField, s: f64) -> Result<Mesh> {
        self.check_same_grid(&field.grid)?;
        if field.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: field.n,
            });
        }
        let points = self.points.iter().zip(&field.values).map(|(p, v)| p + s * v).collect();
        Ok(Mesh {
            grid: self.grid.clone(),
            n: self.n,
            points,
        })
    }

    /// The mesh regarded as a vertex field.
    pub fn as_field(&self) -> VertexField {
        VertexField {
            grid: self.grid.clone(),
            n: self.n,
            values: self.points.clone(),
        }
    }

    /// Diagonals `(Dᵘ, Dᵛ)` of a face: `Dᵘ = τ(v_{k+1,l+1}) − τ(v_{kl})`,
    /// `Dᵛ = τ(v_{k,l+1}) − τ(v_{k+1,l})`.
    pub fn diagonals(&self, f: usize) -> (Vec<f64>, Vec<f64>) {
        let [a0, a1, a2, a3] = self.grid.face_vertices(f);
        (sub(self.point(a2), self.point(a0)), sub(self.point(a3), self.point(a1)))
    }

    /// Renormalized diagonals `U = (N/√2)Dᵘ`, `V = (N/√2)Dᵛ`.
    pub fn renormalized_diagonals(&self, f: usize) -> (Vec<f64>, Vec<f64>) {
        let s = self.grid.resolution() as f64 / std::f64::consts::SQRT_2;
        let (mut du, mut dv) = self.diagonals(f);
        du.iter_mut().for_each(|x| *x *= s);
        dv.iter_mut().for_each(|x| *x *= s);
        (du, dv)
    }

    /// The diagonal of `f` opposite to vertex `v`: with the corners of `f`
    /// cyclically ordered `(w₀, w₁, w₂, w₃)` starting at `v`, this is
    /// `τ(w₃) − τ(w₁)`. Returns the zero vector if `v` is not a corner of `f`.
    /// On tiny quotients where a vertex occupies several corners of the same
    /// face, the first cyclic position is used; use
    /// [`Mesh::opposite_diagonal_at`] for an explicit position.
    pub fn opposite_diagonal(&self, v: usize, f: usize) -> Vec<f64> {
        match self.grid.face_vertices(f).iter().position(|&w| w == v) {
            Some(pos) => self.opposite_diagonal_at(f, pos),
            None => vec![0.0; self.dim()],
        }
    }

    /// Opposite diagonal at cyclic position `pos` of face `f`.
    pub fn opposite_diagonal_at(&self, f: usize, pos: usize) -> Vec<f64> {
        let c = self.grid.face_vertices(f);
        sub(self.point(c[(pos + 3) % 4]), self.point(c[(pos + 1) % 4]))
    }

    /// Shear action: adds `t_plus` to even vertices and `t_minus` to odd ones.
    pub fn shear(&self, t_plus: &[f64], t_minus: &[f64]) -> Result<Mesh> {
        let d = self.dim();
        if t_plus.len() != d || t_minus.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: t_plus.len().min(t_minus.len()),
            });
        }
        let mut out = self.clone();
        for v in 0..self.grid.num_vertices() {
            let t = if self.grid.vertex_is_even(v) { t_plus } else { t_minus };
            for (p, s) in out.point_mut(v).iter_mut().zip(t) {
                *p += s;
            }
        }
        Ok(out)
    }

    /// Global translation.
    pub fn translate(&self, t: &[f64]) -> Result<Mesh> {
        self.shear(t, t)
    }

    /// Largest Euclidean norm of a vertex.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid.num_vertices())
            .map(|v| norm(self.point(v)))
            .fold(0.0, f64::max)
    }

    /// `sup_v ‖τ(v) − σ(v)‖`.
    pub fn sup_distance(&self, other: &Mesh) -> Result<f64> {
        self.check_same_grid(&other.grid)?;
        Ok((0..self.grid.num_vertices())
            .map(|v| norm(&sub(self.point(v), other.point(v))))
            .fold(0.0, f64::max))
    }
}

/// A discrete function on faces.
#[derive(Debug, Clone)]
pub struct FaceFunction {
    grid: Arc<QuadGrid>,
    values: Vec<f64>,
}

impl FaceFunction {
    pub fn new(grid: Arc<QuadGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_faces() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_faces(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(FaceFunction { grid, values })
    }

    pub(crate) fn from_raw(grid: Arc<QuadGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_faces());
        FaceFunction { grid, values }
    }

    pub fn zeros(grid: Arc<QuadGrid>) -> Self {
        let m = grid.num_faces();
        FaceFunction {
            grid,
            values: vec![0.0; m],
        }
    }

    /// The constant function `1_N`.
    pub fn ones(grid: Arc<QuadGrid>) -> Self {
        let m = grid.num_faces();
        FaceFunction {
            grid,
            values: vec![1.0; m],
        }
    }

    /// Indicator of a single face.
    pub fn indicator(grid: Arc<QuadGrid>, f: usize) -> Self {
        let mut out = Self::zeros(grid);
        out.values[f] = 1.0;
        out
    }

    /// `+1` on the `+` component and `−1` on the `−` component.
    pub fn comb(grid: Arc<QuadGrid>) -> Self {
        let values = (0..grid.num_faces()).map(|f| grid.face_component(f).sign()).collect();
        FaceFunction { grid, values }
    }

    pub fn from_fn(grid: Arc<QuadGrid>, f: impl Fn(usize) -> f64) -> Self {
        let values = (0..grid.num_faces()).map(f).collect();
        FaceFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<QuadGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn check_same_grid(&self, grid: &QuadGrid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &FaceFunction, b: f64) -> Result<FaceFunction> {
        self.check_same_grid(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(FaceFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scaled(&self, a: f64) -> FaceFunction {
        FaceFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    /// Restriction to one checkers component (zero on the other).
    pub fn component(&self, c: Component) -> FaceFunction {
        let values = (0..self.values.len())
            .map(|f| {
                if self.grid.face_component(f) == c {
                    self.values[f]
                } else {
                    0.0
                }
            })
            .collect();
        FaceFunction {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// A tangent vector to the space of meshes: one vector of `R²ⁿ` per vertex.
#[derive(Debug, Clone)]
pub struct VertexField {
    grid: Arc<QuadGrid>,
    n: usize,
    values: Vec<f64>,
}

impl VertexField {
    pub fn new(grid: Arc<QuadGrid>, n: usize, values: Vec<f64>) -> Result<Self> {
        let expected = grid.num_vertices() * 2 * n;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(VertexField { grid, n, values })
    }

    pub(crate) fn from_raw(grid: Arc<QuadGrid>, n: usize, values: Vec<f64>) -> Self {
        VertexField { grid, n, values }
    }

    pub fn zeros(grid: Arc<QuadGrid>, n: usize) -> Self {
        let len = grid.num_vertices() * 2 * n;
        VertexField {
            grid,
            n,
            values: vec![0.0; len],
        }
    }

    /// The same vector at every vertex.
    pub fn constant(grid: Arc<QuadGrid>, c: &[f64]) -> Self {
        let n = c.len() / 2;
        let values = (0..grid.num_vertices()).flat_map(|_| c.iter().copied()).collect();
        VertexField { grid, n, values }
    }

    pub fn grid(&self) -> &Arc<QuadGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, v: usize) -> &[f64] {
        let d = 2 * self.n;
        &self.values[v * d..(v + 1) * d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `J` applied pointwise.
    pub fn apply_j(&self) -> VertexField {
        let mut values = vec![0.0; self.values.len()];
        for (src, dst) in self.values.chunks(2).zip(values.chunks_mut(2)) {
            dst[0] = -src[1];
            dst[1] = src[0];
        }
        VertexField {
            grid: self.grid.clone(),
            n: self.n,
            values,
        }
    }

    pub fn scaled(&self, a: f64) -> VertexField {
        VertexField {
            grid: self.grid.clone(),
            n: self.n,
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.chunks(2 * self.n).map(norm).fold(0.0, f64::max)
    }

    pub fn check_same_grid(&self, grid: &QuadGrid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Discrete `L²` inner product of face functions, `N⁻² Σ_f φ(f)ψ(f)`.
pub fn face_inner(phi: &FaceFunction, psi: &FaceFunction) -> Result<f64> {
    phi.check_same_grid(&psi.grid)?;
    let n2 = (phi.grid.resolution() as f64).powi(2);
    Ok(dot(&phi.values, &psi.values) / n2)
}

/// Discrete `L²` inner product of vertex fields, `N⁻² Σ_v g(V(v), W(v))`.
pub fn vertex_inner(a: &VertexField, b: &VertexField) -> Result<f64> {
    a.check_same_grid(&b.grid)?;
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            got: b.n,
        });
    }
    let n2 = (a.grid.resolution() as f64).powi(2);
    Ok(dot(&a.values, &b.values) / n2)
}

pub fn face_norm(phi: &FaceFunction) -> f64 {
    face_inner(phi, phi).expect("same grid").sqrt()
}

/// Linear identification of the discrete quotient `R²/Γ_N` with `R²/Γ`:
/// the unique linear map sending the generators `γᵢᴺ` to `γᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Identification {
    pub matrix: [[f64; 2]; 2],
}

impl Identification {
    pub fn new(basis: &LatticeBasis, grid: &QuadGrid) -> Self {
        let b = basis.matrix();
        let bn = grid.plane_basis();
        let det = bn[0][0] * bn[1][1] - bn[0][1] * bn[1][0];
        let inv = [[bn[1][1] / det, -bn[0][1] / det], [-bn[1][0] / det, bn[0][0] / det]];
        let mut m = [[0.0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = b[i][0] * inv[0][j] + b[i][1] * inv[1][j];
            }
        }
        Identification { matrix: m }
    }

    pub fn identity() -> Self {
        Identification {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Image of grid-plane point `(s, t)` (grid units divided by `N`).
    pub fn apply(&self, s: f64, t: f64) -> [f64; 2] {
        let m = &self.matrix;
        [m[0][0] * s + m[0][1] * t, m[1][0] * s + m[1][1] * t]
    }

    /// Inverse map, from `R²/Γ` back to the grid plane.
    pub fn apply_inverse(&self, x: f64, y: f64) -> [f64; 2] {
        let m = &self.matrix;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [(m[1][1] * x - m[0][1] * y) / det, (-m[1][0] * x + m[0][0] * y) / det]
    }

    /// Plane position of vertex `v`.
    pub fn vertex_point(&self, grid: &QuadGrid, v: usize) -> [f64; 2] {
        let n = grid.resolution() as f64;
        let [k, l] = grid.rep(v);
        self.apply(k as f64 / n, l as f64 / n)
    }

    /// Plane position of the center of face `f`.
    pub fn face_center(&self, grid: &QuadGrid, f: usize) -> [f64; 2] {
        let n = grid.resolution() as f64;
        let [k, l] = grid.rep(f);
        self.apply((k as f64 + 0.5) / n, (l as f64 + 0.5) / n)
    }

    /// Distortion `‖A − I‖_max`; zero when the lattice is represented exactly.
    pub fn distortion(&self) -> f64 {
        let m = &self.matrix;
        (m[0][0] - 1.0)
            .abs()
            .max(m[0][1].abs())
            .max(m[1][0].abs())
            .max((m[1][1] - 1.0).abs())
    }
}

/// Samples an immersion at the vertices of a grid.
///
/// The vertex `(k, l)` is pushed to `Σ = R²/Γ` by the linear identification
/// `Γ_N → Γ` (the identity when `Γ_N = Γ`), so that the sample is exactly
/// periodic whatever the lattice.
pub fn sample_immersion(imm: &Immersion, grid: &Arc<QuadGrid>) -> Result<Mesh> {
    imm.check_periodicity(1e-9)?;
    let ident = Identification::new(&imm.lattice_basis()?, grid);
    let n = imm.n();
    let mut points = Vec::with_capacity(grid.num_vertices() * 2 * n);
    for v in 0..grid.num_vertices() {
        let [x, y] = ident.vertex_point(grid, v);
        points.extend(imm.eval(x, y));
    }
    Mesh::new(grid.clone(), n, points)
}

/// Samples a scalar field at face centers.
pub fn sample_face_function(field: &dyn ScalarField, grid: &Arc<QuadGrid>, ident: &Identification) -> FaceFunction {
    FaceFunction::from_fn(grid.clone(), |f| {
        let [x, y] = ident.face_center(grid, f);
        field.value(x, y)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_mesh, rng};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn omega_is_g_of_j() {
        let mut r = rng(1);
        for _ in 0..50 {
            let a: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            assert!((omega(&a, &b) - dot(&j_of(&a), &b)).abs() < 1e-15);
            assert!((omega(&a, &b) + omega(&b, &a)).abs() < 1e-15);
        }
    }

    #[test]
    fn planar_face_diagonals() {
        let n = 4;
        let grid = Arc::new(QuadGrid::square(n).unwrap());
        // Identity embedding of the plane into the (x₁, y₁) plane; take a
        // face away from the seam.
        let mut m = Mesh::zeros(grid.clone(), 2);
        for v in 0..grid.num_vertices() {
            let [k, l] = grid.rep(v);
            m.point_mut(v)[0] = k as f64 / n as f64;
            m.point_mut(v)[1] = l as f64 / n as f64;
        }
        let f = grid.index(1, 1);
        let (du, dv) = m.diagonals(f);
        assert_eq!(du, vec![0.25, 0.25, 0.0, 0.0]);
        assert_eq!(dv, vec![-0.25, 0.25, 0.0, 0.0]);
    }

    #[test]
    fn opposite_diagonal_positions() {
        let grid = Arc::new(QuadGrid::square(4).unwrap());
        let m = random_mesh(&grid, 2, &mut rng(2));
        let f = grid.index(1, 2);
        let c = grid.face_vertices(f);
        let (du, dv) = m.diagonals(f);
        let neg = |x: &Vec<f64>| x.iter().map(|a| -a).collect::<Vec<_>>();
        assert_eq!(m.opposite_diagonal(c[0], f), dv);
        assert_eq!(m.opposite_diagonal(c[1], f), neg(&du));
        assert_eq!(m.opposite_diagonal(c[2], f), neg(&dv));
        assert_eq!(m.opposite_diagonal(c[3], f), du);
        let far = grid.index(3, 0);
        assert!(m.opposite_diagonal(far, f).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn chasles_identity() {
        let grid = Arc::new(QuadGrid::square(6).unwrap());
        let m = random_mesh(&grid, 3, &mut rng(3));
        for f in 0..grid.num_faces() {
            let c = grid.face_vertices(f);
            let (du, dv) = m.diagonals(f);
            for i in 0..6 {
                let lhs = du[i] - dv[i];
                let rhs = m.point(c[2])[i] + m.point(c[1])[i] - m.point(c[0])[i] - m.point(c[3])[i];
                assert!((lhs - rhs).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shear_is_group_action() {
        let grid = Arc::new(QuadGrid::square(4).unwrap());
        let m = random_mesh(&grid, 2, &mut rng(4));
        let t = [0.5, -0.25, 0.125, 2.0];
        let s = [-1.0, 0.75, 0.0, 0.5];
        let back = m.shear(&t, &s).unwrap().shear(&t.map(|x| -x), &s.map(|x| -x)).unwrap();
        assert_eq!(back.as_slice(), m.as_slice());
        // Equal shifts give a translation.
        let tr = m.shear(&t, &t).unwrap();
        for v in 0..grid.num_vertices() {
            for i in 0..4 {
                assert_eq!(tr.point(v)[i], m.point(v)[i] + t[i]);
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let grid = Arc::new(QuadGrid::new([[6, -2], [2, 6]], 2).unwrap());
        let one = FaceFunction::ones(grid.clone());
        let area = face_inner(&one, &one).unwrap();
        assert!((area - 40.0 / 4.0).abs() < 1e-14);
        let a = FaceFunction::indicator(grid.clone(), 3);
        let b = FaceFunction::indicator(grid.clone(), 5);
        assert_eq!(face_inner(&a, &b).unwrap(), 0.0);
        assert_eq!(face_inner(&a, &a).unwrap(), 0.25);
        let other = Arc::new(QuadGrid::square(4).unwrap());
        assert!(matches!(
            face_inner(&one, &FaceFunction::ones(other)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn sample_constant_and_product() {
        let grid = Arc::new(QuadGrid::square(8).unwrap());
        let imm = Immersion::product_of_circles(1.0, 1.0);
        let m = sample_immersion(&imm, &grid).unwrap();
        let tau = std::f64::consts::TAU;
        for v in 0..grid.num_vertices() {
            let [k, l] = grid.rep(v);
            let (x, y) = (k as f64 / 8.0, l as f64 / 8.0);
            let expect = [(tau * x).cos(), (tau * x).sin(), (tau * y).cos(), (tau * y).sin()];
            for i in 0..4 {
                assert!((m.point(v)[i] - expect[i]).abs() < 1e-15);
            }
        }
        let c = Immersion::product_of_circles(0.0, 0.0);
        let m0 = sample_immersion(&c, &grid).unwrap();
        assert!(m0.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn renormalized_diagonals_converge() {
        // Rotated cover with an irrational lattice: exercises the identification.
        let imm = Immersion::product_of_circles(1.0, 0.7).rotate_cover(0.3);
        let mut errs = vec![];
        let ns = [8usize, 16, 32, 64];
        for &n in &ns {
            let grid = Arc::new(imm.grid(n).unwrap());
            let ident = Identification::new(&imm.lattice_basis().unwrap(), &grid);
            let m = sample_immersion(&imm, &grid).unwrap();
            let mut e: f64 = 0.0;
            for f in 0..grid.num_faces() {
                let (u, v) = m.renormalized_diagonals(f);
                let [x, y] = ident.face_center(&grid, f);
                let jet = imm.jet(x, y);
                e = e.max(norm(&sub(&u, &jet.u))).max(norm(&sub(&v, &jet.v)));
            }
            errs.push(e);
        }
        let slope = crate::analysis_norms::loglog_slope(&ns.map(|n| n as f64), &errs);
        assert!(slope <= -0.8, "slope {slope} errs {errs:?}");
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(seed in 0u64..1000) {
            let grid = Arc::new(QuadGrid::square(4).unwrap());
            let mut r = rng(seed);
            let p = FaceFunction::new(grid.clone(), (0..16).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
            let q = FaceFunction::new(grid.clone(), (0..16).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
            let lhs = face_inner(&p, &q).unwrap().abs();
            prop_assert!(lhs <= face_norm(&p) * face_norm(&q) * (1.0 + 1e-14));
        }

        #[test]
        fn parity_classes_preserved_by_deck(seed in 0u64..200) {
            let grid = QuadGrid::new([[6, -2], [2, 6]], 2).unwrap();
            let mut r = rng(seed);
            let (k, l) = (r.random_range(-30..30i64), r.random_range(-30..30i64));
            let even = (k + l).rem_euclid(2) == 0;
            for (a, b) in [(6i64, 2i64), (-2, 6)] {
                let idx = grid.index(k + a, l + b);
                prop_assert_eq!(grid.vertex_is_even(idx), even);
            }
        }
    }
}
