//! Quadrangulations of a torus as a quotient of the integer grid.
//!
//! The deck lattice `L` is stored in integer grid units (vertex `(k, l)` sits
//! at plane point `(k/N, l/N)`). Every column of `L` must have an even
//! coordinate sum so that the checkerboard split of faces descends to the
//! quotient.

use crate::error::{Error, Result};

/// Integer 2×2 matrix, row-major; the lattice generators are its columns.
pub type IMat2 = [[i64; 2]; 2];

/// An oriented basis `(γ₁, γ₂)` of a lattice of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeBasis {
    pub gamma1: [f64; 2],
    pub gamma2: [f64; 2],
}

impl LatticeBasis {
    pub fn new(gamma1: [f64; 2], gamma2: [f64; 2]) -> Result<Self> {
        let b = LatticeBasis { gamma1, gamma2 };
        let d = b.det();
        if !(d > 0.0) {
            return Err(Error::InvalidBasis(d));
        }
        Ok(b)
    }

    /// The standard square lattice `Z e₁ ⊕ Z e₂`.
    pub fn square() -> Self {
        LatticeBasis {
            gamma1: [1.0, 0.0],
            gamma2: [0.0, 1.0],
        }
    }

    pub fn det(&self) -> f64 {
        self.gamma1[0] * self.gamma2[1] - self.gamma1[1] * self.gamma2[0]
    }

    /// Orientation sign of the basis.
    pub fn orientation(&self) -> f64 {
        self.det().signum()
    }

    /// The basis as a matrix with columns `γ₁, γ₂`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.gamma1[0], self.gamma2[0]], [self.gamma1[1], self.gamma2[1]]]
    }
}

fn nearest_even_sum(target: [f64; 2]) -> [i64; 2] {
    let (r0, r1) = (target[0].round() as i64, target[1].round() as i64);
    let mut best: Option<(f64, [i64; 2])> = None;
    for a in r0 - 2..=r0 + 2 {
        for b in r1 - 2..=r1 + 2 {
            if (a + b).rem_euclid(2) != 0 {
                continue;
            }
            let d = (a as f64 - target[0]).powi(2) + (b as f64 - target[1]).powi(2);
            let better = match best {
                None => true,
                Some((bd, bv)) => d < bd || (d == bd && [a, b] < bv),
            };
            if better {
                best = Some((d, [a, b]));
            }
        }
    }
    best.expect("non-empty search window").1
}

/// Best approximation of `Γ` by a sublattice of the even-sum lattice scaled
/// by `1/N`, returned in integer grid units (columns `N·γᵢᴺ`).
pub fn approximate_lattice(basis: &LatticeBasis, n_res: usize) -> Result<IMat2> {
    if basis.det() <= 0.0 {
        return Err(Error::InvalidBasis(basis.det()));
    }
    if n_res == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let nf = n_res as f64;
    let c1 = nearest_even_sum([nf * basis.gamma1[0], nf * basis.gamma1[1]]);
    let c2 = nearest_even_sum([nf * basis.gamma2[0], nf * basis.gamma2[1]]);
    let l = [[c1[0], c2[0]], [c1[1], c2[1]]];
    if det_i(&l) <= 0 {
        return Err(Error::DegenerateLattice(n_res));
    }
    Ok(l)
}

pub fn det_i(l: &IMat2) -> i64 {
    l[0][0] * l[1][1] - l[0][1] * l[1][0]
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// Lower-triangular Hermite normal form `[[a, 0], [b, c]]` of a lattice
/// given by its column generators. `a, c > 0` and `0 ≤ b < c`.
pub fn hermite_normal_form(l: &IMat2) -> Result<(i64, i64, i64)> {
    let det = det_i(l);
    if det == 0 {
        return Err(Error::InvalidGrid("singular deck lattice".into()));
    }
    let (p, q) = (l[0][0], l[0][1]);
    let (g, x, y) = ext_gcd(p, q);
    // First column x·col0 + y·col1 has top entry g; second column has top entry 0.
    let mut col_a = [g, x * l[1][0] + y * l[1][1]];
    let mut col_c = [0, (q / g) * l[1][0] - (p / g) * l[1][1]];
    if col_a[0] < 0 {
        col_a = [-col_a[0], -col_a[1]];
    }
    if col_c[1] < 0 {
        col_c = [-col_c[0], -col_c[1]];
    }
    let (a, c) = (col_a[0], col_c[1]);
    debug_assert_eq!(a * c, det.abs());
    let b = col_a[1].rem_euclid(c);
    Ok((a, b, c))
}

/// Component of the checkers graph containing a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Plus,
    Minus,
}

impl Component {
    pub fn of(k: i64, l: i64) -> Self {
        if (k + l).rem_euclid(2) == 0 {
            Component::Plus
        } else {
            Component::Minus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Component::Plus => 1.0,
            Component::Minus => -1.0,
        }
    }
}

/// Combinatorics of the quadrangulation `Z²/L`.
///
/// Vertices and faces share the same index set: face `f_{kl}` is keyed by
/// its lower-left vertex `(k, l)`.
#[derive(Debug, Clone)]
pub struct QuadGrid {
    n_res: usize,
    l: IMat2,
    hnf: (i64, i64, i64),
    reps: Vec<[i64; 2]>,
    face_verts: Vec<[usize; 4]>,
    vert_faces: Vec<[usize; 4]>,
    vert_nbrs: Vec<[usize; 4]>,
    diag_nbrs: Vec<[usize; 4]>,
}

/// Offsets of the four diagonal face neighbours, in the order
/// `u_fwd (1,1)`, `u_back (−1,−1)`, `v_fwd (−1,1)`, `v_back (1,−1)`.
pub const DIAG_OFFSETS: [[i64; 2]; 4] = [[1, 1], [-1, -1], [-1, 1], [1, -1]];

/// Cyclic order of the corners of face `f_{kl}` relative to `(k, l)`.
pub const CORNER_OFFSETS: [[i64; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];

impl QuadGrid {
    /// Builds the grid for deck lattice `L` (columns with even coordinate sum).
    pub fn new(l: IMat2, n_res: usize) -> Result<Self> {
        if n_res == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        for c in 0..2 {
            if (l[0][c] + l[1][c]).rem_euclid(2) != 0 {
                return Err(Error::InvalidGrid(format!(
                    "column {c} of L = ({}, {}) has odd coordinate sum",
                    l[0][c], l[1][c]
                )));
            }
        }
        let hnf = hermite_normal_form(&l)?;
        let (a, _, c) = hnf;
        let count = (a * c) as usize;
        let mut grid = QuadGrid {
            n_res,
            l,
            hnf,
            reps: Vec::with_capacity(count),
            face_verts: Vec::with_capacity(count),
            vert_faces: Vec::with_capacity(count),
            vert_nbrs: Vec::with_capacity(count),
            diag_nbrs: Vec::with_capacity(count),
        };
        for i in 0..a {
            for j in 0..c {
                grid.reps.push([i, j]);
            }
        }
        for idx in 0..count {
            let [k, l] = grid.reps[idx];
            let fv = CORNER_OFFSETS.map(|[dk, dl]| grid.index(k + dk, l + dl));
            let vf = [
                grid.index(k, l),
                grid.index(k - 1, l),
                grid.index(k - 1, l - 1),
                grid.index(k, l - 1),
            ];
            let vn = [
                grid.index(k + 1, l),
                grid.index(k, l + 1),
                grid.index(k - 1, l),
                grid.index(k, l - 1),
            ];
            let dn = DIAG_OFFSETS.map(|[dk, dl]| grid.index(k + dk, l + dl));
            grid.face_verts.push(fv);
            grid.vert_faces.push(vf);
            grid.vert_nbrs.push(vn);
            grid.diag_nbrs.push(dn);
        }
        Ok(grid)
    }

    /// Convenience: `N·Z²` deck lattice (requires `N` even).
    pub fn square(n_res: usize) -> Result<Self> {
        let n = n_res as i64;
        Self::new([[n, 0], [0, n]], n_res)
    }

    pub fn resolution(&self) -> usize {
        self.n_res
    }

    pub fn deck(&self) -> IMat2 {
        self.l
    }

    pub fn hnf(&self) -> (i64, i64, i64) {
        self.hnf
    }

    pub fn num_vertices(&self) -> usize {
        self.reps.len()
    }

    pub fn num_faces(&self) -> usize {
        self.reps.len()
    }

    /// Canonical representative of the class of `(k, l)`.
    pub fn reduce(&self, k: i64, l: i64) -> [i64; 2] {
        let (a, b, c) = self.hnf;
        let q = k.div_euclid(a);
        let i = k - q * a;
        let j = (l - q * b).rem_euclid(c);
        [i, j]
    }

    /// Index of the vertex (or face) class of `(k, l)`.
    pub fn index(&self, k: i64, l: i64) -> usize {
        let [i, j] = self.reduce(k, l);
        (i * self.hnf.2 + j) as usize
    }

    /// Canonical representative of an index.
    pub fn rep(&self, idx: usize) -> [i64; 2] {
        self.reps[idx]
    }

    /// Vertices of a face in cyclic order `v_{kl}, v_{k+1,l}, v_{k+1,l+1}, v_{k,l+1}`.
    pub fn face_vertices(&self, f: usize) -> [usize; 4] {
        self.face_verts[f]
    }

    /// Faces around a vertex `v_{kl}`: `f_{kl}, f_{k−1,l}, f_{k−1,l−1}, f_{k,l−1}`.
    /// The vertex sits at cyclic position `i` of the `i`-th face.
    pub fn vertex_faces(&self, v: usize) -> [usize; 4] {
        self.vert_faces[v]
    }

    /// Edge neighbours of `v_{kl}`: `(k+1,l), (k,l+1), (k−1,l), (k,l−1)`.
    pub fn vertex_neighbors(&self, v: usize) -> [usize; 4] {
        self.vert_nbrs[v]
    }

    /// Diagonal face neighbours in the order of [`DIAG_OFFSETS`].
    pub fn diagonal_neighbors(&self, f: usize) -> [usize; 4] {
        self.diag_nbrs[f]
    }

    pub fn face_component(&self, f: usize) -> Component {
        let [k, l] = self.reps[f];
        Component::of(k, l)
    }

    /// Parity of a vertex class (`true` when `k + l` is even).
    pub fn vertex_is_even(&self, v: usize) -> bool {
        let [k, l] = self.reps[v];
        (k + l).rem_euclid(2) == 0
    }

    /// Whether two grids describe the same quadrangulation.
    pub fn same_as(&self, other: &QuadGrid) -> bool {
        std::ptr::eq(self, other) || (self.n_res == other.n_res && self.l == other.l)
    }

    /// Deck lattice of the quotient in plane units (columns `γᵢᴺ = L·eᵢ/N`).
    pub fn plane_basis(&self) -> [[f64; 2]; 2] {
        let n = self.n_res as f64;
        [
            [self.l[0][0] as f64 / n, self.l[0][1] as f64 / n],
            [self.l[1][0] as f64 / n, self.l[1][1] as f64 / n],
        ]
    }

    /// Number of edges (each vertex has degree 4).
    pub fn num_edges(&self) -> usize {
        2 * self.num_vertices()
    }
}
