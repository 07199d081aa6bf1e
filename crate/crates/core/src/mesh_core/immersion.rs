//! Library of smooth periodic isotropic immersions of the plane.
//!
//! An immersion is `ℓ(p) = H(c₁(a₁·Mp), …, cₙ(aₙ·Mp))` where each `cᵢ` is a
//! closed trigonometric curve in its own symplectic plane, `aᵢ ∈ Z²` are
//! integer frequency vectors, `M = s·R(r)` is a similarity of the plane and
//! `H` is an optional Hamiltonian shear `(x, y) ↦ (x, y + ∇f(x))`. Every such
//! map is isotropic and periodic with respect to `Γ = M⁻¹Z²`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use crate::error::{Error, Result};
use crate::lattice_grid::{approximate_lattice, LatticeBasis, QuadGrid};

/// Closed planar curve `t ↦ (Σ cosₖ cos(2π(k+1)t), Σ sinₖ sin(2π(k+1)t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Curve {
    pub fn circle(radius: f64) -> Self {
        Curve {
            cos: vec![radius],
            sin: vec![radius],
        }
    }

    /// `order`-th derivative at `t`.
    pub fn eval(&self, t: f64, order: u32) -> [f64; 2] {
        let shift = order as f64 * std::f64::consts::FRAC_PI_2;
        let mut x = 0.0;
        for (k, c) in self.cos.iter().enumerate() {
            let w = TAU * (k + 1) as f64;
            x += c * w.powi(order as i32) * (w * t + shift).cos();
        }
        let mut y = 0.0;
        for (k, s) in self.sin.iter().enumerate() {
            let w = TAU * (k + 1) as f64;
            y += s * w.powi(order as i32) * (w * t + shift).sin();
        }
        [x, y]
    }
}

/// One factor of a product immersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub curve: Curve,
    /// Integer frequency vector `aᵢ`; the factor is evaluated at `aᵢ·Mp`.
    pub freq: [i64; 2],
}

/// Hamiltonian shear by `f(x) = amplitude·cos(wave·x + phase)`, where `x`
/// collects the `xᵢ` coordinates. Symplectic, hence preserves isotropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub wave: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

/// Derivatives of an immersion along the unit directions
/// `e_u = (1, 1)/√2` and `e_v = (−1, 1)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub val: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub uu: Vec<f64>,
    pub uv: Vec<f64>,
    pub vv: Vec<f64>,
    pub uuu: Vec<f64>,
    pub uuv: Vec<f64>,
    pub uvv: Vec<f64>,
    pub vvv: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Jet {
    /// Conformal factor `θ = |ℓ_u|²`.
    pub fn theta(&self) -> f64 {
        dot(&self.u, &self.u)
    }

    /// `(θ_u, θ_v)` computed from `θ = |ℓ_u|²`.
    pub fn dtheta(&self) -> (f64, f64) {
        (2.0 * dot(&self.uu, &self.u), 2.0 * dot(&self.uv, &self.u))
    }

    /// `E = 2|(ℓ_uv)^⊥|²`, the normal part taken orthogonally to `span(ℓ_u, ℓ_v)`.
    pub fn e_density(&self) -> f64 {
        let mut w = self.uv.clone();
        // Gram–Schmidt against the tangent plane.
        let e1n = dot(&self.u, &self.u).sqrt();
        if e1n > 0.0 {
            let e1: Vec<f64> = self.u.iter().map(|x| x / e1n).collect();
            let mut e2: Vec<f64> = self.v.clone();
            let c = dot(&e2, &e1);
            e2.iter_mut().zip(&e1).for_each(|(a, b)| *a -= c * b);
            let e2n = dot(&e2, &e2).sqrt();
            let c1 = dot(&w, &e1);
            w.iter_mut().zip(&e1).for_each(|(a, b)| *a -= c1 * b);
            if e2n > 0.0 {
                e2.iter_mut().for_each(|a| *a /= e2n);
                let c2 = dot(&w, &e2);
                w.iter_mut().zip(&e2).for_each(|(a, b)| *a -= c2 * b);
            }
        }
        2.0 * dot(&w, &w)
    }

    /// `K + E = −g(ℓ_uuv, ℓ_v) − g(ℓ_uvv, ℓ_u)` for a conformal isotropic immersion.
    pub fn k_plus_e(&self) -> f64 {
        -dot(&self.uuv, &self.v) - dot(&self.uvv, &self.u)
    }

    /// Squared Frobenius norm of the Hessian, used as a curvature scale.
    pub fn hessian_scale2(&self) -> f64 {
        dot(&self.uu, &self.uu) + 2.0 * dot(&self.uv, &self.uv) + dot(&self.vv, &self.vv)
    }
}

/// Smooth periodic isotropic immersion of the plane into `R²ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Immersion {
    pub factors: Vec<Factor>,
    pub scale: f64,
    pub rotation: f64,
    pub bump: Option<Bump>,
    /// Step for finite-difference jets.
    pub jet_step: f64,
    /// Use finite-difference jets even when analytic ones are available.
    pub force_fd: bool,
}

const DIR_U: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
const DIR_V: [f64; 2] = [-FRAC_1_SQRT_2, FRAC_1_SQRT_2];

impl Immersion {
    pub fn product(factors: Vec<Factor>) -> Self {
        Immersion {
            factors,
            scale: 1.0,
            rotation: 0.0,
            bump: None,
            jet_step: 1e-3,
            force_fd: false,
        }
    }

    /// `(c₁(x), c₂(y))` with two circles; periodic for `Γ = Z²`.
    pub fn product_of_circles(r1: f64, r2: f64) -> Self {
        Self::product(vec![
            Factor {
                curve: Curve::circle(r1),
                freq: [1, 0],
            },
            Factor {
                curve: Curve::circle(r2),
                freq: [0, 1],
            },
        ])
    }

    /// Three circles `(c₁(x), c₂(y), c₃(x + y))` in `R⁶`.
    pub fn triple_product_of_circles(r1: f64, r2: f64, r3: f64) -> Self {
        Self::product(vec![
            Factor {
                curve: Curve::circle(r1),
                freq: [1, 0],
            },
            Factor {
                curve: Curve::circle(r2),
                freq: [0, 1],
            },
            Factor {
                curve: Curve::circle(r3),
                freq: [1, 1],
            },
        ])
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_rotation(mut self, rotation: f64) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn with_bump(mut self, bump: Bump) -> Self {
        self.bump = Some(bump);
        self
    }

    /// Precomposes with the plane rotation by `angle`: `ℓ'(p) = ℓ(R(angle)p)`.
    pub fn rotate_cover(&self, angle: f64) -> Self {
        let mut out = self.clone();
        out.rotation += angle;
        out
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    fn linear(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.rotation.sin_cos();
        [[self.scale * c, -self.scale * s], [self.scale * s, self.scale * c]]
    }

    /// Basis of `Γ = M⁻¹Z²` (columns of `M⁻¹`).
    pub fn lattice_basis(&self) -> Result<LatticeBasis> {
        if !(self.scale > 0.0) {
            return Err(Error::InvalidArgument("immersion scale must be positive".into()));
        }
        let (s, c) = self.rotation.sin_cos();
        let k = 1.0 / self.scale;
        // M⁻¹ = R(−r)/s.
        LatticeBasis::new([k * c, -k * s], [k * s, k * c])
    }

    /// Grid of resolution `n_res` for the lattice of this immersion.
    pub fn grid(&self, n_res: usize) -> Result<QuadGrid> {
        let l = approximate_lattice(&self.lattice_basis()?, n_res)?;
        QuadGrid::new(l, n_res)
    }

    fn params(&self, x: f64, y: f64) -> Vec<f64> {
        let m = self.linear();
        let (px, py) = (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y);
        self.factors
            .iter()
            .map(|f| f.freq[0] as f64 * px + f.freq[1] as f64 * py)
            .collect()
    }

    /// `ℓ(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Vec<f64> {
        let ts = self.params(x, y);
        let mut out = Vec::with_capacity(2 * self.n());
        for (f, t) in self.factors.iter().zip(ts) {
            out.extend(f.curve.eval(t, 0));
        }
        if let Some(b) = &self.bump {
            let phase: f64 = (0..self.n())
                .map(|i| b.wave.get(i).copied().unwrap_or(0.0) * out[2 * i])
                .sum::<f64>()
                + b.phase;
            let s = phase.sin();
            for i in 0..self.n() {
                out[2 * i + 1] -= b.amplitude * b.wave.get(i).copied().unwrap_or(0.0) * s;
            }
        }
        out
    }

    /// Checks `ℓ(p + γᵢ) = ℓ(p)` at a few fixed points.
    pub fn check_periodicity(&self, tol: f64) -> Result<()> {
        let basis = self.lattice_basis()?;
        let probes = [[0.0, 0.0], [0.137, 0.391], [0.713, -0.29], [-0.45, 0.88]];
        for p in probes {
            let base = self.eval(p[0], p[1]);
            let mag = 1.0 + base.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for g in [basis.gamma1, basis.gamma2] {
                let moved = self.eval(p[0] + g[0], p[1] + g[1]);
                let defect = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if !(defect <= tol * mag) {
                    return Err(Error::PeriodicityViolation {
                        x: p[0],
                        y: p[1],
                        defect,
                    });
                }
            }
        }
        Ok(())
    }

    /// Derivatives along `e_u`, `e_v` up to order 3 — analytic for pure
    /// products, finite differences otherwise.
    pub fn jet(&self, x: f64, y: f64) -> Jet {
        if self.bump.is_none() && !self.force_fd {
            self.jet_analytic(x, y)
        } else {
            self.jet_fd(x, y, self.jet_step)
        }
    }

    fn jet_analytic(&self, x: f64, y: f64) -> Jet {
        let m = self.linear();
        let ts = self.params(x, y);
        let dirs = [DIR_U, DIR_V];
        let slopes: Vec<[f64; 2]> = self
            .factors
            .iter()
            .map(|f| {
                dirs.map(|e| {
                    let me = [m[0][0] * e[0] + m[0][1] * e[1], m[1][0] * e[0] + m[1][1] * e[1]];
                    f.freq[0] as f64 * me[0] + f.freq[1] as f64 * me[1]
                })
            })
            .collect();
        // `pattern` lists which direction (0 = u, 1 = v) each derivative uses.
        let build = |pattern: &[usize]| -> Vec<f64> {
            let mut out = Vec::with_capacity(2 * self.n());
            for ((f, t), s) in self.factors.iter().zip(&ts).zip(&slopes) {
                let c = f.curve.eval(*t, pattern.len() as u32);
                let k: f64 = pattern.iter().map(|&d| s[d]).product();
                out.push(c[0] * k);
                out.push(c[1] * k);
            }
            out
        };
        Jet {
            val: build(&[]),
            u: build(&[0]),
            v: build(&[1]),
            uu: build(&[0, 0]),
            uv: build(&[0, 1]),
            vv: build(&[1, 1]),
            uuu: build(&[0, 0, 0]),
            uuv: build(&[0, 0, 1]),
            uvv: build(&[0, 1, 1]),
            vvv: build(&[1, 1, 1]),
        }
    }

    fn nested_diff(&self, p: [f64; 2], dirs: &[[f64; 2]], h: f64) -> Vec<f64> {
        match dirs.split_first() {
            None => self.eval(p[0], p[1]),
            Some((e, rest)) => {
                let a = self.nested_diff([p[0] + h * e[0], p[1] + h * e[1]], rest, h);
                let b = self.nested_diff([p[0] - h * e[0], p[1] - h * e[1]], rest, h);
                a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
            }
        }
    }

    fn richardson(&self, p: [f64; 2], dirs: &[[f64; 2]], h: f64) -> Vec<f64> {
        let coarse = self.nested_diff(p, dirs, h);
        let fine = self.nested_diff(p, dirs, h / 2.0);
        fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
    }

    /// Central finite-difference jet with one Richardson level.
    pub fn jet_fd(&self, x: f64, y: f64, h: f64) -> Jet {
        let p = [x, y];
        let (u, v) = (DIR_U, DIR_V);
        Jet {
            val: self.eval(x, y),
            u: self.richardson(p, &[u], h),
            v: self.richardson(p, &[v], h),
            uu: self.richardson(p, &[u, u], h),
            uv: self.richardson(p, &[u, v], h),
            vv: self.richardson(p, &[v, v], h),
            uuu: self.richardson(p, &[u, u, u], h),
            uuv: self.richardson(p, &[u, u, v], h),
            uvv: self.richardson(p, &[u, v, v], h),
            vvv: self.richardson(p, &[v, v, v], h),
        }
    }

    /// Names accepted by [`Immersion::library`].
    pub const LIBRARY: [&'static str; 5] = [
        "product",
        "bumped-product",
        "degenerate-product",
        "rotated-product",
        "triple-product",
    ];

    /// Named example immersions:
    /// - `product`: the Clifford-type torus `(e^{2πix}, e^{2πiy})`;
    /// - `bumped-product`: the same followed by a Hamiltonian shear, so its
    ///   samples are not isotropic;
    /// - `degenerate-product`: `(e^{2πiu}, e^{2πiv})` in the diagonal
    ///   coordinates, on the lattice spanned by `(½, ½)`, `(−½, ½)`
    ///   (`E ≡ 0`; even `N` only);
    /// - `rotated-product`: the product torus on the lattice spanned by
    ///   `(3, 1)`, `(−1, 3)` (nondegenerate, not aligned with the grid);
    /// - `triple-product`: three circles with frequencies `(1,0), (0,1), (1,1)` in `R⁶`.
    pub fn library(name: &str) -> Result<Self> {
        let unit = Immersion::product_of_circles(1.0, 1.0);
        Ok(match name {
            "product" => unit,
            "bumped-product" => unit.with_bump(Bump {
                amplitude: 0.15,
                wave: vec![1.0, 0.5],
                phase: 0.3,
            }),
            "degenerate-product" => unit
                .with_scale(std::f64::consts::SQRT_2)
                .with_rotation(-std::f64::consts::FRAC_PI_4),
            "rotated-product" => unit.with_scale(1.0 / 10f64.sqrt()).with_rotation(-(1f64).atan2(3.0)),
            "triple-product" => Immersion::triple_product_of_circles(1.0, 1.0, 1.0),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown immersion {other:?}; expected one of {}",
                    Self::LIBRARY.join(", ")
                )))
            }
        })
    }

    /// JSON description, the inverse of [`Immersion::from_spec`].
    pub fn to_spec(&self) -> ImmersionSpec {
        let mut curves = self.factors.iter().map(|f| f.curve.clone());
        ImmersionSpec {
            kind: "product".into(),
            curve1: curves.next().unwrap_or(Curve::circle(0.0)),
            curve2: curves.next().unwrap_or(Curve::circle(0.0)),
            curve3: curves.next(),
            rotation: self.rotation,
            scale: self.scale,
            freqs: Some(self.factors.iter().map(|f| f.freq).collect()),
            bump: self.bump.clone(),
        }
    }

    pub fn from_spec(spec: &ImmersionSpec) -> Result<Self> {
        if spec.kind != "product" {
            return Err(Error::Format(format!("unknown immersion type {:?}", spec.kind)));
        }
        let mut curves = vec![spec.curve1.clone(), spec.curve2.clone()];
        curves.extend(spec.curve3.clone());
        let default_freqs = [[1, 0], [0, 1], [1, 1]];
        let freqs = spec
            .freqs
            .clone()
            .unwrap_or_else(|| default_freqs[..curves.len()].to_vec());
        if freqs.len() != curves.len() {
            return Err(Error::Format("freqs must list one vector per curve".into()));
        }
        let factors = curves
            .into_iter()
            .zip(freqs)
            .map(|(curve, freq)| Factor { curve, freq })
            .collect();
        let imm = Immersion {
            factors,
            scale: spec.scale,
            rotation: spec.rotation,
            bump: spec.bump.clone(),
            jet_step: 1e-3,
            force_fd: false,
        };
        imm.lattice_basis()?;
        Ok(imm)
    }
}

fn one() -> f64 {
    1.0
}

/// Serialized form: `{type: "product", curve1, curve2, [curve3], rotation, …}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub curve1: Curve,
    pub curve2: Curve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve3: Option<Curve>,
    #[serde(default)]
    pub rotation: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freqs: Option<Vec<[i64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<Bump>,
}

/// A smooth scalar function of the plane with derivatives along `e_u`, `e_v`.
pub trait ScalarField {
    fn value(&self, x: f64, y: f64) -> f64;

    /// `[φ, φ_u, φ_v, φ_uu, φ_uv, φ_vv]`; central differences by default.
    fn jet2(&self, x: f64, y: f64) -> [f64; 6] {
        let h = 1e-4;
        let f = |a: f64, b: f64| self.value(x + a, y + b);
        let (u, v) = (DIR_U, DIR_V);
        let d1 = |e: [f64; 2]| (f(h * e[0], h * e[1]) - f(-h * e[0], -h * e[1])) / (2.0 * h);
        let d2 = |e: [f64; 2]| (f(h * e[0], h * e[1]) - 2.0 * f(0.0, 0.0) + f(-h * e[0], -h * e[1])) / (h * h);
        let uv = (f(h * (u[0] + v[0]), h * (u[1] + v[1]))
            - f(h * (u[0] - v[0]), h * (u[1] - v[1]))
            - f(h * (v[0] - u[0]), h * (v[1] - u[1]))
            + f(-h * (u[0] + v[0]), -h * (u[1] + v[1])))
            / (4.0 * h * h);
        [f(0.0, 0.0), d1(u), d1(v), d2(u), uv, d2(v)]
    }
}

impl<F: Fn(f64, f64) -> f64> ScalarField for F {
    fn value(&self, x: f64, y: f64) -> f64 {
        self(x, y)
    }
}

/// `Σ ampⱼ cos(2π(kxⱼ x + kyⱼ y) + phaseⱼ)` plus a constant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigField {
    pub constant: f64,
    pub terms: Vec<(f64, f64, f64, f64)>,
}

impl ScalarField for TrigField {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(a, kx, ky, ph)| a * (TAU * (kx * x + ky * y) + ph).cos())
                .sum::<f64>()
    }

    fn jet2(&self, x: f64, y: f64) -> [f64; 6] {
        let mut out = [self.constant, 0.0, 0.0, 0.0, 0.0, 0.0];
        for &(a, kx, ky, ph) in &self.terms {
            let arg = TAU * (kx * x + ky * y) + ph;
            let (s, c) = arg.sin_cos();
            let wu = TAU * (kx * DIR_U[0] + ky * DIR_U[1]);
            let wv = TAU * (kx * DIR_V[0] + ky * DIR_V[1]);
            out[0] += a * c;
            out[1] -= a * wu * s;
            out[2] -= a * wv * s;
            out[3] -= a * wu * wu * c;
            out[4] -= a * wu * wv * c;
            out[5] -= a * wv * wv * c;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_core::omega;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn analytic_jet_matches_finite_differences() {
        let imm = Immersion::product(vec![
            Factor {
                curve: Curve {
                    cos: vec![1.0, 0.2],
                    sin: vec![0.8, -0.1],
                },
                freq: [1, 0],
            },
            Factor {
                curve: Curve {
                    cos: vec![0.6],
                    sin: vec![0.9, 0.05],
                },
                freq: [0, 1],
            },
        ])
        .rotate_cover(0.4);
        let (x, y) = (0.31, -0.17);
        let a = imm.jet(x, y);
        let f = imm.jet_fd(x, y, 1e-3);
        assert!(max_diff(&a.u, &f.u) < 1e-8);
        assert!(max_diff(&a.uv, &f.uv) < 1e-5);
        assert!(max_diff(&a.uuv, &f.uuv) < 1e-2);
        assert!(max_diff(&a.vvv, &f.vvv) < 1e-2);
    }

    #[test]
    fn products_and_bumps_are_isotropic() {
        let imm = Immersion::triple_product_of_circles(1.0, 0.7, 0.5).with_rotation(0.3);
        let bumped = Immersion::product_of_circles(1.0, 1.0).with_bump(Bump {
            amplitude: 0.1,
            wave: vec![1.0, 2.0],
            phase: 0.3,
        });
        for m in [imm, bumped] {
            for (x, y) in [(0.1, 0.2), (0.7, -0.4)] {
                let j = m.jet(x, y);
                assert!(omega(&j.u, &j.v).abs() < 1e-7, "{}", omega(&j.u, &j.v));
            }
        }
    }

    #[test]
    fn product_torus_curvature_calibration() {
        // Standard product of circles of radius ρ: flat metric (K = 0) and
        // E = (2π)⁴ρ², θ = (2πρ)².
        let rho = 0.8;
        let imm = Immersion::product_of_circles(rho, rho);
        let j = imm.jet(0.23, 0.61);
        assert!((j.theta() - (TAU * rho).powi(2)).abs() < 1e-12);
        let e = TAU.powi(4) * rho * rho;
        assert!((j.e_density() - e).abs() < 1e-9 * e);
        assert!((j.k_plus_e() - e).abs() < 1e-9 * e);
    }

    #[test]
    fn degenerate_example_has_zero_e() {
        let imm = Immersion::product_of_circles(1.0, 1.0).rotate_cover(-std::f64::consts::FRAC_PI_4);
        let j = imm.jet(0.3, 0.1);
        assert!(j.uv.iter().all(|x| x.abs() < 1e-12));
        assert!((j.theta() - TAU * TAU).abs() < 1e-10);
    }

    #[test]
    fn spec_round_trip() {
        let imm = Immersion::triple_product_of_circles(1.0, 0.5, 0.25)
            .with_rotation(0.2)
            .with_scale(0.5);
        let json = serde_json::to_string(&imm.to_spec()).unwrap();
        let back = Immersion::from_spec(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, imm);
        let minimal =
            r#"{"type":"product","curve1":{"cos":[1],"sin":[1]},"curve2":{"cos":[1],"sin":[1]},"rotation":0}"#;
        let m = Immersion::from_spec(&serde_json::from_str(minimal).unwrap()).unwrap();
        assert_eq!(m, Immersion::product_of_circles(1.0, 1.0));
    }

    #[test]
    fn library_immersions_are_periodic() {
        let bumped = Immersion::product_of_circles(1.0, 0.5).with_bump(Bump {
            amplitude: 0.5,
            wave: vec![0.5, 1.0],
            phase: 0.1,
        });
        assert!(bumped.check_periodicity(1e-9).is_ok());
        let rotated = Immersion::triple_product_of_circles(1.0, 0.5, 0.3)
            .rotate_cover(0.77)
            .with_scale(0.4);
        assert!(rotated.check_periodicity(1e-9).is_ok());
        for name in Immersion::LIBRARY {
            let imm = Immersion::library(name).unwrap();
            assert!(imm.check_periodicity(1e-9).is_ok(), "{name}");
            // The library lattices are represented exactly at even N.
            let grid = imm.grid(8).unwrap();
            let ident = crate::mesh_core::Identification::new(&imm.lattice_basis().unwrap(), &grid);
            assert!(ident.distortion() < 1e-12, "{name}");
        }
        assert!(Immersion::library("sphere").is_err());
    }

    #[test]
    fn trig_field_jet() {
        let t = TrigField {
            constant: 0.5,
            terms: vec![(1.0, 1.0, 2.0, 0.3), (0.25, -1.0, 1.0, 0.0)],
        };
        let a = t.jet2(0.2, 0.7);
        let f = |x: f64, y: f64| t.value(x, y);
        let b = ScalarField::jet2(&f, 0.2, 0.7);
        for i in 0..6 {
            assert!(
                (a[i] - b[i]).abs() < 1e-4 * (1.0 + a[i].abs()),
                "{i}: {} vs {}",
                a[i],
                b[i]
            );
        }
    }
}
