//! Discrete moment map flow `dτ/dt = J δ*_τ μ^r(τ)`, integrated with the
//! explicit Euler method and optional energy backtracking.

use serde::Serialize;

use crate::discrete_ops::{delta_star, energy, moment_map_r};
use crate::error::{Error, Result};
use crate::mesh_core::{vertex_inner, Mesh};

/// Coordinates above this magnitude are treated as a blow-up.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Initial step; `None` means `c₀/N²` with `c₀ = 0.5`.
    pub dt0: Option<f64>,
    pub max_steps: usize,
    /// Target for `max |μ^r|`.
    pub tol_density: f64,
    /// Halve the step whenever it would increase `‖μ^r‖²`.
    pub adaptive: bool,
    pub backtrack_factor: f64,
    /// Maximum number of step reductions for a single step.
    pub max_backtracks: usize,
    /// Growth factor applied after `grow_after` consecutive accepted steps.
    pub growth: f64,
    pub grow_after: usize,
    /// Record a trace row every `log_every` steps (the last step is always recorded).
    pub log_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt0: None,
            max_steps: 100_000,
            tol_density: 1e-8,
            adaptive: true,
            backtrack_factor: 0.5,
            max_backtracks: 30,
            growth: 1.1,
            grow_after: 10,
            log_every: 1,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt0 {
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument("dt0 must be positive".into()));
            }
        }
        if !(self.tol_density >= 0.0) {
            return Err(Error::InvalidArgument("tolerance must be non-negative".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidArgument("backtrack factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    MaxSteps,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub energy: f64,
    pub max_density: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub steps: usize,
    pub trace: Vec<TraceRow>,
    pub final_energy: f64,
    pub final_max_density: f64,
    /// `‖δ*μ^r‖` at the final mesh (vanishes at fixed points of the flow).
    pub final_gradient_norm: f64,
    pub termination: Termination,
}

/// One Euler step `τ + dt·J δ*_τ μ^r(τ)`.
pub fn flow_step(mesh: &Mesh, dt: f64) -> Result<Mesh> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    let field = delta_star(mesh, &moment_map_r(mesh))?.apply_j();
    let next = mesh.add_field(&field, dt)?;
    if !next.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(next)
}

fn gradient_norm(mesh: &Mesh) -> Result<f64> {
    let g = delta_star(mesh, &moment_map_r(mesh))?;
    Ok(vertex_inner(&g, &g)?.sqrt())
}

/// Runs the flow until `max |μ^r| ≤ tol_density`, the step budget is
/// exhausted, or the mesh blows up.
pub fn run_flow(start: &Mesh, cfg: &FlowConfig) -> Result<(Mesh, FlowReport)> {
    cfg.validate()?;
    let n_res = start.grid().resolution() as f64;
    let mut dt = cfg.dt0.unwrap_or(0.5 / (n_res * n_res));
    let mut tau = start.clone();
    let mut e = energy(&tau);
    let mut maxd = moment_map_r(&tau).max_abs();
    let mut trace = vec![TraceRow {
        step: 0,
        energy: e,
        max_density: maxd,
        dt,
    }];
    let mut streak = 0usize;
    let mut steps = 0usize;
    let mut termination = Termination::MaxSteps;

    if maxd <= cfg.tol_density {
        termination = Termination::Converged;
    }
    while termination == Termination::MaxSteps && steps < cfg.max_steps {
        let mut backtracks = 0usize;
        let accepted = loop {
            let candidate = match flow_step(&tau, dt) {
                Ok(c) => c,
                Err(Error::NonFinite) if cfg.adaptive && backtracks < cfg.max_backtracks => {
                    dt *= cfg.backtrack_factor;
                    backtracks += 1;
                    continue;
                }
                Err(Error::NonFinite) => break None,
                Err(other) => return Err(other),
            };
            let ec = energy(&candidate);
            if !cfg.adaptive || ec <= e {
                break Some((candidate, ec));
            }
            if backtracks >= cfg.max_backtracks {
                break None;
            }
            dt *= cfg.backtrack_factor;
            backtracks += 1;
            streak = 0;
        };
        let Some((next, en)) = accepted else {
            termination = Termination::Diverged;
            break;
        };
        tau = next;
        e = en;
        steps += 1;
        maxd = moment_map_r(&tau).max_abs();
        if maxd <= cfg.tol_density {
            termination = Termination::Converged;
        } else if !e.is_finite() || tau.as_slice().iter().any(|x| x.abs() > DIVERGENCE_BOUND) {
            termination = Termination::Diverged;
        }
        if steps.is_multiple_of(cfg.log_every.max(1)) || termination != Termination::MaxSteps || steps == cfg.max_steps
        {
            trace.push(TraceRow {
                step: steps,
                energy: e,
                max_density: maxd,
                dt,
            });
        }
        if backtracks == 0 {
            streak += 1;
            if cfg.adaptive && streak >= cfg.grow_after {
                dt *= cfg.growth;
                streak = 0;
            }
        }
    }
    let report = FlowReport {
        steps,
        final_energy: e,
        final_max_density: maxd,
        final_gradient_norm: gradient_norm(&tau)?,
        trace,
        termination,
    };
    log::info!(
        "flow: {:?} after {} steps, max density {:e}",
        report.termination,
        steps,
        maxd
    );
    Ok((tau, report))
}
