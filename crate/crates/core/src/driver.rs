//! Time loop, error norms and convergence rates.

use crate::adapt::{coarsen, refine, AdaptConfig};
use crate::basis::Side;
use crate::error::{Error, Result};
use crate::imex::{imex_step, Explicit, Tableau};
use crate::interp::{default_degree, Convection};
use crate::kdv::{apply_source, dispersion_matrix_1d, FluxVariant1D};
use crate::mesh::SpaceSpec;
use crate::problems::{Equation, Field, ProblemSpec};
use crate::projection::{project_initial, ProjMethod};
use crate::quadrature::gauss_legendre;
use crate::solver::{LinearOperator, SolveMethod};
use crate::space::{to_nodal, Space, State};
use crate::zk::{zk_matrix, FluxVariant2D, ZkKind};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Grid {
    Full(u8),
    Sparse(u8),
    Adaptive { epsilon: f64, max_level: u8 },
}

impl Grid {
    pub fn max_level(&self) -> u8 {
        match *self {
            Grid::Full(n) | Grid::Sparse(n) => n,
            Grid::Adaptive { max_level, .. } => max_level,
        }
    }
}

/// Discretization choices of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Scheme {
    pub k: usize,
    pub grid: Grid,
    /// Hermite interpolation degree; `None` picks the default for k.
    pub m: Option<usize>,
    pub flux_1d: FluxVariant1D,
    pub flux_2d: FluxVariant2D,
    pub solver: SolveMethod,
    pub projection: ProjMethod,
    /// dt = cfl * h^((k+1)/3) on the finest level h unless `dt` is given.
    pub cfl: f64,
    pub dt: Option<f64>,
}

impl Scheme {
    pub fn new(k: usize, grid: Grid) -> Self {
        Scheme {
            k,
            grid,
            m: None,
            flux_1d: FluxVariant1D::default(),
            flux_2d: FluxVariant2D::default(),
            solver: SolveMethod::default(),
            projection: ProjMethod::default(),
            cfl: 0.01,
            dt: None,
        }
    }

    pub fn interp_degree(&self) -> usize {
        self.m.unwrap_or_else(|| default_degree(self.k))
    }
}

/// Operators on one active space.
struct Discretization {
    space: Arc<Space>,
    lin: LinearOperator,
    conv: Option<Convection>,
}

impl Discretization {
    fn new(space: Arc<Space>, problem: &ProblemSpec, scheme: &Scheme) -> Result<Self> {
        let mut mat = match problem.equation {
            Equation::Kdv => dispersion_matrix_1d(&space, scheme.flux_1d)?,
            Equation::Zk => zk_matrix(&space, scheme.flux_2d, ZkKind::Full)?,
            Equation::ZkSimplified => zk_matrix(&space, scheme.flux_2d, ZkKind::Simplified)?,
        };
        if problem.sigma != 1.0 {
            mat.scale(problem.sigma);
        }
        let lin = LinearOperator::new(space.clone(), mat, scheme.solver);
        let conv = if problem.flux.is_zero() { None } else { Some(Convection::new(space.clone(), scheme.interp_degree())?) };
        Ok(Discretization { space, lin, conv })
    }
}

/// A running simulation of one problem with one scheme.
pub struct Simulation {
    pub problem: ProblemSpec,
    pub scheme: Scheme,
    pub adapt: Option<AdaptConfig>,
    pub state: State,
    pub t: f64,
    disc: Arc<Discretization>,
    /// Recently used discretizations; adaptive runs often alternate
    /// between a few key sets.
    cache: Vec<Arc<Discretization>>,
    tab: Tableau,
}

const DISC_CACHE: usize = 4;
const DISC_CACHE_NNZ: usize = 20_000_000;

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation").field("problem", &self.problem.name).field("t", &self.t).field("dof", &self.state.space.dof()).finish()
    }
}

fn initial_field(u0: Field) -> impl Fn(f64, f64, usize) -> f64 + Sync {
    move |x, y, oy| match oy {
        0 => u0(x, y, 0.0),
        // Only the star projection asks for y-derivatives of the initial data.
        _ => {
            let h = 1e-4;
            let d1 = |y: f64| (u0(x, y + h, 0.0) - u0(x, y - h, 0.0)) / (2.0 * h);
            match oy {
                1 => d1(y),
                _ => (d1(y + h) - d1(y - h)) / (2.0 * h),
            }
        }
    }
}

impl Simulation {
    pub fn new(problem: ProblemSpec, scheme: Scheme) -> Result<Self> {
        let d = problem.equation.dim();
        let k = scheme.k;
        if k < problem.equation.min_degree() {
            return Err(Error::Config(format!("{} needs k >= {}, got {k}", problem.name, problem.equation.min_degree())));
        }
        let m = scheme.interp_degree();
        if m.is_multiple_of(2) || m < k + 1 {
            return Err(Error::Config(format!("interpolation degree M must be odd and >= k+1, got {m}")));
        }
        let u0 = initial_field(problem.initial.clone());
        let (state, adapt) = match scheme.grid {
            Grid::Full(n) => (project_initial(&u0, &Space::nodal(d, n, k), scheme.projection)?, None),
            Grid::Sparse(n) => {
                let spec = SpaceSpec::sparse(d, n, k);
                (project_initial(&u0, &Space::hier(&spec), scheme.projection)?, None)
            }
            Grid::Adaptive { epsilon, max_level } => {
                let cfg = AdaptConfig::new(epsilon, max_level)?;
                let proj = scheme.projection;
                let st = crate::adapt::adapt_initial(&|s| project_initial(&u0, s, proj), d, k, &cfg)?;
                (st, Some(cfg))
            }
        };
        let disc = Arc::new(Discretization::new(state.space.clone(), &problem, &scheme)?);
        Ok(Simulation { problem, scheme, adapt, state, t: 0.0, disc, cache: Vec::new(), tab: Tableau::ssp3_433() })
    }

    /// Step size from the policy, before the convection cap. The power
    /// balances third-order time error against order k+1 in space.
    pub fn base_dt(&self) -> f64 {
        let h = (-(self.scheme.grid.max_level() as f64)).exp2();
        self.scheme.dt.unwrap_or(self.scheme.cfl * h.powf((self.scheme.k + 1) as f64 / 3.0))
    }

    /// Global Lax-Friedrichs coefficient of the current state.
    pub fn speed(&self) -> Result<f64> {
        match &self.disc.conv {
            Some(c) => c.max_speed(&self.problem.flux, &self.state),
            None => Ok(0.0),
        }
    }

    fn rebuild(&mut self, space: &Arc<Space>) -> Result<()> {
        if Arc::ptr_eq(space, &self.disc.space) || space.keys == self.disc.space.keys {
            return Ok(());
        }
        let d = match self.cache.iter().position(|d| d.space.keys == space.keys) {
            Some(i) => self.cache.remove(i),
            None => Arc::new(Discretization::new(space.clone(), &self.problem, &self.scheme)?),
        };
        let old = std::mem::replace(&mut self.disc, d);
        self.cache.push(old);
        // Large operators carry large factorizations; keep few of them.
        let weight = |d: &Arc<Discretization>| d.lin.mat.nnz();
        while self.cache.len() > DISC_CACHE || (self.cache.len() > 1 && self.cache.iter().map(weight).sum::<usize>() > DISC_CACHE_NNZ) {
            self.cache.remove(0);
        }
        Ok(())
    }

    fn advance(&self, u: &State, t: f64, dt: f64, alpha: f64) -> Result<State> {
        let disc = &self.disc;
        let space = &disc.space;
        let flux = &self.problem.flux;
        let source: Option<&Field> = self.problem.source.as_ref();
        let mut f = |v: &[f64], tt: f64| -> Result<Vec<f64>> {
            let mut out = match &disc.conv {
                Some(c) => c.apply(flux, &State { space: space.clone(), coeffs: v.to_vec() }, alpha)?,
                None => vec![0.0; v.len()],
            };
            if let Some(s) = source {
                let p = apply_source(&**s, tt, space);
                out.iter_mut().zip(p).for_each(|(o, q)| *o += q);
            }
            Ok(out)
        };
        let exp: Explicit = if disc.conv.is_none() && source.is_none() { None } else { Some(&mut f) };
        let coeffs = imex_step(&u.coeffs, t, dt, &disc.lin, exp, &self.tab)?;
        Ok(State { space: space.clone(), coeffs })
    }

    /// One step of size dt. Adaptive runs refine on a predicted state,
    /// redo the step if the space grew and coarsen afterwards.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let alpha = self.speed()?;
        let mut next = self.advance(&self.state, self.t, dt, alpha)?;
        if let Some(cfg) = self.adapt {
            let r = refine(&next, &cfg);
            if r.space.keys.len() != next.space.keys.len() {
                let u = self.state.transfer(&r.space);
                self.rebuild(&r.space)?;
                next = self.advance(&u, self.t, dt, alpha)?;
            }
            next = coarsen(&next, &cfg);
            self.rebuild(&next.space)?;
        }
        if next.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Solve(format!("non-finite state at t = {}", self.t + dt)));
        }
        self.state = next;
        self.t += dt;
        Ok(())
    }

    /// Advances to t_final, calling `observe` after every step. The step is
    /// uniform unless the convection bound cfl * h / alpha is smaller.
    pub fn run_to(&mut self, t_final: f64, observe: &mut dyn FnMut(&Simulation)) -> Result<()> {
        let span = t_final - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        let base = self.base_dt();
        let dt0 = span / (span / base).ceil().max(1.0);
        let h = (-(self.scheme.grid.max_level() as f64)).exp2();
        while t_final - self.t > 1e-12 * t_final.abs().max(1.0) {
            let mut dt = dt0.min(t_final - self.t);
            if self.scheme.dt.is_none() {
                let a = self.speed()?;
                if a > 0.0 {
                    dt = dt.min(self.scheme.cfl * h / a);
                }
            }
            self.step(dt)?;
            observe(self);
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.state.space.dof()
    }

    pub fn errors(&self) -> Option<Errors> {
        let exact = self.problem.exact.as_ref()?;
        let t = self.t;
        Some(compute_errors(&self.state, &|x, y| exact(x, y, t)))
    }
}

/// L1, L2 and max-norm errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Errors {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Errors against `exact` with k+3 Gauss points per finest cell and the
/// max norm over 8 equispaced samples per finest cell and dimension. The
/// samples include both cell edges, taken from inside the cell, since DG
/// errors peak there.
pub fn compute_errors(state: &State, exact: &(dyn Fn(f64, f64) -> f64 + Sync)) -> Errors {
    let sp = &state.space;
    let d = sp.d;
    let lv = sp.active_levels();
    let grid = to_nodal(state, lv).expect("state levels are valid");
    let (g, w) = gauss_legendre(sp.k + 3);
    let ns = 8;
    let samples: Vec<(f64, Side)> = (0..ns).map(|i| (i as f64 / (ns - 1) as f64, if i == ns - 1 { Side::Minus } else { Side::Plus })).collect();
    let [mx, my] = grid.cells();
    let (hx, hy) = ((-(lv[0] as f64)).exp2(), if d == 2 { (-(lv[1] as f64)).exp2() } else { 1.0 });
    let qy: Vec<(f64, f64)> = if d == 2 { g.iter().zip(&w).map(|(a, b)| (0.5 * (a + 1.0), 0.5 * b)).collect() } else { vec![(0.5, 1.0)] };
    let sy: Vec<(f64, Side)> = if d == 2 { samples.clone() } else { vec![(0.5, Side::Plus)] };
    let side = [Side::Plus, Side::Plus];
    let per_cell: Vec<[f64; 3]> = (0..mx * my)
        .into_par_iter()
        .map(|c| {
            let (cx, cy) = (c / my, c % my);
            let (x0, y0) = (cx as f64 * hx, cy as f64 * hy);
            let mut acc = [0.0, 0.0, 0.0];
            for (a, wa) in g.iter().zip(&w) {
                let x = x0 + 0.5 * (a + 1.0) * hx;
                for (b, wb) in &qy {
                    let y = y0 + b * hy;
                    let e = (grid.eval([x, y], [0, 0], side) - exact(x, y)).abs();
                    let wt = 0.5 * wa * wb * hx * hy;
                    acc[0] += wt * e;
                    acc[1] += wt * e * e;
                }
            }
            for &(sx, kx) in &samples {
                for &(s2, ky) in &sy {
                    let (x, y) = (x0 + sx * hx, y0 + s2 * hy);
                    acc[2] = acc[2].max((grid.eval([x, y], [0, 0], [kx, ky]) - exact(x, y)).abs());
                }
            }
            acc
        })
        .collect();
    let l1 = per_cell.iter().map(|a| a[0]).sum();
    let l2 = per_cell.iter().map(|a| a[1]).sum::<f64>().sqrt();
    let linf = per_cell.iter().map(|a| a[2]).fold(0.0, f64::max);
    Errors { l1, l2, linf }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    #[default]
    Mesh,
    Epsilon,
    Dof,
}

/// Rates between consecutive entries; the first entry and entries with a
/// non-positive error get `None`. `params` are the refinement parameters
/// (used by the epsilon mode) and `dof` the degrees of freedom.
pub fn convergence_rates(errors: &[f64], params: &[f64], dof: &[usize], mode: RateMode) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for l in 1..errors.len() {
        let (e0, e1) = (errors[l - 1], errors[l]);
        if !(e0 > 0.0 && e1 > 0.0) {
            out.push(None);
            continue;
        }
        let r = match mode {
            RateMode::Mesh => Some((e0 / e1).log2()),
            RateMode::Epsilon => params.get(l).zip(params.get(l - 1)).map(|(p1, p0)| (e0 / e1).ln() / (p0 / p1).ln()),
            RateMode::Dof => dof.get(l).zip(dof.get(l - 1)).map(|(d1, d0)| (e0 / e1).ln() / (*d1 as f64 / *d0 as f64).ln()),
        };
        out.push(r.filter(|v| v.is_finite()));
    }
    out.truncate(errors.len());
    out
}
