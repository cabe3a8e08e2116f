//! Hermite interpolation of nonlinear fluxes, I_h[g(u)].
//!
//! On hierarchical spaces the interpolant uses the hierarchical Hermite
//! family on the active keys and the surpluses are found by one sweep per
//! dimension along ancestor chains (valid because key sets are downward
//! closed). On uniform cellwise spaces it is plain cellwise Hermite
//! interpolation. Jets of u at the nodes are one-sided traces from the
//! owning cell of the finest uniform grid.

use crate::basis::{legendre_jet, Family, FamilyKind, Side};
use crate::error::{Error, Result};
use crate::forms::{assemble, BlockCsr, FormKind, KeySide, Term};
use crate::space::{family, to_nodal, NodalGrid, Repr, Space, State};
use rayon::prelude::*;
use std::sync::Arc;

/// Scalar flux with derivatives.
pub trait Flux: Sync {
    /// [g(u), g'(u), ..., g^(n)(u)]
    fn jet(&self, u: f64, n: usize) -> Vec<f64>;
}

/// Polynomial flux sum_i c_i u^i.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFlux(pub Vec<f64>);

impl PolyFlux {
    /// u^2 / 2
    pub fn burgers() -> Self {
        PolyFlux(vec![0.0, 0.0, 0.5])
    }

    pub fn zero() -> Self {
        PolyFlux(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }
}

impl Flux for PolyFlux {
    fn jet(&self, u: f64, n: usize) -> Vec<f64> {
        let mut c = self.0.clone();
        (0..=n)
            .map(|_| {
                let v = c.iter().rev().fold(0.0, |acc, a| acc * u + a);
                c = if c.len() > 1 { c.iter().enumerate().skip(1).map(|(i, a)| i as f64 * a).collect() } else { Vec::new() };
                v
            })
            .collect()
    }
}

/// Flux from a closure (u, order) -> g^(order)(u).
pub struct FnFlux<F: Fn(f64, usize) -> f64 + Sync>(pub F);

impl<F: Fn(f64, usize) -> f64 + Sync> Flux for FnFlux<F> {
    fn jet(&self, u: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|o| (self.0)(u, o)).collect()
    }
}

/// Interpolation degree used for DG degree k.
pub fn default_degree(k: usize) -> usize {
    if k <= 2 {
        3
    } else {
        5
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Taylor-jet arithmetic truncated to x-degree rx and y-degree ry.
fn jet_mul(a: &[f64], b: &[f64], rx: usize, ry: usize) -> Vec<f64> {
    let w = ry + 1;
    let mut out = vec![0.0; (rx + 1) * w];
    for i in 0..=rx {
        for j in 0..=ry {
            let av = a[i * w + j];
            if av == 0.0 {
                continue;
            }
            for p in 0..=rx - i {
                for q in 0..=ry - j {
                    out[(i + p) * w + j + q] += av * b[p * w + q];
                }
            }
        }
    }
    out
}

/// Derivatives d^a_x d^b_y g(u) from derivatives of u, both laid out [a][b].
pub fn compose_jet(g: &dyn Flux, du: &[f64], rx: usize, ry: usize) -> Vec<f64> {
    let w = ry + 1;
    let taylor: Vec<f64> = (0..du.len()).map(|t| du[t] / (factorial(t / w) * factorial(t % w))).collect();
    let mut delta = taylor.clone();
    delta[0] = 0.0;
    let nmax = rx + ry;
    let gj = g.jet(taylor[0], nmax);
    let mut out = vec![0.0; du.len()];
    let mut pow = vec![0.0; du.len()];
    pow[0] = 1.0;
    for (n, gn) in gj.iter().enumerate() {
        let c = gn / factorial(n);
        out.iter_mut().zip(&pow).for_each(|(o, p)| *o += c * p);
        if n < nmax {
            pow = jet_mul(&pow, &delta, rx, ry);
        }
    }
    (0..out.len()).map(|t| out[t] * factorial(t / w) * factorial(t % w)).collect()
}

impl NodalGrid {
    /// Derivatives d^a_x d^b_y (a <= rx, b <= ry) at a point from the given
    /// sides, laid out [a][b].
    pub fn jet(&self, p: [f64; 2], side: [Side; 2], rx: usize, ry: usize) -> Vec<f64> {
        let (cx, sx) = Self::locate(p[0], side[0], self.levels[0]);
        let (cy, sy) = Self::locate(p[1], side[1], self.levels[1]);
        let tx = legendre_jet(self.npf[0] - 1, sx, rx);
        let ty = legendre_jet(self.npf[1] - 1, sy, ry);
        let norm = (self.levels[0] as f64 / 2.0).exp2() * if self.npf[1] > 1 { (self.levels[1] as f64 / 2.0).exp2() } else { 1.0 };
        let dx = 2.0 * (self.levels[0] as f64).exp2();
        let dy = 2.0 * (self.levels[1] as f64).exp2();
        let b = self.block(cx, cy);
        let mut out = vec![0.0; (rx + 1) * (ry + 1)];
        for a in 0..=rx {
            for c in 0..=ry {
                if self.npf[1] == 1 && c > 0 {
                    continue;
                }
                let mut acc = 0.0;
                for ix in 0..self.npf[0] {
                    for iy in 0..self.npf[1] {
                        acc += b[ix * self.npf[1] + iy] * tx[a][ix] * ty[c][iy];
                    }
                }
                out[a * (ry + 1) + c] = acc * norm * dx.powi(a as i32) * dy.powi(c as i32);
            }
        }
        out
    }
}

/// Ancestor evaluations per element: (ancestor, [i_own][j_anc]) with the
/// ancestor's j-th function at the element's i-th functional.
fn ancestor_table(f: &Family) -> Vec<Vec<(usize, Vec<f64>)>> {
    let np = f.npf;
    (0..f.len())
        .map(|e| {
            let mut out = Vec::new();
            let mut cur = e;
            while cur != 0 {
                let (l, j) = crate::mesh::elem_level(cur);
                cur = if l == 1 { 0 } else { crate::mesh::elem_index(l - 1, j / 2) };
                let a = &f.elems[cur];
                let mut m = vec![0.0; np * np];
                for (i, fun) in f.elems[e].functionals.iter().enumerate() {
                    for (j, phi) in a.funcs.iter().enumerate() {
                        m[i * np + j] = phi.eval(fun.x, fun.side, fun.order);
                    }
                }
                out.push((cur, m));
            }
            out
        })
        .collect()
}

/// The interpolation operator on an active space.
pub struct InterpOperator {
    pub m: usize,
    pub space: Arc<Space>,
    pub hx: Arc<Family>,
    pub hy: Arc<Family>,
    anc: [Vec<Vec<(usize, Vec<f64>)>>; 2],
    mass: BlockCsr,
}

impl std::fmt::Debug for InterpOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InterpOperator").field("m", &self.m).field("dof", &self.space.dof()).finish()
    }
}

impl InterpOperator {
    pub fn new(space: Arc<Space>, m: usize) -> Result<Self> {
        if m < space.k + 1 {
            return Err(Error::Config(format!("interpolation degree {m} must be at least k+1 = {}", space.k + 1)));
        }
        if m.is_multiple_of(2) {
            return Err(Error::Config(format!("Hermite interpolation degree must be odd, got {m}")));
        }
        let kind = match space.repr {
            Repr::Hier => FamilyKind::Hermite,
            Repr::Nodal => FamilyKind::HermiteNodal,
        };
        let hx = family(kind, m, space.fx.level);
        let hy = if space.d == 2 { family(kind, m, space.fy.level) } else { family(FamilyKind::Constant, 0, 0) };
        let anc = if space.repr == Repr::Hier {
            [ancestor_table(&hx), if space.d == 2 { ancestor_table(&hy) } else { vec![Vec::new()] }]
        } else {
            [Vec::new(), Vec::new()]
        };
        let mass = assemble(
            &KeySide { fx: &space.fx, fy: &space.fy, keys: &space.keys, index: &space.index },
            &KeySide { fx: &hx, fy: &hy, keys: &space.keys, index: &space.index },
            &[Term::new(1.0, FormKind::Vol(0), FormKind::Vol(0))],
        );
        Ok(InterpOperator { m, space, hx, hy, anc, mass })
    }

    pub fn npf(&self) -> usize {
        self.hx.npf * self.hy.npf
    }

    fn r(&self) -> [usize; 2] {
        let r = (self.m - 1) / 2;
        [r, if self.space.d == 2 { r } else { 0 }]
    }

    /// Cellwise form on the finest active levels; exact for the jets since
    /// u is piecewise polynomial there.
    fn grid(&self, u: &State) -> Result<NodalGrid> {
        let lv = self.space.active_levels();
        to_nodal(u, [lv[0], if self.space.d == 2 { lv[1] } else { 0 }])
    }

    /// Nodal data of g(u) for every (key, functional), and max |g'(u)| over
    /// the node values.
    pub fn node_data(&self, g: &dyn Flux, grid: &NodalGrid) -> (Vec<f64>, f64) {
        let [rx, ry] = self.r();
        let (nx, ny) = (self.hx.npf, self.hy.npf);
        let rows: Vec<(Vec<f64>, f64)> = self
            .space
            .keys
            .par_iter()
            .map(|&[ex, ey]| {
                let (ex, ey) = (&self.hx.elems[ex as usize], &self.hy.elems[ey as usize]);
                let mut out = vec![0.0; nx * ny];
                let mut speed: f64 = 0.0;
                let mut cache: Vec<(([u64; 2], [Side; 2]), Vec<f64>)> = Vec::new();
                for (ix, fx) in ex.functionals.iter().enumerate() {
                    for (iy, fy) in ey.functionals.iter().enumerate() {
                        let key = ([fx.x.to_bits(), fy.x.to_bits()], [fx.side, fy.side]);
                        let jet = match cache.iter().find(|c| c.0 == key) {
                            Some(c) => c.1.clone(),
                            None => {
                                let du = grid.jet([fx.x, fy.x], [fx.side, fy.side], rx, ry);
                                speed = speed.max(g.jet(du[0], 1)[1].abs());
                                let gj = compose_jet(g, &du, rx, ry);
                                cache.push((key, gj.clone()));
                                gj
                            }
                        };
                        out[ix * ny + iy] = jet[fx.order * (ry + 1) + fy.order];
                    }
                }
                (out, speed)
            })
            .collect();
        let speed = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
        (rows.into_iter().flat_map(|r| r.0).collect(), speed)
    }

    /// Hierarchical surpluses from nodal data (identity on cellwise spaces).
    pub fn surpluses(&self, mut d: Vec<f64>) -> Vec<f64> {
        if self.space.repr == Repr::Nodal {
            return d;
        }
        let (nx, ny) = (self.hx.npf, self.hy.npf);
        let b = nx * ny;
        let keys = &self.space.keys;
        let index = &self.space.index;
        for (k, &[ex, ey]) in keys.iter().enumerate() {
            for (a, m) in &self.anc[0][ex as usize] {
                let src = index[&[*a as u32, ey]];
                for ix in 0..nx {
                    for jx in 0..nx {
                        let w = m[ix * nx + jx];
                        if w == 0.0 {
                            continue;
                        }
                        for iy in 0..ny {
                            d[k * b + ix * ny + iy] -= w * d[src * b + jx * ny + iy];
                        }
                    }
                }
            }
        }
        if self.space.d == 2 {
            for (k, &[ex, ey]) in keys.iter().enumerate() {
                for (a, m) in &self.anc[1][ey as usize] {
                    let src = index[&[ex, *a as u32]];
                    for iy in 0..ny {
                        for jy in 0..ny {
                            let w = m[iy * ny + jy];
                            if w == 0.0 {
                                continue;
                            }
                            for ix in 0..nx {
                                d[k * b + ix * ny + iy] -= w * d[src * b + ix * ny + jy];
                            }
                        }
                    }
                }
            }
        }
        d
    }

    /// Hermite coefficients of I_h[g(u)] and max |g'| over the nodes.
    pub fn compose(&self, g: &dyn Flux, u: &State) -> Result<(Vec<f64>, f64)> {
        let grid = self.grid(u)?;
        let (d, speed) = self.node_data(g, &grid);
        Ok((self.surpluses(d), speed))
    }

    /// I_h[g(u)] as a state in the DG basis (L2 projection of the interpolant).
    pub fn interp_compose(&self, g: &dyn Flux, u: &State) -> Result<State> {
        let (alpha, _) = self.compose(g, u)?;
        Ok(State { space: self.space.clone(), coeffs: self.mass.apply(&alpha) })
    }

    /// Evaluates the Hermite interpolant with coefficients alpha at a point.
    pub fn eval(&self, alpha: &[f64], p: [f64; 2], side: [Side; 2]) -> f64 {
        let (nx, ny) = (self.hx.npf, self.hy.npf);
        let mut acc = 0.0;
        for (k, &[ex, ey]) in self.space.keys.iter().enumerate() {
            let (ex, ey) = (&self.hx.elems[ex as usize], &self.hy.elems[ey as usize]);
            if p[0] < ex.support.0 || p[0] > ex.support.1 || p[1] < ey.support.0 || p[1] > ey.support.1 {
                continue;
            }
            for ix in 0..nx {
                let vx = ex.funcs[ix].eval(p[0], side[0], 0);
                if vx == 0.0 {
                    continue;
                }
                for iy in 0..ny {
                    acc += alpha[k * nx * ny + ix * ny + iy] * vx * ey.funcs[iy].eval(p[1], side[1], 0);
                }
            }
        }
        acc
    }

    /// Max |g'(u)| over the interpolation nodes.
    pub fn max_speed(&self, g: &dyn Flux, u: &State) -> Result<f64> {
        let grid = self.grid(u)?;
        let mut speed: f64 = 0.0;
        for &[ex, ey] in &self.space.keys {
            for fx in &self.hx.elems[ex as usize].functionals {
                for fy in &self.hy.elems[ey as usize].functionals {
                    let u0 = grid.jet([fx.x, fy.x], [fx.side, fy.side], 0, 0)[0];
                    speed = speed.max(g.jet(u0, 1)[1].abs());
                }
            }
        }
        Ok(speed)
    }
}

/// Galerkin increments of the x-convection term with a global
/// Lax-Friedrichs flux,
///   int I_h[f] v_x + sum_e ( {I_h[f]} - a [u] ) [v],
/// summed over the edges normal to x, [q] = q+ - q-.
pub struct Convection {
    pub interp: InterpOperator,
    c: BlockCsr,
    jj: BlockCsr,
}

impl std::fmt::Debug for Convection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convection").field("interp", &self.interp).finish()
    }
}

impl Convection {
    pub fn new(space: Arc<Space>, m: usize) -> Result<Self> {
        let interp = InterpOperator::new(space.clone(), m)?;
        let u = KeySide { fx: &space.fx, fy: &space.fy, keys: &space.keys, index: &space.index };
        let h = KeySide { fx: &interp.hx, fy: &interp.hy, keys: &space.keys, index: &space.index };
        let (vol0, vol1) = (FormKind::Vol(0), FormKind::Vol(1));
        let jp = FormKind::Jmp(0, Side::Plus, 0);
        let jm = FormKind::Jmp(0, Side::Minus, 0);
        let c = assemble(&u, &h, &[Term::new(1.0, vol1, vol0), Term::new(0.5, jp, vol0), Term::new(0.5, jm, vol0)]);
        let jj = assemble(&u, &u, &[Term::new(1.0, jp, vol0), Term::new(-1.0, jm, vol0)]);
        Ok(Convection { interp, c, jj })
    }

    /// Increments for flux g with dissipation coefficient a.
    pub fn apply(&self, g: &dyn Flux, u: &State, a: f64) -> Result<Vec<f64>> {
        let (alpha, _) = self.interp.compose(g, u)?;
        let mut out = self.c.apply(&alpha);
        if a != 0.0 {
            self.jj.apply_add(-a, &u.coeffs, &mut out);
        }
        Ok(out)
    }

    pub fn max_speed(&self, g: &dyn Flux, u: &State) -> Result<f64> {
        self.interp.max_speed(g, u)
    }
}
