//! Two-dimensional UWDG discretization of
//! u_t + f(u)_x + u_xxx + u_xyy = s, and of the simplified u_t + u_xyy = 0.
//!
//! The operator is a sum of tensor products of 1D forms. The pointwise
//! evaluators below (cellwise form, edge/vertex form) are independent
//! assembly paths used to cross-check it. Jumps are [w] = w+ - w-.

use crate::basis::Side;
use crate::error::{Error, Result};
use crate::forms::{BlockCsr, FormKind, Term};
use crate::kdv::{assemble_on, dispersion_terms_x, FluxVariant1D};
use crate::quadrature::gauss_legendre;
use crate::solver::{LinearOperator, SolveMethod};
use crate::space::{NodalGrid, Space, State};
use std::sync::Arc;

use Side::{Minus as M, Plus as P};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxVariant2D {
    #[default]
    Main,
    Alt,
}

/// Which dispersive terms are present.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZkKind {
    Full,
    /// u_xyy only.
    Simplified,
}

pub fn zk_terms(variant: FluxVariant2D, kind: ZkKind) -> Vec<Term> {
    let (v0, v1, v2) = (FormKind::Vol(0), FormKind::Vol(1), FormKind::Vol(2));
    let j = FormKind::Jmp;
    let mut t = Vec::new();
    if kind == ZkKind::Full {
        let vx = match variant {
            FluxVariant2D::Main => FluxVariant1D::A,
            FluxVariant2D::Alt => FluxVariant1D::B,
        };
        t.extend(dispersion_terms_x(vx).into_iter().map(|(c, x)| Term::new(c, x, v0)));
    }
    t.push(Term::new(1.0, v1, v2));
    t.push(Term::new(1.0, j(0, P, 0), v2));
    match variant {
        FluxVariant2D::Main => {
            t.push(Term::new(-1.0, v1, j(1, P, 0)));
            t.push(Term::new(-1.0, j(0, M, 0), j(1, P, 0)));
            t.push(Term::new(1.0, j(0, P, 0), j(0, M, 1)));
            t.push(Term::new(1.0, v1, j(0, M, 1)));
        }
        FluxVariant2D::Alt => {
            t.push(Term::new(-1.0, v1, j(1, M, 0)));
            t.push(Term::new(-1.0, j(0, M, 0), j(1, M, 0)));
            t.push(Term::new(1.0, j(0, P, 0), j(0, P, 1)));
            t.push(Term::new(1.0, v1, j(0, P, 1)));
        }
    }
    t
}

pub fn zk_matrix(space: &Space, variant: FluxVariant2D, kind: ZkKind) -> Result<BlockCsr> {
    if space.d != 2 {
        return Err(Error::Config("the ZK operator needs a 2D space".into()));
    }
    let kmin = if kind == ZkKind::Full { 2 } else { 1 };
    if space.k < kmin {
        return Err(Error::Config(format!("this ZK operator needs k >= {kmin}, got {}", space.k)));
    }
    Ok(assemble_on(space, &zk_terms(variant, kind)))
}

pub fn assemble_zk_linear(space: &Arc<Space>, variant: FluxVariant2D, kind: ZkKind, method: SolveMethod) -> Result<LinearOperator> {
    Ok(LinearOperator::new(space.clone(), zk_matrix(space, variant, kind)?, method))
}

/// Piecewise smooth field with one-sided derivative traces.
pub trait Field2: Sync {
    fn at(&self, p: [f64; 2], order: [usize; 2], side: [Side; 2]) -> f64;
}

impl Field2 for State {
    fn at(&self, p: [f64; 2], order: [usize; 2], side: [Side; 2]) -> f64 {
        self.eval(p, order, side)
    }
}

impl Field2 for NodalGrid {
    fn at(&self, p: [f64; 2], order: [usize; 2], side: [Side; 2]) -> f64 {
        self.eval(p, order, side)
    }
}

pub struct FnField<F: Fn([f64; 2], [usize; 2], [Side; 2]) -> f64 + Sync>(pub F);

impl<F: Fn([f64; 2], [usize; 2], [Side; 2]) -> f64 + Sync> Field2 for FnField<F> {
    fn at(&self, p: [f64; 2], order: [usize; 2], side: [Side; 2]) -> f64 {
        (self.0)(p, order, side)
    }
}

/// {[v]}_p = -v(x-,y-) - v(x+,y+) + v(x-,y+) + v(x+,y-) for the given
/// derivative orders.
pub fn vertex_jump(v: &dyn Field2, p: [f64; 2], order: [usize; 2]) -> f64 {
    -v.at(p, order, [M, M]) - v.at(p, order, [P, P]) + v.at(p, order, [M, P]) + v.at(p, order, [P, M])
}

/// Corner values ordered (--, ++, -+, +-) combined as in [`vertex_jump`].
pub fn vertex_jump_values(mm: f64, pp: f64, mp: f64, pm: f64) -> f64 {
    -mm - pp + mp + pm
}

fn gauss8() -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(8)
}

/// int over [a, b] of g by 8-point Gauss.
fn line(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss8();
    let h = 0.5 * (b - a);
    x.iter().zip(&w).map(|(s, wt)| wt * h * g(a + h * (s + 1.0))).sum()
}

fn cell_integral(x0: f64, x1: f64, y0: f64, y1: f64, g: impl Fn(f64, f64) -> f64) -> f64 {
    line(x0, x1, |x| line(y0, y1, |y| g(x, y)))
}

/// The cellwise bilinear form H_ij(u, v) of the simplified scheme on cell
/// (i, j) of the uniform grid with 2^n cells per dimension.
pub fn bilinear_hij(u: &dyn Field2, v: &dyn Field2, n: u8, i: u32, j: u32) -> f64 {
    let h = (-(n as f64)).exp2();
    let (xl, xr, yb, yt) = (i as f64 * h, (i + 1) as f64 * h, j as f64 * h, (j + 1) as f64 * h);
    let mut s = cell_integral(xl, xr, yb, yt, |x, y| u.at([x, y], [0, 0], [P, P]) * v.at([x, y], [1, 2], [P, P]));
    s += line(xl, xr, |x| {
        u.at([x, yt], [0, 1], [P, P]) * v.at([x, yt], [1, 0], [P, M]) - u.at([x, yb], [0, 1], [P, P]) * v.at([x, yb], [1, 0], [P, P])
    });
    s += -u.at([xr, yt], [0, 1], [M, P]) * v.at([xr, yt], [0, 0], [M, M]) + u.at([xl, yt], [0, 1], [M, P]) * v.at([xl, yt], [0, 0], [P, M]);
    s += u.at([xr, yb], [0, 1], [M, P]) * v.at([xr, yb], [0, 0], [M, P]) - u.at([xl, yb], [0, 1], [M, P]) * v.at([xl, yb], [0, 0], [P, P]);
    s -= line(yb, yt, |y| {
        u.at([xr, y], [0, 0], [P, P]) * v.at([xr, y], [0, 2], [M, P]) - u.at([xl, y], [0, 0], [P, P]) * v.at([xl, y], [0, 2], [P, P])
    });
    s += u.at([xr, yt], [0, 0], [P, M]) * v.at([xr, yt], [0, 1], [M, M]) - u.at([xr, yb], [0, 0], [P, M]) * v.at([xr, yb], [0, 1], [M, P]);
    s += -u.at([xl, yt], [0, 0], [P, M]) * v.at([xl, yt], [0, 1], [P, M]) + u.at([xl, yb], [0, 0], [P, M]) * v.at([xl, yb], [0, 1], [P, P]);
    s -= line(xl, xr, |x| {
        u.at([x, yt], [0, 0], [P, M]) * v.at([x, yt], [1, 1], [P, M]) - u.at([x, yb], [0, 0], [P, M]) * v.at([x, yb], [1, 1], [P, P])
    });
    s
}

/// The u_xxx part of the cellwise scheme on cell (i, j), main fluxes.
fn cell_xxx(u: &dyn Field2, v: &dyn Field2, n: u8, i: u32, j: u32) -> f64 {
    let h = (-(n as f64)).exp2();
    let (xl, xr, yb, yt) = (i as f64 * h, (i + 1) as f64 * h, j as f64 * h, (j + 1) as f64 * h);
    let mut s = cell_integral(xl, xr, yb, yt, |x, y| u.at([x, y], [0, 0], [P, P]) * v.at([x, y], [3, 0], [P, P]));
    s -= line(yb, yt, |y| u.at([xr, y], [2, 0], [P, P]) * v.at([xr, y], [0, 0], [M, P]) - u.at([xl, y], [2, 0], [P, P]) * v.at([xl, y], [0, 0], [P, P]));
    s += line(yb, yt, |y| u.at([xr, y], [1, 0], [P, P]) * v.at([xr, y], [1, 0], [M, P]) - u.at([xl, y], [1, 0], [P, P]) * v.at([xl, y], [1, 0], [P, P]));
    s -= line(yb, yt, |y| u.at([xr, y], [0, 0], [M, P]) * v.at([xr, y], [2, 0], [M, P]) - u.at([xl, y], [0, 0], [M, P]) * v.at([xl, y], [2, 0], [P, P]));
    s
}

/// The cellwise (elementwise) scheme with main fluxes summed over cells.
pub fn elementwise_form(u: &dyn Field2, v: &dyn Field2, n: u8, kind: ZkKind) -> f64 {
    let m = 1u32 << n;
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += bilinear_hij(u, v, n, i, j);
            if kind == ZkKind::Full {
                s += cell_xxx(u, v, n, i, j);
            }
        }
    }
    s
}

/// The edge/vertex-summed scheme on the uniform grid of level n.
pub fn edge_vertex_form(u: &dyn Field2, v: &dyn Field2, n: u8, variant: FluxVariant2D, kind: ZkKind) -> f64 {
    let m = 1u32 << n;
    let h = (-(n as f64)).exp2();
    let main = variant == FluxVariant2D::Main;
    let full = kind == ZkKind::Full;
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            let (x0, y0) = (i as f64 * h, j as f64 * h);
            s += cell_integral(x0, x0 + h, y0, y0 + h, |x, y| {
                let w = v.at([x, y], [1, 2], [P, P]) + if full { v.at([x, y], [3, 0], [P, P]) } else { 0.0 };
                u.at([x, y], [0, 0], [P, P]) * w
            });
        }
    }
    let jx = |f: &dyn Field2, x: f64, y: f64, o: [usize; 2]| f.at([x, y], o, [P, P]) - f.at([x, y], o, [M, P]);
    let jy = |f: &dyn Field2, x: f64, y: f64, o: [usize; 2]| f.at([x, y], o, [P, P]) - f.at([x, y], o, [P, M]);
    // Edges normal to x.
    for i in 0..m {
        let xe = i as f64 * h;
        for j in 0..m {
            s += line(j as f64 * h, (j + 1) as f64 * h, |y| {
                let mut g = u.at([xe, y], [0, 0], [P, P]) * jx(v, xe, y, [0, 2]);
                if full {
                    let (sxx, shat) = if main { (P, M) } else { (M, P) };
                    g += u.at([xe, y], [2, 0], [sxx, P]) * jx(v, xe, y, [0, 0]);
                    g -= u.at([xe, y], [1, 0], [P, P]) * jx(v, xe, y, [1, 0]);
                    g += u.at([xe, y], [0, 0], [shat, P]) * jx(v, xe, y, [2, 0]);
                }
                g
            });
        }
    }
    // Edges normal to y.
    let (sy, shat) = if main { (P, M) } else { (M, P) };
    for j in 0..m {
        let ye = j as f64 * h;
        for i in 0..m {
            s -= line(i as f64 * h, (i + 1) as f64 * h, |x| {
                u.at([x, ye], [0, 1], [P, sy]) * jy(v, x, ye, [1, 0]) - u.at([x, ye], [0, 0], [P, shat]) * jy(v, x, ye, [1, 1])
            });
        }
    }
    // Vertices.
    let (cy, ct) = if main { ([M, P], [P, M]) } else { ([M, M], [P, P]) };
    for i in 0..m {
        for j in 0..m {
            let p = [i as f64 * h, j as f64 * h];
            s += u.at(p, [0, 1], cy) * vertex_jump(v, p, [0, 0]) - u.at(p, [0, 0], ct) * vertex_jump(v, p, [0, 1]);
        }
    }
    s
}

/// 1/2 sum over edges normal to x of int [u_x]^2 + [u_y]^2 (only [u_y]^2
/// for the simplified operator).
pub fn jump_dissipation_2d(u: &dyn Field2, n: u8, kind: ZkKind) -> f64 {
    let m = 1u32 << n;
    let h = (-(n as f64)).exp2();
    let mut s = 0.0;
    for i in 0..m {
        let xe = i as f64 * h;
        for j in 0..m {
            s += line(j as f64 * h, (j + 1) as f64 * h, |y| {
                let jump = |o: [usize; 2]| u.at([xe, y], o, [P, P]) - u.at([xe, y], o, [M, P]);
                let mut g = jump([0, 1]).powi(2);
                if kind == ZkKind::Full {
                    g += jump([1, 0]).powi(2);
                }
                g
            });
        }
    }
    0.5 * s
}
