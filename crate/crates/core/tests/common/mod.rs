//! Independent oracles shared by the integration tests. Each check returns
//! the largest scaled deviation so callers pick their own reporting.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use std::sync::Arc;
use uwdg::basis::Side::{self, Minus as M, Plus as P};
use uwdg::kdv::{dispersion_matrix_1d, jump_dissipation_1d, FluxVariant1D};
use uwdg::mesh::SpaceSpec;
use uwdg::quadrature::gauss_legendre;
use uwdg::space::{Space, State};
use uwdg::zk::{edge_vertex_form, elementwise_form, jump_dissipation_2d, zk_matrix, FluxVariant2D, FnField, ZkKind};

pub fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

/// Per-cell form of the 1D scheme with explicit interface bookkeeping.
pub fn kdv_elementwise(u: &dyn Fn(f64, usize, Side) -> f64, v: &dyn Fn(f64, usize, Side) -> f64, n: u8, var: FluxVariant1D) -> f64 {
    let h = (-(n as f64)).exp2();
    let (g, w) = gauss_legendre(8);
    let (s_hat, s_xx) = match var {
        FluxVariant1D::A => (M, P),
        FluxVariant1D::B => (P, M),
    };
    let mut s = 0.0;
    for i in 0..1u32 << n {
        let (xl, xr) = (i as f64 * h, (i + 1) as f64 * h);
        for (t, wt) in g.iter().zip(&w) {
            let x = xl + 0.5 * h * (t + 1.0);
            s += 0.5 * h * wt * u(x, 0, P) * v(x, 3, P);
        }
        s -= u(xr, 0, s_hat) * v(xr, 2, M) - u(xl, 0, s_hat) * v(xl, 2, P);
        s += u(xr, 1, P) * v(xr, 1, M) - u(xl, 1, P) * v(xl, 1, P);
        s -= u(xr, 2, s_xx) * v(xr, 0, M) - u(xl, 2, s_xx) * v(xl, 0, P);
    }
    s
}

/// Largest entrywise difference between the assembled 1D operator and the
/// cellwise oracle, relative to the largest oracle entry.
pub fn kdv_deviation(sp: &Arc<Space>, var: FluxVariant1D) -> f64 {
    let n = sp.max_level();
    let l = dispersion_matrix_1d(sp, var).unwrap().to_dense();
    let np = sp.npf();
    let f = |key: usize, i: usize| {
        let sp = sp.clone();
        move |x: f64, o: usize, s: Side| sp.eval_basis(key, i, 0, [x, 0.5], [o, 0], [s, P])
    };
    let mut oracle = vec![vec![0.0; sp.dof()]; sp.dof()];
    for a in 0..sp.keys.len() {
        for i in 0..np {
            for b in 0..sp.keys.len() {
                for j in 0..np {
                    oracle[a * np + i][b * np + j] = kdv_elementwise(&f(b, j), &f(a, i), n, var);
                }
            }
        }
    }
    let scale = max_abs(&oracle);
    let mut dev: f64 = 0.0;
    for r in 0..sp.dof() {
        for c in 0..sp.dof() {
            dev = dev.max((l[r][c] - oracle[r][c]).abs() / scale);
        }
    }
    dev
}

pub fn basis_field(sp: &Arc<Space>, key: usize, ix: usize, iy: usize) -> FnField<impl Fn([f64; 2], [usize; 2], [Side; 2]) -> f64 + Sync> {
    let sp = sp.clone();
    FnField(move |p, o, s| sp.eval_basis(key, ix, iy, p, o, s))
}

/// Deviations (operator vs edge/vertex form, edge/vertex vs cellwise form),
/// relative to the largest entry. The cellwise form exists for the main
/// fluxes only; the second value is zero otherwise.
pub fn zk_deviation(sp: &Arc<Space>, kind: ZkKind, variant: FluxVariant2D) -> (f64, f64) {
    let n = sp.max_level();
    let l = zk_matrix(sp, variant, kind).unwrap().to_dense();
    let np = sp.fx.npf;
    let dof = sp.dof();
    let idx = |r: usize| (r / (np * np), (r % (np * np)) / np, r % np);
    let mut ev = vec![vec![0.0; dof]; dof];
    let mut el = vec![vec![0.0; dof]; dof];
    for (r, row) in ev.iter_mut().enumerate() {
        let (a, ix, iy) = idx(r);
        let v = basis_field(sp, a, ix, iy);
        for (c, e) in row.iter_mut().enumerate() {
            let (b, jx, jy) = idx(c);
            let u = basis_field(sp, b, jx, jy);
            *e = edge_vertex_form(&u, &v, n, variant, kind);
            if variant == FluxVariant2D::Main {
                el[r][c] = elementwise_form(&u, &v, n, kind);
            }
        }
    }
    let scale = max_abs(&ev);
    let (mut d1, mut d2): (f64, f64) = (0.0, 0.0);
    for r in 0..dof {
        for c in 0..dof {
            d1 = d1.max((l[r][c] - ev[r][c]).abs() / scale);
            if variant == FluxVariant2D::Main {
                d2 = d2.max((el[r][c] - ev[r][c]).abs() / scale);
            }
        }
    }
    (d1, d2)
}

pub fn random_state(sp: &Arc<Space>, rng: &mut rand::rngs::StdRng) -> State {
    State { space: sp.clone(), coeffs: (0..sp.dof()).map(|_| rng.gen_range(-1.0..1.0)).collect() }
}

fn quad_form(l: &uwdg::forms::BlockCsr, u: &State) -> f64 {
    u.coeffs.iter().zip(l.apply(&u.coeffs)).map(|(a, b)| a * b).sum()
}

/// max |u^T L u + jump terms| / ||u||^2 over `trials` random states on the
/// 1D full grid of level n.
pub fn energy_identity_1d(var: FluxVariant1D, n: u8, k: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let sp = Space::hier(&SpaceSpec::full(1, n, k));
    let l = dispersion_matrix_1d(&sp, var).unwrap();
    (0..trials)
        .map(|_| {
            let u = random_state(&sp, &mut rng);
            (quad_form(&l, &u) + 0.5 * jump_dissipation_1d(&u)).abs() / u.energy()
        })
        .fold(0.0, f64::max)
}

/// As [`energy_identity_1d`] for the 2D operators; also reports the
/// largest u^T L u seen.
pub fn energy_identity_2d(kind: ZkKind, var: FluxVariant2D, n: u8, k: usize, trials: usize, seed: u64) -> (f64, f64) {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let sp = Space::hier(&SpaceSpec::full(2, n, k));
    let l = zk_matrix(&sp, var, kind).unwrap();
    let mut dev: f64 = 0.0;
    let mut qmax = f64::NEG_INFINITY;
    for _ in 0..trials {
        let u = random_state(&sp, &mut rng);
        let q = quad_form(&l, &u);
        dev = dev.max((q + jump_dissipation_2d(&u, n, kind)).abs() / u.energy());
        qmax = qmax.max(q);
    }
    (dev, qmax)
}

/// L2 inner product of two piecewise polynomials on [0, 1], exact for
/// breakpoints on the dyadic grid of level `n`.
pub fn inner(a: &uwdg::basis::Piecewise, b: &uwdg::basis::Piecewise, n: u8, deg: usize) -> f64 {
    let (g, w) = gauss_legendre(deg + 2);
    let h = (-(n as f64)).exp2();
    let mut s = 0.0;
    for c in 0..1u32 << n {
        for (t, wt) in g.iter().zip(&w) {
            let x = (c as f64 + 0.5 * (t + 1.0)) * h;
            s += 0.5 * h * wt * a.eval(x, P, 0) * b.eval(x, P, 0);
        }
    }
    s
}
