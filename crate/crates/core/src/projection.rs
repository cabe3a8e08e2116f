//! L2 projection onto active spaces, the local projection Pi* on
//! rectangular cells and 1D Gauss-Radau projections.

use crate::basis::{Family, Side};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, legendre_all};
use crate::space::{from_nodal, NodalGrid, Repr, Space, State};
use faer::prelude::*;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Coarsest subcell level used by projection quadrature, so that smooth
/// data is integrated accurately even against level-0 functions.
const MIN_QUAD_LEVEL: u8 = 3;
const QUAD_POINTS: usize = 8;

/// Quadrature points, weights and function values [func][point] of an element.
struct ElemQuad {
    x: Vec<f64>,
    w: Vec<f64>,
    vals: Vec<Vec<f64>>,
}

fn elem_quad(f: &Family, e: usize) -> ElemQuad {
    let el = &f.elems[e];
    if f.kind == crate::basis::FamilyKind::Constant {
        return ElemQuad { x: vec![0.0], w: vec![1.0], vals: vec![vec![1.0]] };
    }
    let (gx, gw) = gauss_legendre(QUAD_POINTS);
    let p0 = &el.funcs[0];
    let lev = p0.level.max(MIN_QUAD_LEVEL);
    let h = (-(lev as f64)).exp2();
    let sub = 1u32 << (lev - p0.level);
    let first = p0.first * sub;
    let count = p0.pieces.len() as u32 * sub;
    let mut x = Vec::new();
    let mut w = Vec::new();
    for c in first..first + count {
        for (s, wt) in gx.iter().zip(&gw) {
            x.push((c as f64 + 0.5 * (s + 1.0)) * h);
            w.push(0.5 * h * wt);
        }
    }
    let vals = el.funcs.iter().map(|p| x.iter().map(|&t| p.eval(t, Side::Plus, 0)).collect()).collect();
    ElemQuad { x, w, vals }
}

type QuadId = (crate::basis::FamilyKind, usize, u8, u32);

/// Element quadratures are reused across calls; families are immutable.
fn cached_quad(f: &Family, e: u32) -> Arc<ElemQuad> {
    static CACHE: OnceLock<Mutex<HashMap<QuadId, Arc<ElemQuad>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let id = (f.kind, f.deg, f.level, e);
    if let Some(q) = cache.lock().unwrap().get(&id) {
        return q.clone();
    }
    let q = Arc::new(elem_quad(f, e as usize));
    cache.lock().unwrap().entry(id).or_insert(q).clone()
}

/// Quadrature points per dimension used for an element by `project_l2`.
fn quad_count(f: &Family, e: usize) -> usize {
    if f.kind == crate::basis::FamilyKind::Constant {
        return 1;
    }
    let p0 = &f.elems[e].funcs[0];
    let lev = p0.level.max(MIN_QUAD_LEVEL);
    p0.pieces.len() * (1usize << (lev - p0.level)) * QUAD_POINTS
}

/// Cellwise Legendre coefficients of f on the uniform grid of the given
/// levels (y level 0 with one function in 1D), by Gauss quadrature on
/// 2^sub subcells per cell and dimension.
pub fn project_cellwise(f: &(dyn Fn(f64, f64) -> f64 + Sync), d: usize, k: usize, levels: [u8; 2], sub: u8) -> NodalGrid {
    let (g, w) = gauss_legendre(QUAD_POINTS);
    let np = k + 1;
    let npy = if d == 2 { np } else { 1 };
    let (mx, my) = (1usize << levels[0], if d == 2 { 1usize << levels[1] } else { 1 });
    let (hx, hy) = ((-(levels[0] as f64)).exp2(), if d == 2 { (-(levels[1] as f64)).exp2() } else { 1.0 });
    let ns = 1usize << sub;
    // Reference points and weights over the cell, with sqrt(2a+1) P_a values.
    let mut xi = Vec::new();
    let mut wt = Vec::new();
    for s in 0..ns {
        for (a, b) in g.iter().zip(&w) {
            xi.push(-1.0 + (2.0 * s as f64 + a + 1.0) / ns as f64);
            wt.push(b / ns as f64);
        }
    }
    let pl: Vec<Vec<f64>> = xi
        .iter()
        .map(|&t| legendre_all(k, t).iter().enumerate().map(|(a, p)| p * ((2 * a + 1) as f64).sqrt()).collect())
        .collect();
    let (yi, wy, ply): (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) =
        if d == 2 { (xi.clone(), wt.clone(), pl.clone()) } else { (vec![0.0], vec![2.0], vec![vec![1.0]]) };
    let norm = 0.25 * (hx * hy).sqrt();
    let data: Vec<f64> = (0..mx * my)
        .into_par_iter()
        .flat_map_iter(|c| {
            let (cx, cy) = (c / my, c % my);
            let mut out = vec![0.0; np * npy];
            let mut gy = vec![0.0; npy];
            for (i, x) in xi.iter().enumerate() {
                let x = (cx as f64 + 0.5 * (x + 1.0)) * hx;
                gy.iter_mut().for_each(|v| *v = 0.0);
                for (j, y) in yi.iter().enumerate() {
                    let y = if d == 2 { (cy as f64 + 0.5 * (y + 1.0)) * hy } else { 0.0 };
                    let v = f(x, y) * wy[j];
                    for (b, gb) in gy.iter_mut().enumerate() {
                        *gb += v * ply[j][b];
                    }
                }
                for a in 0..np {
                    let wa = wt[i] * pl[i][a] * norm;
                    for b in 0..npy {
                        out[a * npy + b] += wa * gy[b];
                    }
                }
            }
            out
        })
        .collect();
    NodalGrid { k, levels: [levels[0], if d == 2 { levels[1] } else { 0 }], npf: [np, npy], data }
}

/// L2 projection of f(x, y) onto the space (y is ignored in 1D). Goes
/// through the finest active uniform grid when that needs fewer samples.
pub fn project_l2(f: &(dyn Fn(f64, f64) -> f64 + Sync), space: &Arc<Space>) -> State {
    if space.repr == Repr::Hier {
        let lv = space.active_levels();
        let levels = [lv[0].max(MIN_QUAD_LEVEL), if space.d == 2 { lv[1].max(MIN_QUAD_LEVEL) } else { 0 }];
        let per_dim = |l: u8| (1usize << l) * QUAD_POINTS;
        let grid_pts = per_dim(levels[0]) * if space.d == 2 { per_dim(levels[1]) } else { 1 };
        let key_pts: usize =
            space.keys.iter().map(|&[ex, ey]| quad_count(&space.fx, ex as usize) * quad_count(&space.fy, ey as usize)).sum();
        if grid_pts < key_pts {
            let grid = project_cellwise(f, space.d, space.k, levels, 0);
            return from_nodal(&grid, space).expect("grid levels cover the active levels");
        }
    } else {
        let n = space.fx.level;
        let levels = [n, if space.d == 2 { space.fy.level } else { 0 }];
        let grid = project_cellwise(f, space.d, space.k, levels, MIN_QUAD_LEVEL.saturating_sub(n));
        return State { space: space.clone(), coeffs: grid.data };
    }
    project_keys(f, space)
}

/// Per-key tensor quadrature over each key's support.
fn project_keys(f: &(dyn Fn(f64, f64) -> f64 + Sync), space: &Arc<Space>) -> State {
    let mut qx: HashMap<u32, Arc<ElemQuad>> = HashMap::new();
    let mut qy: HashMap<u32, Arc<ElemQuad>> = HashMap::new();
    for &[ex, ey] in &space.keys {
        qx.entry(ex).or_insert_with(|| cached_quad(&space.fx, ex));
        qy.entry(ey).or_insert_with(|| cached_quad(&space.fy, ey));
    }
    let (nx, ny) = (space.fx.npf, space.fy.npf);
    let coeffs: Vec<f64> = space
        .keys
        .par_iter()
        .flat_map_iter(|&[ex, ey]| {
            let (a, b) = (&qx[&ex], &qy[&ey]);
            // g[qx][iy] = sum_qy w f phi_iy
            let mut g = vec![0.0; a.x.len() * ny];
            for (i, &x) in a.x.iter().enumerate() {
                for (j, &y) in b.x.iter().enumerate() {
                    let v = f(x, y) * b.w[j];
                    for iy in 0..ny {
                        g[i * ny + iy] += v * b.vals[iy][j];
                    }
                }
            }
            let mut out = vec![0.0; nx * ny];
            for ix in 0..nx {
                for i in 0..a.x.len() {
                    let wv = a.w[i] * a.vals[ix][i];
                    if wv == 0.0 {
                        continue;
                    }
                    for iy in 0..ny {
                        out[ix * ny + iy] += wv * g[i * ny + iy];
                    }
                }
            }
            out
        })
        .collect();
    State { space: space.clone(), coeffs }
}

/// Monomial coefficients c[p][q] of sum c xi^p eta^q on the reference cell.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPoly {
    pub k: usize,
    pub c: Vec<f64>,
}

impl LocalPoly {
    /// d^oy/deta^oy at (xi, eta).
    pub fn eval_ref(&self, xi: f64, eta: f64, oy: usize) -> f64 {
        let n = self.k + 1;
        let mut acc = 0.0;
        for p in 0..n {
            for q in oy..n {
                let f: f64 = (0..oy).map(|t| (q - t) as f64).product();
                acc += self.c[p * n + q] * xi.powi(p as i32) * f * eta.powi((q - oy) as i32);
            }
        }
        acc
    }
}

/// A rectangular cell [x0, x1] x [y0, y1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    /// Cell (i, j) of the uniform grid with 2^n cells per dimension.
    pub fn cell(n: u8, i: u32, j: u32) -> Self {
        let h = (-(n as f64)).exp2();
        Rect { x: (i as f64 * h, (i + 1) as f64 * h), y: (j as f64 * h, (j + 1) as f64 * h) }
    }

    pub fn hx(&self) -> f64 {
        self.x.1 - self.x.0
    }

    pub fn hy(&self) -> f64 {
        self.y.1 - self.y.0
    }

    pub fn to_phys(&self, xi: f64, eta: f64) -> (f64, f64) {
        (self.x.0 + 0.5 * (xi + 1.0) * self.hx(), self.y.0 + 0.5 * (eta + 1.0) * self.hy())
    }
}

/// The (k+1)^2 defining conditions of Pi* as rows over monomials, with the
/// matching data functional. `u(x, y, oy)` returns d^oy u / dy^oy.
pub struct LocalProjSystem {
    pub k: usize,
    pub a: Mat<f64>,
    pub b: Vec<f64>,
    /// Rows belonging to each condition family, in order (proj1..proj6).
    pub families: [std::ops::Range<usize>; 6],
}

impl LocalProjSystem {
    pub fn new(k: usize, cell: Rect, u: &dyn Fn(f64, f64, usize) -> f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("Pi* needs k >= 1".into()));
        }
        let n = k + 1;
        // Enough points that moments of smooth non-polynomial data are exact to roundoff.
        let (g, w) = gauss_legendre((k + 4).max(10));
        let sy = 0.5 * cell.hy();
        let mono = |p: usize, q: usize, xi: f64, eta: f64, oy: usize| -> f64 {
            if q < oy {
                return 0.0;
            }
            let f: f64 = (0..oy).map(|t| (q - t) as f64).product();
            xi.powi(p as i32) * f * eta.powi((q - oy) as i32)
        };
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut fams: Vec<std::ops::Range<usize>> = Vec::new();
        let mut push_family = |rows: &mut Vec<(Vec<f64>, f64)>, new: Vec<(Vec<f64>, f64)>| {
            let s = rows.len();
            rows.extend(new);
            fams.push(s..rows.len());
        };
        // proj1: interior moments against P^{k-1} x P^{k-2}.
        let mut f1 = Vec::new();
        for a in 0..k {
            for bq in 0..k.saturating_sub(1) {
                let mut row = vec![0.0; n * n];
                let mut rhs = 0.0;
                for (i, xi) in g.iter().enumerate() {
                    for (j, eta) in g.iter().enumerate() {
                        let t = w[i] * w[j] * legendre_all(a, *xi)[a] * legendre_all(bq, *eta)[bq];
                        for p in 0..n {
                            for q in 0..n {
                                row[p * n + q] += t * mono(p, q, *xi, *eta, 0);
                            }
                        }
                        let (x, y) = cell.to_phys(*xi, *eta);
                        rhs += t * u(x, y, 0);
                    }
                }
                f1.push((row, rhs));
            }
        }
        push_family(&mut rows, f1);
        // Edge moments along x at a fixed eta (proj2 derivative at bottom, proj3 value at top).
        let edge_x = |eta: f64, oy: usize, y: f64, nmom: usize| -> Vec<(Vec<f64>, f64)> {
            (0..nmom)
                .map(|a| {
                    let mut row = vec![0.0; n * n];
                    let mut rhs = 0.0;
                    for (i, xi) in g.iter().enumerate() {
                        let t = w[i] * legendre_all(a, *xi)[a];
                        for p in 0..n {
                            for q in 0..n {
                                row[p * n + q] += t * mono(p, q, *xi, eta, oy);
                            }
                        }
                        let x = cell.to_phys(*xi, 0.0).0;
                        rhs += t * u(x, y, oy) * sy.powi(oy as i32);
                    }
                    (row, rhs)
                })
                .collect()
        };
        push_family(&mut rows, edge_x(-1.0, 1, cell.y.0, k));
        push_family(&mut rows, edge_x(1.0, 0, cell.y.1, k));
        // proj4: values on the left edge against P^{k-2}.
        let mut f4 = Vec::new();
        for bq in 0..k.saturating_sub(1) {
            let mut row = vec![0.0; n * n];
            let mut rhs = 0.0;
            for (j, eta) in g.iter().enumerate() {
                let t = w[j] * legendre_all(bq, *eta)[bq];
                for p in 0..n {
                    for q in 0..n {
                        row[p * n + q] += t * mono(p, q, -1.0, *eta, 0);
                    }
                }
                rhs += t * u(cell.x.0, cell.to_phys(0.0, *eta).1, 0);
            }
            f4.push((row, rhs));
        }
        push_family(&mut rows, f4);
        // proj5: value at the top-left corner; proj6: y-derivative at the bottom-right corner.
        let corner = |xi: f64, eta: f64, oy: usize, x: f64, y: f64| {
            let mut row = vec![0.0; n * n];
            for p in 0..n {
                for q in 0..n {
                    row[p * n + q] = mono(p, q, xi, eta, oy);
                }
            }
            (row, u(x, y, oy) * sy.powi(oy as i32))
        };
        push_family(&mut rows, vec![corner(-1.0, 1.0, 0, cell.x.0, cell.y.1)]);
        push_family(&mut rows, vec![corner(1.0, -1.0, 1, cell.x.1, cell.y.0)]);
        assert_eq!(rows.len(), n * n, "condition count must be (k+1)^2");
        let a = Mat::<f64>::from_fn(n * n, n * n, |i, j| rows[i].0[j]);
        let b = rows.iter().map(|r| r.1).collect();
        let families = [fams[0].clone(), fams[1].clone(), fams[2].clone(), fams[3].clone(), fams[4].clone(), fams[5].clone()];
        Ok(LocalProjSystem { k, a, b, families })
    }

    pub fn solve(&self) -> Result<LocalPoly> {
        let n = self.b.len();
        let lu = self.a.partial_piv_lu();
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| self.b[i]);
        let x = lu.solve(&rhs);
        let c: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solve(format!("singular Pi* system for k = {}", self.k)));
        }
        Ok(LocalPoly { k: self.k, c })
    }

    /// 2-norm condition number of the condition matrix.
    pub fn condition_number(&self) -> f64 {
        let s = self.a.singular_values().expect("SVD failed");
        s[0] / s[s.len() - 1]
    }

    /// Residuals of the conditions for a candidate polynomial, per family.
    pub fn residuals(&self, p: &LocalPoly) -> [f64; 6] {
        let n = self.b.len();
        let mut out = [0.0f64; 6];
        for (f, r) in self.families.iter().enumerate() {
            for i in r.clone() {
                let v: f64 = (0..n).map(|j| self.a[(i, j)] * p.c[j]).sum::<f64>() - self.b[i];
                out[f] = out[f].max(v.abs());
            }
        }
        out
    }
}

/// Pi* u on one cell; `u(x, y, oy)` returns d^oy u / dy^oy.
pub fn project_star(u: &dyn Fn(f64, f64, usize) -> f64, cell: Rect, k: usize) -> Result<LocalPoly> {
    LocalProjSystem::new(k, cell, u)?.solve()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadauSide {
    Left,
    Right,
}

/// 1D Gauss-Radau projection onto P^k on [a, b]: moments against P^{k-1}
/// plus the value at the chosen endpoint. Monomial coefficients in the
/// reference variable s in [-1, 1].
pub fn gauss_radau_1d(u: &dyn Fn(f64) -> f64, cell: (f64, f64), side: RadauSide, k: usize) -> Result<Vec<f64>> {
    let n = k + 1;
    let (g, w) = gauss_legendre((k + 4).max(10));
    let x = |s: f64| cell.0 + 0.5 * (s + 1.0) * (cell.1 - cell.0);
    let mut a = Mat::<f64>::zeros(n, n);
    let mut b = Mat::<f64>::zeros(n, 1);
    for m in 0..k {
        for (s, wt) in g.iter().zip(&w) {
            let t = wt * legendre_all(m, *s)[m];
            for p in 0..n {
                a[(m, p)] += t * s.powi(p as i32);
            }
            b[(m, 0)] += t * u(x(*s));
        }
    }
    let s0: f64 = if side == RadauSide::Right { 1.0 } else { -1.0 };
    for p in 0..n {
        a[(k, p)] = s0.powi(p as i32);
    }
    b[(k, 0)] = u(x(s0));
    let sol = a.partial_piv_lu().solve(&b);
    let c: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solve("singular Gauss-Radau system".into()));
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjMethod {
    #[default]
    L2,
    Star,
}

/// Cellwise Legendre coefficients of a local polynomial on cell (cx, cy) of level n.
fn local_to_legendre(p: &LocalPoly, n: u8, k: usize) -> Vec<f64> {
    let (g, w) = gauss_legendre(k + 3);
    let np = k + 1;
    let scale = (-(n as f64)).exp2();
    let mut out = vec![0.0; np * np];
    for (i, xi) in g.iter().enumerate() {
        let lx = legendre_all(k, *xi);
        for (j, eta) in g.iter().enumerate() {
            let ly = legendre_all(k, *eta);
            let v = p.eval_ref(*xi, *eta, 0) * w[i] * w[j] * 0.25;
            for a in 0..np {
                for b in 0..np {
                    out[a * np + b] += v * lx[a] * ly[b] * ((2 * a + 1) as f64).sqrt() * ((2 * b + 1) as f64).sqrt();
                }
            }
        }
    }
    // Orthonormal basis on a cell of side h: 2^n sqrt(2a+1)sqrt(2b+1) P_a P_b, inner product h^2 * (1/4) int.
    out.iter().map(|v| v * scale).collect()
}

/// Initial projection of u0 onto a space. `Star` applies Pi* cell by cell
/// on the uniform grid of the space's max level (2D only) and transfers.
pub fn project_initial(u0: &(dyn Fn(f64, f64, usize) -> f64 + Sync), space: &Arc<Space>, method: ProjMethod) -> Result<State> {
    match method {
        ProjMethod::L2 => Ok(project_l2(&|x, y| u0(x, y, 0), space)),
        ProjMethod::Star => {
            if space.d != 2 {
                return Err(Error::Config("the star projection is defined on rectangles only".into()));
            }
            let n = space.max_level();
            let k = space.k;
            let np = k + 1;
            let m = 1usize << n;
            let blocks: Result<Vec<Vec<f64>>> = (0..m * m)
                .into_par_iter()
                .map(|c| {
                    let cell = Rect::cell(n, (c / m) as u32, (c % m) as u32);
                    Ok(local_to_legendre(&project_star(u0, cell, k)?, n, k))
                })
                .collect();
            let data = blocks?.concat();
            let grid = NodalGrid { k, levels: [n, n], npf: [np, np], data };
            from_nodal(&grid, space)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpaceSpec;

    #[test]
    fn constant_projects_to_root() {
        let sp = Space::hier(&SpaceSpec::full(2, 2, 2));
        let st = project_l2(&|_, _| 2.5, &sp);
        assert!((st.coeffs[0] - 2.5).abs() < 1e-13);
        assert!(st.coeffs[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn grid_and_key_quadratures_agree() {
        let f = |x: f64, y: f64| (2.0 * std::f64::consts::PI * x).sin() * (6.0 * y).cos() + x * y;
        for sp in [Space::hier(&SpaceSpec::sparse(2, 4, 2)), Space::hier(&SpaceSpec::full(1, 5, 3))] {
            let a = project_keys(&f, &sp);
            let lv = sp.active_levels();
            let levels = [lv[0].max(3), if sp.d == 2 { lv[1].max(3) } else { 0 }];
            let b = from_nodal(&project_cellwise(&f, sp.d, sp.k, levels, 0), &sp).unwrap();
            for (p, q) in a.coeffs.iter().zip(&b.coeffs) {
                assert!((p - q).abs() < 1e-12, "{p} {q}");
            }
        }
        let sp = Space::nodal(2, 1, 2);
        let a = project_keys(&f, &sp);
        let b = project_l2(&f, &sp);
        for (p, q) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((p - q).abs() < 1e-12, "{p} {q}");
        }
    }

    #[test]
    fn sine_value_at_quarter() {
        let sp = Space::hier(&SpaceSpec::full(1, 5, 2));
        let st = project_l2(&|x, _| (2.0 * std::f64::consts::PI * x).sin(), &sp);
        assert!((st.eval_value(0.25, 0.0) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn radau_endpoint_and_exactness() {
        let k = 2;
        let c = gauss_radau_1d(&|x: f64| x.powi(3), (0.0, 1.0), RadauSide::Right, k).unwrap();
        let v: f64 = c.iter().sum();
        assert!((v - 1.0).abs() < 1e-13);
        let c = gauss_radau_1d(&|x: f64| 1.0 + x * x, (0.0, 1.0), RadauSide::Left, k).unwrap();
        // s = 2x - 1 so 1 + x^2 = 1.25 + 0.5 s + 0.25 s^2
        for (a, b) in c.iter().zip([1.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
