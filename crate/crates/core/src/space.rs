//! Discrete spaces (active key sets over a pair of 1D families) and states.

use crate::basis::{Family, FamilyKind, Filters, Side};
use crate::error::{Error, Result};
use crate::mesh::{self, ElemKey, GridKind, SpaceSpec};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Repr {
    /// Alpert multiwavelet coefficients on a downward-closed key set.
    Hier,
    /// Cellwise Legendre coefficients on a uniform full grid.
    Nodal,
}

type FamilyId = (FamilyKind, usize, u8);

fn family_cache() -> &'static Mutex<HashMap<FamilyId, Arc<Family>>> {
    static CACHE: OnceLock<Mutex<HashMap<FamilyId, Arc<Family>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared family instance; families are immutable and reused across spaces.
pub fn family(kind: FamilyKind, deg: usize, level: u8) -> Arc<Family> {
    let id = (kind, deg, level);
    if let Some(f) = family_cache().lock().unwrap().get(&id) {
        return f.clone();
    }
    let f = Arc::new(match kind {
        FamilyKind::Alpert => Family::alpert(deg, level),
        FamilyKind::Legendre => Family::legendre(deg, level),
        FamilyKind::Hermite => Family::hermite(deg, level),
        FamilyKind::HermiteNodal => Family::hermite_nodal(deg, level),
        FamilyKind::Constant => Family::constant(),
    });
    family_cache().lock().unwrap().entry(id).or_insert(f).clone()
}

/// Active space: ordered keys over the tensor product of two 1D families
/// (the second is the constant family in 1D).
#[derive(Debug)]
pub struct Space {
    pub d: usize,
    pub k: usize,
    pub repr: Repr,
    pub kind: GridKind,
    pub fx: Arc<Family>,
    pub fy: Arc<Family>,
    pub keys: Vec<[u32; 2]>,
    pub index: HashMap<[u32; 2], usize>,
    pub filters: Arc<Filters>,
}

impl Space {
    fn build(d: usize, k: usize, repr: Repr, kind: GridKind, fx: Arc<Family>, fy: Arc<Family>, keys: Vec<[u32; 2]>) -> Self {
        let index = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        Space { d, k, repr, kind, fx, fy, keys, index, filters: Arc::new(Filters::new(k)) }
    }

    /// Hierarchical space for a full, sparse or adaptive specification.
    pub fn hier(spec: &SpaceSpec) -> Arc<Self> {
        let n = spec.max_level();
        let fx = family(FamilyKind::Alpert, spec.k, n);
        let fy = if spec.d == 2 { family(FamilyKind::Alpert, spec.k, n) } else { family(FamilyKind::Constant, 0, 0) };
        let keys = mesh::enumerate_space(spec)
            .iter()
            .map(|e| [e.elem(0) as u32, if spec.d == 2 { e.elem(1) as u32 } else { 0 }])
            .collect();
        Arc::new(Self::build(spec.d, spec.k, Repr::Hier, spec.kind.clone(), fx, fy, keys))
    }

    pub fn adaptive(d: usize, k: usize, max_level: u8, keys: Vec<ElemKey>) -> Arc<Self> {
        Self::hier(&SpaceSpec { kind: GridKind::Adaptive { max_level, keys }, k, d })
    }

    /// Uniform full grid with 2^n cells per dimension in the cellwise basis.
    pub fn nodal(d: usize, n: u8, k: usize) -> Arc<Self> {
        let fx = family(FamilyKind::Legendre, k, n);
        let (fy, ny) = if d == 2 { (family(FamilyKind::Legendre, k, n), 1u32 << n) } else { (family(FamilyKind::Constant, 0, 0), 1) };
        let mut keys = Vec::with_capacity(((1u32 << n) * ny) as usize);
        for cx in 0..1u32 << n {
            for cy in 0..ny {
                keys.push([cx, cy]);
            }
        }
        Arc::new(Self::build(d, k, Repr::Nodal, GridKind::Full(n), fx, fy, keys))
    }

    pub fn npf(&self) -> usize {
        self.fx.npf * self.fy.npf
    }

    pub fn dof(&self) -> usize {
        self.keys.len() * self.npf()
    }

    pub fn max_level(&self) -> u8 {
        self.fx.level
    }

    /// Smallest cell size resolved by the space.
    pub fn h_min(&self) -> f64 {
        let l = match self.repr {
            Repr::Nodal => self.fx.level,
            Repr::Hier => self.active_levels().iter().copied().max().unwrap_or(0),
        };
        (-(l as f64)).exp2()
    }

    /// Highest active level per dimension.
    pub fn active_levels(&self) -> [u8; 2] {
        match self.repr {
            Repr::Nodal => [self.fx.level, self.fy.level],
            Repr::Hier => {
                let mut out = [0u8; 2];
                for k in &self.keys {
                    out[0] = out[0].max(mesh::elem_level(k[0] as usize).0);
                    out[1] = out[1].max(mesh::elem_level(k[1] as usize).0);
                }
                out
            }
        }
    }

    /// Keys as level/translation pairs (hierarchical spaces only).
    pub fn elem_keys(&self) -> Vec<ElemKey> {
        self.keys.iter().map(|k| ElemKey::from_elems(self.d, k[0] as usize, k[1] as usize)).collect()
    }

    pub fn key_of(&self, key: &ElemKey) -> Option<usize> {
        let e = [key.elem(0) as u32, if self.d == 2 { key.elem(1) as u32 } else { 0 }];
        self.index.get(&e).copied()
    }

    /// Value of the tensor basis function (key index, ix, iy) at a point.
    pub fn eval_basis(&self, key: usize, ix: usize, iy: usize, p: [f64; 2], order: [usize; 2], side: [Side; 2]) -> f64 {
        let [ex, ey] = self.keys[key];
        let vx = self.fx.elems[ex as usize].funcs[ix].eval_periodic(p[0], side[0], order[0]);
        if vx == 0.0 {
            return 0.0;
        }
        vx * self.fy.elems[ey as usize].funcs[iy].eval_periodic(p[1], side[1], order[1])
    }
}

/// Numerical solution: coefficient vector over a space, block per key.
#[derive(Clone, Debug)]
pub struct State {
    pub space: Arc<Space>,
    pub coeffs: Vec<f64>,
}

pub type HierState = State;

impl State {
    pub fn zeros(space: Arc<Space>) -> Self {
        let n = space.dof();
        State { space, coeffs: vec![0.0; n] }
    }

    pub fn block(&self, key: usize) -> &[f64] {
        let b = self.space.npf();
        &self.coeffs[key * b..(key + 1) * b]
    }

    /// Squared L2 norm (Parseval; both representations are orthonormal).
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn block_norm(&self, key: usize) -> f64 {
        self.block(key).iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Point evaluation with per-dimension derivative orders and sides.
    pub fn eval(&self, p: [f64; 2], order: [usize; 2], side: [Side; 2]) -> f64 {
        let sp = &self.space;
        let (nx, ny) = (sp.fx.npf, sp.fy.npf);
        let wrap = |x: f64, s: Side| match s {
            Side::Minus if x <= 0.0 => 1.0,
            Side::Plus if x >= 1.0 => 0.0,
            _ => x,
        };
        let (px, py) = (wrap(p[0], side[0]), wrap(p[1], side[1]));
        let mut acc = 0.0;
        let mut vx = vec![0.0; nx];
        let mut vy = vec![0.0; ny];
        for (key, &[ex, ey]) in sp.keys.iter().enumerate() {
            let ex = &sp.fx.elems[ex as usize];
            let ey = &sp.fy.elems[ey as usize];
            if px < ex.support.0 || px > ex.support.1 || py < ey.support.0 || py > ey.support.1 {
                continue;
            }
            for (v, f) in vx.iter_mut().zip(&ex.funcs) {
                *v = f.eval(px, side[0], order[0]);
            }
            for (v, f) in vy.iter_mut().zip(&ey.funcs) {
                *v = f.eval(py, side[1], order[1]);
            }
            let b = &self.coeffs[key * nx * ny..(key + 1) * nx * ny];
            for ix in 0..nx {
                if vx[ix] == 0.0 {
                    continue;
                }
                for iy in 0..ny {
                    acc += b[ix * ny + iy] * vx[ix] * vy[iy];
                }
            }
        }
        acc
    }

    pub fn eval_value(&self, x: f64, y: f64) -> f64 {
        self.eval([x, y], [0, 0], [Side::Plus, Side::Plus])
    }

    /// Same function expressed on another space containing this one; keys
    /// missing from `space` are dropped.
    pub fn transfer(&self, space: &Arc<Space>) -> State {
        assert_eq!(self.space.repr, space.repr);
        let b = space.npf();
        let mut out = State::zeros(space.clone());
        for (i, k) in self.space.keys.iter().enumerate() {
            if let Some(&j) = space.index.get(k) {
                out.coeffs[j * b..(j + 1) * b].copy_from_slice(self.block(i));
            }
        }
        out
    }
}

/// Cellwise Legendre coefficients on a uniform grid with 2^lx by 2^ly
/// cells, layout [cx][cy][ix][iy].
#[derive(Clone, Debug)]
pub struct NodalGrid {
    pub k: usize,
    pub levels: [u8; 2],
    pub npf: [usize; 2],
    pub data: Vec<f64>,
}

impl NodalGrid {
    pub fn cells(&self) -> [usize; 2] {
        [1usize << self.levels[0], 1usize << self.levels[1]]
    }

    pub fn block(&self, cx: usize, cy: usize) -> &[f64] {
        let b = self.npf[0] * self.npf[1];
        let off = (cx * self.cells()[1] + cy) * b;
        &self.data[off..off + b]
    }

    /// Cell and local coordinate holding x on level n from `side`, periodic.
    pub fn locate(x: f64, side: Side, n: u8) -> (usize, f64) {
        let m = 1i64 << n;
        let t = x * m as f64;
        let c = match side {
            Side::Plus => t.floor() as i64,
            Side::Minus => t.ceil() as i64 - 1,
        };
        let s = 2.0 * (t - c as f64) - 1.0;
        (c.rem_euclid(m) as usize, s)
    }

    /// Mixed derivative d^ox/dx^ox d^oy/dy^oy at a point with sides.
    pub fn eval(&self, p: [f64; 2], order: [usize; 2], side: [Side; 2]) -> f64 {
        let (cx, sx) = Self::locate(p[0], side[0], self.levels[0]);
        let (cy, sy) = Self::locate(p[1], side[1], self.levels[1]);
        let tx = crate::basis::legendre_jet(self.npf[0] - 1, sx, order[0]);
        let ty = crate::basis::legendre_jet(self.npf[1] - 1, sy, order[1]);
        let scale = |n: u8, o: usize| (n as f64 / 2.0).exp2() * (2.0 * (n as f64).exp2()).powi(o as i32);
        let fx = scale(self.levels[0], order[0]);
        let fy = if self.npf[1] == 1 && order[1] > 0 { 0.0 } else { scale(self.levels[1], order[1]) };
        let b = self.block(cx, cy);
        let mut acc = 0.0;
        for ix in 0..self.npf[0] {
            for iy in 0..self.npf[1] {
                acc += b[ix * self.npf[1] + iy] * tx[order[0]][ix] * ty[order[1]][iy];
            }
        }
        acc * fx * fy
    }
}

fn check_level(have: u8, need: u8) -> Result<()> {
    if have < need {
        return Err(Error::Domain(format!("target level {have} below active level {need}")));
    }
    Ok(())
}

/// Applies the inverse (hierarchical to cellwise) transform along the
/// leading index of `data`, laid out [e][i][inner] with 2^n elements.
pub fn hier_to_nodal_1d(f: &Filters, n: u8, data: &[f64], inner: usize) -> Vec<f64> {
    let np = f.k + 1;
    let blk = np * inner;
    let mut cur = data[..blk].to_vec();
    for l in 1..=n {
        let ncell = 1usize << (l - 1);
        let mut next = vec![0.0; 2 * ncell * blk];
        for c in 0..ncell {
            let s = &cur[c * blk..(c + 1) * blk];
            let d = &data[(ncell + c) * blk..(ncell + c + 1) * blk];
            for b in 0..2 {
                let out = &mut next[(2 * c + b) * blk..(2 * c + b + 1) * blk];
                for ip in 0..np {
                    for i in 0..np {
                        let hv = f.h[b][i * np + ip];
                        let gv = f.g[b][i * np + ip];
                        if hv == 0.0 && gv == 0.0 {
                            continue;
                        }
                        let o = &mut out[ip * inner..(ip + 1) * inner];
                        let sv = &s[i * inner..(i + 1) * inner];
                        let dv = &d[i * inner..(i + 1) * inner];
                        for t in 0..inner {
                            o[t] += hv * sv[t] + gv * dv[t];
                        }
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Forward (cellwise to hierarchical) transform, inverse of [`hier_to_nodal_1d`].
pub fn nodal_to_hier_1d(f: &Filters, n: u8, data: &[f64], inner: usize) -> Vec<f64> {
    let np = f.k + 1;
    let blk = np * inner;
    let mut out = vec![0.0; data.len()];
    let mut cur = data.to_vec();
    for l in (1..=n).rev() {
        let ncell = 1usize << (l - 1);
        let mut coarse = vec![0.0; ncell * blk];
        for c in 0..ncell {
            let sl = &cur[2 * c * blk..(2 * c + 1) * blk];
            let sr = &cur[(2 * c + 1) * blk..(2 * c + 2) * blk];
            let d = &mut out[(ncell + c) * blk..(ncell + c + 1) * blk];
            let s = &mut coarse[c * blk..(c + 1) * blk];
            for i in 0..np {
                for ip in 0..np {
                    let (h0, h1) = (f.h[0][i * np + ip], f.h[1][i * np + ip]);
                    let (g0, g1) = (f.g[0][i * np + ip], f.g[1][i * np + ip]);
                    for t in 0..inner {
                        let (a, b) = (sl[ip * inner + t], sr[ip * inner + t]);
                        s[i * inner + t] += h0 * a + h1 * b;
                        d[i * inner + t] += g0 * a + g1 * b;
                    }
                }
            }
        }
        cur = coarse;
    }
    out[..blk].copy_from_slice(&cur[..blk]);
    out
}

/// Cellwise representation of a state on levels (lx, ly), which must not be
/// below the active levels.
pub fn to_nodal(state: &State, levels: [u8; 2]) -> Result<NodalGrid> {
    let sp = &state.space;
    let (npx, npy) = (sp.fx.npf, sp.fy.npf);
    let act = sp.active_levels();
    check_level(levels[0], act[0])?;
    if sp.d == 2 {
        check_level(levels[1], act[1])?;
    }
    let levels = if sp.d == 1 { [levels[0], 0] } else { levels };
    let (ex_n, ey_n) = (1usize << levels[0], 1usize << levels[1]);
    if sp.repr == Repr::Nodal {
        if levels != [sp.fx.level, if sp.d == 2 { sp.fy.level } else { 0 }] {
            return Err(Error::Domain("cellwise state must be read on its own level".into()));
        }
        return Ok(NodalGrid { k: sp.k, levels, npf: [npx, npy], data: state.coeffs.clone() });
    }
    // [ex][ix][ey][iy]
    let mut a = vec![0.0; ex_n * npx * ey_n * npy];
    for (key, &[ex, ey]) in sp.keys.iter().enumerate() {
        let b = state.block(key);
        for ix in 0..npx {
            for iy in 0..npy {
                a[((ex as usize * npx + ix) * ey_n + ey as usize) * npy + iy] = b[ix * npy + iy];
            }
        }
    }
    let inner = ey_n * npy;
    let a = hier_to_nodal_1d(&sp.filters, levels[0], &a, inner);
    let mut data = vec![0.0; a.len()];
    for cx in 0..ex_n {
        for ix in 0..npx {
            let line = &a[(cx * npx + ix) * inner..(cx * npx + ix + 1) * inner];
            let line = if sp.d == 2 { hier_to_nodal_1d(&sp.filters, levels[1], line, 1) } else { line.to_vec() };
            for cy in 0..ey_n {
                for iy in 0..npy {
                    data[((cx * ey_n + cy) * npx + ix) * npy + iy] = line[cy * npy + iy];
                }
            }
        }
    }
    Ok(NodalGrid { k: sp.k, levels, npf: [npx, npy], data })
}

/// L2 projection of cellwise data onto `space`.
pub fn from_nodal(grid: &NodalGrid, space: &Arc<Space>) -> Result<State> {
    let sp = space;
    if sp.repr == Repr::Nodal {
        if grid.levels[0] != sp.fx.level {
            return Err(Error::Domain("grid level does not match the cellwise space".into()));
        }
        return Ok(State { space: sp.clone(), coeffs: grid.data.clone() });
    }
    let act = sp.active_levels();
    check_level(grid.levels[0], act[0])?;
    check_level(grid.levels[1], act[1])?;
    let (npx, npy) = (grid.npf[0], grid.npf[1]);
    let [nx, ny] = grid.cells();
    let inner = ny * npy;
    // [cx][ix][cy][iy] with the y direction transformed first.
    let mut a = vec![0.0; nx * npx * inner];
    for cx in 0..nx {
        for ix in 0..npx {
            let mut line = vec![0.0; inner];
            for cy in 0..ny {
                for iy in 0..npy {
                    line[cy * npy + iy] = grid.data[((cx * ny + cy) * npx + ix) * npy + iy];
                }
            }
            let line = if sp.d == 2 { nodal_to_hier_1d(&sp.filters, grid.levels[1], &line, 1) } else { line };
            a[(cx * npx + ix) * inner..(cx * npx + ix + 1) * inner].copy_from_slice(&line);
        }
    }
    let a = nodal_to_hier_1d(&sp.filters, grid.levels[0], &a, inner);
    let mut out = State::zeros(sp.clone());
    let b = sp.npf();
    for (key, &[ex, ey]) in sp.keys.iter().enumerate() {
        for ix in 0..npx {
            for iy in 0..npy {
                out.coeffs[key * b + ix * npy + iy] = a[((ex as usize * npx + ix) * inner) + ey as usize * npy + iy];
            }
        }
    }
    Ok(out)
}
