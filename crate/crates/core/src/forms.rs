//! One-dimensional bilinear forms between families and their tensor
//! assembly over active key sets.
//!
//! With trial function phi and test function psi:
//!
//! * `Vol(q)`: sum over cells of the integral of phi * psi^(q),
//! * `Jmp(p, s, q)`: sum over points e of phi^(p)(e^s) * [psi^(q)]_e with
//!   [w]_e = w(e+) - w(e-) and the periodic identification 0 = 1.
//!
//! Tables are indexed by test element and list the trial elements whose
//! closed supports touch it (periodically).

use crate::basis::{Family, FamilyKind, Piecewise, Side};
use crate::poly;
use crate::quadrature::gauss_legendre;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FormKind {
    Vol(u8),
    Jmp(u8, Side, u8),
}

/// Entries below this fraction of the absolute contribution sum are roundoff.
const DROP: f64 = 1e-13;

fn vol(phi: &Piecewise, psi: &Piecewise, q: usize, gauss: &(Vec<f64>, Vec<f64>)) -> (f64, f64) {
    let m = phi.level.max(psi.level);
    let range = |f: &Piecewise| {
        let sh = m - f.level;
        ((f.first as u64) << sh, ((f.first as u64 + f.pieces.len() as u64) << sh))
    };
    let (a0, a1) = range(phi);
    let (b0, b1) = range(psi);
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    let h = (-(m as f64)).exp2();
    let dscale = (2.0 / h).powi(q as i32);
    let (mut val, mut abs) = (0.0, 0.0);
    for c in lo..hi {
        let (Some(pf), Some(pg)) = (phi.restrict(m, c as u32), psi.restrict(m, c as u32)) else { continue };
        let pg = poly::deriv_n(&pg, q);
        for (s, w) in gauss.0.iter().zip(&gauss.1) {
            let t = poly::eval(&pf, *s) * poly::eval(&pg, *s);
            val += w * t;
            abs += w * t.abs();
        }
    }
    (0.5 * h * dscale * val, 0.5 * h * dscale * abs)
}

fn jmp(phi: &Piecewise, psi: &Piecewise, p: usize, side: Side, q: usize) -> (f64, f64) {
    let (mut val, mut abs) = (0.0, 0.0);
    for e in psi.breakpoints() {
        let a = phi.eval_periodic(e, side, p);
        if a == 0.0 {
            continue;
        }
        let (up, um) = (psi.eval_periodic(e, Side::Plus, q), psi.eval_periodic(e, Side::Minus, q));
        val += a * (up - um);
        abs += a.abs() * (up.abs() + um.abs());
    }
    (val, abs)
}

/// Value of one form on a (trial, test) pair.
pub fn form_value(kind: FormKind, phi: &Piecewise, psi: &Piecewise) -> f64 {
    let g = gauss_legendre(8);
    let (v, a) = match kind {
        FormKind::Vol(q) => vol(phi, psi, q as usize, &g),
        FormKind::Jmp(p, s, q) => jmp(phi, psi, p as usize, s, q as usize),
    };
    if v.abs() <= DROP * a {
        0.0
    } else {
        v
    }
}

fn touches(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0.max(b.0) <= a.1.min(b.1) || (a.1 >= 1.0 && b.0 <= 0.0) || (b.1 >= 1.0 && a.0 <= 0.0)
}

/// A row entry: trial element, bitmask of non-zero kinds, blocks per kind
/// laid out [kind][i_test][i_trial].
pub type FormEntry = (u32, u32, Vec<f64>);

#[derive(Debug)]
pub struct FormTable {
    pub kinds: Vec<FormKind>,
    pub npf_test: usize,
    pub npf_trial: usize,
    pub rows: Vec<Vec<FormEntry>>,
}

impl FormTable {
    pub fn kind_index(&self, k: FormKind) -> usize {
        self.kinds.iter().position(|x| *x == k).expect("form kind not in table")
    }

    /// Block of one kind between test element `a` and trial element `b`.
    pub fn block(&self, kind: FormKind, a: usize, b: usize) -> Option<&[f64]> {
        let ki = self.kind_index(kind);
        let n = self.npf_test * self.npf_trial;
        self.rows[a]
            .iter()
            .find(|e| e.0 as usize == b && e.1 & (1 << ki) != 0)
            .map(|e| &e.2[ki * n..(ki + 1) * n])
    }
}

pub fn build_table(test: &Family, trial: &Family, kinds: &[FormKind]) -> FormTable {
    let (nt, nr) = (test.npf, trial.npf);
    let g = gauss_legendre(8);
    let rows = (0..test.len())
        .into_par_iter()
        .map(|a| {
            let ea = &test.elems[a];
            let mut row = Vec::new();
            for (b, eb) in trial.elems.iter().enumerate() {
                if !touches(ea.support, eb.support) {
                    continue;
                }
                let mut blocks = vec![0.0; kinds.len() * nt * nr];
                let mut mask = 0u32;
                for (ki, kind) in kinds.iter().enumerate() {
                    if let FormKind::Vol(_) = kind {
                        let (s0, s1) = (ea.support.0.max(eb.support.0), ea.support.1.min(eb.support.1));
                        if s1 <= s0 {
                            continue;
                        }
                    }
                    for (i, psi) in ea.funcs.iter().enumerate() {
                        for (j, phi) in eb.funcs.iter().enumerate() {
                            let (v, abs) = match *kind {
                                FormKind::Vol(q) => vol(phi, psi, q as usize, &g),
                                FormKind::Jmp(p, s, q) => jmp(phi, psi, p as usize, s, q as usize),
                            };
                            if v.abs() > DROP * abs && v != 0.0 {
                                blocks[(ki * nt + i) * nr + j] = v;
                                mask |= 1 << ki;
                            }
                        }
                    }
                }
                if mask != 0 {
                    row.push((b as u32, mask, blocks));
                }
            }
            row
        })
        .collect();
    FormTable { kinds: kinds.to_vec(), npf_test: nt, npf_trial: nr, rows }
}

type TableId = ((FamilyKind, usize, u8), (FamilyKind, usize, u8), Vec<FormKind>);

fn table_cache() -> &'static Mutex<HashMap<TableId, Arc<FormTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<TableId, Arc<FormTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached form table for a family pair.
pub fn table(test: &Family, trial: &Family, kinds: &[FormKind]) -> Arc<FormTable> {
    let id = ((test.kind, test.deg, test.level), (trial.kind, trial.deg, trial.level), kinds.to_vec());
    if let Some(t) = table_cache().lock().unwrap().get(&id) {
        return t.clone();
    }
    let t = Arc::new(build_table(test, trial, kinds));
    table_cache().lock().unwrap().entry(id).or_insert(t).clone()
}

/// Block sparse matrix in compressed rows; blocks are dense br x bc, row-major.
#[derive(Clone, Debug)]
pub struct BlockCsr {
    pub nbr: usize,
    pub nbc: usize,
    pub br: usize,
    pub bc: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl BlockCsr {
    pub fn nrows(&self) -> usize {
        self.nbr * self.br
    }

    pub fn ncols(&self) -> usize {
        self.nbc * self.bc
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply_add(1.0, x, &mut y);
        y
    }

    /// y += a A x
    pub fn apply_add(&self, a: f64, x: &[f64], y: &mut [f64]) {
        let (br, bc) = (self.br, self.bc);
        let bs = br * bc;
        y.par_chunks_mut(br).enumerate().for_each(|(r, yr)| {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[p] as usize;
                let blk = &self.vals[p * bs..(p + 1) * bs];
                let xc = &x[c * bc..(c + 1) * bc];
                for i in 0..br {
                    let row = &blk[i * bc..(i + 1) * bc];
                    let s: f64 = row.iter().zip(xc).map(|(u, v)| u * v).sum();
                    yr[i] += a * s;
                }
            }
        });
    }

    pub fn scale(&mut self, a: f64) {
        self.vals.iter_mut().for_each(|v| *v *= a);
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols()]; self.nrows()];
        let bs = self.br * self.bc;
        for r in 0..self.nbr {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[p] as usize;
                for i in 0..self.br {
                    for j in 0..self.bc {
                        d[r * self.br + i][c * self.bc + j] += self.vals[p * bs + i * self.bc + j];
                    }
                }
            }
        }
        d
    }

    /// Entries as (row, col, value), skipping values with |v| <= tol.
    pub fn triplets(&self, tol: f64) -> Vec<(usize, usize, f64)> {
        let bs = self.br * self.bc;
        let mut out = Vec::new();
        for r in 0..self.nbr {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[p] as usize;
                for i in 0..self.br {
                    for j in 0..self.bc {
                        let v = self.vals[p * bs + i * self.bc + j];
                        if v.abs() > tol {
                            out.push((r * self.br + i, c * self.bc + j, v));
                        }
                    }
                }
            }
        }
        out
    }

    /// Diagonal blocks (square blocks only), zero when absent.
    pub fn diag_blocks(&self) -> Vec<Vec<f64>> {
        let bs = self.br * self.bc;
        (0..self.nbr)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&p| self.cols[p] as usize == r)
                    .map(|p| self.vals[p * bs..(p + 1) * bs].to_vec())
                    .unwrap_or_else(|| vec![0.0; bs])
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tensor term coef * (X-form tensor Y-form).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub x: FormKind,
    pub y: FormKind,
}

impl Term {
    pub fn new(coef: f64, x: FormKind, y: FormKind) -> Self {
        Term { coef, x, y }
    }
}

/// Keys over a family pair, used as test or trial side of an assembly.
pub struct KeySide<'a> {
    pub fx: &'a Family,
    pub fy: &'a Family,
    pub keys: &'a [[u32; 2]],
    pub index: &'a HashMap<[u32; 2], usize>,
}

fn uniq(kinds: impl Iterator<Item = FormKind>) -> Vec<FormKind> {
    let mut v: Vec<FormKind> = Vec::new();
    for k in kinds {
        if !v.contains(&k) {
            v.push(k);
        }
    }
    v
}

/// Matrix of sum_t coef_t (X_t tensor Y_t) with rows on `test` keys and
/// columns on `trial` keys.
pub fn assemble(test: &KeySide, trial: &KeySide, terms: &[Term]) -> BlockCsr {
    let kx = uniq(terms.iter().map(|t| t.x));
    let ky = uniq(terms.iter().map(|t| t.y));
    let tx = table(test.fx, trial.fx, &kx);
    let ty = table(test.fy, trial.fy, &ky);
    let tidx: Vec<(f64, usize, usize)> = terms.iter().map(|t| (t.coef, tx.kind_index(t.x), ty.kind_index(t.y))).collect();
    let (ntx, nty, nrx, nry) = (test.fx.npf, test.fy.npf, trial.fx.npf, trial.fy.npf);
    let (br, bc) = (ntx * nty, nrx * nry);
    let bs = br * bc;
    let (sx, sy) = (ntx * nrx, nty * nry);
    let rows: Vec<(Vec<u32>, Vec<f64>)> = test
        .keys
        .par_iter()
        .map(|&[ax, ay]| {
            let mut pos: HashMap<usize, usize> = HashMap::new();
            let mut cols: Vec<usize> = Vec::new();
            let mut blocks: Vec<f64> = Vec::new();
            for &(coef, ix_k, iy_k) in &tidx {
                for (bx, mx, bxv) in &tx.rows[ax as usize] {
                    if mx & (1 << ix_k) == 0 {
                        continue;
                    }
                    let bxb = &bxv[ix_k * sx..(ix_k + 1) * sx];
                    for (by, my, byv) in &ty.rows[ay as usize] {
                        if my & (1 << iy_k) == 0 {
                            continue;
                        }
                        let Some(&col) = trial.index.get(&[*bx, *by]) else { continue };
                        let byb = &byv[iy_k * sy..(iy_k + 1) * sy];
                        let slot = *pos.entry(col).or_insert_with(|| {
                            cols.push(col);
                            blocks.extend(std::iter::repeat_n(0.0, bs));
                            cols.len() - 1
                        });
                        let out = &mut blocks[slot * bs..(slot + 1) * bs];
                        for ix in 0..ntx {
                            for jx in 0..nrx {
                                let a = coef * bxb[ix * nrx + jx];
                                if a == 0.0 {
                                    continue;
                                }
                                for iy in 0..nty {
                                    let row = (ix * nty + iy) * bc + jx * nry;
                                    for jy in 0..nry {
                                        out[row + jy] += a * byb[iy * nry + jy];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            let mut order: Vec<usize> = (0..cols.len()).collect();
            order.sort_by_key(|&i| cols[i]);
            let mut c = Vec::with_capacity(cols.len());
            let mut v = Vec::with_capacity(blocks.len());
            for i in order {
                c.push(cols[i] as u32);
                v.extend_from_slice(&blocks[i * bs..(i + 1) * bs]);
            }
            (c, v)
        })
        .collect();
    let mut row_ptr = vec![0usize];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (c, v) in rows {
        cols.extend(c);
        vals.extend(v);
        row_ptr.push(cols.len());
    }
    BlockCsr { nbr: test.keys.len(), nbc: trial.keys.len(), br, bc, row_ptr, cols, vals }
}
