//! One-dimensional piecewise-polynomial families on the dyadic hierarchy.
//!
//! Every basis function is a [`Piecewise`]: consecutive polynomial pieces
//! on cells of one dyadic level, each stored in the local coordinate
//! s in [-1, 1]. Five families share that representation:
//!
//! * `Alpert`: orthonormal scaling functions on [0, 1] plus Alpert
//!   multiwavelets up to a maximum level (the hierarchical DG basis).
//! * `Legendre`: orthonormal Legendre polynomials per cell of one level
//!   (the elementwise DG basis).
//! * `Hermite` / `HermiteNodal`: hierarchical and cellwise Hermite
//!   interpolation bases with their point functionals.
//! * `Constant`: the single function 1, so that 1D problems reuse the 2D
//!   tensor machinery with a trivial second factor.

use crate::poly;
use std::sync::OnceLock;
use crate::quadrature::{gauss_legendre, legendre_monomial};
use faer::prelude::*;
use faer::linalg::solvers::DenseSolveCore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Piecewise {
    pub level: u8,
    pub first: u32,
    pub pieces: Vec<Vec<f64>>,
}

impl Piecewise {
    pub fn h(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn support(&self) -> (f64, f64) {
        let h = self.h();
        (self.first as f64 * h, (self.first as f64 + self.pieces.len() as f64) * h)
    }

    /// Cell index on `self.level` holding `x` approached from `side`; may lie
    /// outside [0, 2^level).
    fn cell_of(&self, x: f64, side: Side) -> i64 {
        let t = x * (self.level as f64).exp2();
        match side {
            Side::Plus => t.floor() as i64,
            Side::Minus => t.ceil() as i64 - 1,
        }
    }

    /// One-sided value of the `order`-th derivative at `x` in [0, 1]; zero
    /// outside the support, no periodic wrap.
    pub fn eval(&self, x: f64, side: Side, order: usize) -> f64 {
        let c = self.cell_of(x, side);
        let rel = c - self.first as i64;
        if rel < 0 || rel >= self.pieces.len() as i64 {
            return 0.0;
        }
        let scale = (self.level as f64).exp2();
        let s = 2.0 * (x * scale - c as f64) - 1.0;
        poly::eval_deriv(&self.pieces[rel as usize], s, order) * (2.0 * scale).powi(order as i32)
    }

    /// One-sided evaluation on the periodic unit interval (0 and 1 identified).
    pub fn eval_periodic(&self, x: f64, side: Side, order: usize) -> f64 {
        let x = match side {
            Side::Minus if x <= 0.0 => 1.0,
            Side::Plus if x >= 1.0 => 0.0,
            _ => x,
        };
        self.eval(x, side, order)
    }

    /// Piece boundaries reduced modulo 1, without duplicates.
    pub fn breakpoints(&self) -> Vec<f64> {
        let h = self.h();
        let mut out: Vec<f64> = Vec::with_capacity(self.pieces.len() + 1);
        for i in 0..=self.pieces.len() {
            let mut x = (self.first as f64 + i as f64) * h;
            if x >= 1.0 {
                x -= 1.0;
            }
            if !out.contains(&x) {
                out.push(x);
            }
        }
        out
    }

    /// Polynomial of this function on cell `c` of level `m >= self.level`, in
    /// the local coordinate of that cell; `None` outside the support.
    pub fn restrict(&self, m: u8, c: u32) -> Option<Vec<f64>> {
        debug_assert!(m >= self.level);
        let shift = m - self.level;
        let parent = (c >> shift) as i64 - self.first as i64;
        if parent < 0 || parent >= self.pieces.len() as i64 {
            return None;
        }
        let p = &self.pieces[parent as usize];
        if shift == 0 {
            return Some(p.clone());
        }
        let r = (-(shift as f64)).exp2();
        let pc = (c >> shift) as f64;
        let b = r * (2.0 * c as f64 + 1.0) - 2.0 * pc - 1.0;
        Some(poly::affine(p, r, b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Functional {
    pub x: f64,
    pub side: Side,
    pub order: usize,
}

#[derive(Clone, Debug)]
pub struct Element {
    /// Closed support [a, b].
    pub support: (f64, f64),
    /// Hierarchy level (Alpert/Hermite) or grid level (cellwise families).
    pub level: u8,
    pub funcs: Vec<Piecewise>,
    /// Interpolation functionals, empty for L2 families.
    pub functionals: Vec<Functional>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Alpert,
    Legendre,
    Hermite,
    HermiteNodal,
    Constant,
}

#[derive(Clone, Debug)]
pub struct Family {
    pub kind: FamilyKind,
    pub deg: usize,
    pub level: u8,
    pub npf: usize,
    pub elems: Vec<Element>,
}

/// Two-scale filters of the degree-k Alpert construction.
///
/// Scaling coefficients on two sibling cells (s_L, s_R) map to the parent
/// as s = H0 s_L + H1 s_R and d = G0 s_L + G1 s_R; the 2(k+1) square
/// matrix [H0 H1; G0 G1] is orthogonal.
#[derive(Clone, Debug)]
pub struct Filters {
    pub k: usize,
    pub h: [Vec<f64>; 2],
    pub g: [Vec<f64>; 2],
}

fn shifted_legendre(i: usize, x: f64) -> f64 {
    let p = crate::quadrature::legendre_all(i, 2.0 * x - 1.0);
    (2.0 * i as f64 + 1.0).sqrt() * p[i]
}

impl Filters {
    pub fn new(k: usize) -> Self {
        let n = k + 1;
        let (qx, qw) = gauss_legendre(k + 4);
        let mut h = [vec![0.0; n * n], vec![0.0; n * n]];
        for (c, hc) in h.iter_mut().enumerate() {
            for i in 0..n {
                for ip in 0..n {
                    let mut acc = 0.0;
                    for (s, w) in qx.iter().zip(&qw) {
                        let y = 0.5 * (s + 1.0);
                        acc += 0.5 * w * shifted_legendre(i, 0.5 * (y + c as f64)) * shifted_legendre(ip, y);
                    }
                    hc[i * n + ip] = std::f64::consts::FRAC_1_SQRT_2 * acc;
                }
            }
        }
        // Complete the rows of [H0 H1] to an orthonormal basis of R^{2n}.
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = h[0][i * n..(i + 1) * n].to_vec();
                r.extend_from_slice(&h[1][i * n..(i + 1) * n]);
                r
            })
            .collect();
        let mut grows: Vec<Vec<f64>> = Vec::new();
        for m in 0..2 * n {
            if grows.len() == n {
                break;
            }
            let mut v = vec![0.0; 2 * n];
            v[m] = 1.0;
            for _ in 0..2 {
                for r in rows.iter().chain(grows.iter()) {
                    let dot: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(r).for_each(|(a, b)| *a -= dot * b);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-3 {
                v.iter_mut().for_each(|a| *a /= norm);
                grows.push(v);
            }
        }
        assert_eq!(grows.len(), n, "filter completion failed");
        let mut g = [vec![0.0; n * n], vec![0.0; n * n]];
        for (i, r) in grows.iter().enumerate() {
            g[0][i * n..(i + 1) * n].copy_from_slice(&r[..n]);
            g[1][i * n..(i + 1) * n].copy_from_slice(&r[n..]);
        }
        rows.clear();
        Filters { k, h, g }
    }
}

/// Monomial coefficients (in s) of sqrt(2i+1) P_i(s), i = 0..=k.
fn scaled_legendre_monomials(k: usize) -> Vec<Vec<f64>> {
    (0..=k)
        .map(|i| {
            let s = (2.0 * i as f64 + 1.0).sqrt();
            legendre_monomial(i).into_iter().map(|c| c * s).collect()
        })
        .collect()
}

/// Reference Hermite polynomials on [-1, 1] of degree m = 2r + 1, indexed
/// group * (r + 1) + a where group 0 is s = -1 and group 1 is s = +1; the
/// a-th s-derivative at its own endpoint is 1, every other jet entry is 0.
pub fn hermite_reference(m: usize) -> Vec<Vec<f64>> {
    assert!(m % 2 == 1, "Hermite degree must be odd");
    let r = (m - 1) / 2;
    let n = m + 1;
    let mut a = Mat::<f64>::zeros(n, n);
    for (g, s0) in [-1.0f64, 1.0].iter().enumerate() {
        for b in 0..=r {
            let row = g * (r + 1) + b;
            for p in b..n {
                let mut f = 1.0;
                for t in 0..b {
                    f *= (p - t) as f64;
                }
                a[(row, p)] = f * s0.powi((p - b) as i32);
            }
        }
    }
    let inv = a.partial_piv_lu().inverse();
    (0..n).map(|col| (0..n).map(|p| inv[(p, col)]).collect()).collect()
}

impl Family {
    pub fn constant() -> Self {
        Family {
            kind: FamilyKind::Constant,
            deg: 0,
            level: 0,
            npf: 1,
            elems: vec![Element {
                support: (0.0, 1.0),
                level: 0,
                funcs: vec![Piecewise { level: 0, first: 0, pieces: vec![vec![1.0]] }],
                functionals: vec![Functional { x: 0.5, side: Side::Plus, order: 0 }],
            }],
        }
    }

    /// Orthonormal Alpert basis of degree k up to level n.
    pub fn alpert(k: usize, n: u8) -> Self {
        let filters = Filters::new(k);
        let leg = scaled_legendre_monomials(k);
        let np = k + 1;
        let mut elems = Vec::with_capacity(1 << n);
        elems.push(Element {
            support: (0.0, 1.0),
            level: 0,
            funcs: leg
                .iter()
                .map(|p| Piecewise { level: 0, first: 0, pieces: vec![p.clone()] })
                .collect(),
            functionals: Vec::new(),
        });
        // Mother wavelet pieces on the left/right halves, unscaled.
        let mother: Vec<[Vec<f64>; 2]> = (0..np)
            .map(|i| {
                let piece = |b: usize| {
                    let mut out = vec![0.0; np];
                    for ip in 0..np {
                        let c = filters.g[b][i * np + ip];
                        for (o, v) in out.iter_mut().zip(&leg[ip]) {
                            *o += c * v;
                        }
                    }
                    out
                };
                [piece(0), piece(1)]
            })
            .collect();
        for l in 1..=n {
            let scale = (l as f64 / 2.0).exp2();
            for j in 0..crate::mesh::positions(l) {
                let funcs = mother
                    .iter()
                    .map(|m| Piecewise {
                        level: l,
                        first: 2 * j,
                        pieces: m.iter().map(|p| p.iter().map(|c| c * scale).collect()).collect(),
                    })
                    .collect();
                elems.push(Element {
                    support: crate::mesh::elem_support(crate::mesh::elem_index(l, j)),
                    level: l,
                    funcs,
                    functionals: Vec::new(),
                });
            }
        }
        Family { kind: FamilyKind::Alpert, deg: k, level: n, npf: np, elems }
    }

    /// Orthonormal Legendre basis of degree k on each cell of level n.
    pub fn legendre(k: usize, n: u8) -> Self {
        let leg = scaled_legendre_monomials(k);
        let scale = (n as f64 / 2.0).exp2();
        let h = (-(n as f64)).exp2();
        let elems = (0..1u32 << n)
            .map(|c| Element {
                support: (c as f64 * h, (c + 1) as f64 * h),
                level: n,
                funcs: leg
                    .iter()
                    .map(|p| Piecewise {
                        level: n,
                        first: c,
                        pieces: vec![p.iter().map(|v| v * scale).collect()],
                    })
                    .collect(),
                functionals: Vec::new(),
            })
            .collect();
        Family { kind: FamilyKind::Legendre, deg: k, level: n, npf: k + 1, elems }
    }

    /// Hierarchical Hermite interpolation basis of odd degree m up to level n.
    pub fn hermite(m: usize, n: u8) -> Self {
        let refp = hermite_reference(m);
        let r = (m - 1) / 2;
        let np = m + 1;
        let scaled = |a: usize, g: usize, level: u8| -> Vec<f64> {
            let half_h = 0.5 * (-(level as f64)).exp2();
            refp[g * (r + 1) + a].iter().map(|c| c * half_h.powi(a as i32)).collect()
        };
        let mut elems = Vec::with_capacity(1 << n);
        let mut funcs = Vec::with_capacity(np);
        let mut functionals = Vec::with_capacity(np);
        for g in 0..2 {
            for a in 0..=r {
                funcs.push(Piecewise { level: 0, first: 0, pieces: vec![scaled(a, g, 0)] });
                let (x, side) = if g == 0 { (0.0, Side::Plus) } else { (1.0, Side::Minus) };
                functionals.push(Functional { x, side, order: a });
            }
        }
        elems.push(Element { support: (0.0, 1.0), level: 0, funcs, functionals });
        for l in 1..=n {
            for j in 0..crate::mesh::positions(l) {
                let mid = (2 * j + 1) as f64 * (-(l as f64)).exp2();
                let zero = vec![0.0; np];
                let mut funcs = Vec::with_capacity(np);
                let mut functionals = Vec::with_capacity(np);
                for g in 0..2 {
                    for a in 0..=r {
                        // m^- data lives on the left child (its right end), m^+ on the right child.
                        let pieces = if g == 0 {
                            vec![scaled(a, 1, l), zero.clone()]
                        } else {
                            vec![zero.clone(), scaled(a, 0, l)]
                        };
                        funcs.push(Piecewise { level: l, first: 2 * j, pieces });
                        let side = if g == 0 { Side::Minus } else { Side::Plus };
                        functionals.push(Functional { x: mid, side, order: a });
                    }
                }
                elems.push(Element {
                    support: crate::mesh::elem_support(crate::mesh::elem_index(l, j)),
                    level: l,
                    funcs,
                    functionals,
                });
            }
        }
        Family { kind: FamilyKind::Hermite, deg: m, level: n, npf: np, elems }
    }

    /// Cellwise Hermite interpolation basis of odd degree m on level n.
    pub fn hermite_nodal(m: usize, n: u8) -> Self {
        let refp = hermite_reference(m);
        let r = (m - 1) / 2;
        let h = (-(n as f64)).exp2();
        let elems = (0..1u32 << n)
            .map(|c| {
                let mut funcs = Vec::new();
                let mut functionals = Vec::new();
                for g in 0..2 {
                    for a in 0..=r {
                        let p = refp[g * (r + 1) + a].iter().map(|v| v * (0.5 * h).powi(a as i32)).collect();
                        funcs.push(Piecewise { level: n, first: c, pieces: vec![p] });
                        let (x, side) = if g == 0 {
                            (c as f64 * h, Side::Plus)
                        } else {
                            ((c + 1) as f64 * h, Side::Minus)
                        };
                        functionals.push(Functional { x, side, order: a });
                    }
                }
                Element { support: (c as f64 * h, (c + 1) as f64 * h), level: n, funcs, functionals }
            })
            .collect();
        Family { kind: FamilyKind::HermiteNodal, deg: m, level: n, npf: m + 1, elems }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn is_hierarchical(&self) -> bool {
        matches!(self.kind, FamilyKind::Alpert | FamilyKind::Hermite)
    }
}

/// Derivative table d^o/ds^o of sqrt(2i+1) P_i(s) for o = 0..=omax, indexed [o][i].
pub fn legendre_jet(k: usize, s: f64, omax: usize) -> Vec<Vec<f64>> {
    static CACHE: OnceLock<Vec<Vec<Vec<f64>>>> = OnceLock::new();
    const KMAX: usize = 8;
    let owned;
    let leg = if k <= KMAX {
        &CACHE.get_or_init(|| (0..=KMAX).map(scaled_legendre_monomials).collect())[k]
    } else {
        owned = scaled_legendre_monomials(k);
        &owned
    };
    (0..=omax).map(|o| leg.iter().map(|p| poly::eval_deriv(p, s, o)).collect()).collect()
}

/// Precomputed Alpert basis of degree k up to level n with point evaluation.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub k: usize,
    pub max_level: u8,
    pub family: Family,
    pub filters: Filters,
}

impl BasisTable {
    pub fn new(k: usize, max_level: u8) -> Self {
        BasisTable { k, max_level, family: Family::alpert(k, max_level), filters: Filters::new(k) }
    }

    /// Value of the `order`-th derivative of v^j_{i,l} at x, one-sided from
    /// `side`; zero outside the support.
    pub fn eval_basis(&self, i: usize, l: u8, j: u32, x: f64, order: usize, side: Side) -> f64 {
        let e = crate::mesh::elem_index(l, j);
        self.family.elems[e].funcs[i].eval(x, side, order)
    }
}
