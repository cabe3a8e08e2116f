//! Dyadic index algebra on the unit interval and square.
//!
//! Wavelet blocks are labelled by a level vector `l` and a translation
//! vector `j` with `0 <= j_m <= max(2^(l_m - 1) - 1, 0)`. Level 0 carries the
//! scaling functions on [0, 1], level `l >= 1` the wavelets supported on
//! cell `j` of the level `l - 1` grid.

use crate::error::{Error, Result};
use std::collections::HashSet;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElemKey {
    pub d: u8,
    pub l: [u8; 2],
    pub j: [u32; 2],
}

impl ElemKey {
    pub fn new1(l: u8, j: u32) -> Self {
        ElemKey { d: 1, l: [l, 0], j: [j, 0] }
    }

    pub fn new2(l: [u8; 2], j: [u32; 2]) -> Self {
        ElemKey { d: 2, l, j }
    }

    pub fn root(d: usize) -> Self {
        ElemKey { d: d as u8, l: [0, 0], j: [0, 0] }
    }

    pub fn level_sum(&self) -> u32 {
        self.l[..self.d as usize].iter().map(|&l| l as u32).sum()
    }

    pub fn level_max(&self) -> u8 {
        *self.l[..self.d as usize].iter().max().unwrap()
    }

    pub fn is_valid(&self) -> bool {
        (0..self.d as usize).all(|m| self.j[m] < positions(self.l[m]))
    }

    /// Flat 1D element index along dimension `m`.
    pub fn elem(&self, m: usize) -> usize {
        elem_index(self.l[m], self.j[m])
    }

    pub fn from_elems(d: usize, ex: usize, ey: usize) -> Self {
        let (lx, jx) = elem_level(ex);
        let (ly, jy) = elem_level(ey);
        ElemKey { d: d as u8, l: [lx, ly], j: [jx, jy] }
    }

    fn sort_key(&self) -> (u32, [u8; 2], [u32; 2]) {
        (self.level_sum(), self.l, self.j)
    }
}

impl fmt::Display for ElemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.d == 1 {
            write!(f, "{} {}", self.l[0], self.j[0])
        } else {
            write!(f, "{} {} {} {}", self.l[0], self.l[1], self.j[0], self.j[1])
        }
    }
}

/// Number of translations at level `l`.
pub fn positions(l: u8) -> u32 {
    if l == 0 {
        1
    } else {
        1u32 << (l - 1)
    }
}

/// Flat index of 1D element (l, j): 0 for the root, 2^(l-1) + j otherwise.
pub fn elem_index(l: u8, j: u32) -> usize {
    if l == 0 {
        0
    } else {
        (1usize << (l - 1)) + j as usize
    }
}

pub fn elem_level(e: usize) -> (u8, u32) {
    if e == 0 {
        (0, 0)
    } else {
        let l = (usize::BITS - e.leading_zeros()) as u8;
        (l, (e - (1usize << (l - 1))) as u32)
    }
}

/// Closed support [a, b] of the 1D element with flat index `e`.
pub fn elem_support(e: usize) -> (f64, f64) {
    let (l, j) = elem_level(e);
    if l == 0 {
        (0.0, 1.0)
    } else {
        let h = 1.0 / positions(l) as f64;
        (j as f64 * h, (j + 1) as f64 * h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellId {
    pub n: u8,
    pub j: u32,
}

/// Interval (2^-n j, 2^-n (j+1)] of cell j on level n.
pub fn cell_interval(n: u8, j: u32) -> Result<(f64, f64)> {
    if n > 30 || (j as u64) >= (1u64 << n) {
        return Err(Error::Domain(format!("cell index {j} out of range on level {n}")));
    }
    let h = (-(n as f64)).exp2();
    Ok((j as f64 * h, (j as f64 + 1.0) * h))
}

/// Children of `key` along dimension `dim`; empty when the cap is exceeded.
pub fn children(key: &ElemKey, dim: usize, max_level: u8) -> Vec<ElemKey> {
    let l = key.l[dim];
    if l >= max_level {
        log::warn!("refinement of {key} in dim {dim} capped at level {max_level}");
        return Vec::new();
    }
    let mut out = Vec::with_capacity(2);
    if l == 0 {
        let mut c = *key;
        c.l[dim] = 1;
        c.j[dim] = 0;
        out.push(c);
    } else {
        for b in 0..2 {
            let mut c = *key;
            c.l[dim] = l + 1;
            c.j[dim] = 2 * key.j[dim] + b;
            out.push(c);
        }
    }
    out
}

pub fn parent(key: &ElemKey, dim: usize) -> Option<ElemKey> {
    let l = key.l[dim];
    if l == 0 {
        return None;
    }
    let mut p = *key;
    p.l[dim] = l - 1;
    p.j[dim] = if l == 1 { 0 } else { key.j[dim] / 2 };
    Some(p)
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridKind {
    Full(u8),
    Sparse(u8),
    /// Explicit key set with its level cap.
    Adaptive { max_level: u8, keys: Vec<ElemKey> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceSpec {
    pub kind: GridKind,
    pub k: usize,
    pub d: usize,
}

impl SpaceSpec {
    pub fn full(d: usize, n: u8, k: usize) -> Self {
        SpaceSpec { kind: GridKind::Full(n), k, d }
    }

    pub fn sparse(d: usize, n: u8, k: usize) -> Self {
        SpaceSpec { kind: GridKind::Sparse(n), k, d }
    }

    pub fn max_level(&self) -> u8 {
        match &self.kind {
            GridKind::Full(n) | GridKind::Sparse(n) => *n,
            GridKind::Adaptive { max_level, .. } => *max_level,
        }
    }

    pub fn dof(&self) -> usize {
        enumerate_space(self).len() * (self.k + 1).pow(self.d as u32)
    }
}

pub fn sort_keys(keys: &mut [ElemKey]) {
    keys.sort_by_key(|k| k.sort_key());
}

/// Keys of the space ordered by (|l|_1, l, j).
pub fn enumerate_space(spec: &SpaceSpec) -> Vec<ElemKey> {
    let d = spec.d;
    let mut keys = Vec::new();
    match &spec.kind {
        GridKind::Full(n) | GridKind::Sparse(n) => {
            let sparse = matches!(spec.kind, GridKind::Sparse(_));
            let ly_max = if d == 2 { *n } else { 0 };
            for lx in 0..=*n {
                for ly in 0..=ly_max {
                    if sparse && (lx as u32 + ly as u32) > *n as u32 {
                        continue;
                    }
                    for jx in 0..positions(lx) {
                        for jy in 0..positions(ly) {
                            keys.push(ElemKey { d: d as u8, l: [lx, ly], j: [jx, jy] });
                        }
                    }
                }
            }
        }
        GridKind::Adaptive { keys: k, .. } => keys.extend_from_slice(k),
    }
    sort_keys(&mut keys);
    keys
}

/// True when every non-root key has all its parents in the set.
pub fn is_downward_closed(keys: &[ElemKey]) -> bool {
    let set: HashSet<ElemKey> = keys.iter().copied().collect();
    keys.iter().all(|k| {
        (0..k.d as usize).all(|m| parent(k, m).is_none_or(|p| set.contains(&p)))
    })
}

/// Adds all missing ancestors of the given keys.
pub fn close_downward(keys: &mut Vec<ElemKey>) {
    let mut set: HashSet<ElemKey> = keys.iter().copied().collect();
    let mut stack: Vec<ElemKey> = keys.clone();
    while let Some(k) = stack.pop() {
        for m in 0..k.d as usize {
            if let Some(p) = parent(&k, m) {
                if set.insert(p) {
                    keys.push(p);
                    stack.push(p);
                }
            }
        }
    }
    sort_keys(keys);
}

/// One line per key: "l1 [l2] j1 [j2]".
pub fn dump_keys(keys: &[ElemKey]) -> String {
    let mut s = String::new();
    for k in keys {
        s.push_str(&k.to_string());
        s.push('\n');
    }
    s
}
