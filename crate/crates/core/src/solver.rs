//! Linear operators with shifted solves (I - g L) x = b.
//!
//! Uniform cellwise spaces are translation invariant, so their operators
//! are block circulant and both products and solves go through the FFT.
//! Hierarchical spaces use a sparse LU from faer, or restarted GMRES with
//! a block-Jacobi preconditioner.

use crate::error::{Error, Result};
use crate::forms::BlockCsr;
use crate::space::{Repr, Space};
use faer::linalg::solvers::DenseSolveCore;
use faer::prelude::*;
use faer::{Col, ColRef};
use faer::sparse::{SparseColMat, Triplet};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex};

/// Relative residual required of every shifted solve.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    #[default]
    Direct,
    Krylov,
}

/// Block circulant structure: the symbol per frequency, [freq][i][j].
struct Circulant {
    n: [usize; 2],
    b: usize,
    symbol: Vec<Complex64>,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
}

impl Circulant {
    fn from_csr(m: &BlockCsr, n: [usize; 2]) -> Self {
        let b = m.br;
        let nf = n[0] * n[1];
        let mut symbol = vec![Complex64::new(0.0, 0.0); nf * b * b];
        // Row (0, 0): column (dx, dy) holds the stencil block for offset (dx, dy).
        for p in m.row_ptr[0]..m.row_ptr[1] {
            let c = m.cols[p] as usize;
            let (dx, dy) = (c / n[1], c % n[1]);
            let blk = &m.vals[p * b * b..(p + 1) * b * b];
            for kx in 0..n[0] {
                for ky in 0..n[1] {
                    let ph = 2.0 * std::f64::consts::PI * ((kx * dx) as f64 / n[0] as f64 + (ky * dy) as f64 / n[1] as f64);
                    let w = Complex64::new(ph.cos(), ph.sin());
                    let s = &mut symbol[(kx * n[1] + ky) * b * b..(kx * n[1] + ky + 1) * b * b];
                    for (o, v) in s.iter_mut().zip(blk) {
                        *o += w * v;
                    }
                }
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = [planner.plan_fft_forward(n[0]), planner.plan_fft_forward(n[1])];
        let inv = [planner.plan_fft_inverse(n[0]), planner.plan_fft_inverse(n[1])];
        Circulant { n, b, symbol, fwd, inv }
    }

    /// Component-major transform of blocked data [cell][i] into [i][freq].
    fn transform(&self, data: &[f64]) -> Vec<Complex64> {
        let (nf, b) = (self.n[0] * self.n[1], self.b);
        let mut out = vec![Complex64::new(0.0, 0.0); nf * b];
        for c in 0..nf {
            for i in 0..b {
                out[i * nf + c] = Complex64::new(data[c * b + i], 0.0);
            }
        }
        self.fft2(&mut out, &self.fwd);
        out
    }

    fn untransform(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        let (nf, b) = (self.n[0] * self.n[1], self.b);
        self.fft2(&mut spec, &self.inv);
        let scale = 1.0 / nf as f64;
        let mut out = vec![0.0; nf * b];
        for c in 0..nf {
            for i in 0..b {
                out[c * b + i] = spec[i * nf + c].re * scale;
            }
        }
        out
    }

    fn fft2(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 2]) {
        let [nx, ny] = self.n;
        let nf = nx * ny;
        let mut col = vec![Complex64::new(0.0, 0.0); nx];
        for comp in data.chunks_mut(nf) {
            if ny > 1 {
                for row in comp.chunks_mut(ny) {
                    plans[1].process(row);
                }
            }
            for y in 0..ny {
                for x in 0..nx {
                    col[x] = comp[x * ny + y];
                }
                plans[0].process(&mut col);
                for x in 0..nx {
                    comp[x * ny + y] = col[x];
                }
            }
        }
    }

    /// Per-frequency b x b complex matrices applied to transformed data.
    fn multiply(&self, mats: &[Complex64], spec: &[Complex64]) -> Vec<Complex64> {
        let (nf, b) = (self.n[0] * self.n[1], self.b);
        let mut out = vec![Complex64::new(0.0, 0.0); nf * b];
        for f in 0..nf {
            let m = &mats[f * b * b..(f + 1) * b * b];
            for i in 0..b {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..b {
                    acc += m[i * b + j] * spec[j * nf + f];
                }
                out[i * nf + f] = acc;
            }
        }
        out
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let s = self.transform(x);
        self.untransform(self.multiply(&self.symbol, &s))
    }

    /// Inverses of I - g * symbol per frequency.
    fn shifted_inverses(&self, g: f64) -> Result<Vec<Complex64>> {
        let (nf, b) = (self.n[0] * self.n[1], self.b);
        let mut out = vec![Complex64::new(0.0, 0.0); nf * b * b];
        for f in 0..nf {
            let s = &self.symbol[f * b * b..(f + 1) * b * b];
            let m = Mat::<Complex64>::from_fn(b, b, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                Complex64::new(id, 0.0) - s[i * b + j] * g
            });
            let inv = m.partial_piv_lu().inverse();
            for i in 0..b {
                for j in 0..b {
                    let v = inv[(i, j)];
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::Solve(format!("singular shifted symbol at frequency {f}")));
                    }
                    out[f * b * b + i * b + j] = v;
                }
            }
        }
        Ok(out)
    }
}

enum Factor {
    Circ(Vec<Complex64>),
    Sparse(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Dense(Mat<f64>),
    Jacobi(Vec<Vec<f64>>),
}

/// Discrete linear (dispersive) operator on an active space.
pub struct LinearOperator {
    pub space: Arc<Space>,
    pub mat: BlockCsr,
    pub method: SolveMethod,
    circ: Option<Circulant>,
    factors: Mutex<Vec<(u64, Arc<Factor>)>>,
}

impl std::fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearOperator").field("dof", &self.mat.nrows()).field("method", &self.method).finish()
    }
}

impl LinearOperator {
    pub fn new(space: Arc<Space>, mat: BlockCsr, method: SolveMethod) -> Self {
        let circ = (space.repr == Repr::Nodal && method == SolveMethod::Direct).then(|| {
            let n = [space.fx.len(), space.fy.len()];
            Circulant::from_csr(&mat, n)
        });
        LinearOperator { space, mat, method, circ, factors: Mutex::new(Vec::new()) }
    }

    pub fn dof(&self) -> usize {
        self.mat.nrows()
    }

    /// Multiplies the operator by s (scaled dispersion sigma * L).
    pub fn scaled(self, s: f64) -> Self {
        let mut mat = self.mat;
        mat.scale(s);
        Self::new(self.space, mat, self.method)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.circ {
            Some(c) if self.mat.nbr > 64 => c.apply(x),
            _ => self.mat.apply(x),
        }
    }

    fn shifted_apply(&self, g: f64, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.mat.apply_add(-g, x, &mut y);
        y
    }

    fn factor(&self, g: f64) -> Result<Arc<Factor>> {
        let key = g.to_bits();
        if let Some((_, f)) = self.factors.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Ok(f.clone());
        }
        let f = Arc::new(self.build_factor(g)?);
        let mut cache = self.factors.lock().unwrap();
        if cache.len() > 8 {
            cache.remove(0);
        }
        cache.push((key, f.clone()));
        Ok(f)
    }

    fn build_factor(&self, g: f64) -> Result<Factor> {
        let n = self.dof();
        if self.method == SolveMethod::Krylov {
            let b = self.mat.br;
            let inv = self
                .mat
                .diag_blocks()
                .into_iter()
                .map(|d| {
                    let m = Mat::<f64>::from_fn(b, b, |i, j| if i == j { 1.0 } else { 0.0 } - g * d[i * b + j]);
                    let inv = m.partial_piv_lu().inverse();
                    (0..b * b).map(|t| inv[(t / b, t % b)]).collect()
                })
                .collect();
            return Ok(Factor::Jacobi(inv));
        }
        if let Some(c) = &self.circ {
            return Ok(Factor::Circ(c.shifted_inverses(g)?));
        }
        // Dense inverse once fill makes sparse LU pointless; filled straight
        // from the blocks to avoid a triplet copy of a nearly full matrix.
        if (self.mat.nnz() + n) as f64 > 0.15 * (n * n) as f64 {
            let (m, bs) = (&self.mat, self.mat.br * self.mat.bc);
            let mut d = Mat::<f64>::identity(n, n);
            for r in 0..m.nbr {
                for p in m.row_ptr[r]..m.row_ptr[r + 1] {
                    let c = m.cols[p] as usize;
                    for i in 0..m.br {
                        for j in 0..m.bc {
                            d[(r * m.br + i, c * m.bc + j)] -= g * m.vals[p * bs + i * m.bc + j];
                        }
                    }
                }
            }
            return Ok(Factor::Dense(d.partial_piv_lu().inverse()));
        }
        let mut trip: Vec<Triplet<usize, usize, f64>> =
            self.mat.triplets(0.0).into_iter().map(|(i, j, v)| Triplet::new(i, j, -g * v)).collect();
        trip.extend((0..n).map(|i| Triplet::new(i, i, 1.0)));
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::Solve(format!("sparse assembly failed: {e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::Solve(format!("sparse LU failed: {e:?}")))?;
        Ok(Factor::Sparse(lu))
    }

    fn apply_factor(&self, f: &Factor, b: &[f64]) -> Vec<f64> {
        match f {
            Factor::Circ(inv) => {
                let c = self.circ.as_ref().expect("circulant factor without structure");
                c.untransform(c.multiply(inv, &c.transform(b)))
            }
            Factor::Sparse(lu) => {
                let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
                let x = lu.solve(&rhs);
                (0..b.len()).map(|i| x[(i, 0)]).collect()
            }
            Factor::Dense(inv) => {
                let x: Col<f64> = inv * ColRef::from_slice(b);
                (0..b.len()).map(|i| x[i]).collect()
            }
            Factor::Jacobi(inv) => {
                let bs = self.mat.br;
                let mut x = vec![0.0; b.len()];
                for (r, m) in inv.iter().enumerate() {
                    for i in 0..bs {
                        x[r * bs + i] = (0..bs).map(|j| m[i * bs + j] * b[r * bs + j]).sum();
                    }
                }
                x
            }
        }
    }

    /// Solves (I - g L) x = b with relative residual at most [`SOLVE_TOL`].
    pub fn solve_shifted(&self, g: f64, b: &[f64]) -> Result<Vec<f64>> {
        if g == 0.0 {
            return Ok(b.to_vec());
        }
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let f = self.factor(g)?;
        if let Factor::Jacobi(_) = *f {
            return self.gmres(g, b, &f, 60, 2000);
        }
        let mut x = self.apply_factor(&f, b);
        // A couple of refinement sweeps absorb roundoff of the factorization.
        for _ in 0..3 {
            let ax = self.shifted_apply(g, &x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            let rn = norm(&r);
            if rn <= SOLVE_TOL * bn {
                return Ok(x);
            }
            let dx = self.apply_factor(&f, &r);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        }
        let ax = self.shifted_apply(g, &x);
        let rn = norm(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>());
        if rn <= SOLVE_TOL * bn {
            Ok(x)
        } else {
            Err(Error::Solve(format!("direct solve residual {:.3e} exceeds tolerance", rn / bn)))
        }
    }

    /// Right-preconditioned restarted GMRES.
    fn gmres(&self, g: f64, b: &[f64], pre: &Factor, restart: usize, max_iter: usize) -> Result<Vec<f64>> {
        let n = b.len();
        let bn = norm(b);
        let mut x = vec![0.0; n];
        let mut iters = 0;
        loop {
            let ax = self.shifted_apply(g, &x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            let beta = norm(&r);
            if beta <= SOLVE_TOL * bn {
                return Ok(x);
            }
            if iters >= max_iter {
                return Err(Error::Solve(format!("GMRES stalled at relative residual {:.3e} after {iters} iterations", beta / bn)));
            }
            let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
            let mut z: Vec<Vec<f64>> = Vec::new();
            let mut h = vec![vec![0.0; restart]; restart + 1];
            let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
            let mut e = vec![0.0; restart + 1];
            e[0] = beta;
            let mut m = 0;
            while m < restart && iters < max_iter {
                let zj = self.apply_factor(pre, &v[m]);
                let mut w = self.shifted_apply(g, &zj);
                z.push(zj);
                for i in 0..=m {
                    let hij = dot(&w, &v[i]);
                    h[i][m] = hij;
                    w.iter_mut().zip(&v[i]).for_each(|(a, q)| *a -= hij * q);
                }
                let wn = norm(&w);
                h[m + 1][m] = wn;
                for i in 0..m {
                    let t = cs[i] * h[i][m] + sn[i] * h[i + 1][m];
                    h[i + 1][m] = -sn[i] * h[i][m] + cs[i] * h[i + 1][m];
                    h[i][m] = t;
                }
                let d = (h[m][m] * h[m][m] + h[m + 1][m] * h[m + 1][m]).sqrt();
                cs[m] = h[m][m] / d;
                sn[m] = h[m + 1][m] / d;
                h[m][m] = d;
                h[m + 1][m] = 0.0;
                e[m + 1] = -sn[m] * e[m];
                e[m] *= cs[m];
                iters += 1;
                m += 1;
                if e[m].abs() <= 0.1 * SOLVE_TOL * bn || wn == 0.0 {
                    break;
                }
                v.push(w.iter().map(|t| t / wn).collect());
            }
            let mut y = vec![0.0; m];
            for i in (0..m).rev() {
                let s: f64 = (i + 1..m).map(|j| h[i][j] * y[j]).sum();
                y[i] = (e[i] - s) / h[i][i];
            }
            for (j, yj) in y.iter().enumerate() {
                x.iter_mut().zip(&z[j]).for_each(|(a, q)| *a += yj * q);
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
