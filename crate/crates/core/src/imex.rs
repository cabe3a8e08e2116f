//! Third-order IMEX Runge-Kutta, the SSP3(4,3,3) scheme: the
//! linear dispersive part is implicit (diagonally implicit stages), the
//! convection and source are explicit. The mass matrix is the identity.

use crate::error::Result;
use crate::solver::LinearOperator;

#[derive(Clone, Debug, PartialEq)]
pub struct Tableau {
    /// Implicit coefficients, lower triangular.
    pub a: Vec<Vec<f64>>,
    /// Explicit coefficients, strictly lower triangular.
    pub at: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub bt: Vec<f64>,
    pub c: Vec<f64>,
    pub ct: Vec<f64>,
}

impl Tableau {
    pub fn ssp3_433() -> Self {
        let al = 0.24169426078821;
        let be = 0.06042356519705;
        let et = 0.12915286960590;
        let a = vec![
            vec![al, 0.0, 0.0, 0.0],
            vec![-al, al, 0.0, 0.0],
            vec![0.0, 1.0 - al, al, 0.0],
            vec![be, et, 0.5 - be - et - al, al],
        ];
        let at = vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.25, 0.25, 0.0],
        ];
        let b = vec![0.0, 1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];
        let c = a.iter().map(|r| r.iter().sum()).collect();
        let ct = at.iter().map(|r| r.iter().sum()).collect();
        Tableau { a, at, bt: b.clone(), b, c, ct }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Stability function of the implicit part, R(z) = 1 + z b^T (I - zA)^{-1} 1.
    pub fn stability(&self, z: f64) -> f64 {
        let s = self.stages();
        let mut y = vec![0.0; s];
        for i in 0..s {
            let r: f64 = 1.0 + z * (0..i).map(|j| self.a[i][j] * y[j]).sum::<f64>();
            y[i] = r / (1.0 - z * self.a[i][i]);
        }
        1.0 + z * (0..s).map(|i| self.b[i] * y[i]).sum::<f64>()
    }

    fn explicit_needed(&self, i: usize) -> bool {
        self.bt[i] != 0.0 || (i + 1..self.stages()).any(|m| self.at[m][i] != 0.0)
    }
}

/// Implicit linear part: products and shifted solves (I - g L) x = b.
pub trait Implicit {
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn solve_shifted(&self, g: f64, b: &[f64]) -> Result<Vec<f64>>;
}

impl Implicit for LinearOperator {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        LinearOperator::apply(self, x)
    }

    fn solve_shifted(&self, g: f64, b: &[f64]) -> Result<Vec<f64>> {
        LinearOperator::solve_shifted(self, g, b)
    }
}

/// Scalar multiple of the identity, lambda * I.
#[derive(Clone, Copy, Debug)]
pub struct ScalarOp(pub f64);

impl Implicit for ScalarOp {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.0 * v).collect()
    }

    fn solve_shifted(&self, g: f64, b: &[f64]) -> Result<Vec<f64>> {
        Ok(b.iter().map(|v| v / (1.0 - g * self.0)).collect())
    }
}

/// Explicit right-hand side N(u, t); `None` when identically zero.
pub type Explicit<'a> = Option<&'a mut dyn FnMut(&[f64], f64) -> Result<Vec<f64>>>;

/// One step from t to t + dt.
pub fn imex_step(u: &[f64], t: f64, dt: f64, l: &dyn Implicit, mut exp: Explicit, tab: &Tableau) -> Result<Vec<f64>> {
    let s = tab.stages();
    let n = u.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut e: Vec<Option<Vec<f64>>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut rhs = u.to_vec();
        for j in 0..i {
            let (aij, atij) = (tab.a[i][j], tab.at[i][j]);
            if aij != 0.0 {
                rhs.iter_mut().zip(&k[j]).for_each(|(r, q)| *r += dt * aij * q);
            }
            if atij != 0.0 {
                if let Some(ej) = &e[j] {
                    rhs.iter_mut().zip(ej).for_each(|(r, q)| *r += dt * atij * q);
                }
            }
        }
        let ui = if tab.a[i][i] != 0.0 { l.solve_shifted(dt * tab.a[i][i], &rhs)? } else { rhs };
        k.push(l.apply(&ui));
        let ei = match exp.as_mut() {
            Some(f) if tab.explicit_needed(i) => Some(f(&ui, t + tab.ct[i] * dt)?),
            _ => None,
        };
        e.push(ei);
    }
    let mut out = u.to_vec();
    for i in 0..s {
        if tab.b[i] != 0.0 {
            out.iter_mut().zip(&k[i]).for_each(|(o, q)| *o += dt * tab.b[i] * q);
        }
        if let Some(ei) = &e[i] {
            if tab.bt[i] != 0.0 {
                out.iter_mut().zip(ei).for_each(|(o, q)| *o += dt * tab.bt[i] * q);
            }
        }
    }
    debug_assert_eq!(out.len(), n);
    Ok(out)
}

/// Integrates from t0 to t1 with a uniform step close to dt.
pub fn integrate(u0: &[f64], t0: f64, t1: f64, dt: f64, l: &dyn Implicit, mut exp: Explicit, tab: &Tableau) -> Result<Vec<f64>> {
    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let mut u = u0.to_vec();
    for n in 0..steps {
        let e: Explicit = match exp.as_mut() {
            Some(f) => Some(&mut **f),
            None => None,
        };
        u = imex_step(&u, t0 + n as f64 * h, h, l, e, tab)?;
    }
    Ok(u)
}
