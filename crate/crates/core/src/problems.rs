//! Problem library: manufactured solutions and soliton initial data.
//!
//! All problems live on the unit interval or square with periodic
//! boundaries and solve
//!   u_t + f(u)_x + sigma (u_xxx [+ u_xyy]) = s.

use crate::error::{Error, Result};
use crate::interp::PolyFlux;
use std::f64::consts::PI;
use std::sync::Arc;

/// Scalar field of (x, y, t); y is ignored in 1D.
pub type Field = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Kdv,
    Zk,
    /// u_t + u_xyy = 0
    ZkSimplified,
}

impl Equation {
    pub fn dim(self) -> usize {
        match self {
            Equation::Kdv => 1,
            _ => 2,
        }
    }

    pub fn min_degree(self) -> usize {
        match self {
            Equation::ZkSimplified => 1,
            _ => 2,
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub equation: Equation,
    pub flux: PolyFlux,
    pub sigma: f64,
    pub initial: Field,
    pub exact: Option<Field>,
    /// d/dy of the exact solution, when available.
    pub exact_dy: Option<Field>,
    pub source: Option<Field>,
    /// Named parameters after defaults were applied.
    pub params: Vec<(String, f64)>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("equation", &self.equation)
            .field("flux", &self.flux)
            .field("sigma", &self.sigma)
            .field("params", &self.params)
            .finish()
    }
}

pub const PROBLEMS: &[&str] = &[
    "kdv_manufactured",
    "kdv_single",
    "kdv_double",
    "kdv_triple",
    "zk_manufactured",
    "zk_simplified",
    "zk_pulse",
    "zk_two_pulse_direct",
    "zk_two_pulse_deviated",
    "zk_lump",
];

/// Pulse expansion coefficients a_1..a_10.
pub const PULSE_COEFFS: [f64; 10] = [
    -1.25529873,
    0.21722635,
    0.06452543,
    0.00540862,
    -0.00332515,
    -0.00281281,
    -0.00138352,
    -0.00070289,
    -0.00020451,
    -0.00003053,
];

fn sech2(z: f64) -> f64 {
    let c = z.cosh();
    1.0 / (c * c)
}

/// Signed distance to the nearest periodic image.
fn wrap(d: f64) -> f64 {
    d - d.round()
}

/// arccot with values in (0, pi).
fn arccot(z: f64) -> f64 {
    1.0f64.atan2(z)
}

/// The bell-shaped pulse with speed c centred at (x0, y0), in the variable
/// r / sqrt(sigma) of the scaled equation.
pub fn pulse(c: f64, x0: f64, y0: f64, sigma: f64, x: f64, y: f64) -> f64 {
    let r = (wrap(x - x0).powi(2) + wrap(y - y0).powi(2)).sqrt() / sigma.sqrt();
    let th = arccot(0.5 * c.sqrt() * r);
    c / 3.0 * PULSE_COEFFS.iter().enumerate().map(|(n, a)| a * ((2.0 * (n + 1) as f64 * th).cos() - 1.0)).sum::<f64>()
}

fn param(params: &[(String, f64)], key: &str, default: f64) -> f64 {
    params.iter().rev().find(|(k, _)| k == key).map(|p| p.1).unwrap_or(default)
}

/// Builds a problem with the default parameters, overridden by `overrides`.
pub fn problem_library(name: &str, overrides: &[(String, f64)]) -> Result<ProblemSpec> {
    let names: Vec<&str> = match name {
        "kdv_single" => vec!["c", "x0", "sigma"],
        "kdv_double" => vec!["c1", "c2", "x1", "x2", "sigma"],
        "kdv_triple" => vec!["x0", "sigma"],
        "zk_pulse" => vec!["c", "x0", "y0", "sigma"],
        "zk_two_pulse_direct" | "zk_two_pulse_deviated" => vec!["c1", "c2", "x1", "y1", "x2", "y2", "sigma"],
        "zk_lump" => vec!["a", "kappa", "x0", "y0", "sigma"],
        _ => vec![],
    };
    for (k, _) in overrides {
        if !names.contains(&k.as_str()) {
            return Err(Error::Config(format!("problem {name} has no parameter {k}")));
        }
    }
    let p = |k: &str, d: f64| param(overrides, k, d);
    let zero: Option<Field> = None;
    let spec = match name {
        "kdv_manufactured" => {
            let exact: Field = Arc::new(|x, _, t| (2.0 * PI * (x - t)).sin());
            let source: Field = Arc::new(|x, _, t| {
                let th = 2.0 * PI * (x - t);
                2.0 * PI * th.cos() * (-4.0 * PI * PI - 1.0 + th.sin())
            });
            ProblemSpec {
                name: name.into(),
                equation: Equation::Kdv,
                flux: PolyFlux::burgers(),
                sigma: 1.0,
                initial: exact.clone(),
                exact: Some(exact),
                exact_dy: None,
                source: Some(source),
                params: vec![],
            }
        }
        "kdv_single" => {
            let (c, x0, sigma) = (p("c", 0.3), p("x0", 0.5), p("sigma", 5e-4));
            let kappa = 0.5 * (c / sigma).sqrt();
            let exact: Field = Arc::new(move |x, _, t| 3.0 * c * sech2(kappa * wrap(x - c * t - x0)));
            ProblemSpec {
                name: name.into(),
                equation: Equation::Kdv,
                flux: PolyFlux::burgers(),
                sigma,
                initial: exact.clone(),
                exact: Some(exact),
                exact_dy: None,
                source: zero,
                params: vec![("c".into(), c), ("x0".into(), x0), ("sigma".into(), sigma), ("kappa".into(), kappa)],
            }
        }
        "kdv_double" => {
            let (c1, c2, x1, x2, sigma) = (p("c1", 0.3), p("c2", 0.1), p("x1", 0.45), p("x2", 0.65), p("sigma", 1.21e-4));
            let (k1, k2) = (0.5 * (c1 / sigma).sqrt(), 0.5 * (c2 / sigma).sqrt());
            let init: Field = Arc::new(move |x, _, _| 3.0 * c1 * sech2(k1 * wrap(x - x1)) + 3.0 * c2 * sech2(k2 * wrap(x - x2)));
            ProblemSpec {
                name: name.into(),
                equation: Equation::Kdv,
                flux: PolyFlux::burgers(),
                sigma,
                initial: init,
                exact: None,
                exact_dy: None,
                source: zero,
                params: vec![("c1".into(), c1), ("c2".into(), c2), ("x1".into(), x1), ("x2".into(), x2), ("sigma".into(), sigma)],
            }
        }
        "kdv_triple" => {
            let (x0, sigma) = (p("x0", 0.5), p("sigma", 2.5e-5));
            let w = (108.0 * sigma).sqrt();
            let init: Field = Arc::new(move |x, _, _| 2.0 / 3.0 * sech2(wrap(x - x0) / w));
            ProblemSpec {
                name: name.into(),
                equation: Equation::Kdv,
                flux: PolyFlux::burgers(),
                sigma,
                initial: init,
                exact: None,
                exact_dy: None,
                source: zero,
                params: vec![("x0".into(), x0), ("sigma".into(), sigma)],
            }
        }
        "zk_manufactured" => {
            let exact: Field = Arc::new(|x, y, t| (2.0 * PI * (x + y + t)).sin());
            let dy: Field = Arc::new(|x, y, t| 2.0 * PI * (2.0 * PI * (x + y + t)).cos());
            let source: Field = Arc::new(|x, y, t| {
                let th = 2.0 * PI * (x + y + t);
                2.0 * PI * th.cos() * (1.0 - 8.0 * PI * PI + th.sin())
            });
            ProblemSpec {
                name: name.into(),
                equation: Equation::Zk,
                flux: PolyFlux::burgers(),
                sigma: 1.0,
                initial: exact.clone(),
                exact: Some(exact),
                exact_dy: Some(dy),
                source: Some(source),
                params: vec![],
            }
        }
        "zk_simplified" => {
            let w = 8.0 * PI.powi(3);
            let exact: Field = Arc::new(move |x, y, t| (2.0 * PI * (x + y) + w * t).sin());
            let dy: Field = Arc::new(move |x, y, t| 2.0 * PI * (2.0 * PI * (x + y) + w * t).cos());
            ProblemSpec {
                name: name.into(),
                equation: Equation::ZkSimplified,
                flux: PolyFlux::zero(),
                sigma: 1.0,
                initial: exact.clone(),
                exact: Some(exact),
                exact_dy: Some(dy),
                source: zero,
                params: vec![],
            }
        }
        "zk_pulse" => {
            let (c, x0, y0, sigma) = (p("c", 1.0), p("x0", 0.5), p("y0", 0.5), p("sigma", 1.0 / 1024.0));
            let init: Field = Arc::new(move |x, y, _| pulse(c, x0, y0, sigma, x, y));
            ProblemSpec {
                name: name.into(),
                equation: Equation::Zk,
                flux: PolyFlux(vec![0.0, 0.0, 3.0]),
                sigma,
                initial: init,
                exact: None,
                exact_dy: None,
                source: zero,
                params: vec![("c".into(), c), ("x0".into(), x0), ("y0".into(), y0), ("sigma".into(), sigma)],
            }
        }
        "zk_two_pulse_direct" | "zk_two_pulse_deviated" => {
            let direct = name == "zk_two_pulse_direct";
            let d = if direct { [0.5, 0.5, 0.625, 0.5, 1.0 / 4096.0] } else { [0.25, 0.4375, 0.5, 0.5, 1.0 / 1024.0] };
            let (c1, c2) = (p("c1", 4.0), p("c2", 1.0));
            let (x1, y1, x2, y2, sigma) = (p("x1", d[0]), p("y1", d[1]), p("x2", d[2]), p("y2", d[3]), p("sigma", d[4]));
            let init: Field = Arc::new(move |x, y, _| pulse(c1, x1, y1, sigma, x, y) + pulse(c2, x2, y2, sigma, x, y));
            ProblemSpec {
                name: name.into(),
                equation: Equation::Zk,
                flux: PolyFlux(vec![0.0, 0.0, 3.0]),
                sigma,
                initial: init,
                exact: None,
                exact_dy: None,
                source: zero,
                params: vec![
                    ("c1".into(), c1),
                    ("c2".into(), c2),
                    ("x1".into(), x1),
                    ("y1".into(), y1),
                    ("x2".into(), x2),
                    ("y2".into(), y2),
                    ("sigma".into(), sigma),
                ],
            }
        }
        "zk_lump" => {
            let (a, kappa, x0, y0, sigma) = (p("a", 0.4), p("kappa", 320.0), p("x0", 0.5), p("y0", 0.5), p("sigma", 1.0 / 6400.0));
            let init: Field = Arc::new(move |x, y, _| a * (-kappa * (wrap(x - x0).powi(2) + wrap(y - y0).powi(2))).exp());
            ProblemSpec {
                name: name.into(),
                equation: Equation::Zk,
                flux: PolyFlux(vec![0.0, 0.0, 3.0]),
                sigma,
                initial: init,
                exact: None,
                exact_dy: None,
                source: zero,
                params: vec![("a".into(), a), ("kappa".into(), kappa), ("x0".into(), x0), ("y0".into(), y0), ("sigma".into(), sigma)],
            }
        }
        _ => {
            return Err(Error::UnknownProblem { name: name.into(), available: PROBLEMS.join(", ") });
        }
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_defaults() {
        let p = problem_library("kdv_single", &[]).unwrap();
        let kappa = p.params.iter().find(|(k, _)| k == "kappa").unwrap().1;
        assert!((kappa - 12.247).abs() < 1e-3);
        let l = problem_library("zk_lump", &[]).unwrap();
        assert!(((l.initial)(0.5, 0.5, 0.0) - 0.4).abs() < 1e-15);
        assert!(matches!(problem_library("nope", &[]), Err(Error::UnknownProblem { .. })));
    }
}
