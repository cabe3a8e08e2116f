//! One-dimensional UWDG discretization of u_t + f(u)_x + u_xxx = s.
//!
//! The dispersive part in operator form, with [w] = w+ - w- at every
//! cell interface (periodic):
//!
//!   (L u, v) = int u v_xxx + sum u_hat [v_xx] - sum u~_x [v_x] + sum u^_xx [v].

use crate::basis::Side;
use crate::error::{Error, Result};
use crate::forms::{assemble, BlockCsr, FormKind, KeySide, Term};
use crate::interp::{Convection, Flux};
use crate::projection::project_l2;
use crate::solver::{LinearOperator, SolveMethod};
use crate::space::{Space, State};
use std::sync::Arc;

/// Alternating flux families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxVariant1D {
    /// u_hat = u-, u~_x = u_x+, u^_xx = u_xx+
    #[default]
    A,
    /// u_hat = u+, u~_x = u_x+, u^_xx = u_xx-
    B,
}

/// x-factors of the dispersion operator.
pub fn dispersion_terms_x(variant: FluxVariant1D) -> Vec<(f64, FormKind)> {
    let (s_hat, s_xx) = match variant {
        FluxVariant1D::A => (Side::Minus, Side::Plus),
        FluxVariant1D::B => (Side::Plus, Side::Minus),
    };
    vec![
        (1.0, FormKind::Vol(3)),
        (1.0, FormKind::Jmp(0, s_hat, 2)),
        (-1.0, FormKind::Jmp(1, Side::Plus, 1)),
        (1.0, FormKind::Jmp(2, s_xx, 0)),
    ]
}

pub(crate) fn assemble_on(space: &Space, terms: &[Term]) -> BlockCsr {
    let side = KeySide { fx: &space.fx, fy: &space.fy, keys: &space.keys, index: &space.index };
    assemble(&side, &side, terms)
}

/// Dispersion operator matrix on a 1D space.
pub fn dispersion_matrix_1d(space: &Space, variant: FluxVariant1D) -> Result<BlockCsr> {
    if space.d != 1 {
        return Err(Error::Config("the KdV operator needs a 1D space".into()));
    }
    if space.k < 2 {
        return Err(Error::Config(format!("the KdV operator needs k >= 2, got {}", space.k)));
    }
    let terms: Vec<Term> = dispersion_terms_x(variant).into_iter().map(|(c, x)| Term::new(c, x, FormKind::Vol(0))).collect();
    Ok(assemble_on(space, &terms))
}

pub fn assemble_dispersion_1d(space: &Arc<Space>, variant: FluxVariant1D, method: SolveMethod) -> Result<LinearOperator> {
    Ok(LinearOperator::new(space.clone(), dispersion_matrix_1d(space, variant)?, method))
}

/// Flux, dissipation and source of the convective part.
pub struct ConvectionSpec<'a> {
    pub flux: &'a dyn Flux,
    pub alpha: f64,
    pub source: Option<&'a (dyn Fn(f64, f64, f64) -> f64 + Sync)>,
}

/// Convection increments; in 1D and 2D the term is x-directional.
pub fn apply_convection(u: &State, spec: &ConvectionSpec, conv: &Convection) -> Result<Vec<f64>> {
    conv.apply(spec.flux, u, spec.alpha)
}

pub fn apply_convection_1d(u: &State, spec: &ConvectionSpec, conv: &Convection) -> Result<Vec<f64>> {
    apply_convection(u, spec, conv)
}

/// L2 projection of s(., t) onto the space.
pub fn apply_source(s: &(dyn Fn(f64, f64, f64) -> f64 + Sync), t: f64, space: &Arc<Space>) -> Vec<f64> {
    project_l2(&|x, y| s(x, y, t), space).coeffs
}

pub fn apply_source_1d(s: &(dyn Fn(f64, f64, f64) -> f64 + Sync), t: f64, space: &Arc<Space>) -> Vec<f64> {
    apply_source(s, t, space)
}

/// Sum over interfaces of [u_x]^2, evaluated pointwise.
pub fn jump_dissipation_1d(u: &State) -> f64 {
    let n = u.space.max_level();
    (0..1u32 << n)
        .map(|i| {
            let x = i as f64 * (-(n as f64)).exp2();
            let j = u.eval([x, 0.0], [1, 0], [Side::Plus, Side::Plus]) - u.eval([x, 0.0], [1, 0], [Side::Minus, Side::Plus]);
            j * j
        })
        .sum()
}
