//! Threshold refinement and coarsening of hierarchical spaces.

use crate::error::{Error, Result};
use crate::mesh::{children, close_downward, is_downward_closed, parent, ElemKey};
use crate::space::{Repr, Space, State};
use std::collections::HashSet;
use std::sync::Arc;

/// Hard cap on the finest level of adaptive runs.
pub const MAX_LEVEL_CAP: u8 = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptConfig {
    /// Refine threshold on block L2 norms.
    pub epsilon: f64,
    /// Coarsen threshold, epsilon / 10.
    pub eta: f64,
    pub max_level: u8,
}

impl AdaptConfig {
    pub fn new(epsilon: f64, max_level: u8) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if max_level > MAX_LEVEL_CAP {
            return Err(Error::Config(format!("max level {max_level} exceeds the cap {MAX_LEVEL_CAP}")));
        }
        Ok(AdaptConfig { epsilon, eta: epsilon / 10.0, max_level })
    }
}

fn rebuild(state: &State, keys: Vec<ElemKey>, max_level: u8) -> State {
    debug_assert!(is_downward_closed(&keys));
    let sp = &state.space;
    let space = Space::adaptive(sp.d, sp.k, max_level, keys);
    state.transfer(&space)
}

fn require_hier(state: &State) {
    assert_eq!(state.space.repr, Repr::Hier, "adaptivity works on hierarchical states");
}

/// Activates all children of every key whose block norm exceeds epsilon.
/// New coefficients are zero; the result is downward closed.
pub fn refine(state: &State, cfg: &AdaptConfig) -> State {
    require_hier(state);
    let sp = &state.space;
    let keys = sp.elem_keys();
    let set: HashSet<ElemKey> = keys.iter().copied().collect();
    let mut out = keys.clone();
    let mut added = HashSet::new();
    for (i, key) in keys.iter().enumerate() {
        if state.block_norm(i) <= cfg.epsilon {
            continue;
        }
        for m in 0..sp.d {
            if key.l[m] >= cfg.max_level {
                continue;
            }
            for c in children(key, m, cfg.max_level) {
                if !set.contains(&c) && added.insert(c) {
                    out.push(c);
                }
            }
        }
    }
    if added.is_empty() && sp.max_level() == cfg.max_level {
        return state.clone();
    }
    close_downward(&mut out);
    rebuild(state, out, cfg.max_level)
}

/// Removes leaves with block norm below eta until nothing changes. The
/// root block is kept.
pub fn coarsen(state: &State, cfg: &AdaptConfig) -> State {
    require_hier(state);
    let sp = &state.space;
    let d = sp.d;
    let keys = sp.elem_keys();
    let norms: Vec<f64> = (0..keys.len()).map(|i| state.block_norm(i)).collect();
    let mut alive: HashSet<ElemKey> = keys.iter().copied().collect();
    // Number of active keys having each key as a parent.
    let mut nchild: std::collections::HashMap<ElemKey, usize> = keys.iter().map(|k| (*k, 0)).collect();
    for k in &keys {
        for m in 0..d {
            if let Some(p) = parent(k, m) {
                *nchild.get_mut(&p).expect("input must be downward closed") += 1;
            }
        }
    }
    let small = |i: usize| norms[i] < cfg.eta && keys[i].level_sum() > 0;
    let pos: std::collections::HashMap<ElemKey, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let mut stack: Vec<usize> = (0..keys.len()).filter(|&i| small(i) && nchild[&keys[i]] == 0).collect();
    while let Some(i) = stack.pop() {
        let k = keys[i];
        if !alive.remove(&k) {
            continue;
        }
        for m in 0..d {
            if let Some(p) = parent(&k, m) {
                let c = nchild.get_mut(&p).unwrap();
                *c -= 1;
                let j = pos[&p];
                if *c == 0 && small(j) {
                    stack.push(j);
                }
            }
        }
    }
    if alive.len() == keys.len() {
        return state.clone();
    }
    let out: Vec<ElemKey> = keys.into_iter().filter(|k| alive.contains(k)).collect();
    rebuild(state, out, sp.max_level())
}

/// Projects u0 on the root space and alternates refinement and
/// re-projection until the key set stops growing.
pub fn adapt_initial(
    project: &dyn Fn(&Arc<Space>) -> Result<State>,
    d: usize,
    k: usize,
    cfg: &AdaptConfig,
) -> Result<State> {
    let mut space = Space::adaptive(d, k, cfg.max_level, vec![ElemKey::root(d)]);
    loop {
        let u = project(&space)?;
        let r = refine(&u, cfg);
        if r.space.keys.len() == space.keys.len() {
            return Ok(coarsen(&u, cfg));
        }
        space = r.space;
    }
}
