//! Run, sweep and rates pipelines with their output files.

use crate::config::RunConfig;
use crate::driver::{convergence_rates, Errors, RateMode, Simulation};
use crate::error::{Error, Result};
use crate::mesh::{dump_keys, enumerate_space, ElemKey, SpaceSpec};
use crate::space::{to_nodal, Repr, State};
use crate::basis::Side;
use std::fmt::Write as _;
use std::path::Path;

/// Largest number of sample points per dimension in 2D dumps.
const MAX_SAMPLES_2D: usize = 512;

/// Outcome of one run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub state: State,
    pub t: f64,
    pub dof: usize,
    pub errors: Option<Errors>,
    pub energy: Vec<(f64, f64)>,
    pub dof_history: Vec<(f64, usize)>,
}

/// Active keys in hierarchical form; a cellwise full grid lists the keys
/// of the equivalent full hierarchical space.
pub fn active_keys(state: &State) -> Vec<ElemKey> {
    let sp = &state.space;
    match sp.repr {
        Repr::Hier => sp.elem_keys(),
        Repr::Nodal => enumerate_space(&SpaceSpec::full(sp.d, sp.fx.level, sp.k)),
    }
}

/// Lines "x [y] u" at cell centres of a uniform sampling grid.
pub fn samples(state: &State, per_cell: usize) -> Result<String> {
    let sp = &state.space;
    let lv = sp.active_levels();
    let grid = to_nodal(state, [lv[0], if sp.d == 2 { lv[1] } else { 0 }])?;
    let count = |l: u8| {
        let n = (1usize << l) * per_cell;
        if sp.d == 2 {
            n.min(MAX_SAMPLES_2D)
        } else {
            n
        }
    };
    let nx = count(lv[0]);
    let ny = if sp.d == 2 { count(lv[1]) } else { 1 };
    let side = [Side::Plus, Side::Plus];
    let mut out = String::new();
    for i in 0..nx {
        let x = (i as f64 + 0.5) / nx as f64;
        if sp.d == 1 {
            writeln!(out, "{x:.8e} {:.10e}", grid.eval([x, 0.0], [0, 0], side)).unwrap();
            continue;
        }
        for j in 0..ny {
            let y = (j as f64 + 0.5) / ny as f64;
            writeln!(out, "{x:.8e} {y:.8e} {:.10e}", grid.eval([x, y], [0, 0], side)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Runs one configuration, writing outputs under `out` when given.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let problem = cfg.problem_spec()?;
    let mut sim = Simulation::new(problem, cfg.scheme())?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir.join("snapshots"))?;
    }
    let t_final = cfg.t_final;
    let nsnap = cfg.output.snapshots;
    let mut energy = vec![(0.0, sim.state.energy())];
    let mut dof_history = vec![(0.0, sim.dof())];
    let mut next = 1;
    let mut io_err: Option<Error> = None;
    let mut snapshot = |sim: &Simulation, i: usize| {
        if let Some(dir) = out {
            let keys = dump_keys(&active_keys(&sim.state));
            let r = write(&dir.join(format!("snapshots/active_elements_{i:03}.dat")), &keys)
                .and_then(|_| samples(&sim.state, cfg.output.samples_per_cell))
                .and_then(|s| write(&dir.join(format!("snapshots/samples_{i:03}.dat")), &s));
            if let Err(e) = r {
                io_err.get_or_insert(e);
            }
        }
    };
    snapshot(&sim, 0);
    sim.run_to(t_final, &mut |s: &Simulation| {
        while next <= nsnap && s.t >= t_final * next as f64 / nsnap as f64 - 1e-12 * t_final {
            energy.push((s.t, s.state.energy()));
            dof_history.push((s.t, s.dof()));
            snapshot(s, next);
            next += 1;
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    let errors = sim.errors();
    let summary = RunSummary { t: sim.t, dof: sim.dof(), errors, energy, dof_history, state: sim.state.clone() };
    if let Some(dir) = out {
        let param = match cfg.grid.epsilon {
            Some(e) => e,
            None => cfg.grid.n as f64,
        };
        write(&dir.join("errors.csv"), &errors_csv(&[(param, summary.dof, summary.errors)], RateMode::Mesh))?;
        write(&dir.join("energy.csv"), &series_csv("t,energy", summary.energy.iter().map(|(t, e)| format!("{t:.10e},{e:.16e}"))))?;
        write(&dir.join("dof.csv"), &series_csv("t,DoF", summary.dof_history.iter().map(|(t, d)| format!("{t:.10e},{d}"))))?;
        write(&dir.join("samples.dat"), &samples(&summary.state, cfg.output.samples_per_cell)?)?;
        write(&dir.join("active_elements.dat"), &dump_keys(&active_keys(&summary.state)))?;
    }
    Ok(summary)
}

fn series_csv(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_default()
}

/// errors.csv with L2 rates in the order column.
pub fn errors_csv(rows: &[(f64, usize, Option<Errors>)], mode: RateMode) -> String {
    let l2: Vec<f64> = rows.iter().map(|r| r.2.map_or(f64::NAN, |e| e.l2)).collect();
    let params: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let dofs: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let rates = convergence_rates(&l2, &params, &dofs, mode);
    let mut s = String::from("N_or_eps,DoF,L1,L2,Linf,order\n");
    for (r, rate) in rows.iter().zip(rates) {
        let e = r.2;
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.0,
            r.1,
            fmt_opt(e.map(|e| e.l1)),
            fmt_opt(e.map(|e| e.l2)),
            fmt_opt(e.map(|e| e.linf)),
            rate.map(|v| format!("{v:.4}")).unwrap_or_default()
        )
        .unwrap();
    }
    s
}

/// Runs every value of the sweep section; each run writes into its own
/// subdirectory and the combined table goes to `out/errors.csv`.
pub fn sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<(f64, RunSummary)>> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| Error::Config("sweep: section missing".into()))?;
    let mut results = Vec::new();
    for &v in &sw.values {
        let sub = out.map(|d| d.join(format!("run_{v}")));
        let summary = run(&cfg.with_sweep_value(v), sub.as_deref())?;
        log::info!("sweep value {v}: DoF {} errors {:?}", summary.dof, summary.errors);
        results.push((v, summary));
    }
    if let Some(dir) = out {
        let rows: Vec<_> = results.iter().map(|(v, s)| (*v, s.dof, s.errors)).collect();
        write(&dir.join("errors.csv"), &errors_csv(&rows, sw.rate))?;
    }
    Ok(results)
}

/// Parses errors.csv and recomputes the order column.
pub fn rates_from_csv(text: &str, mode: RateMode) -> Result<String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 5 {
            return Err(Error::Config(format!("errors.csv line {}: expected at least 5 columns", i + 1)));
        }
        let num = |s: &str| -> Result<f64> { s.trim().parse::<f64>().map_err(|_| Error::Config(format!("errors.csv line {}: bad number '{s}'", i + 1))) };
        let param = num(f[0])?;
        let dof = f[1].trim().parse::<usize>().map_err(|_| Error::Config(format!("errors.csv line {}: bad DoF", i + 1)))?;
        let errors = if f[2].trim().is_empty() { None } else { Some(Errors { l1: num(f[2])?, l2: num(f[3])?, linf: num(f[4])? }) };
        rows.push((param, dof, errors));
    }
    if rows.len() < 2 {
        return Err(Error::Config("rates need at least two rows".into()));
    }
    Ok(errors_csv(&rows, mode))
}
