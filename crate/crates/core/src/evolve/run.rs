//! One evolution from a [`RunConfig`] to diagnostics rows.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use super::crossing::{CrossingRecorder, CrossingSink, SliceChunk};
use super::snapshot;
use super::stepper::{Domain, Stepper, TimeGrid};
use super::{FieldState, Grid2D};
use crate::config::RunConfig;
use crate::diagnostics::{apply_monitors, katayama_residual_state, DiagnosticsRow, SliceReducer};
use crate::error::{Error, Result};
use crate::foliation::{HyperboloidSlice, SliceCollector};
use crate::model::make_initial_data;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Keep every recorded slice in memory (large for fine grids).
    pub keep_slices: bool,
    /// Keep the last time level.
    pub keep_final_state: bool,
    /// Print progress to stderr roughly every tenth of the run.
    pub progress: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    Blowup { t: f64, location: [f64; 2], field: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMeta {
    pub preset: String,
    pub p: usize,
    pub epsilon: f64,
    pub h: f64,
    pub dt: f64,
    pub half_width: f64,
    pub nodes_per_axis: usize,
    pub t0: f64,
    pub t_final: f64,
    pub steps_planned: usize,
    pub steps_taken: usize,
    pub t_reached: f64,
    pub workers: usize,
    pub band: bool,
    pub freeze: bool,
    pub targets: Vec<f64>,
    pub partial_slices: Vec<f64>,
    pub termination: Termination,
    /// `sup |w - W₁ - Pᵅ∂ᵅW₂|` inside the cone at the last level.
    pub katayama_final: f64,
    pub snapshots: Vec<PathBuf>,
    pub wall_seconds: f64,
}

pub struct RunOutput {
    pub rows: Vec<DiagnosticsRow>,
    pub slices: Vec<HyperboloidSlice>,
    pub meta: RunMeta,
    pub final_state: Option<FieldState>,
}

impl RunOutput {
    pub fn blew_up(&self) -> bool {
        matches!(self.meta.termination, Termination::Blowup { .. })
    }
}

struct Tee {
    reducer: SliceReducer,
    collector: Option<SliceCollector>,
}

impl CrossingSink for Tee {
    fn accept(&mut self, chunk: &SliceChunk<'_>) {
        self.reducer.accept(chunk);
        if let Some(c) = &mut self.collector {
            c.accept(chunk);
        }
    }

    fn complete(&mut self, slice: usize, s: f64) {
        self.reducer.complete(slice, s);
        if let Some(c) = &mut self.collector {
            c.complete(slice, s);
        }
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_with(config, &RunOptions::default())
}

/// Evolves `config` and reduces every target slice.
///
/// Blow-up ends the run early but is not an error: it is reported in
/// [`RunMeta::termination`], and slices not yet swept are listed as partial.
pub fn run_with(config: &RunConfig, opts: &RunOptions) -> Result<RunOutput> {
    config.validate()?;
    if !config.preset.is_evolution() {
        return Err(Error::config(format!(
            "preset `{}` does not describe an evolution",
            config.preset
        )));
    }
    let start = Instant::now();
    let model = config.model();
    let g = &config.grid;
    let grid = Grid2D::for_evolution(g.h, g.t_final)?;
    let initial = make_initial_data(&config.model, &config.profile, &model.coeffs, &grid)?;
    let layout = initial.layout;
    let times = TimeGrid::new(config.model.t0, g.t_final, g.cfl * g.h);
    let targets = config.targets.values();
    let s_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let snapshots_wanted = config.output.snapshot_every > 0 || config.output.final_snapshot;
    let freeze = g.band && !snapshots_wanted && !opts.keep_final_state && !targets.is_empty();
    let domain = if g.band {
        Domain::Band {
            outer_margin: g.outer_margin,
            freeze_after: freeze.then_some(s_max),
            inner_margin: g.inner_margin,
        }
    } else {
        Domain::Full
    };
    let workers = if config.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        config.workers
    };

    let mut stepper = Stepper::new(model.clone(), initial, times, domain, None, workers)?;
    let mut recorder = CrossingRecorder::new(&targets, times);
    let mut sink = Tee {
        reducer: SliceReducer::new(
            &targets,
            model.clone(),
            g.h,
            config.diagnostics.delta,
            config.diagnostics.hessian_theta,
        ),
        collector: opts.keep_slices.then(|| SliceCollector::new(&targets, g.h, layout.nvf())),
    };

    let snap_dir = config.output.dir.join("snapshots");
    let mut snapshots = Vec::new();
    let mut save = |state: &FieldState, level: usize| -> Result<()> {
        std::fs::create_dir_all(&snap_dir)?;
        let path = snap_dir.join(format!("level_{level:07}.hwv1"));
        snapshot::save(&path, state)?;
        snapshots.push(path);
        Ok(())
    };

    let mut termination = Termination::Completed;
    let report_every = (times.steps / 10).max(1);
    recorder.record(&stepper, &mut sink);
    if config.output.snapshot_every > 0 {
        save(&stepper.state(), 0)?;
    }
    while !stepper.done() {
        // Once every slice is complete the remaining steps only matter for
        // snapshots or the final state.
        if recorder.is_finished() && !snapshots_wanted && !opts.keep_final_state {
            break;
        }
        match stepper.step() {
            Ok(()) => {}
            Err(Error::BlowupDetected { t, location, field }) => {
                termination = Termination::Blowup { t, location, field };
                break;
            }
            Err(e) => return Err(e),
        }
        recorder.record(&stepper, &mut sink);
        let level = stepper.level();
        if config.output.snapshot_every > 0 && level % config.output.snapshot_every == 0 {
            save(&stepper.state(), level)?;
        }
        if opts.progress && level % report_every == 0 {
            eprintln!(
                "t = {:.3} ({}/{} steps, {:.1}s)",
                stepper.t(),
                level,
                times.steps,
                start.elapsed().as_secs_f64()
            );
        }
    }

    let blew = termination != Termination::Completed;
    let state = stepper.state();
    let every = config.output.snapshot_every;
    let saved_already = every > 0 && stepper.level() % every == 0;
    if config.output.final_snapshot && !blew && !saved_already {
        save(&state, stepper.level())?;
    }
    let katayama_final = if blew {
        f64::NAN
    } else {
        // Frozen nodes hold values from earlier times; skip them and every
        // node whose stencil reaches them.
        let r_min = if freeze {
            let tt = stepper.t() - g.inner_margin;
            (tt * tt - s_max * s_max).max(0.0).sqrt() + 2.5 * g.h
        } else {
            -1.0
        };
        katayama_residual_state(&state, &model.coeffs, r_min)
    };

    let mut rows = sink.reducer.rows();
    apply_monitors(&mut rows);
    let slices = sink.collector.map(|c| c.slices).unwrap_or_default();
    let meta = RunMeta {
        preset: config.preset.name().to_string(),
        p: config.model.p,
        epsilon: config.model.epsilon,
        h: g.h,
        dt: times.dt,
        half_width: grid.half_width,
        nodes_per_axis: grid.n_per_axis,
        t0: times.t0,
        t_final: g.t_final,
        steps_planned: times.steps,
        steps_taken: stepper.level(),
        t_reached: stepper.t(),
        workers,
        band: g.band,
        freeze,
        targets,
        partial_slices: recorder.partial(),
        termination,
        katayama_final,
        snapshots,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        rows,
        slices,
        meta,
        final_state: opts.keep_final_state.then_some(state),
    })
}
