//! Method-of-lines RK4 on the cell-interleaved field arrays.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

use super::mms::ManufacturedSpec;
use super::stencil::{d1, d2};
use super::{FieldLayout, FieldState, Grid2D};
use crate::error::{Error, Result};
use crate::model::{LocalFields, Model, MAX_VALUE_FIELDS};

/// Which nodes are updated each step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    /// Every node off the two-node boundary ring.
    Full,
    /// Only nodes near the support: `r ≤ t - 1 + outer_margin`. With
    /// `freeze_after = Some(s_max)` nodes also stop updating once
    /// `t > √(s_max² + r²) + inner_margin`, i.e. after every recorded slice
    /// has passed them.
    Band {
        outer_margin: f64,
        freeze_after: Option<f64>,
        inner_margin: f64,
    },
}

/// Integer time levels `t_m = t0 + m·dt` covering `[t0, t_final]` with
/// `dt ≤ cfl·h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_final: f64, dt_max: f64) -> Self {
        let span = t_final - t0;
        if span <= 0.0 {
            return Self {
                t0,
                dt: dt_max,
                steps: 0,
            };
        }
        let steps = (span / dt_max - 1e-9).ceil().max(1.0) as usize;
        Self {
            t0,
            dt: span / steps as f64,
            steps,
        }
    }

    #[inline]
    pub fn time(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }
}

pub struct Stepper {
    model: Model,
    grid: Grid2D,
    layout: FieldLayout,
    times: TimeGrid,
    level: usize,
    domain: Domain,
    forcing: Option<ManufacturedSpec>,
    u: Vec<f64>,
    acc: Vec<f64>,
    sa: Vec<f64>,
    sb: Vec<f64>,
    frozen: Vec<Option<(usize, usize)>>,
    pool: rayon::ThreadPool,
}

/// Nodes of one row that are updated in a step: at most two runs.
type Segments = [Option<(usize, usize)>; 2];

impl Stepper {
    pub fn new(
        model: Model,
        initial: FieldState,
        times: TimeGrid,
        domain: Domain,
        forcing: Option<ManufacturedSpec>,
        workers: usize,
    ) -> Result<Self> {
        if (initial.t - times.t0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "initial state at t = {} but time grid starts at {}",
                initial.t, times.t0
            )));
        }
        if times.dt > 0.5 * initial.grid.h + 1e-15 {
            return Err(Error::config(format!(
                "dt = {} exceeds 0.5·h = {}",
                times.dt,
                0.5 * initial.grid.h
            )));
        }
        if initial.layout.p != model.params.p {
            return Err(Error::config("state and model disagree on p"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        let n = initial.grid.nodes();
        let u = initial.data;
        Ok(Self {
            model,
            grid: initial.grid,
            layout: initial.layout,
            times,
            level: 0,
            domain,
            forcing,
            acc: u.clone(),
            sa: u.clone(),
            sb: u.clone(),
            u,
            frozen: vec![None; n],
            pool,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn layout(&self) -> FieldLayout {
        self.layout
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn forcing(&self) -> Option<&ManufacturedSpec> {
        self.forcing.as_ref()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn t(&self) -> f64 {
        self.times.time(self.level)
    }

    pub fn done(&self) -> bool {
        self.level >= self.times.steps
    }

    /// Cell-interleaved data at the current level.
    pub fn data(&self) -> &[f64] {
        &self.u
    }

    pub fn state(&self) -> FieldState {
        FieldState {
            t: self.t(),
            grid: self.grid,
            layout: self.layout,
            data: self.u.clone(),
        }
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    fn segments(&self, j: usize, t_next: f64, t_now: f64) -> Segments {
        let nmax = self.grid.n_per_axis - 2;
        if j < 2 || j > nmax {
            return [None, None];
        }
        match self.domain {
            Domain::Full => [Some((2, nmax)), None],
            Domain::Band {
                outer_margin,
                freeze_after,
                inner_margin,
            } => {
                let y = self.grid.coord(j);
                let r_out = t_next - 1.0 + outer_margin;
                let outer = if y.abs() <= r_out {
                    self.grid.span((r_out * r_out - y * y).sqrt(), 2, nmax)
                } else {
                    None
                };
                let Some((lo, hi)) = outer else {
                    return [None, None];
                };
                match freeze_after.and_then(|s| self.frozen_span(j, t_now, s, inner_margin)) {
                    None => [Some((lo, hi)), None],
                    Some((flo, fhi)) => [
                        (lo < flo).then(|| (lo, flo - 1)),
                        (fhi < hi).then(|| (fhi + 1, hi)),
                    ],
                }
            }
        }
    }

    fn frozen_span(&self, j: usize, t: f64, s_max: f64, margin: f64) -> Option<(usize, usize)> {
        let tt = t - margin;
        if tt <= s_max {
            return None;
        }
        let r_in2 = tt * tt - s_max * s_max;
        let y = self.grid.coord(j);
        if y * y >= r_in2 {
            return None;
        }
        self.grid
            .span((r_in2 - y * y).sqrt(), 2, self.grid.n_per_axis - 2)
    }

    /// Copies newly frozen nodes into every work array so that later reads
    /// of any array see their final values.
    fn update_frozen(&mut self, t_now: f64) {
        let Domain::Band {
            freeze_after: Some(s_max),
            inner_margin,
            ..
        } = self.domain
        else {
            return;
        };
        let n = self.grid.nodes();
        let nf = self.layout.nf();
        for j in 0..n {
            let Some((lo, hi)) = self.frozen_span(j, t_now, s_max, inner_margin) else {
                continue;
            };
            let prev = self.frozen[j];
            for i in lo..=hi {
                if matches!(prev, Some((plo, phi)) if i >= plo && i <= phi) {
                    continue;
                }
                let g = (j * n + i) * nf;
                for f in 0..nf {
                    let v = self.u[g + f];
                    self.acc[g + f] = v;
                    self.sa[g + f] = v;
                    self.sb[g + f] = v;
                }
            }
            self.frozen[j] = Some((lo, hi));
        }
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        if self.done() {
            return Ok(());
        }
        let t = self.t();
        let dt = self.times.dt;
        self.update_frozen(t);
        let n = self.grid.nodes();
        let segs: Vec<Segments> = (0..n).map(|j| self.segments(j, t + dt, t)).collect();
        let blown = AtomicBool::new(false);

        let ctx = Kernel {
            model: &self.model,
            grid: &self.grid,
            layout: self.layout,
            forcing: self.forcing.as_ref(),
            segs: &segs,
            dt,
        };
        let (u, acc, sa, sb) = (&self.u, &mut self.acc, &mut self.sa, &mut self.sb);
        self.pool.install(|| {
            ctx.stage(u, u, Some(&mut *sa), acc, t, 0.5, 1.0 / 6.0, true, None);
            ctx.stage(&sa[..], u, Some(&mut *sb), acc, t + 0.5 * dt, 0.5, 1.0 / 3.0, false, None);
            ctx.stage(&sb[..], u, Some(&mut *sa), acc, t + 0.5 * dt, 1.0, 1.0 / 3.0, false, None);
            ctx.stage(&sa[..], u, None, acc, t + dt, 0.0, 1.0 / 6.0, false, Some(&blown));
        });
        std::mem::swap(&mut self.u, &mut self.acc);
        self.level += 1;
        if blown.load(Ordering::Relaxed) {
            return Err(self.locate_blowup());
        }
        Ok(())
    }

    fn locate_blowup(&self) -> Error {
        let nf = self.layout.nf();
        let n = self.grid.nodes();
        let t = self.t();
        for (k, v) in self.u.iter().enumerate() {
            if !v.is_finite() {
                let cell = k / nf;
                return Error::BlowupDetected {
                    t,
                    location: self.grid.coords(cell % n, cell / n),
                    field: self.layout.name(k % nf),
                };
            }
        }
        Error::BlowupDetected {
            t,
            location: [f64::NAN; 2],
            field: String::new(),
        }
    }
}

/// Values this small are set to zero. The leading edge of the numerical
/// solution otherwise decays into subnormals, which are very slow to compute with.
const FLUSH: f64 = 1e-150;

#[inline(always)]
fn flush(v: f64) -> f64 {
    if v.abs() < FLUSH {
        0.0
    } else {
        v
    }
}

struct Kernel<'a> {
    model: &'a Model,
    grid: &'a Grid2D,
    layout: FieldLayout,
    forcing: Option<&'a ManufacturedSpec>,
    segs: &'a [Segments],
    dt: f64,
}

impl Kernel<'_> {
    /// `out = u + c_out·dt·k`, `acc = (init ? u : acc) + b·dt·k` with `k = f(input)`.
    #[allow(clippy::too_many_arguments)]
    fn stage(
        &self,
        input: &[f64],
        u: &[f64],
        out: Option<&mut Vec<f64>>,
        acc: &mut [f64],
        t: f64,
        c_out: f64,
        b: f64,
        init: bool,
        blown: Option<&AtomicBool>,
    ) {
        let n = self.grid.nodes();
        let nf = self.layout.nf();
        let rs = n * nf;
        let cdt = c_out * self.dt;
        let bdt = b * self.dt;
        let row = |j: usize, o: Option<&mut [f64]>, a: &mut [f64]| {
            let mut o = o;
            let mut k = [0.0; 2 * MAX_VALUE_FIELDS];
            let mut bad = false;
            for (lo, hi) in self.segs[j].iter().flatten().copied() {
                for i in lo..=hi {
                    self.rates(input, i, j, t, &mut k);
                    let g = (j * n + i) * nf;
                    let l = i * nf;
                    if let Some(o) = o.as_deref_mut() {
                        for f in 0..nf {
                            o[l + f] = flush(u[g + f] + cdt * k[f]);
                        }
                    }
                    for f in 0..nf {
                        let base = if init { u[g + f] } else { a[l + f] };
                        let v = flush(base + bdt * k[f]);
                        bad |= !v.is_finite();
                        a[l + f] = v;
                    }
                }
            }
            if bad {
                if let Some(flag) = blown {
                    flag.store(true, Ordering::Relaxed);
                }
            }
        };
        match out {
            Some(out) => out
                .par_chunks_mut(rs)
                .zip(acc.par_chunks_mut(rs))
                .enumerate()
                .for_each(|(j, (o, a))| row(j, Some(o), a)),
            None => acc
                .par_chunks_mut(rs)
                .enumerate()
                .for_each(|(j, a)| row(j, None, a)),
        }
    }

    /// Time derivatives of every stored field at node `(i, j)`.
    #[inline]
    fn rates(&self, input: &[f64], i: usize, j: usize, t: f64, k: &mut [f64; 2 * MAX_VALUE_FIELDS]) {
        let mut local = LocalFields::default();
        gather(input, self.grid, self.layout, i, j, &mut local);
        let mut a = [0.0; MAX_VALUE_FIELDS];
        self.model.accelerations(&local, &mut a);
        let nvf = self.layout.nvf();
        if let Some(mms) = self.forcing {
            let fz = mms.forcing(self.model, t, self.grid.coords(i, j));
            for s in 0..nvf {
                a[s] += fz[s];
            }
        }
        for s in 0..nvf {
            k[2 * s] = local.du[s][0];
            k[2 * s + 1] = a[s];
        }
    }
}

/// Values, gradients and Laplacians of every value slot at node `(i, j)`.
///
/// The time derivative comes from the stored companion field; spatial
/// derivatives use the fourth-order stencils. Gradients of `W₁`, `W₂` are
/// left at zero since no right-hand side reads them.
#[inline(always)]
pub(crate) fn gather(
    input: &[f64],
    grid: &Grid2D,
    layout: FieldLayout,
    i: usize,
    j: usize,
    out: &mut LocalFields,
) {
    let n = grid.nodes();
    let nf = layout.nf();
    let g = (j * n + i) * nf;
    let (cx, cy) = (nf, n * nf);
    let inv_h = 1.0 / grid.h;
    let inv_h2 = inv_h * inv_h;
    for s in 0..layout.nvf() {
        let f = g + 2 * s;
        let u0 = input[f];
        let (xm2, xm1, xp1, xp2) = (input[f - 2 * cx], input[f - cx], input[f + cx], input[f + 2 * cx]);
        let (ym2, ym1, yp1, yp2) = (input[f - 2 * cy], input[f - cy], input[f + cy], input[f + 2 * cy]);
        out.u[s] = u0;
        out.lap[s] = (d2(xm2, xm1, u0, xp1, xp2) + d2(ym2, ym1, u0, yp1, yp2)) * inv_h2;
        if s == 1 || s == 2 {
            out.du[s] = [input[f + 1], 0.0, 0.0];
        } else {
            out.du[s] = [
                input[f + 1],
                d1(xm2, xm1, xp1, xp2) * inv_h,
                d1(ym2, ym1, yp1, yp2) * inv_h,
            ];
        }
    }
}
