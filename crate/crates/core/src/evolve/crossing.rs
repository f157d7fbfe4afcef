//! Recording jets where grid points cross target hyperboloids.
//!
//! A point `x` crosses `H_s` at `t_c = √(s² + r²)`. Its jet there is a cubic
//! Lagrange interpolant through four consecutive time levels whose middle
//! interval contains `t_c`. Points are grouped into cohorts by the first of
//! those levels; a cohort accumulates weighted jets as the evolution passes
//! its four levels and is emitted to a [`CrossingSink`] after the last one.
//! Only cohorts in flight are held in memory, never whole time levels.

use std::collections::VecDeque;

use rayon::prelude::*;

use super::stencil::{d1, d2};
use super::stepper::{gather, Stepper, TimeGrid};
use super::Grid2D;
use crate::model::{LocalFields, MAX_VALUE_FIELDS};
use crate::vfcalc::Jet2;

/// A recorded grid point on a slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlicePoint {
    pub i: u32,
    pub j: u32,
    pub x: [f64; 2],
    /// Crossing time `√(s² + r²)`.
    pub t: f64,
}

/// A batch of finished points of one slice; `jets` has `nvf` entries per point.
pub struct SliceChunk<'a> {
    pub slice: usize,
    pub s: f64,
    pub nvf: usize,
    pub points: &'a [SlicePoint],
    pub jets: &'a [Jet2],
}

/// Consumer of recorded slice data.
pub trait CrossingSink: Send {
    fn accept(&mut self, chunk: &SliceChunk<'_>);
    /// Every point of slice `slice` has been delivered.
    fn complete(&mut self, slice: usize, s: f64);
}

/// Largest radius recorded on `H_s`: the cone edge `r = t - 1` meets `H_s` there.
#[inline]
pub fn mask_radius(s: f64) -> f64 {
    0.5 * (s * s - 1.0)
}

struct Cohort {
    slice: usize,
    first: usize,
    points: Vec<SlicePoint>,
    weights: Vec<[f64; 4]>,
    jets: Vec<Jet2>,
}

pub struct CrossingRecorder {
    targets: Vec<f64>,
    times: TimeGrid,
    /// Interpolation nodes per point: four, fewer only for very short runs.
    q: usize,
    last_level: Vec<usize>,
    completed: Vec<bool>,
    open: VecDeque<Cohort>,
}

const CHUNK: usize = 256;

impl CrossingRecorder {
    /// `targets` must be sorted and satisfy `(s² + 1)/2 ≤ t_final`.
    pub fn new(targets: &[f64], times: TimeGrid) -> Self {
        let q = (times.steps + 1).min(4);
        let mut rec = Self {
            targets: targets.to_vec(),
            times,
            q,
            last_level: Vec::new(),
            completed: vec![false; targets.len()],
            open: VecDeque::new(),
        };
        rec.last_level = targets
            .iter()
            .map(|&s| rec.first_of(0.5 * (s * s + 1.0)) + q - 1)
            .collect();
        rec
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Targets whose sweep never finished.
    pub fn partial(&self) -> Vec<f64> {
        self.targets
            .iter()
            .zip(&self.completed)
            .filter(|(_, c)| !**c)
            .map(|(s, _)| *s)
            .collect()
    }

    pub fn is_finished(&self) -> bool {
        self.completed.iter().all(|c| *c)
    }

    /// First interpolation level for a crossing at `tc`.
    fn first_of(&self, tc: f64) -> usize {
        let n = ((tc - self.times.t0) / self.times.dt).floor() as i64 - 1;
        let max = (self.times.steps + 1 - self.q) as i64;
        n.clamp(0, max) as usize
    }

    fn weights(&self, tc: f64, first: usize) -> [f64; 4] {
        let tau = (tc - self.times.time(first)) / self.times.dt;
        let mut w = [0.0; 4];
        for (a, wa) in w.iter_mut().enumerate().take(self.q) {
            let mut l = 1.0;
            for b in 0..self.q {
                if b != a {
                    l *= (tau - b as f64) / (a as f64 - b as f64);
                }
            }
            *wa = l;
        }
        w
    }

    fn enumerate(&self, slice: usize, level: usize, grid: &Grid2D) -> Cohort {
        let s = self.targets[slice];
        let s2 = s * s;
        let last = self.times.steps + 1 - self.q;
        let t_lo = if level == 0 {
            s
        } else {
            self.times.time(level + 1)
        };
        let t_hi = if level == last {
            f64::INFINITY
        } else {
            self.times.time(level + 2)
        };
        let pad = 2.0 * grid.h;
        let r_mask = mask_radius(s);
        let r_lo = ((t_lo * t_lo - s2).max(0.0)).sqrt() - pad;
        let r_hi = ((t_hi * t_hi - s2).max(0.0)).sqrt().min(r_mask) + pad;
        let nmax = grid.n_per_axis;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if let Some((jlo, jhi)) = grid.span(r_hi, 0, nmax) {
            for j in jlo..=jhi {
                let y = grid.coord(j);
                let Some((ilo, ihi)) = grid.span((r_hi * r_hi - y * y).max(0.0).sqrt(), 0, nmax)
                else {
                    continue;
                };
                let hole = if r_lo > 0.0 && y * y < r_lo * r_lo {
                    grid.span((r_lo * r_lo - y * y).sqrt(), 0, nmax)
                } else {
                    None
                };
                for i in ilo..=ihi {
                    if matches!(hole, Some((a, b)) if i > a && i < b) {
                        continue;
                    }
                    let x = grid.coords(i, j);
                    let r2 = x[0] * x[0] + x[1] * x[1];
                    if r2.sqrt() > r_mask {
                        continue;
                    }
                    let tc = (s2 + r2).sqrt();
                    if self.first_of(tc) != level {
                        continue;
                    }
                    points.push(SlicePoint {
                        i: i as u32,
                        j: j as u32,
                        x,
                        t: tc,
                    });
                    weights.push(self.weights(tc, level));
                }
            }
        }
        Cohort {
            slice,
            first: level,
            jets: Vec::new(),
            points,
            weights,
        }
    }

    /// Processes the stepper's current level. Call once per level, starting at 0.
    pub fn record(&mut self, stepper: &Stepper, sink: &mut dyn CrossingSink) {
        let level = stepper.level();
        let nvf = stepper.layout().nvf();
        let last_first = self.times.steps + 1 - self.q;
        if level <= last_first {
            for slice in 0..self.targets.len() {
                let s = self.targets[slice];
                let t_hi = self.times.time(level + 2);
                if self.completed[slice] || level > self.last_level[slice] {
                    continue;
                }
                // Cohorts only exist where the slice spans the level's window.
                if level > 0 && level < last_first && t_hi < s {
                    continue;
                }
                let mut c = self.enumerate(slice, level, stepper.grid());
                if !c.points.is_empty() {
                    c.jets = vec![Jet2::ZERO; c.points.len() * nvf];
                    self.open.push_back(c);
                }
            }
        }

        stepper.install(|| {
            for c in self.open.iter_mut() {
                let a = level - c.first;
                if a >= self.q {
                    continue;
                }
                let weights = &c.weights;
                c.jets
                    .par_chunks_mut(CHUNK * nvf)
                    .zip(c.points.par_chunks(CHUNK))
                    .enumerate()
                    .for_each(|(k, (jets, pts))| {
                        let mut buf = [Jet2::ZERO; MAX_VALUE_FIELDS];
                        for (n, pt) in pts.iter().enumerate() {
                            let w = weights[k * CHUNK + n][a];
                            point_jets(stepper, pt.i as usize, pt.j as usize, &mut buf[..nvf]);
                            for (acc, jet) in jets[n * nvf..(n + 1) * nvf].iter_mut().zip(&buf) {
                                acc.add_scaled(w, jet);
                            }
                        }
                    });
            }
        });

        let mut done = Vec::new();
        while self
            .open
            .front()
            .is_some_and(|c| c.first + self.q - 1 <= level)
        {
            done.push(self.open.pop_front().unwrap());
        }
        let targets = &self.targets;
        stepper.install(|| {
            for c in &done {
                sink.accept(&SliceChunk {
                    slice: c.slice,
                    s: targets[c.slice],
                    nvf,
                    points: &c.points,
                    jets: &c.jets,
                });
            }
        });
        for slice in 0..self.targets.len() {
            if !self.completed[slice] && level >= self.last_level[slice] {
                self.completed[slice] = true;
                sink.complete(slice, self.targets[slice]);
            }
        }
    }
}

/// Jets of every value slot at node `(i, j)` of the stepper's current level.
///
/// `∂ₜ²` comes from the equations; every other entry from the stored fields
/// and their spatial stencils.
pub fn point_jets(stepper: &Stepper, i: usize, j: usize, out: &mut [Jet2]) {
    let u = stepper.data();
    let grid = stepper.grid();
    let layout = stepper.layout();
    let mut local = LocalFields::default();
    gather(u, grid, layout, i, j, &mut local);
    let mut acc = [0.0; MAX_VALUE_FIELDS];
    stepper.model().accelerations(&local, &mut acc);
    if let Some(mms) = stepper.forcing() {
        let f = mms.forcing(stepper.model(), stepper.t(), grid.coords(i, j));
        for (a, fk) in acc.iter_mut().zip(f) {
            *a += fk;
        }
    }
    let n = grid.nodes();
    let nf = layout.nf();
    let (cx, cy) = (nf as isize, (n * nf) as isize);
    let inv_h = 1.0 / grid.h;
    let g = ((j * n + i) * nf) as isize;
    let at = |k: isize| u[k as usize];
    let dx = |k: isize| d1(at(k - 2 * cx), at(k - cx), at(k + cx), at(k + 2 * cx)) * inv_h;
    let dy = |k: isize| d1(at(k - 2 * cy), at(k - cy), at(k + cy), at(k + 2 * cy)) * inv_h;
    for (s, jet) in out.iter_mut().enumerate() {
        let f = g + 2 * s as isize;
        let ft = f + 1;
        let u0 = at(f);
        let dxy = d1(dy(f - 2 * cx), dy(f - cx), dy(f + cx), dy(f + 2 * cx)) * inv_h;
        *jet = Jet2 {
            u: u0,
            du: [at(ft), dx(f), dy(f)],
            ddu: [
                acc[s],
                dx(ft),
                dy(ft),
                d2(at(f - 2 * cx), at(f - cx), u0, at(f + cx), at(f + 2 * cx)) * inv_h * inv_h,
                dxy,
                d2(at(f - 2 * cy), at(f - cy), u0, at(f + cy), at(f + 2 * cy)) * inv_h * inv_h,
            ],
        };
    }
}
