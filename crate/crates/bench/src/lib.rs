//! Fixtures shared by the benchmarks.

use hyperwave_core::evolve::{Domain, Stepper, TimeGrid};
use hyperwave_core::model::make_initial_data;
use hyperwave_core::{Grid2D, HyperboloidSlice, Preset, RunConfig};

/// The quick preset on a grid of spacing `h`, run to `t_final`.
pub fn config(h: f64, t_final: f64) -> RunConfig {
    let mut c = Preset::TheoremQuick.config();
    c.grid.h = h;
    c.grid.t_final = t_final;
    c.targets = hyperwave_core::config::Targets::List(vec![2.0, 3.0]);
    c.workers = 1;
    c
}

pub fn stepper(h: f64, t_final: f64, domain: Domain) -> Stepper {
    let c = config(h, t_final);
    let model = c.model();
    let grid = Grid2D::for_evolution(h, t_final).unwrap();
    let init = make_initial_data(&c.model, &c.profile, &model.coeffs, &grid).unwrap();
    let times = TimeGrid::new(c.model.t0, t_final, c.grid.cfl * h);
    Stepper::new(model, init, times, domain, None, 1).unwrap()
}

/// A slice filled from a smooth closed-form field.
pub fn analytic_slice(s: f64, h: f64) -> HyperboloidSlice {
    let grid = Grid2D::covering(h, 0.5 * (s * s - 1.0) + 1.0).unwrap();
    HyperboloidSlice::analytic(s, &grid, 5, |p| {
        let r2 = p.r2();
        let g = (-(r2) / (p.t * p.t)).exp() / p.t;
        (0..5)
            .map(|k| {
                let mut j = hyperwave_core::Jet2::constant(g * (1.0 + 0.1 * k as f64));
                j.du = [-g / p.t, -2.0 * p.x[0] * g / (p.t * p.t), -2.0 * p.x[1] * g / (p.t * p.t)];
                j
            })
            .collect()
    })
}
