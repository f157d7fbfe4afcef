//! Manufactured solutions: `q*(t, x) = a_q(t)·β(|x|/ρ)` for every value slot.

use super::stepper::{Domain, Stepper, TimeGrid};
use super::{FieldLayout, FieldState, Grid2D};
use crate::error::Result;
use crate::model::{CoefficientSet, LocalFields, Model, ModelParams, WaveSource, MAX_VALUE_FIELDS};
use crate::vfcalc::Jet2;

/// `a(t) = amp·sin(ω t + φ) + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub amp: f64,
    pub omega: f64,
    pub phase: f64,
    pub offset: f64,
}

impl Mode {
    fn eval(&self, t: f64) -> [f64; 3] {
        let arg = self.omega * t + self.phase;
        let (s, c) = arg.sin_cos();
        [
            self.amp * s + self.offset,
            self.amp * self.omega * c,
            -self.amp * self.omega * self.omega * s,
        ]
    }
}

/// Spatial factor `β`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `exp(1 - 1/(1 - q))` for `q = |x|²/ρ² < 1`, zero outside.
    Compact,
    /// `exp(-|x|²/ρ²)`. Its high derivatives stay moderate, so a fourth-order
    /// scheme shows its order already at coarse spacings; the compact bump
    /// needs `h ≲ ρ/100` for that.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedSpec {
    pub shape: Shape,
    pub rho: f64,
    /// One mode per value slot (`w`, `W₁`, `W₂`, `v¹ … vᵖ`).
    pub modes: Vec<Mode>,
}

impl ManufacturedSpec {
    pub fn zero(p: usize) -> Self {
        Self {
            shape: Shape::Compact,
            rho: 1.0,
            modes: vec![
                Mode {
                    amp: 0.0,
                    omega: 0.0,
                    phase: 0.0,
                    offset: 0.0
                };
                3 + p
            ],
        }
    }

    /// The profile used by the convergence study.
    pub fn standard(p: usize) -> Self {
        let modes = (0..3 + p)
            .map(|k| Mode {
                amp: 0.5,
                omega: 1.0 + 0.3 * k as f64,
                phase: 0.2 * k as f64,
                offset: 0.1,
            })
            .collect();
        Self {
            shape: Shape::Gaussian,
            rho: RHO_GAUSSIAN,
            modes,
        }
    }

    /// Value, gradient and Hessian of `β(|x|/ρ)` as a function of `x` only.
    fn profile(&self, x: [f64; 2]) -> (f64, [f64; 2], [f64; 3]) {
        let r2 = self.rho * self.rho;
        let q = (x[0] * x[0] + x[1] * x[1]) / r2;
        // g(q) and its first two q-derivatives.
        let (g, g1, g2) = match self.shape {
            Shape::Compact => {
                if q >= 1.0 {
                    return (0.0, [0.0; 2], [0.0; 3]);
                }
                let om = 1.0 - q;
                let g = (1.0 - 1.0 / om).exp();
                (g, -g / (om * om), g * (1.0 / om.powi(4) - 2.0 / om.powi(3)))
            }
            Shape::Gaussian => {
                let g = (-q).exp();
                (g, -g, g)
            }
        };
        let d = [g1 * 2.0 * x[0] / r2, g1 * 2.0 * x[1] / r2];
        let dd = |a: usize, b: usize| {
            let delta = if a == b { 2.0 * g1 / r2 } else { 0.0 };
            g2 * 4.0 * x[a] * x[b] / (r2 * r2) + delta
        };
        (g, d, [dd(0, 0), dd(0, 1), dd(1, 1)])
    }

    /// Exact jet of slot `k` at `(t, x)`.
    pub fn jet(&self, k: usize, t: f64, x: [f64; 2]) -> Jet2 {
        let (b, db, hb) = self.profile(x);
        let [a, a1, a2] = self.modes[k].eval(t);
        Jet2 {
            u: a * b,
            du: [a1 * b, a * db[0], a * db[1]],
            ddu: [a2 * b, a1 * db[0], a1 * db[1], a * hb[0], a * hb[1], a * hb[2]],
        }
    }

    /// `∂ₜ²q* - rhs(q*)` for every value slot.
    pub fn forcing(&self, model: &Model, t: f64, x: [f64; 2]) -> [f64; MAX_VALUE_FIELDS] {
        let mut local = LocalFields::default();
        let mut tt = [0.0; MAX_VALUE_FIELDS];
        for k in 0..self.modes.len() {
            let j = self.jet(k, t, x);
            local.u[k] = j.u;
            local.du[k] = j.du;
            local.lap[k] = j.laplacian();
            tt[k] = j.ddu[0];
        }
        let mut rhs = [0.0; MAX_VALUE_FIELDS];
        model.accelerations(&local, &mut rhs);
        let mut out = [0.0; MAX_VALUE_FIELDS];
        for k in 0..self.modes.len() {
            out[k] = tt[k] - rhs[k];
        }
        out
    }

    pub fn exact_state(&self, grid: &Grid2D, layout: FieldLayout, t: f64) -> FieldState {
        let mut st = FieldState::zeros(grid, layout, t);
        let n = grid.nodes();
        for j in 0..n {
            for i in 0..n {
                let x = grid.coords(i, j);
                let cell = st.cell_mut(i, j);
                for k in 0..layout.nvf() {
                    let jet = self.jet(k, t, x);
                    cell[2 * k] = jet.u;
                    cell[2 * k + 1] = jet.du[0];
                }
            }
        }
        st
    }
}

const RHO_GAUSSIAN: f64 = 1.0;

/// Setup of a convergence study.
#[derive(Clone, Debug)]
pub struct MmsSetup {
    pub model: Model,
    pub spec: ManufacturedSpec,
    pub half_width: f64,
    pub t0: f64,
    pub t_final: f64,
    pub cfl: f64,
}

impl MmsSetup {
    /// Full nonlinear system with seeded O(1) coefficients, Gaussian profile with `ρ = 1`, `L = 5`, `t ∈ [2, 6]`.
    pub fn standard(p: usize, seed: u64) -> Self {
        let params = ModelParams {
            p,
            ..ModelParams::default()
        };
        Self {
            model: Model::new(params, CoefficientSet::random(p, seed, 1.0), WaveSource::Standard),
            spec: ManufacturedSpec::standard(p),
            half_width: 5.0,
            t0: 2.0,
            t_final: 6.0,
            cfl: 0.4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsLevel {
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// Max-norm error over every stored field at `t_final`.
    pub error: f64,
}

/// Evolves the forced system on spacing `h` and measures the error against `q*`.
pub fn run_mms(setup: &MmsSetup, h: f64, workers: usize) -> Result<MmsLevel> {
    let grid = Grid2D::covering(h, setup.half_width)?;
    let layout = setup.model.layout();
    let times = TimeGrid::new(setup.t0, setup.t_final, setup.cfl * h);
    let init = setup.spec.exact_state(&grid, layout, setup.t0);
    let mut stepper = Stepper::new(
        setup.model.clone(),
        init,
        times,
        Domain::Full,
        Some(setup.spec.clone()),
        workers,
    )?;
    while !stepper.done() {
        stepper.step()?;
    }
    let exact = setup.spec.exact_state(&grid, layout, stepper.t());
    let n = grid.nodes();
    let nf = layout.nf();
    let mut error: f64 = 0.0;
    // Boundary ring is pinned, so compare on the updated interior.
    for j in 2..n - 2 {
        for i in 2..n - 2 {
            let g = (j * n + i) * nf;
            for f in 0..nf {
                error = error.max((stepper.data()[g + f] - exact.data[g + f]).abs());
            }
        }
    }
    Ok(MmsLevel {
        h,
        dt: times.dt,
        steps: times.steps,
        error,
    })
}

/// Observed orders `log₂(e_k / e_{k+1})` between successive halvings.
pub fn observed_orders(levels: &[MmsLevel]) -> Vec<f64> {
    levels
        .windows(2)
        .map(|w| (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_solution_needs_no_forcing() {
        let setup = MmsSetup::standard(2, 1);
        let spec = ManufacturedSpec::zero(2);
        let f = spec.forcing(&setup.model, 3.0, [0.3, -0.2]);
        assert!(f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_wave_forcing_matches_hand_formula() {
        // Only w* = sin(t)·bump, coefficients zero: forcing = -sin t·β - sin t·Δβ.
        let mut spec = ManufacturedSpec::zero(1);
        spec.rho = 2.0;
        spec.modes[0] = Mode {
            amp: 1.0,
            omega: 1.0,
            phase: 0.0,
            offset: 0.0,
        };
        let model = Model::new(
            ModelParams {
                p: 1,
                ..ModelParams::default()
            },
            CoefficientSet::zero(1),
            WaveSource::Standard,
        );
        let t = 2.5;
        let x = [0.4, 0.7];
        let f = spec.forcing(&model, t, x);
        // Finite-difference Laplacian of the profile as an independent check.
        let beta = |x: [f64; 2]| crate::model::bump((x[0] * x[0] + x[1] * x[1]).sqrt() / 2.0);
        let e = 1e-3;
        let lap = (beta([x[0] + e, x[1]]) + beta([x[0] - e, x[1]]) + beta([x[0], x[1] + e])
            + beta([x[0], x[1] - e])
            - 4.0 * beta(x))
            / (e * e);
        let want = -t.sin() * beta(x) - t.sin() * lap;
        assert!((f[0] - want).abs() < 1e-5, "{} {}", f[0], want);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn resubstitution_closes_the_equations() {
        let setup = MmsSetup::standard(2, 3);
        for &(t, x) in &[(2.0, [0.1, 0.2]), (4.5, [-1.3, 0.8]), (5.9, [2.0, -1.5])] {
            let f = setup.spec.forcing(&setup.model, t, x);
            let mut local = LocalFields::default();
            for k in 0..5 {
                let j = setup.spec.jet(k, t, x);
                local.u[k] = j.u;
                local.du[k] = j.du;
                local.lap[k] = j.laplacian();
            }
            let mut rhs = [0.0; MAX_VALUE_FIELDS];
            setup.model.accelerations(&local, &mut rhs);
            for k in 0..5 {
                let tt = setup.spec.jet(k, t, x).ddu[0];
                assert!((tt - (rhs[k] + f[k])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_derivatives_match_differences() {
        for (shape, rho) in [(Shape::Gaussian, 1.0), (Shape::Compact, 3.0)] {
            let mut spec = ManufacturedSpec::standard(1);
            spec.shape = shape;
            spec.rho = rho;
            let x = [0.9, -1.1];
            let (_, d, hb) = spec.profile(x);
            let e = 1e-5;
            let b = |x: [f64; 2]| spec.profile(x).0;
            let fd0 = (b([x[0] + e, x[1]]) - b([x[0] - e, x[1]])) / (2.0 * e);
            assert!((fd0 - d[0]).abs() < 1e-8);
            let g = |x: [f64; 2]| spec.profile(x).1[1];
            let fd01 = (g([x[0] + e, x[1]]) - g([x[0] - e, x[1]])) / (2.0 * e);
            assert!((fd01 - hb[1]).abs() < 1e-7);
            let g = |x: [f64; 2]| spec.profile(x).1[0];
            let fd00 = (g([x[0] + e, x[1]]) - g([x[0] - e, x[1]])) / (2.0 * e);
            assert!((fd00 - hb[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn gaussian_is_negligible_at_the_boundary() {
        let s = MmsSetup::standard(2, 1);
        let (b, _, _) = s.spec.profile([s.half_width, 0.0]);
        assert!(b < 1e-10);
    }
}
