use hyperwave_core::config::Targets;
use hyperwave_core::evolve::snapshot::{read_snapshot, write_snapshot};
use hyperwave_core::evolve::{run_with, Domain, FieldLayout, RunOptions, Stepper, TimeGrid};
use hyperwave_core::model::make_initial_data;
use hyperwave_core::{CoefficientSet, FieldState, Grid2D, Model, ModelParams, Preset, ProfileSpec, RunConfig, WaveSource};
use proptest::prelude::*;

fn short(workers: usize, band: bool) -> RunConfig {
    let mut c = Preset::TheoremQuick.config();
    c.grid.t_final = 5.0;
    c.grid.band = band;
    c.targets = Targets::List(vec![2.0, 2.5, 3.0]);
    c.workers = workers;
    c
}

#[test]
fn rows_do_not_depend_on_worker_count() {
    let a = run_with(&short(1, true), &RunOptions::default()).unwrap();
    let b = run_with(&short(3, true), &RunOptions::default()).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.meta.katayama_final.to_bits(), b.meta.katayama_final.to_bits());
}

#[test]
fn band_agrees_with_full_domain() {
    let a = run_with(&short(1, true), &RunOptions::default()).unwrap();
    let b = run_with(&short(1, false), &RunOptions::default()).unwrap();
    assert!(a.meta.freeze);
    assert_eq!(a.rows.len(), 3);
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for ((name, x), y) in hyperwave_core::DiagnosticsRow::COLUMNS.iter().zip(ra.values()).zip(rb.values()) {
            assert!(
                // The band drops the dispersive tail beyond its outer margin.
                (x - y).abs() <= 1e-8 * x.abs().max(y.abs()).max(1e-300),
                "{name} at s = {}: {x} vs {y}",
                ra.s
            );
        }
    }
    let (ka, kb) = (a.meta.katayama_final, b.meta.katayama_final);
    assert!((ka - kb).abs() <= 1e-6 * kb, "{ka} {kb}");
}

#[test]
fn linear_energy_is_nearly_constant() {
    let mut c = Preset::LinearQuick.config();
    c.grid.t_final = 8.0;
    c.targets = Targets::List(vec![2.0, 3.0, 3.8]);
    c.workers = 1;
    let out = run_with(&c, &RunOptions::default()).unwrap();
    let e: Vec<f64> = out.rows.iter().map(|r| r.energy_w).collect();
    let (lo, hi) = e.iter().fold((f64::MAX, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi / lo < 1.01, "{e:?}");
    // Uncoupled: W₁ = w and W₂ = 0 throughout.
    assert!(out.rows.iter().all(|r| r.katayama == 0.0));
}

#[test]
fn support_spreads_no_faster_than_light() {
    let params = ModelParams::default();
    let c = CoefficientSet::zero(2);
    let h = 0.1;
    let grid = Grid2D::for_evolution(h, 6.0).unwrap();
    let init = make_initial_data(&params, &ProfileSpec::default_for(2), &c, &grid).unwrap();
    let peak = init.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let model = Model::new(params, c, WaveSource::Standard);
    let times = TimeGrid::new(2.0, 6.0, 0.4 * h);
    let mut st = Stepper::new(model, init, times, Domain::Full, None, 1).unwrap();
    let n = grid.nodes();
    let nf = FieldLayout::new(2).nf();
    while !st.done() {
        st.step().unwrap();
        let t = st.t();
        let (mut near, mut far) = (0.0f64, 0.0f64);
        for j in 0..n {
            for i in 0..n {
                let [x, y] = grid.coords(i, j);
                let r = (x * x + y * y).sqrt();
                if r > t - 1.0 + 2.0 * h {
                    let g = (j * n + i) * nf;
                    let m = st.data()[g..g + nf].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    near = near.max(m);
                    if r > t - 1.0 + 1.0 {
                        far = far.max(m);
                    }
                }
            }
        }
        // Centred stencils leak a dispersive tail ahead of the cone; it is
        // small next to the cone and negligible a unit further out.
        assert!(near <= 1e-2 * peak, "t = {t}: {near:e} vs peak {peak:e}");
        assert!(far <= 1e-6 * peak, "t = {t}: {far:e} vs peak {peak:e}");
    }
}

#[test]
fn blowup_is_reported_not_raised() {
    let mut c = Preset::ContrastBlowup.config();
    c.model.epsilon = 30.0;
    c.grid.t_final = 6.0;
    c.targets = Targets::List(vec![2.0, 3.0]);
    c.workers = 1;
    let out = run_with(&c, &RunOptions::default()).unwrap();
    assert!(out.blew_up(), "{:?}", out.meta.termination);
    assert!(out.meta.katayama_final.is_nan());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn snapshots_round_trip(
        p in 1usize..4,
        n in 8usize..13,
        t in 2.0f64..50.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let grid = Grid2D::new(1.0, 2.0 / n as f64, n).unwrap();
        let mut st = FieldState::zeros(&grid, FieldLayout::new(p), t);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for v in st.data.iter_mut() {
            *v = rng.gen_range(-1e3..1e3);
        }
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &st).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(back.t.to_bits(), st.t.to_bits());
        prop_assert_eq!(back.layout, st.layout);
        prop_assert_eq!(back.grid, st.grid);
        prop_assert!(back.data.iter().zip(&st.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_snapshots_are_rejected(cut in 0usize..64) {
        let grid = Grid2D::new(1.0, 0.25, 8).unwrap();
        let st = FieldState::zeros(&grid, FieldLayout::new(2), 2.0);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &st).unwrap();
        buf.truncate(buf.len().saturating_sub(cut + 1));
        prop_assert!(read_snapshot(buf.as_slice()).is_err());
    }
}
