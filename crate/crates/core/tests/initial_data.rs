use hyperwave_core::diagnostics::katayama_residual_state;
use hyperwave_core::evolve::FieldLayout;
use hyperwave_core::model::make_initial_data;
use hyperwave_core::{CoefficientSet, Grid2D, ModelParams, ProfileSpec};
use proptest::prelude::*;

fn origin(grid: &Grid2D) -> (usize, usize) {
    let n = grid.nodes();
    let i = (0..n).find(|&i| grid.coord(i).abs() < 1e-12).expect("grid has no node at 0");
    (i, i)
}

#[test]
fn velocity_of_w1_carries_the_p0_correction() {
    let params = ModelParams {
        p: 1,
        epsilon: 1.0,
        ..ModelParams::default()
    };
    let profile = ProfileSpec {
        radius: 1.0,
        w0: 0.0,
        w1: 5.0,
        v0: vec![3.0],
        v1: vec![0.0],
    };
    let mut c = CoefficientSet::zero(1);
    c.p_vec[0] = 2.0;
    let grid = Grid2D::covering(0.25, 2.0).unwrap();
    let st = make_initial_data(&params, &profile, &c, &grid).unwrap();
    let (i, j) = origin(&grid);
    let cell = st.cell(i, j);
    assert_eq!(cell[FieldLayout::W1 + 1], -13.0);
    assert_eq!(cell[FieldLayout::W + 1], 5.0);
    assert_eq!(cell[FieldLayout::v(0)], 3.0);
}

#[test]
fn zero_amplitude_gives_zero_state() {
    let params = ModelParams {
        epsilon: 0.0,
        ..ModelParams::default()
    };
    let grid = Grid2D::covering(0.1, 3.0).unwrap();
    let c = CoefficientSet::random(2, 5, 1.0);
    let st = make_initial_data(&params, &ProfileSpec::default_for(2), &c, &grid).unwrap();
    assert!(st.data.iter().all(|v| *v == 0.0));
}

#[test]
fn oversized_profile_is_rejected() {
    let mut profile = ProfileSpec::default_for(2);
    profile.radius = 1.5;
    let grid = Grid2D::covering(0.1, 3.0).unwrap();
    let err = make_initial_data(&ModelParams::default(), &profile, &CoefficientSet::zero(2), &grid).unwrap_err();
    assert!(err.to_string().contains("profile.radius"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn data_vanish_outside_the_unit_ball(
        eps in 0.0f64..0.5,
        radius in 0.2f64..=1.0,
        mults in prop::collection::vec(-2.0f64..2.0, 6),
        h in prop::sample::select(vec![0.05, 0.1, 0.125, 0.2]),
    ) {
        let params = ModelParams { p: 2, epsilon: eps, ..ModelParams::default() };
        let profile = ProfileSpec {
            radius,
            w0: mults[0],
            w1: mults[1],
            v0: mults[2..4].to_vec(),
            v1: mults[4..6].to_vec(),
        };
        let grid = Grid2D::covering(h, 2.5).unwrap();
        let c = CoefficientSet::random(2, 11, 1.0);
        let st = make_initial_data(&params, &profile, &c, &grid).unwrap();
        let n = grid.nodes();
        for j in 0..n {
            for i in 0..n {
                let [x, y] = grid.coords(i, j);
                if (x * x + y * y).sqrt() >= radius {
                    prop_assert!(st.cell(i, j).iter().all(|v| *v == 0.0));
                }
            }
        }
        // W₂ starts at rest, so the decomposition holds exactly.
        prop_assert!(katayama_residual_state(&st, &c, -1.0) <= 1e-12);
    }
}
