//! Residuals of the commutator identities, the wave-operator decomposition and
//! the reconstruction of `∂φ` from `L₀φ`, `Lₐφ`.
//!
//! All residuals are relative: the absolute discrepancy is divided by
//! `max(1, magnitude of the terms being compared)`, so that polynomial test
//! fields evaluated at `t ~ 100` are judged against rounding at their own scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::poly::{Poly, PolyField};
use super::{lie_boost, lie_scaling, Event, Jet1, Jet2, VectorField};

/// Anything that can hand out exact 2-jets.
pub trait TestField {
    fn jet2(&self, p: Event) -> Jet2;
}

impl TestField for PolyField {
    fn jet2(&self, p: Event) -> Jet2 {
        PolyField::jet2(self, p)
    }
}

impl<F: Fn(Event) -> Jet2> TestField for F {
    fn jet2(&self, p: Event) -> Jet2 {
        self(p)
    }
}

/// The commutator identities, one variant per family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommutatorPair {
    /// `[∂ₜ, Lₐ] = ∂ₐ`
    DtBoost { a: usize },
    /// `[∂_b, Lₐ] = δ_ab ∂ₜ`
    DxBoost { b: usize, a: usize },
    /// `[t, Lₐ] = -xₐ`
    TimeBoost { a: usize },
    /// `[x^b, Lₐ] = -t δ_ab`
    CoordBoost { b: usize, a: usize },
    /// `[L₁, L₂] = x₁∂₂ - x₂∂₁`
    BoostBoost,
    /// `[∂_α, L₀] = ∂_α`
    DScaling { alpha: usize },
    /// `[Lₐ, L₀] = 0`
    BoostScaling { a: usize },
    /// `[Lₐ, K] = (s/t)² Lₐ`
    BoostK { a: usize },
    /// `[∂ₐ, K] = (2/t) Lₐ`
    DxK { a: usize },
}

impl CommutatorPair {
    /// Every instance of every family.
    pub fn all() -> Vec<CommutatorPair> {
        use CommutatorPair::*;
        let mut v = Vec::new();
        for a in 1..3 {
            v.push(DtBoost { a });
            for b in 1..3 {
                v.push(DxBoost { b, a });
                v.push(CoordBoost { b, a });
            }
            v.push(TimeBoost { a });
            v.push(BoostScaling { a });
            v.push(BoostK { a });
            v.push(DxK { a });
        }
        v.push(BoostBoost);
        for alpha in 0..3 {
            v.push(DScaling { alpha });
        }
        v
    }

    pub fn name(&self) -> String {
        use CommutatorPair::*;
        match *self {
            DtBoost { a } => format!("[dt, L{a}] = d{a}"),
            DxBoost { b, a } => format!("[d{b}, L{a}] = delta dt"),
            TimeBoost { a } => format!("[t, L{a}] = -x{a}"),
            CoordBoost { b, a } => format!("[x{b}, L{a}] = -t delta"),
            BoostBoost => "[L1, L2] = x1 d2 - x2 d1".to_string(),
            DScaling { alpha } => format!("[d{alpha}, L0] = d{alpha}"),
            BoostScaling { a } => format!("[L{a}, L0] = 0"),
            BoostK { a } => format!("[L{a}, K] = (s/t)^2 L{a}"),
            DxK { a } => format!("[d{a}, K] = (2/t) L{a}"),
        }
    }

    /// Relative residual of the identity applied to `jet` at `p`.
    fn residual_at(&self, jet: &Jet2, p: Event) -> f64 {
        use CommutatorPair::*;
        use VectorField as V;
        let (lhs, rhs, scale) = match *self {
            DtBoost { a } => vector_pair(V::Dt, V::Boost(a), jet, p, |j| j.du[a]),
            DxBoost { b, a } => vector_pair(V::Dx(b), V::Boost(a), jet, p, |j| {
                if a == b {
                    j.du[0]
                } else {
                    0.0
                }
            }),
            BoostBoost => vector_pair(V::Boost(1), V::Boost(2), jet, p, |j| {
                p.x[0] * j.du[2] - p.x[1] * j.du[1]
            }),
            DScaling { alpha } => {
                let x = if alpha == 0 { V::Dt } else { V::Dx(alpha) };
                vector_pair(x, V::Scaling, jet, p, |j| j.du[alpha])
            }
            BoostScaling { a } => vector_pair(V::Boost(a), V::Scaling, jet, p, |_| 0.0),
            BoostK { a } => vector_pair(V::Boost(a), V::K, jet, p, |j| {
                (p.s2() / (p.t * p.t)) * V::Boost(a).value(j, p)
            }),
            DxK { a } => vector_pair(V::Dx(a), V::K, jet, p, |j| {
                (2.0 / p.t) * V::Boost(a).value(j, p)
            }),
            TimeBoost { a } => multiplier_pair(0, a, jet, p, -p.x[a - 1] * jet.u),
            CoordBoost { b, a } => {
                let rhs = if a == b { -p.t * jet.u } else { 0.0 };
                multiplier_pair(b, a, jet, p, rhs)
            }
        };
        (lhs - rhs).abs() / scale.max(1.0)
    }
}

/// `(XY - YX)φ` against `rhs(φ)`, with the magnitude scale of the terms.
fn vector_pair(
    x: VectorField,
    y: VectorField,
    jet: &Jet2,
    p: Event,
    rhs: impl Fn(&Jet2) -> f64,
) -> (f64, f64, f64) {
    let xy = x.apply_jet1(&y.apply_jet2(jet, p), p);
    let yx = y.apply_jet1(&x.apply_jet2(jet, p), p);
    let r = rhs(jet);
    (xy - yx, r, xy.abs().max(yx.abs()).max(r.abs()))
}

/// `(x^α Lₐ - Lₐ x^α)φ` for a coordinate multiplier `x^α`.
fn multiplier_pair(alpha: usize, a: usize, jet: &Jet2, p: Event, rhs: f64) -> (f64, f64, f64) {
    let coord = Jet2::coordinate(alpha, p);
    let first = p.coord(alpha) * VectorField::Boost(a).value(jet, p);
    let second = VectorField::Boost(a).value(&coord.mul(jet), p);
    (first - second, rhs, first.abs().max(second.abs()).max(rhs.abs()))
}

/// Sup over `samples` of the relative residual of one commutator identity.
pub fn commutator_residual(pair: CommutatorPair, field: &dyn TestField, samples: &[Event]) -> f64 {
    samples
        .iter()
        .map(|&p| pair.residual_at(&field.jet2(p), p))
        .fold(0.0, f64::max)
}

/// Sup over `samples` of the discrepancy between `-□φ` evaluated directly
/// and through both semi-hyperboloidal expansions.
pub fn box_decomposition_residual(field: &dyn TestField, samples: &[Event]) -> f64 {
    samples
        .iter()
        .map(|&p| {
            let jet = field.jet2(p);
            let t = p.t;
            let ratio = p.s2() / (t * t);
            let dt_jet = Jet1 {
                u: jet.du[0],
                du: [jet.dd(0, 0), jet.dd(0, 1), jet.dd(0, 2)],
            };
            let direct = jet.dd(0, 0) - jet.dd(1, 1) - jet.dd(2, 2);
            let first_order = -(p.r2() / (t * t * t)) * jet.du[0] + (2.0 / t) * jet.du[0];

            let mut frame = ratio * jet.dd(0, 0) + first_order;
            let mut boosts = 0.0;
            let mut scale = direct.abs().max((ratio * jet.dd(0, 0)).abs());
            for a in 1..3 {
                let xa = p.x[a - 1];
                let ud = VectorField::Underdel(a);
                let cross = 2.0 * (xa / t) * ud.apply_jet1(&dt_jet, p);
                let square = ud.apply_jet1(&ud.apply_jet2(&jet, p), p);
                frame += cross - square;

                let l = VectorField::Boost(a);
                let lcross = 2.0 * (xa / t) * l.apply_jet1(&dt_jet, p);
                let lsquare = l.apply_jet1(&ud.apply_jet2(&jet, p), p);
                boosts += lcross - lsquare;
                scale = scale.max(cross.abs()).max(square.abs()).max(lcross.abs() / t);
            }
            boosts = ratio * jet.dd(0, 0)
                + (boosts - (p.r2() / (t * t)) * jet.du[0] + 2.0 * jet.du[0]) / t;
            let scale = scale.max(first_order.abs()).max(1.0);
            ((direct - frame).abs().max((direct - boosts).abs())) / scale
        })
        .fold(0.0, f64::max)
}

/// Reconstruct `∂φ` from `L₀φ` and `Lₐφ`:
///
/// ```text
/// ∂ₜ = (t²/s²)(t⁻¹L₀ - (xᵃ/t²)Lₐ)
/// ∂ₐ = -(xₐ/s²)L₀ + (xₐxᵇ/(t s²))L_b + t⁻¹Lₐ
/// ```
pub fn deriv_from_boosts(l0: f64, la: [f64; 2], p: Event) -> [f64; 3] {
    let t = p.t;
    let s2 = p.s2();
    let xl = p.x[0] * la[0] + p.x[1] * la[1];
    let dt = (t * t / s2) * (l0 / t - xl / (t * t));
    let mut d = [dt, 0.0, 0.0];
    for a in 1..3 {
        let xa = p.x[a - 1];
        d[a] = -(xa / s2) * l0 + xa * xl / (t * s2) + la[a - 1] / t;
    }
    d
}

/// Relative discrepancy between the stored first derivatives of `jet` and
/// those rebuilt by [`deriv_from_boosts`].
pub fn deriv_reconstruction_residual(jet: &Jet2, p: Event) -> f64 {
    let l0 = lie_scaling(jet, p).u;
    let la = [lie_boost(1, jet, p).u, lie_boost(2, jet, p).u];
    let d = deriv_from_boosts(l0, la, p);
    let scale = jet.grad_norm().max(1.0);
    (0..3)
        .map(|k| (d[k] - jet.du[k]).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Relative gap between the three forms of the energy density at `p`.
pub fn energy_forms_residual(jet: &Jet2, p: Event, m: f64) -> f64 {
    let [a, b, c] = crate::foliation::energy_density(&Jet1::from(*jet), p, m);
    let scale = (jet.grad_norm().powi(2) + m * m * jet.u * jet.u).max(1.0);
    (a - b).abs().max((b - c).abs()) / scale
}

/// Uniform random events with `2 ≤ t ≤ 100`, `r < t - 1`.
pub fn cone_samples(n: usize, seed: u64) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.gen_range(2.0..100.0);
            let r = rng.gen_range(0.0..(t - 1.0));
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            Event::new(t, r * th.cos(), r * th.sin())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    /// Largest relative residual over all samples.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub points: usize,
    pub degree: u32,
    pub tolerance: f64,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.residual <= self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().fold(0.0, |m, c| m.max(c.residual))
    }
}

/// Every identity on random polynomial fields of `degree`, `points` events in
/// total. A fresh field is drawn for each block of 1000 events.
pub fn run_battery(points: usize, degree: u32, seed: u64, tolerance: f64) -> IdentityReport {
    const BLOCK: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = cone_samples(points, seed ^ 0x5eed);
    let pairs = CommutatorPair::all();
    let mut worst = vec![0.0f64; pairs.len() + 3];
    for block in samples.chunks(BLOCK) {
        let field = PolyField::new(Poly::random(degree, &mut rng));
        for (k, pair) in pairs.iter().enumerate() {
            worst[k] = worst[k].max(commutator_residual(*pair, &field, block));
        }
        let n = pairs.len();
        worst[n] = worst[n].max(box_decomposition_residual(&field, block));
        for &p in block {
            let jet = field.jet2(p);
            worst[n + 1] = worst[n + 1].max(energy_forms_residual(&jet, p, 1.0));
            worst[n + 2] = worst[n + 2].max(deriv_reconstruction_residual(&jet, p));
        }
    }
    let mut names: Vec<String> = pairs.iter().map(|p| p.name()).collect();
    names.push("-box = frame expansion = boost expansion".into());
    names.push("energy density: three forms agree".into());
    names.push("d from L0 and La".into());
    IdentityReport {
        points,
        degree,
        tolerance,
        checks: names
            .into_iter()
            .zip(worst)
            .map(|(name, residual)| IdentityCheck { name, residual })
            .collect(),
    }
}
