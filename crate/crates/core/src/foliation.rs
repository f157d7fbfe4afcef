//! Norms and energies on hyperboloidal slices.
//!
//! Integrals use the flat measure `dx` on the slice's grid footprint, so each
//! recorded point carries weight `h²`. Every functional is built from an
//! accumulator that takes one point at a time; the same accumulators run on
//! materialized [`HyperboloidSlice`]s and inside the streaming reducer.

use crate::error::{Error, Result};
use crate::evolve::crossing::mask_radius;
use crate::evolve::{CrossingSink, Grid2D, SliceChunk, SlicePoint};
use crate::vfcalc::{frame_perp, frame_underdel, lie_boost, lie_boost_value, lie_scaling, rotation, Event, Jet1, Jet2, VectorField};

/// Which field a functional is evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldSel {
    W,
    W1,
    W2,
    /// One Klein-Gordon component, zero-based.
    V(usize),
    /// The vector `v⃗`: norms combine components in `ℓ²`.
    VAll,
}

impl FieldSel {
    /// Value slots covered by the selection.
    pub fn slots(&self, nvf: usize) -> std::ops::Range<usize> {
        match *self {
            FieldSel::W => 0..1,
            FieldSel::W1 => 1..2,
            FieldSel::W2 => 2..3,
            FieldSel::V(i) => 3 + i..4 + i,
            FieldSel::VAll => 3..nvf,
        }
    }
}

/// Jets of every value slot at the grid points of `H_s ∩ {r ≤ t - 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperboloidSlice {
    pub s: f64,
    pub h: f64,
    pub nvf: usize,
    pub points: Vec<SlicePoint>,
    /// `nvf` jets per point.
    pub jets: Vec<Jet2>,
    pub complete: bool,
}

impl HyperboloidSlice {
    pub fn empty(s: f64, h: f64, nvf: usize) -> Self {
        Self {
            s,
            h,
            nvf,
            points: Vec::new(),
            jets: Vec::new(),
            complete: false,
        }
    }

    /// A complete slice with jets supplied in closed form.
    pub fn analytic(s: f64, grid: &Grid2D, nvf: usize, f: impl Fn(Event) -> Vec<Jet2>) -> Self {
        let mut slice = Self::empty(s, grid.h, nvf);
        let rm = mask_radius(s);
        for j in 0..grid.nodes() {
            for i in 0..grid.nodes() {
                let x = grid.coords(i, j);
                let r2 = x[0] * x[0] + x[1] * x[1];
                if r2.sqrt() > rm {
                    continue;
                }
                let t = (s * s + r2).sqrt();
                let jets = f(Event { t, x });
                assert_eq!(jets.len(), nvf);
                slice.points.push(SlicePoint {
                    i: i as u32,
                    j: j as u32,
                    x,
                    t,
                });
                slice.jets.extend(jets);
            }
        }
        slice.complete = true;
        slice
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn event(&self, k: usize) -> Event {
        let p = &self.points[k];
        Event { t: p.t, x: p.x }
    }

    pub fn jets(&self, k: usize) -> &[Jet2] {
        &self.jets[k * self.nvf..(k + 1) * self.nvf]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Event, &[Jet2])> + '_ {
        (0..self.len()).map(|k| (self.event(k), self.jets(k)))
    }

    fn require_complete(&self) -> Result<()> {
        if self.complete {
            Ok(())
        } else {
            Err(Error::PartialSlice(self.s))
        }
    }

    /// Largest violation of `s ≤ t ≤ (s² + 1)/2` over the points.
    pub fn cone_relation_excess(&self) -> f64 {
        let mut acc = ConeAcc::default();
        for (ev, _) in self.iter() {
            acc.add(self.s, ev);
        }
        acc.max_excess
    }
}

/// Collects recorded points into materialized slices.
pub struct SliceCollector {
    pub slices: Vec<HyperboloidSlice>,
}

impl SliceCollector {
    pub fn new(targets: &[f64], h: f64, nvf: usize) -> Self {
        Self {
            slices: targets.iter().map(|&s| HyperboloidSlice::empty(s, h, nvf)).collect(),
        }
    }
}

impl CrossingSink for SliceCollector {
    fn accept(&mut self, chunk: &SliceChunk<'_>) {
        let sl = &mut self.slices[chunk.slice];
        sl.points.extend_from_slice(chunk.points);
        sl.jets.extend_from_slice(chunk.jets);
    }

    fn complete(&mut self, slice: usize, _s: f64) {
        self.slices[slice].complete = true;
    }
}

// ---------------------------------------------------------------------------
// Pointwise densities

/// The three integrands of the hyperboloidal energy `E_m` at one point.
///
/// A: `(∂ₜφ)² + Σ(∂ₐφ)² + 2(xᵃ/t)∂ₜφ∂ₐφ + m²φ²`;
/// B: `((s/t)∂ₜφ)² + Σ(∂̲ₐφ)² + m²φ²`;
/// C: `(∂_⊥φ)² + Σ((s/t)∂ₐφ)² + (t⁻¹Ωφ)² + m²φ²`.
pub fn energy_density(j: &Jet1, p: Event, m: f64) -> [f64; 3] {
    let t = p.t;
    let [dt, d1, d2] = j.du;
    let mass = m * m * j.u * j.u;
    let a = dt * dt + d1 * d1 + d2 * d2 + 2.0 * (p.x[0] * d1 + p.x[1] * d2) * dt / t + mass;
    let st2 = p.s2() / (t * t);
    let u1 = p.x[0] / t * dt + d1;
    let u2 = p.x[1] / t * dt + d2;
    let b = st2 * dt * dt + u1 * u1 + u2 * u2 + mass;
    let perp = dt + (p.x[0] * d1 + p.x[1] * d2) / t;
    let om = (p.x[0] * d2 - p.x[1] * d1) / t;
    let c = perp * perp + st2 * (d1 * d1 + d2 * d2) + om * om + mass;
    [a, b, c]
}

/// `(Σₐ(s∂̲ₐφ)², (Kφ + φ)²)`, the two parts of the conformal energy density.
pub fn conformal_density(j: &Jet1, p: Event) -> (f64, f64) {
    let s2 = p.s2();
    let mut under = 0.0;
    for a in 1..3 {
        let v = p.x[a - 1] / p.t * j.du[0] + j.du[a];
        under += s2 * v * v;
    }
    let k = VectorField::K.apply_jet1(j, p) + j.u;
    (under, k * k)
}

/// `L^J φ` for `|J| ≤ 2` in the order `∅, 1, 2, 11, 12, 21, 22`.
pub fn boost_tower(jet: &Jet2, p: Event) -> [f64; 7] {
    let l1 = lie_boost(1, jet, p);
    let l2 = lie_boost(2, jet, p);
    [
        jet.u,
        l1.u,
        l2.u,
        lie_boost_value(1, &l1, p),
        lie_boost_value(1, &l2, p),
        lie_boost_value(2, &l1, p),
        lie_boost_value(2, &l2, p),
    ]
}

/// First-order fields whose energies make up the Lie-order-2 energy:
/// `φ, ∂ₜφ, ∂₁φ, ∂₂φ, L₁φ, L₂φ`, each as a 1-jet.
pub fn lie_family(jet: &Jet2, p: Event) -> [Jet1; 6] {
    let d = |a: usize| Jet1 {
        u: jet.du[a],
        du: [jet.dd(a, 0), jet.dd(a, 1), jet.dd(a, 2)],
    };
    [
        Jet1::from(*jet),
        d(0),
        d(1),
        d(2),
        lie_boost(1, jet, p),
        lie_boost(2, jet, p),
    ]
}

// ---------------------------------------------------------------------------
// Accumulators

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    /// Form A, which is the defining integrand.
    pub total: f64,
    pub form_a: f64,
    pub form_b: f64,
    pub form_c: f64,
    /// Largest pointwise `max(|A - B|, |B - C|) / (1 + |B|)`.
    pub max_pointwise_gap: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EnergyAcc {
    forms: [f64; 3],
    gap: f64,
}

impl EnergyAcc {
    #[inline]
    pub fn add(&mut self, jets: &[Jet1], p: Event, m: f64) {
        let mut d = [0.0; 3];
        for j in jets {
            let e = energy_density(j, p, m);
            for k in 0..3 {
                d[k] += e[k];
            }
        }
        for k in 0..3 {
            self.forms[k] += d[k];
        }
        let gap = (d[0] - d[1]).abs().max((d[1] - d[2]).abs()) / (1.0 + d[1].abs());
        self.gap = self.gap.max(gap);
    }

    pub fn merge(&mut self, o: &Self) {
        for k in 0..3 {
            self.forms[k] += o.forms[k];
        }
        self.gap = self.gap.max(o.gap);
    }

    pub fn finish(&self, h: f64) -> EnergyBreakdown {
        let w = h * h;
        EnergyBreakdown {
            total: self.forms[0] * w,
            form_a: self.forms[0] * w,
            form_b: self.forms[1] * w,
            form_c: self.forms[2] * w,
            max_pointwise_gap: self.gap,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConformalBreakdown {
    pub total: f64,
    pub underdel: f64,
    pub k_part: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ConformalAcc {
    under: f64,
    k: f64,
}

impl ConformalAcc {
    #[inline]
    pub fn add(&mut self, jets: &[Jet1], p: Event) {
        for j in jets {
            let (a, b) = conformal_density(j, p);
            self.under += a;
            self.k += b;
        }
    }

    pub fn merge(&mut self, o: &Self) {
        self.under += o.under;
        self.k += o.k;
    }

    pub fn finish(&self, h: f64) -> ConformalBreakdown {
        let w = h * h;
        ConformalBreakdown {
            total: (self.under + self.k) * w,
            underdel: self.under * w,
            k_part: self.k * w,
        }
    }
}

/// Weighted norms of one field on a slice.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightedNorms {
    /// `‖(s/t)∂φ‖₂`
    pub l2_sdphi: f64,
    /// `‖(t - r)(s/t)∂φ‖₂`
    pub l2_trsdphi: f64,
    /// `‖(s/t)φ‖₂`
    pub l2_sphi: f64,
    /// `‖φ‖₂`
    pub l2_phi: f64,
    /// `sup t|φ|`
    pub sup_t_phi: f64,
    /// `sup s|φ|`
    pub sup_s_phi: f64,
    /// `sup t^{1/2}(t - r)^{1/2}|∂φ|`
    pub sup_ttr_dphi: f64,
    /// `sup (t - r)|∂φ|·s^{1-δ}`
    pub sup_tr_dphi_s: f64,
    /// `sup s|∂φ|`
    pub sup_s_dphi: f64,
    /// `sup t^{1/2-δ/2}(t - r)^{1/2-δ/2}|φ|`
    pub sup_weighted_phi: f64,
    /// `‖(s/t)L₀φ‖₂`
    pub l2_sl0phi: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct WeightedAcc {
    sums: [f64; 5],
    sups: [f64; 6],
}

impl WeightedAcc {
    /// `jets` are the components of the selected field at `p`.
    #[inline]
    pub fn add(&mut self, jets: &[Jet2], p: Event, s: f64, delta: f64) {
        let (mut u2, mut d2, mut l02) = (0.0, 0.0, 0.0);
        for j in jets {
            u2 += j.u * j.u;
            d2 += j.du.iter().map(|v| v * v).sum::<f64>();
            let l0 = lie_scaling(j, p).u;
            l02 += l0 * l0;
        }
        let t = p.t;
        let tr = t - p.r();
        let st2 = (s / t) * (s / t);
        self.sums[0] += st2 * d2;
        self.sums[1] += tr * tr * st2 * d2;
        self.sums[2] += st2 * u2;
        self.sums[3] += u2;
        self.sums[4] += st2 * l02;
        let (u, du) = (u2.sqrt(), d2.sqrt());
        let e = 0.5 - 0.5 * delta;
        let vals = [
            t * u,
            s * u,
            (t * tr).sqrt() * du,
            tr * du * s.powf(1.0 - delta),
            s * du,
            (t * tr).powf(e) * u,
        ];
        for (m, v) in self.sups.iter_mut().zip(vals) {
            *m = m.max(v);
        }
    }

    pub fn merge(&mut self, o: &Self) {
        for (a, b) in self.sums.iter_mut().zip(o.sums) {
            *a += b;
        }
        for (a, b) in self.sups.iter_mut().zip(o.sups) {
            *a = a.max(b);
        }
    }

    pub fn finish(&self, h: f64) -> WeightedNorms {
        let w = h * h;
        let n = |k: usize| (self.sums[k] * w).sqrt();
        WeightedNorms {
            l2_sdphi: n(0),
            l2_trsdphi: n(1),
            l2_sphi: n(2),
            l2_phi: n(3),
            l2_sl0phi: n(4),
            sup_t_phi: self.sups[0],
            sup_s_phi: self.sups[1],
            sup_ttr_dphi: self.sups[2],
            sup_tr_dphi_s: self.sups[3],
            sup_s_dphi: self.sups[4],
            sup_weighted_phi: self.sups[5],
        }
    }
}

/// Both sides of the two Klainerman-Sobolev inequalities on a slice.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KsReport {
    /// `sup t|φ|`
    pub sup_t: f64,
    /// `Σ_{|J|≤2} ‖L^J φ‖₂`
    pub rhs: f64,
    pub ratio: f64,
    /// `sup s|φ|`
    pub sup_s: f64,
    /// `Σ_{|J|≤2} ‖(s/t) L^J φ‖₂`
    pub rhs_s: f64,
    pub ratio_s: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct KsAcc {
    plain: [f64; 7],
    weighted: [f64; 7],
    sup_t: f64,
    sup_s: f64,
}

impl KsAcc {
    #[inline]
    pub fn add(&mut self, jets: &[Jet2], p: Event, s: f64) {
        let st2 = (s / p.t) * (s / p.t);
        let mut u2 = 0.0;
        for j in jets {
            let tower = boost_tower(j, p);
            for k in 0..7 {
                let v = tower[k] * tower[k];
                self.plain[k] += v;
                self.weighted[k] += st2 * v;
            }
            u2 += j.u * j.u;
        }
        let u = u2.sqrt();
        self.sup_t = self.sup_t.max(p.t * u);
        self.sup_s = self.sup_s.max(s * u);
    }

    pub fn merge(&mut self, o: &Self) {
        for k in 0..7 {
            self.plain[k] += o.plain[k];
            self.weighted[k] += o.weighted[k];
        }
        self.sup_t = self.sup_t.max(o.sup_t);
        self.sup_s = self.sup_s.max(o.sup_s);
    }

    pub fn finish(&self, h: f64) -> KsReport {
        let w = h * h;
        let rhs: f64 = self.plain.iter().map(|v| (v * w).sqrt()).sum();
        let rhs_s: f64 = self.weighted.iter().map(|v| (v * w).sqrt()).sum();
        let ratio = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b };
        KsReport {
            sup_t: self.sup_t,
            rhs,
            ratio: ratio(self.sup_t, rhs),
            sup_s: self.sup_s,
            rhs_s,
            ratio_s: ratio(self.sup_s, rhs_s),
        }
    }
}

/// Tracks the cone relation `s ≤ t ≤ (s² + 1)/2` and the time range.
#[derive(Clone, Copy, Debug)]
pub struct ConeAcc {
    pub max_excess: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for ConeAcc {
    fn default() -> Self {
        Self {
            max_excess: 0.0,
            t_min: f64::INFINITY,
            t_max: f64::NEG_INFINITY,
        }
    }
}

impl ConeAcc {
    #[inline]
    pub fn add(&mut self, s: f64, p: Event) {
        let hi = 0.5 * (s * s + 1.0);
        let excess = (s - p.t).max(p.t - hi).max(0.0);
        self.max_excess = self.max_excess.max(excess);
        self.t_min = self.t_min.min(p.t);
        self.t_max = self.t_max.max(p.t);
    }
}

// ---------------------------------------------------------------------------
// Slice-level functionals

fn field_jets(slice: &HyperboloidSlice, k: usize, sel: FieldSel) -> &[Jet2] {
    &slice.jets(k)[sel.slots(slice.nvf)]
}

/// `(Σ |φ|ᵖ h²)^{1/p}`, or the sup for `p = ∞`.
pub fn lp_norm_flat(slice: &HyperboloidSlice, sel: FieldSel, p: f64) -> Result<f64> {
    slice.require_complete()?;
    if !(p >= 1.0) {
        return Err(Error::config(format!("L^p exponent {p} below 1")));
    }
    let mut acc = 0.0f64;
    for k in 0..slice.len() {
        let u = field_jets(slice, k, sel)
            .iter()
            .map(|j| j.u * j.u)
            .sum::<f64>()
            .sqrt();
        if p.is_infinite() {
            acc = acc.max(u);
        } else {
            acc += u.powf(p);
        }
    }
    Ok(if p.is_infinite() {
        acc
    } else {
        (acc * slice.h * slice.h).powf(1.0 / p)
    })
}

pub fn energy_em(slice: &HyperboloidSlice, sel: FieldSel, m: f64) -> Result<EnergyBreakdown> {
    slice.require_complete()?;
    let mut acc = EnergyAcc::default();
    for k in 0..slice.len() {
        let jets: Vec<Jet1> = field_jets(slice, k, sel).iter().map(|j| Jet1::from(*j)).collect();
        acc.add(&jets, slice.event(k), m);
    }
    Ok(acc.finish(slice.h))
}

/// `Σ_Γ E_m(s, Γφ)` over `Γ ∈ {1, ∂ₜ, ∂₁, ∂₂, L₁, L₂}`: the energy at Lie orders ≤ 2.
pub fn energy_lie2(slice: &HyperboloidSlice, sel: FieldSel, m: f64) -> Result<f64> {
    slice.require_complete()?;
    let mut acc = EnergyAcc::default();
    for k in 0..slice.len() {
        let p = slice.event(k);
        let jets: Vec<Jet1> = field_jets(slice, k, sel)
            .iter()
            .flat_map(|j| lie_family(j, p))
            .collect();
        acc.add(&jets, p, m);
    }
    Ok(acc.finish(slice.h).total)
}

pub fn conformal_energy(slice: &HyperboloidSlice, sel: FieldSel) -> Result<ConformalBreakdown> {
    slice.require_complete()?;
    let mut acc = ConformalAcc::default();
    for k in 0..slice.len() {
        let jets: Vec<Jet1> = field_jets(slice, k, sel).iter().map(|j| Jet1::from(*j)).collect();
        acc.add(&jets, slice.event(k));
    }
    Ok(acc.finish(slice.h))
}

pub fn weighted_norms(slice: &HyperboloidSlice, sel: FieldSel, delta: f64) -> Result<WeightedNorms> {
    slice.require_complete()?;
    let mut acc = WeightedAcc::default();
    for k in 0..slice.len() {
        acc.add(field_jets(slice, k, sel), slice.event(k), slice.s, delta);
    }
    Ok(acc.finish(slice.h))
}

pub fn ks_functional(slice: &HyperboloidSlice, sel: FieldSel) -> Result<KsReport> {
    slice.require_complete()?;
    let mut acc = KsAcc::default();
    for k in 0..slice.len() {
        acc.add(field_jets(slice, k, sel), slice.event(k), slice.s);
    }
    Ok(acc.finish(slice.h))
}

/// Frame quantities used by the energy forms, exposed for cross-checks.
pub fn frame_values(jet: &Jet2, p: Event) -> ([f64; 2], f64, f64) {
    (
        [frame_underdel(1, jet, p), frame_underdel(2, jet, p)],
        frame_perp(jet, p),
        rotation(jet, p),
    )
}
