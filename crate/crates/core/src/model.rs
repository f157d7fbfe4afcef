//! Model parameters, nonlinearity tensors and pointwise right-hand sides.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{FieldLayout, FieldState, Grid2D};
use crate::vfcalc::Jet2;

/// Largest supported number of Klein-Gordon components.
pub const MAX_COMPONENTS: usize = 16;
/// Value fields: `w`, `W₁`, `W₂`, then `v¹ … vᵖ`.
pub const MAX_VALUE_FIELDS: usize = 3 + MAX_COMPONENTS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Number of Klein-Gordon components.
    pub p: usize,
    pub epsilon: f64,
    pub t0: f64,
    pub kg_mass: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            p: 2,
            epsilon: 0.01,
            t0: 2.0,
            kg_mass: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.p < 1 || self.p > MAX_COMPONENTS {
            errors.push(format!(
                "model.p = {} must lie in 1..={MAX_COMPONENTS}",
                self.p
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            errors.push(format!("model.epsilon = {} must be finite and nonnegative", self.epsilon));
        }
        if self.t0 != 2.0 {
            errors.push(format!("model.t0 = {} must be 2", self.t0));
        }
        if self.kg_mass != 1.0 {
            errors.push(format!("model.kg_mass = {} must be 1", self.kg_mass));
        }
    }
}

/// Which source drives the wave equation for `w`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveSource {
    /// `Pᵅ∂ᵅ(|v|²) + F⁰(w, v)`.
    #[default]
    Standard,
    /// `(∂ₜw)²`, the non-null contrast case.
    DtwSquared,
}

/// Initial-data profile: the bump `exp(1 - 1/(1 - (r/R)²))` scaled per field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    /// Support radius `R`; must not exceed 1.
    pub radius: f64,
    pub w0: f64,
    pub w1: f64,
    /// One multiplier per component.
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
}

impl ProfileSpec {
    /// Defaults for `p` components: the first component starts at rest with
    /// a displaced profile, later components alternate into the velocity slot.
    pub fn default_for(p: usize) -> Self {
        let v0 = (0..p).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let v1 = (0..p).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        Self {
            radius: 1.0,
            w0: 1.0,
            w1: 1.0,
            v0,
            v1,
        }
    }

    pub fn validate(&self, p: usize, errors: &mut Vec<String>) {
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            errors.push(format!(
                "profile.radius = {} must lie in (0, 1]: data must be supported in the unit ball",
                self.radius
            ));
        }
        if self.v0.len() != p {
            errors.push(format!("profile.v0: expected {p} entries, found {}", self.v0.len()));
        }
        if self.v1.len() != p {
            errors.push(format!("profile.v1: expected {p} entries, found {}", self.v1.len()));
        }
        let all = [self.w0, self.w1]
            .into_iter()
            .chain(self.v0.iter().copied())
            .chain(self.v1.iter().copied());
        if all.into_iter().any(|v| !v.is_finite()) {
            errors.push("profile: multipliers must be finite".to_string());
        }
    }

    pub fn bump(&self, r: f64) -> f64 {
        bump(r / self.radius)
    }
}

/// `exp(1 - 1/(1 - r²))` for `r < 1`, exactly zero otherwise.
#[inline]
pub fn bump(r: f64) -> f64 {
    let q = r * r;
    if q >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - q)).exp()
    }
}

/// The constant tensors of the nonlinearities.
///
/// Storage is row-major in index order `[α][β][i][j][k]`, dropping the
/// indices a tensor does not carry.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub p: usize,
    pub p_vec: [f64; 3],
    pub pt_vec: [f64; 3],
    pub a: [Vec<f64>; 6],
    pub b: [Vec<f64>; 6],
}

/// Names of the tensors in serialization order.
pub const TENSOR_NAMES: [&str; 14] = [
    "P", "Pt", "A1", "A2", "A3", "A4", "A5", "A6", "B1", "B2", "B3", "B4", "B5", "B6",
];

impl CoefficientSet {
    pub fn zero(p: usize) -> Self {
        let a = std::array::from_fn(|k| vec![0.0; shape_len(&Self::a_shape(k, p))]);
        let b = std::array::from_fn(|k| vec![0.0; shape_len(&Self::b_shape(k, p))]);
        Self {
            p,
            p_vec: [0.0; 3],
            pt_vec: [0.0; 3],
            a,
            b,
        }
    }

    /// Entries drawn uniformly from `[-scale, scale]` in serialization order.
    pub fn random(p: usize, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Self::zero(p);
        for name in TENSOR_NAMES {
            for v in c.tensor_mut(name).expect("known tensor").iter_mut() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        c
    }

    fn a_shape(k: usize, p: usize) -> Vec<usize> {
        match k {
            0 => vec![3, 3, p],
            1 => vec![3, p, p],
            2 => vec![3, 3, p, p],
            3 => vec![p, p, p],
            4 => vec![3, p, p, p],
            _ => vec![3, 3, p, p, p],
        }
    }

    fn b_shape(k: usize, p: usize) -> Vec<usize> {
        match k {
            0 => vec![3, 3],
            1 => vec![3, p],
            2 => vec![3, 3, p],
            3 => vec![p, p],
            4 => vec![3, p, p],
            _ => vec![3, 3, p, p],
        }
    }

    /// Shape of a named tensor for `p` components.
    pub fn shape(name: &str, p: usize) -> Option<Vec<usize>> {
        match name {
            "P" | "Pt" => Some(vec![3]),
            _ => {
                let (family, k) = name.split_at(1);
                let k: usize = k.parse().ok()?;
                if !(1..=6).contains(&k) {
                    return None;
                }
                match family {
                    "A" => Some(Self::a_shape(k - 1, p)),
                    "B" => Some(Self::b_shape(k - 1, p)),
                    _ => None,
                }
            }
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        match name {
            "P" => Some(&self.p_vec),
            "Pt" => Some(&self.pt_vec),
            _ => {
                let k: usize = name.get(1..)?.parse().ok()?;
                match (name.as_bytes()[0], k) {
                    (b'A', 1..=6) => Some(&self.a[k - 1]),
                    (b'B', 1..=6) => Some(&self.b[k - 1]),
                    _ => None,
                }
            }
        }
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        match name {
            "P" => Some(&mut self.p_vec),
            "Pt" => Some(&mut self.pt_vec),
            _ => {
                let k: usize = name.get(1..)?.parse().ok()?;
                match (name.as_bytes()[0], k) {
                    (b'A', 1..=6) => Some(&mut self.a[k - 1]),
                    (b'B', 1..=6) => Some(&mut self.b[k - 1]),
                    _ => None,
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        TENSOR_NAMES
            .iter()
            .all(|n| self.tensor(n).unwrap().iter().all(|v| v.is_finite()))
    }

    /// `(F⁰, G)` where `Fⁱ = vⁱ G`.
    ///
    /// `v[i]` are component values, `dv[i]` and `dw` spacetime gradients.
    #[inline]
    pub fn f0_and_g(&self, v: &[f64], dv: &[[f64; 3]], dw: &[f64; 3]) -> (f64, f64) {
        // Fixed small `p` lets the compiler unroll every contraction.
        match self.p {
            1 => self.f0_and_g_fixed::<1>(v, dv, dw),
            2 => self.f0_and_g_fixed::<2>(v, dv, dw),
            3 => self.f0_and_g_fixed::<3>(v, dv, dw),
            4 => self.f0_and_g_fixed::<4>(v, dv, dw),
            _ => self.f0_and_g_any(v, dv, dw),
        }
    }

    #[inline(always)]
    fn f0_and_g_fixed<const P: usize>(&self, v: &[f64], dv: &[[f64; 3]], dw: &[f64; 3]) -> (f64, f64) {
        #[inline(always)]
        fn dot<const P: usize>(a: &[f64; P], b: &[f64; P]) -> f64 {
            let mut s = 0.0;
            for k in 0..P {
                s += a[k] * b[k];
            }
            s
        }
        let v: [f64; P] = std::array::from_fn(|i| v[i]);
        // d[α][j] = ∂_α vʲ
        let d: [[f64; P]; 3] = std::array::from_fn(|al| std::array::from_fn(|j| dv[j][al]));
        fn rows<const P: usize>(t: &[f64], n: usize) -> &[[f64; P]] {
            let r = t.as_chunks::<P>().0;
            assert_eq!(r.len(), n);
            r
        }
        let a1 = rows::<P>(&self.a[0], 9);
        let a2 = rows::<P>(&self.a[1], 3 * P);
        let a3 = rows::<P>(&self.a[2], 9 * P);
        let a4 = rows::<P>(&self.a[3], P * P);
        let a5 = rows::<P>(&self.a[4], 3 * P * P);
        let a6 = rows::<P>(&self.a[5], 9 * P * P);
        let b1: &[f64; 9] = self.b[0][..].try_into().unwrap();
        let b2 = rows::<P>(&self.b[1], 3);
        let b3 = rows::<P>(&self.b[2], 9);
        let b4 = rows::<P>(&self.b[3], P);
        let b5 = rows::<P>(&self.b[4], 3 * P);
        let b6 = rows::<P>(&self.b[5], 9 * P);

        let mut f0 = 0.0;
        let mut g = 0.0;
        for al in 0..3 {
            let da = &d[al];
            for be in 0..3 {
                let ab = al * 3 + be;
                let ww = dw[al] * dw[be];
                let db = &d[be];
                f0 += dot(&a1[ab], &v) * ww;
                g += b1[ab] * ww;
                let mut t3 = 0.0;
                let mut t6 = 0.0;
                for i in 0..P {
                    t3 += v[i] * dot(&a3[ab * P + i], da);
                    let mut inner = 0.0;
                    for j in 0..P {
                        inner += da[j] * dot(&a6[(ab * P + i) * P + j], db);
                    }
                    t6 += v[i] * inner;
                }
                f0 += t3 * dw[be] + t6;
                let mut s6 = 0.0;
                for j in 0..P {
                    s6 += da[j] * dot(&b6[ab * P + j], db);
                }
                g += dot(&b3[ab], da) * dw[be] + s6;
            }
            let mut t2 = 0.0;
            let mut t5 = 0.0;
            let mut s5 = 0.0;
            for i in 0..P {
                t2 += v[i] * dot(&a2[al * P + i], &v);
                let mut inner = 0.0;
                for j in 0..P {
                    inner += v[j] * dot(&a5[(al * P + i) * P + j], da);
                }
                t5 += v[i] * inner;
                s5 += v[i] * dot(&b5[al * P + i], da);
            }
            f0 += t2 * dw[al] + t5;
            g += dot(&b2[al], &v) * dw[al] + s5;
        }
        for i in 0..P {
            let mut inner = 0.0;
            for j in 0..P {
                inner += v[j] * dot(&a4[i * P + j], &v);
            }
            f0 += v[i] * inner;
            g += v[i] * dot(&b4[i], &v);
        }
        (f0, g)
    }

    fn f0_and_g_any(&self, v: &[f64], dv: &[[f64; 3]], dw: &[f64; 3]) -> (f64, f64) {
        let p = self.p;
        let [a1, a2, a3, a4, a5, a6] = &self.a;
        let [b1, b2, b3, b4, b5, b6] = &self.b;

        let mut f0 = 0.0;
        let mut g = 0.0;
        for al in 0..3 {
            for be in 0..3 {
                let ww = dw[al] * dw[be];
                let ab = al * 3 + be;
                // A¹ vⁱ ∂w ∂w
                let row = &a1[ab * p..(ab + 1) * p];
                let mut acc = 0.0;
                for i in 0..p {
                    acc += row[i] * v[i];
                }
                f0 += acc * ww;
                g += b1[ab] * ww;
                // A³ vⁱ ∂vʲ ∂w, B³ ∂vʲ ∂w
                let blk = &a3[ab * p * p..(ab + 1) * p * p];
                for i in 0..p {
                    let r = &blk[i * p..(i + 1) * p];
                    let mut acc = 0.0;
                    for j in 0..p {
                        acc += r[j] * dv[j][al];
                    }
                    f0 += v[i] * acc * dw[be];
                }
                let r = &b3[ab * p..(ab + 1) * p];
                for j in 0..p {
                    g += r[j] * dv[j][al] * dw[be];
                }
                // A⁶ vⁱ ∂vʲ ∂vᵏ, B⁶ ∂vʲ ∂vᵏ
                let blk = &a6[ab * p * p * p..(ab + 1) * p * p * p];
                let bblk = &b6[ab * p * p..(ab + 1) * p * p];
                for j in 0..p {
                    let dj = dv[j][al];
                    let mut inner = 0.0;
                    let mut binner = 0.0;
                    for k in 0..p {
                        let dk = dv[k][be];
                        let mut acc = 0.0;
                        for i in 0..p {
                            acc += blk[(i * p + j) * p + k] * v[i];
                        }
                        inner += acc * dk;
                        binner += bblk[j * p + k] * dk;
                    }
                    f0 += inner * dj;
                    g += binner * dj;
                }
            }
            // A² vⁱ vʲ ∂w, B² vʲ ∂w
            let blk = &a2[al * p * p..(al + 1) * p * p];
            let mut q = 0.0;
            for i in 0..p {
                let mut acc = 0.0;
                for j in 0..p {
                    acc += blk[i * p + j] * v[j];
                }
                q += v[i] * acc;
            }
            f0 += q * dw[al];
            let mut q = 0.0;
            for j in 0..p {
                q += b2[al * p + j] * v[j];
            }
            g += q * dw[al];
            // A⁵ vⁱ vʲ ∂vᵏ, B⁵ vʲ ∂vᵏ
            let blk = &a5[al * p * p * p..(al + 1) * p * p * p];
            let bblk = &b5[al * p * p..(al + 1) * p * p];
            for k in 0..p {
                let dk = dv[k][al];
                let mut acc = 0.0;
                let mut bacc = 0.0;
                for i in 0..p {
                    let mut inner = 0.0;
                    for j in 0..p {
                        inner += blk[(i * p + j) * p + k] * v[j];
                    }
                    acc += v[i] * inner;
                    bacc += bblk[i * p + k] * v[i];
                }
                f0 += acc * dk;
                g += bacc * dk;
            }
        }
        // A⁴ vⁱ vʲ vᵏ, B⁴ vʲ vᵏ
        for i in 0..p {
            for j in 0..p {
                let vij = v[i] * v[j];
                let mut acc = 0.0;
                for k in 0..p {
                    acc += a4[(i * p + j) * p + k] * v[k];
                }
                f0 += vij * acc;
                g += b4[i * p + j] * vij;
            }
        }
        (f0, g)
    }
}

fn shape_len(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Jets of `w` and every `vⁱ` at one event.
#[derive(Clone, Debug, PartialEq)]
pub struct PointJetBundle {
    pub t: f64,
    pub x: [f64; 2],
    pub w: Jet2,
    pub v: Vec<Jet2>,
}

impl PointJetBundle {
    fn split(&self) -> (Vec<f64>, Vec<[f64; 3]>) {
        (
            self.v.iter().map(|j| j.u).collect(),
            self.v.iter().map(|j| j.du).collect(),
        )
    }
}

/// `F⁰(w, v)` at a point.
pub fn eval_f0(bundle: &PointJetBundle, coeffs: &CoefficientSet) -> f64 {
    let (v, dv) = bundle.split();
    coeffs.f0_and_g(&v, &dv, &bundle.w.du).0
}

/// `Fⁱ(w, v)` at a point; `i` is zero-based.
pub fn eval_fi(i: usize, bundle: &PointJetBundle, coeffs: &CoefficientSet) -> f64 {
    let (v, dv) = bundle.split();
    v[i] * coeffs.f0_and_g(&v, &dv, &bundle.w.du).1
}

/// `(∂ₜ²w, ∂ₜ²vⁱ)` for the main system, with the Laplacians read from the
/// jets' second derivatives.
pub fn rhs_main(
    bundle: &PointJetBundle,
    coeffs: &CoefficientSet,
    params: &ModelParams,
) -> (f64, Vec<f64>) {
    let (v, dv) = bundle.split();
    let (f0, g) = coeffs.f0_and_g(&v, &dv, &bundle.w.du);
    let (div, _) = divergence_and_norm(&coeffs.p_vec, &v, &dv);
    let w_tt = bundle.w.laplacian() + div + f0;
    let v_tt = bundle
        .v
        .iter()
        .map(|j| {
            j.laplacian() - params.kg_mass * params.kg_mass * j.u
                + dot3(&coeffs.pt_vec, &bundle.w.du) * j.u
                + j.u * g
        })
        .collect();
    (w_tt, v_tt)
}

/// `(∂ₜ²W₁, ∂ₜ²W₂)`; the `w` inside `F⁰` is the evolved main field.
pub fn rhs_aux(
    bundle: &PointJetBundle,
    w1: &Jet2,
    w2: &Jet2,
    coeffs: &CoefficientSet,
) -> (f64, f64) {
    let (v, dv) = bundle.split();
    let (f0, _) = coeffs.f0_and_g(&v, &dv, &bundle.w.du);
    let v2: f64 = v.iter().map(|x| x * x).sum();
    (w1.laplacian() + f0, w2.laplacian() + v2)
}

/// `(Pᵅ · 2Σᵢ vⁱ∂ᵅvⁱ, |v|²)`.
#[inline]
fn divergence_and_norm(pv: &[f64; 3], v: &[f64], dv: &[[f64; 3]]) -> (f64, f64) {
    let mut div = 0.0;
    let mut norm = 0.0;
    for (vi, dvi) in v.iter().zip(dv) {
        div += 2.0 * vi * dot3(pv, dvi);
        norm += vi * vi;
    }
    (div, norm)
}

#[inline]
fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Pointwise inputs of the right-hand side, laid out for the grid kernel.
///
/// Slot order follows the value fields: `w`, `W₁`, `W₂`, `v¹ … vᵖ`.
/// Only the gradients of `w` and the `vⁱ` are read.
#[derive(Clone, Copy, Debug)]
pub struct LocalFields {
    pub u: [f64; MAX_VALUE_FIELDS],
    pub du: [[f64; 3]; MAX_VALUE_FIELDS],
    pub lap: [f64; MAX_VALUE_FIELDS],
}

impl Default for LocalFields {
    fn default() -> Self {
        Self {
            u: [0.0; MAX_VALUE_FIELDS],
            du: [[0.0; 3]; MAX_VALUE_FIELDS],
            lap: [0.0; MAX_VALUE_FIELDS],
        }
    }
}

/// Parameters, tensors and source choice: everything the right-hand side needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub coeffs: CoefficientSet,
    pub wave_source: WaveSource,
}

/// Pointwise source terms, shared by the evolution and the diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sources {
    /// Right side of the `w` equation, `-□w = f_w`.
    pub f_w: f64,
    /// `F⁰(w, v)`, the source of `W₁`.
    pub f0: f64,
    /// `|v|²`, the source of `W₂`.
    pub v_norm2: f64,
    /// Common factor `G` with `Fⁱ = vⁱ G`.
    pub g: f64,
    /// `P̃ᵅ∂ᵅw`.
    pub pt_dw: f64,
}

impl Model {
    pub fn new(params: ModelParams, coeffs: CoefficientSet, wave_source: WaveSource) -> Self {
        Self {
            params,
            coeffs,
            wave_source,
        }
    }

    pub fn layout(&self) -> FieldLayout {
        FieldLayout::new(self.params.p)
    }

    #[inline]
    pub fn sources(&self, f: &LocalFields) -> Sources {
        let p = self.params.p;
        let v = &f.u[3..3 + p];
        let dv = &f.du[3..3 + p];
        let dw = &f.du[0];
        let (f0, g) = self.coeffs.f0_and_g(v, dv, dw);
        let (div, v_norm2) = divergence_and_norm(&self.coeffs.p_vec, v, dv);
        let f_w = match self.wave_source {
            WaveSource::Standard => div + f0,
            WaveSource::DtwSquared => dw[0] * dw[0],
        };
        Sources {
            f_w,
            f0,
            v_norm2,
            g,
            pt_dw: dot3(&self.coeffs.pt_vec, dw),
        }
    }

    /// Source of the `vⁱ` equation, `-□vⁱ + vⁱ = f_v`.
    #[inline]
    pub fn f_v(&self, src: &Sources, vi: f64) -> f64 {
        vi * (src.pt_dw + src.g)
    }

    /// Second time derivatives of every value field.
    #[inline]
    pub fn accelerations(&self, f: &LocalFields, out: &mut [f64; MAX_VALUE_FIELDS]) -> Sources {
        let src = self.sources(f);
        let m2 = self.params.kg_mass * self.params.kg_mass;
        out[0] = f.lap[0] + src.f_w;
        out[1] = f.lap[1] + src.f0;
        out[2] = f.lap[2] + src.v_norm2;
        for i in 0..self.params.p {
            let vi = f.u[3 + i];
            out[3 + i] = f.lap[3 + i] - m2 * vi + self.f_v(&src, vi);
        }
        src
    }
}

/// Cauchy data at `t = 2`: `(w, ∂ₜw, vⁱ, ∂ₜvⁱ) = ε·multiplier·bump` and the
/// auxiliary pair `W₁ = w₀`, `∂ₜW₁ = w₁ - P⁰|v₀|²`, `W₂ = ∂ₜW₂ = 0`.
pub fn make_initial_data(
    params: &ModelParams,
    profile: &ProfileSpec,
    coeffs: &CoefficientSet,
    grid: &Grid2D,
) -> Result<FieldState> {
    let mut errors = Vec::new();
    params.validate(&mut errors);
    profile.validate(params.p, &mut errors);
    if coeffs.p != params.p {
        errors.push(format!(
            "coefficients built for p = {} but model has p = {}",
            coeffs.p, params.p
        ));
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let layout = FieldLayout::new(params.p);
    let mut state = FieldState::zeros(grid, layout, params.t0);
    let eps = params.epsilon;
    let n = grid.nodes();
    for j in 0..n {
        for i in 0..n {
            let [x1, x2] = grid.coords(i, j);
            let b = profile.bump((x1 * x1 + x2 * x2).sqrt());
            if b == 0.0 {
                continue;
            }
            let w0 = eps * profile.w0 * b;
            let w1 = eps * profile.w1 * b;
            let mut v0_sq = 0.0;
            let cell = state.cell_mut(i, j);
            cell[FieldLayout::W] = w0;
            cell[FieldLayout::W + 1] = w1;
            for k in 0..params.p {
                let v0 = eps * profile.v0[k] * b;
                v0_sq += v0 * v0;
                cell[FieldLayout::v(k)] = v0;
                cell[FieldLayout::v(k) + 1] = eps * profile.v1[k] * b;
            }
            cell[FieldLayout::W1] = w0;
            cell[FieldLayout::W1 + 1] = w1 - coeffs.p_vec[0] * v0_sq;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_jet(rng: &mut ChaCha8Rng) -> Jet2 {
        let mut j = Jet2::ZERO;
        j.u = rng.gen_range(-1.0..1.0);
        for d in j.du.iter_mut() {
            *d = rng.gen_range(-1.0..1.0);
        }
        for d in j.ddu.iter_mut() {
            *d = rng.gen_range(-1.0..1.0);
        }
        j
    }

    fn random_bundle(p: usize, rng: &mut ChaCha8Rng) -> PointJetBundle {
        PointJetBundle {
            t: 3.0,
            x: [0.5, -0.25],
            w: random_jet(rng),
            v: (0..p).map(|_| random_jet(rng)).collect(),
        }
    }

    /// Six nested sums written straight from the definition.
    fn naive_f0(b: &PointJetBundle, c: &CoefficientSet) -> f64 {
        let p = c.p;
        let v = |i: usize| b.v[i].u;
        let dv = |a: usize, i: usize| b.v[i].du[a];
        let dw = |a: usize| b.w.du[a];
        let mut s = 0.0;
        for al in 0..3 {
            for be in 0..3 {
                for i in 0..p {
                    s += c.a[0][(al * 3 + be) * p + i] * v(i) * dw(al) * dw(be);
                    for j in 0..p {
                        s += c.a[2][((al * 3 + be) * p + i) * p + j] * v(i) * dv(al, j) * dw(be);
                        for k in 0..p {
                            s += c.a[5][(((al * 3 + be) * p + i) * p + j) * p + k]
                                * v(i)
                                * dv(al, j)
                                * dv(be, k);
                        }
                    }
                }
            }
            for i in 0..p {
                for j in 0..p {
                    s += c.a[1][(al * p + i) * p + j] * v(i) * v(j) * dw(al);
                    for k in 0..p {
                        s += c.a[4][((al * p + i) * p + j) * p + k] * v(i) * v(j) * dv(al, k);
                    }
                }
            }
        }
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    s += c.a[3][(i * p + j) * p + k] * v(i) * v(j) * v(k);
                }
            }
        }
        s
    }

    fn naive_fi(i: usize, b: &PointJetBundle, c: &CoefficientSet) -> f64 {
        let p = c.p;
        let v = |i: usize| b.v[i].u;
        let dv = |a: usize, i: usize| b.v[i].du[a];
        let dw = |a: usize| b.w.du[a];
        let mut s = 0.0;
        for al in 0..3 {
            for be in 0..3 {
                s += c.b[0][al * 3 + be] * v(i) * dw(al) * dw(be);
                for j in 0..p {
                    s += c.b[2][(al * 3 + be) * p + j] * v(i) * dv(al, j) * dw(be);
                    for k in 0..p {
                        s += c.b[5][((al * 3 + be) * p + j) * p + k] * v(i) * dv(al, j) * dv(be, k);
                    }
                }
            }
            for j in 0..p {
                s += c.b[1][al * p + j] * v(i) * v(j) * dw(al);
                for k in 0..p {
                    s += c.b[4][(al * p + j) * p + k] * v(i) * v(j) * dv(al, k);
                }
            }
        }
        for j in 0..p {
            for k in 0..p {
                s += c.b[3][j * p + k] * v(i) * v(j) * v(k);
            }
        }
        s
    }

    #[test]
    fn zero_coefficients_give_zero_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_bundle(2, &mut rng);
        let c = CoefficientSet::zero(2);
        assert_eq!(eval_f0(&b, &c), 0.0);
        assert_eq!(eval_fi(0, &b, &c), 0.0);
        assert_eq!(eval_fi(1, &b, &c), 0.0);
    }

    #[test]
    fn single_cubic_monomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut b = random_bundle(1, &mut rng);
        b.v[0].u = 3.0;
        let mut c = CoefficientSet::zero(1);
        c.a[3][0] = 2.0;
        assert_eq!(eval_f0(&b, &c), 54.0);

        b.v[0].u = 2.0;
        let mut c = CoefficientSet::zero(1);
        c.b[3][0] = 1.0;
        assert_eq!(eval_fi(0, &b, &c), 8.0);
    }

    #[test]
    fn optimized_sums_match_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..20 {
            for p in [1, 2, 3, 4, 5] {
                let c = CoefficientSet::random(p, seed, 1.0);
                let b = random_bundle(p, &mut rng);
                let fast = eval_f0(&b, &c);
                let slow = naive_f0(&b, &c);
                assert!((fast - slow).abs() <= 1e-13 * slow.abs().max(1.0), "{fast} {slow}");
                for i in 0..p {
                    let fast = eval_fi(i, &b, &c);
                    let slow = naive_fi(i, &b, &c);
                    assert!((fast - slow).abs() <= 1e-13 * slow.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn f0_is_multilinear_in_v_scaling() {
        // Scaling every v-jet by λ scales the six terms by λ, λ², λ², λ³, λ³, λ³.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = CoefficientSet::random(2, 4, 1.0);
        let b = random_bundle(2, &mut rng);
        let lam = 1.7;
        let mut scaled = b.clone();
        for j in scaled.v.iter_mut() {
            *j = j.scale(lam);
        }
        let only = |k: usize| {
            let mut cc = CoefficientSet::zero(2);
            cc.a[k] = c.a[k].clone();
            (eval_f0(&b, &cc), eval_f0(&scaled, &cc))
        };
        for (k, power) in [(0, 1), (1, 2), (2, 2), (3, 3), (4, 3), (5, 3)] {
            let (base, sc) = only(k);
            let want = base * lam.powi(power);
            assert!((sc - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn rhs_main_reduces_to_linear_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_bundle(2, &mut rng);
        let c = CoefficientSet::zero(2);
        let (w, v) = rhs_main(&b, &c, &ModelParams::default());
        assert_eq!(w, b.w.laplacian());
        for i in 0..2 {
            assert_eq!(v[i], b.v[i].laplacian() - b.v[i].u);
        }
    }

    #[test]
    fn divergence_term_uses_product_rule() {
        let mut b = PointJetBundle {
            t: 3.0,
            x: [0.0; 2],
            w: Jet2::ZERO,
            v: vec![Jet2::ZERO],
        };
        b.v[0].u = 2.0;
        b.v[0].du[0] = 3.0;
        let mut c = CoefficientSet::zero(1);
        c.p_vec = [1.0, 0.0, 0.0];
        let params = ModelParams {
            p: 1,
            ..ModelParams::default()
        };
        let (w, _) = rhs_main(&b, &c, &params);
        assert_eq!(w, 12.0);
    }

    #[test]
    fn rhs_main_matches_expansion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = ModelParams::default();
        for seed in 0..10 {
            let c = CoefficientSet::random(2, seed, 1.0);
            let b = random_bundle(2, &mut rng);
            let (w, v) = rhs_main(&b, &c, &params);
            let mut div = 0.0;
            for al in 0..3 {
                for i in 0..2 {
                    div += c.p_vec[al] * 2.0 * b.v[i].u * b.v[i].du[al];
                }
            }
            let want_w = b.w.ddu[3] + b.w.ddu[5] + div + naive_f0(&b, &c);
            assert!((w - want_w).abs() <= 1e-13 * want_w.abs().max(1.0));
            for i in 0..2 {
                let mut pt = 0.0;
                for al in 0..3 {
                    pt += c.pt_vec[al] * b.v[i].u * b.w.du[al];
                }
                let want = b.v[i].ddu[3] + b.v[i].ddu[5] - b.v[i].u + pt + naive_fi(i, &b, &c);
                assert!((v[i] - want).abs() <= 1e-13 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn auxiliary_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut b = random_bundle(1, &mut rng);
        b.v[0].u = 2.0;
        let c = CoefficientSet::zero(1);
        let w1 = random_jet(&mut rng);
        let w2 = random_jet(&mut rng);
        let (a, bb) = rhs_aux(&b, &w1, &w2, &c);
        assert_eq!(a, w1.laplacian());
        assert_eq!(bb, w2.laplacian() + 4.0);
    }

    #[test]
    fn model_kernel_agrees_with_bundle_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = CoefficientSet::random(2, 8, 1.0);
        let params = ModelParams::default();
        let model = Model::new(params.clone(), c.clone(), WaveSource::Standard);
        let b = random_bundle(2, &mut rng);
        let w1 = random_jet(&mut rng);
        let w2 = random_jet(&mut rng);
        let mut f = LocalFields::default();
        let jets = [b.w, w1, w2, b.v[0], b.v[1]];
        for (k, j) in jets.iter().enumerate() {
            f.u[k] = j.u;
            f.du[k] = j.du;
            f.lap[k] = j.laplacian();
        }
        let mut out = [0.0; MAX_VALUE_FIELDS];
        model.accelerations(&f, &mut out);
        let (w, v) = rhs_main(&b, &c, &params);
        let (a1, a2) = rhs_aux(&b, &w1, &w2, &c);
        for (got, want) in [out[0], out[1], out[2], out[3], out[4]].iter().zip([w, a1, a2, v[0], v[1]]) {
            assert!((got - want).abs() <= 1e-14 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }

    #[test]
    fn bump_profile() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(1.5), 0.0);
        assert!(bump(0.99) > 0.0);
    }

    #[test]
    fn random_coefficients_are_seeded() {
        assert_eq!(CoefficientSet::random(2, 5, 1.0), CoefficientSet::random(2, 5, 1.0));
        assert_ne!(CoefficientSet::random(2, 5, 1.0), CoefficientSet::random(2, 6, 1.0));
        assert_eq!(CoefficientSet::shape("A6", 2), Some(vec![3, 3, 2, 2, 2]));
        assert_eq!(CoefficientSet::shape("C1", 2), None);
    }
}
