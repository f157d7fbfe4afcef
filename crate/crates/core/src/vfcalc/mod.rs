//! Pointwise vector-field calculus on 2-jets.
//!
//! Every operator here acts on the jet of a field at one spacetime event, so
//! the same code serves analytically assembled jets (tests, identity battery)
//! and jets recorded from the numerical evolution.
//!
//! Index convention: `0` is `t`, `1` and `2` are `x¹`, `x²`. Boost and frame
//! indices `a` are 1-based to match the spatial coordinate they carry.

mod identities;
pub mod poly;

pub use identities::{
    box_decomposition_residual, commutator_residual, cone_samples, deriv_from_boosts,
    deriv_reconstruction_residual, energy_forms_residual, run_battery, CommutatorPair,
    IdentityCheck, IdentityReport, TestField,
};

/// A spacetime event `(t, x¹, x²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: [f64; 2],
}

impl Event {
    pub fn new(t: f64, x1: f64, x2: f64) -> Self {
        Self { t, x: [x1, x2] }
    }

    /// Coordinate `x^α` with `α = 0` meaning `t`.
    #[inline]
    pub fn coord(&self, alpha: usize) -> f64 {
        match alpha {
            0 => self.t,
            a => self.x[a - 1],
        }
    }

    #[inline]
    pub fn r2(&self) -> f64 {
        self.x[0] * self.x[0] + self.x[1] * self.x[1]
    }

    #[inline]
    pub fn r(&self) -> f64 {
        self.r2().sqrt()
    }

    /// `s² = t² - r²`.
    #[inline]
    pub fn s2(&self) -> f64 {
        self.t * self.t - self.r2()
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.s2().sqrt()
    }

    /// Strictly inside the cone `r < t - 1`.
    pub fn in_cone(&self) -> bool {
        self.r() < self.t - 1.0
    }
}

/// Storage slot of the symmetric second derivative `∂_α∂_β`.
#[inline]
pub const fn sym_index(a: usize, b: usize) -> usize {
    const TABLE: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    TABLE[a][b]
}

/// Value, first and second derivatives of a field at one event.
///
/// `ddu` holds `tt, t1, t2, 11, 12, 22`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub u: f64,
    pub du: [f64; 3],
    pub ddu: [f64; 6],
}

/// Value and first derivatives; the result of one first-order operator on a [`Jet2`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet1 {
    pub u: f64,
    pub du: [f64; 3],
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 {
        u: 0.0,
        du: [0.0; 3],
        ddu: [0.0; 6],
    };

    pub fn constant(c: f64) -> Self {
        Jet2 {
            u: c,
            ..Self::ZERO
        }
    }

    /// Jet of the coordinate function `x^α` at `p`.
    pub fn coordinate(alpha: usize, p: Event) -> Self {
        let mut j = Self::constant(p.coord(alpha));
        j.du[alpha] = 1.0;
        j
    }

    #[inline]
    pub fn dd(&self, a: usize, b: usize) -> f64 {
        self.ddu[sym_index(a, b)]
    }

    /// Spatial Laplacian `∂₁² + ∂₂²`.
    #[inline]
    pub fn laplacian(&self) -> f64 {
        self.ddu[3] + self.ddu[5]
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.du.iter().all(|v| v.is_finite())
            && self.ddu.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, k: f64) -> Self {
        Jet2 {
            u: k * self.u,
            du: self.du.map(|v| k * v),
            ddu: self.ddu.map(|v| k * v),
        }
    }

    /// `self + k * other`, used to accumulate interpolation weights.
    #[inline]
    pub fn add_scaled(&mut self, k: f64, other: &Jet2) {
        self.u += k * other.u;
        for i in 0..3 {
            self.du[i] += k * other.du[i];
        }
        for i in 0..6 {
            self.ddu[i] += k * other.ddu[i];
        }
    }

    /// Jet of the pointwise product (Leibniz rule).
    pub fn mul(&self, o: &Jet2) -> Jet2 {
        let mut out = Jet2 {
            u: self.u * o.u,
            du: [0.0; 3],
            ddu: [0.0; 6],
        };
        for a in 0..3 {
            out.du[a] = self.du[a] * o.u + self.u * o.du[a];
            for b in a..3 {
                out.ddu[sym_index(a, b)] = self.dd(a, b) * o.u
                    + self.du[a] * o.du[b]
                    + self.du[b] * o.du[a]
                    + self.u * o.dd(a, b);
            }
        }
        out
    }

    /// Euclidean length of the spacetime gradient, `|∂φ|`.
    #[inline]
    pub fn grad_norm(&self) -> f64 {
        (self.du[0] * self.du[0] + self.du[1] * self.du[1] + self.du[2] * self.du[2]).sqrt()
    }
}

impl Jet1 {
    #[inline]
    pub fn grad_norm(&self) -> f64 {
        (self.du[0] * self.du[0] + self.du[1] * self.du[1] + self.du[2] * self.du[2]).sqrt()
    }
}

impl From<Jet2> for Jet1 {
    fn from(j: Jet2) -> Self {
        Jet1 { u: j.u, du: j.du }
    }
}

/// `L_a φ = x_a ∂ₜφ + t ∂ₐφ` together with its first derivatives.
pub fn lie_boost(a: usize, jet: &Jet2, p: Event) -> Jet1 {
    debug_assert!(a == 1 || a == 2);
    let xa = p.x[a - 1];
    let t = p.t;
    let mut du = [0.0; 3];
    du[0] = xa * jet.dd(0, 0) + jet.du[a] + t * jet.dd(0, a);
    for c in 1..3 {
        let delta = if c == a { jet.du[0] } else { 0.0 };
        du[c] = delta + xa * jet.dd(c, 0) + t * jet.dd(c, a);
    }
    Jet1 {
        u: xa * jet.du[0] + t * jet.du[a],
        du,
    }
}

/// Value of `L_a` applied to a field known through its 1-jet.
#[inline]
pub fn lie_boost_value(a: usize, jet: &Jet1, p: Event) -> f64 {
    p.x[a - 1] * jet.du[0] + p.t * jet.du[a]
}

/// `L_a L_b φ`, the second-order boost composition, from the 2-jet of `φ`.
pub fn lie_boost2(a: usize, b: usize, jet: &Jet2, p: Event) -> f64 {
    lie_boost_value(a, &lie_boost(b, jet, p), p)
}

/// `L₀ φ = t ∂ₜφ + xᵃ ∂ₐφ` with first derivatives.
pub fn lie_scaling(jet: &Jet2, p: Event) -> Jet1 {
    let [x1, x2] = p.x;
    let t = p.t;
    let mut du = [0.0; 3];
    du[0] = jet.du[0] + t * jet.dd(0, 0) + x1 * jet.dd(0, 1) + x2 * jet.dd(0, 2);
    for c in 1..3 {
        du[c] = t * jet.dd(c, 0) + jet.du[c] + x1 * jet.dd(c, 1) + x2 * jet.dd(c, 2);
    }
    Jet1 {
        u: t * jet.du[0] + x1 * jet.du[1] + x2 * jet.du[2],
        du,
    }
}

/// `Kφ` in the expanded form `t∂ₜ + xᵇ∂_b + (xᵇ/t) L_b`.
///
/// Requires `t > r`.
pub fn lie_k(jet: &Jet2, p: Event) -> f64 {
    let t = p.t;
    let [x1, x2] = p.x;
    let l1 = x1 * jet.du[0] + t * jet.du[1];
    let l2 = x2 * jet.du[0] + t * jet.du[2];
    t * jet.du[0] + x1 * jet.du[1] + x2 * jet.du[2] + (x1 * l1 + x2 * l2) / t
}

/// `Kφ` in the defining form `s∂ₛ + 2xᵃ∂̲ₐ` with `∂ₛ = (s/t)∂ₜ`.
pub fn lie_k_defining(jet: &Jet2, p: Event) -> f64 {
    let s2 = p.s2();
    let ds = (p.s() / p.t) * jet.du[0];
    let mut out = p.s() * ds;
    debug_assert!(s2 > 0.0);
    for a in 1..3 {
        out += 2.0 * p.x[a - 1] * frame_underdel(a, jet, p);
    }
    out
}

/// Semi-hyperboloidal frame leg `∂̲ₐ = (xₐ/t)∂ₜ + ∂ₐ`.
#[inline]
pub fn frame_underdel(a: usize, jet: &Jet2, p: Event) -> f64 {
    (p.x[a - 1] / p.t) * jet.du[0] + jet.du[a]
}

/// Hyperboloid normal derivative `∂_⊥ = ∂ₜ + (xᵃ/t)∂ₐ`.
#[inline]
pub fn frame_perp(jet: &Jet2, p: Event) -> f64 {
    jet.du[0] + (p.x[0] * jet.du[1] + p.x[1] * jet.du[2]) / p.t
}

/// Rotation `Ω₁₂ = x¹∂₂ - x²∂₁`.
#[inline]
pub fn rotation(jet: &Jet2, p: Event) -> f64 {
    p.x[0] * jet.du[2] - p.x[1] * jet.du[1]
}

/// First-order vector fields with coefficients known in closed form.
///
/// This is the generic route: coefficients `c^α(p)` and their gradients are
/// applied with the product rule. The dedicated functions above spell the
/// same operators out by hand; agreement between the two is tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorField {
    Dt,
    Dx(usize),
    Boost(usize),
    Scaling,
    K,
    Underdel(usize),
    Perp,
    Rotation,
}

impl VectorField {
    /// Coefficients `c^α` so that `X = c^α ∂_α`.
    pub fn coeffs(&self, p: Event) -> [f64; 3] {
        let t = p.t;
        let [x1, x2] = p.x;
        match *self {
            VectorField::Dt => [1.0, 0.0, 0.0],
            VectorField::Dx(a) => unit(a),
            VectorField::Boost(a) => {
                let mut c = [p.x[a - 1], 0.0, 0.0];
                c[a] = t;
                c
            }
            VectorField::Scaling => [t, x1, x2],
            VectorField::K => [(t * t + p.r2()) / t, 2.0 * x1, 2.0 * x2],
            VectorField::Underdel(a) => {
                let mut c = [p.x[a - 1] / t, 0.0, 0.0];
                c[a] = 1.0;
                c
            }
            VectorField::Perp => [1.0, x1 / t, x2 / t],
            VectorField::Rotation => [0.0, -x2, x1],
        }
    }

    /// `grad[β][α] = ∂_β c^α`.
    pub fn coeff_grad(&self, p: Event) -> [[f64; 3]; 3] {
        let t = p.t;
        let mut g = [[0.0; 3]; 3];
        match *self {
            VectorField::Dt | VectorField::Dx(_) => {}
            VectorField::Boost(a) => {
                g[0][a] = 1.0;
                g[a][0] = 1.0;
            }
            VectorField::Scaling => {
                g[0][0] = 1.0;
                g[1][1] = 1.0;
                g[2][2] = 1.0;
            }
            VectorField::K => {
                g[0][0] = 1.0 - p.r2() / (t * t);
                for b in 1..3 {
                    g[b][0] = 2.0 * p.x[b - 1] / t;
                    g[b][b] = 2.0;
                }
            }
            VectorField::Underdel(a) => {
                g[0][0] = -p.x[a - 1] / (t * t);
                g[a][0] = 1.0 / t;
            }
            VectorField::Perp => {
                for a in 1..3 {
                    g[0][a] = -p.x[a - 1] / (t * t);
                    g[a][a] = 1.0 / t;
                }
            }
            VectorField::Rotation => {
                g[1][2] = 1.0;
                g[2][1] = -1.0;
            }
        }
        g
    }

    pub fn value(&self, jet: &Jet2, p: Event) -> f64 {
        let c = self.coeffs(p);
        c[0] * jet.du[0] + c[1] * jet.du[1] + c[2] * jet.du[2]
    }

    pub fn apply_jet1(&self, jet: &Jet1, p: Event) -> f64 {
        let c = self.coeffs(p);
        c[0] * jet.du[0] + c[1] * jet.du[1] + c[2] * jet.du[2]
    }

    pub fn apply_jet2(&self, jet: &Jet2, p: Event) -> Jet1 {
        let c = self.coeffs(p);
        let g = self.coeff_grad(p);
        let mut du = [0.0; 3];
        for (beta, d) in du.iter_mut().enumerate() {
            for alpha in 0..3 {
                *d += g[beta][alpha] * jet.du[alpha] + c[alpha] * jet.dd(alpha, beta);
            }
        }
        Jet1 {
            u: self.value(jet, p),
            du,
        }
    }
}

#[inline]
fn unit(a: usize) -> [f64; 3] {
    let mut c = [0.0; 3];
    c[a] = 1.0;
    c
}
