//! Polynomial test fields in `(t, x¹, x²)` with exact jets.
//!
//! Used as the symbolic oracle for the vector-field operators: products and
//! derivatives are carried out on coefficients, so jets of composite
//! expressions such as `L_a φ` are exact up to evaluation rounding.

use std::collections::BTreeMap;

use rand::Rng;

use super::{sym_index, Event, Jet1, Jet2};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    /// Exponents `[e_t, e_1, e_2]` to coefficient.
    terms: BTreeMap<[u32; 3], f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial([0, 0, 0], c)
    }

    pub fn monomial(exp: [u32; 3], c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(exp, c);
        }
        Self { terms }
    }

    /// The coordinate function `x^α`.
    pub fn coordinate(alpha: usize) -> Self {
        let mut e = [0; 3];
        e[alpha] = 1;
        Self::monomial(e, 1.0)
    }

    /// Random polynomial of total degree `degree`, coefficients in `[-1, 1]`.
    pub fn random<R: Rng>(degree: u32, rng: &mut R) -> Self {
        let mut terms = BTreeMap::new();
        for et in 0..=degree {
            for e1 in 0..=(degree - et) {
                for e2 in 0..=(degree - et - e1) {
                    terms.insert([et, e1, e2], rng.gen_range(-1.0..1.0));
                }
            }
        }
        Self { terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            *out.terms.entry(*e).or_insert(0.0) += c;
        }
        out
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(e, c)| (*e, k * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                *terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        Poly { terms }
    }

    pub fn diff(&self, var: usize) -> Poly {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut d = *e;
                d[var] -= 1;
                *terms.entry(d).or_insert(0.0) += c * e[var] as f64;
            }
        }
        Poly { terms }
    }

    pub fn eval(&self, p: Event) -> f64 {
        let v = [p.t, p.x[0], p.x[1]];
        self.terms
            .iter()
            .map(|(e, c)| c * v[0].powi(e[0] as i32) * v[1].powi(e[1] as i32) * v[2].powi(e[2] as i32))
            .sum()
    }

    /// Sum of absolute monomial contributions at `p`; the rounding scale of [`Poly::eval`].
    pub fn magnitude(&self, p: Event) -> f64 {
        let v = [p.t, p.x[0], p.x[1]];
        self.terms
            .iter()
            .map(|(e, c)| {
                (c * v[0].powi(e[0] as i32) * v[1].powi(e[1] as i32) * v[2].powi(e[2] as i32)).abs()
            })
            .sum()
    }
}

/// A polynomial with its first and second derivatives precomputed.
#[derive(Clone, Debug)]
pub struct PolyField {
    pub poly: Poly,
    d: [Poly; 3],
    dd: [Poly; 6],
}

impl PolyField {
    pub fn new(poly: Poly) -> Self {
        let d = [poly.diff(0), poly.diff(1), poly.diff(2)];
        let mut dd: [Poly; 6] = Default::default();
        for a in 0..3 {
            for b in a..3 {
                dd[sym_index(a, b)] = d[a].diff(b);
            }
        }
        Self { poly, d, dd }
    }

    pub fn jet1(&self, p: Event) -> Jet1 {
        Jet1 {
            u: self.poly.eval(p),
            du: [self.d[0].eval(p), self.d[1].eval(p), self.d[2].eval(p)],
        }
    }

    pub fn jet2(&self, p: Event) -> Jet2 {
        let mut ddu = [0.0; 6];
        for (k, q) in self.dd.iter().enumerate() {
            ddu[k] = q.eval(p);
        }
        Jet2 {
            u: self.poly.eval(p),
            du: [self.d[0].eval(p), self.d[1].eval(p), self.d[2].eval(p)],
            ddu,
        }
    }

    /// Largest monomial magnitude over the value and all stored derivatives.
    pub fn magnitude(&self, p: Event) -> f64 {
        let mut m = self.poly.magnitude(p);
        for q in self.d.iter().chain(self.dd.iter()) {
            m = m.max(q.magnitude(p));
        }
        m
    }
}
