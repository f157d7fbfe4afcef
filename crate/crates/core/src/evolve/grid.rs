use crate::error::{Error, Result};

/// Uniform square grid centred on the origin.
///
/// `n_per_axis` counts intervals, so there are `n_per_axis + 1` nodes per
/// axis at `xᵢ = -L + i·h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub half_width: f64,
    pub h: f64,
    pub n_per_axis: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, h: f64, n_per_axis: usize) -> Result<Self> {
        if !(h > 0.0) || n_per_axis < 8 {
            return Err(Error::config(format!(
                "grid needs h > 0 and at least 8 intervals (h = {h}, n = {n_per_axis})"
            )));
        }
        let g = Self {
            half_width,
            h,
            n_per_axis,
        };
        if ((n_per_axis as f64) * h - 2.0 * half_width).abs() > 1e-9 * half_width.max(1.0) {
            return Err(Error::config(format!(
                "n_per_axis·h = {} differs from 2L = {}",
                n_per_axis as f64 * h,
                2.0 * half_width
            )));
        }
        Ok(g)
    }

    /// Smallest even-interval grid with spacing `h` whose half-width is at
    /// least `min_half_width`.
    pub fn covering(h: f64, min_half_width: f64) -> Result<Self> {
        let mut n = (2.0 * min_half_width / h - 1e-9).ceil() as usize;
        n += n % 2;
        n = n.max(8);
        Self::new(0.5 * n as f64 * h, h, n)
    }

    /// Grid for an evolution up to `t_final`, keeping the support cone
    /// `r ≤ t - 1` at least `4h` away from the boundary.
    pub fn for_evolution(h: f64, t_final: f64) -> Result<Self> {
        Self::covering(h, (t_final - 1.0).max(1.0) + 4.0 * h)
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.n_per_axis + 1
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    /// Index range `lo..=hi` of nodes with `|x| ≤ a`, clipped to `min..=max`.
    /// `None` when empty.
    pub fn span(&self, a: f64, min: usize, max: usize) -> Option<(usize, usize)> {
        if a < 0.0 {
            return None;
        }
        let lo = ((self.half_width - a) / self.h).ceil().max(min as f64);
        let hi = ((self.half_width + a) / self.h).floor().min(max as f64);
        if lo > hi {
            None
        } else {
            Some((lo as usize, hi as usize))
        }
    }
}

/// Position of each field inside a grid cell.
///
/// Fields are interleaved as value/time-derivative pairs: value slot `k`
/// lives at index `2k` with its companion `∂ₜ` at `2k + 1`. Value slots are
/// `w`, `W₁`, `W₂`, `v¹ … vᵖ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldLayout {
    pub p: usize,
}

impl FieldLayout {
    pub const W: usize = 0;
    pub const W1: usize = 2;
    pub const W2: usize = 4;

    pub fn new(p: usize) -> Self {
        Self { p }
    }

    /// Index of `vⁱ` (zero-based `i`).
    #[inline]
    pub const fn v(i: usize) -> usize {
        6 + 2 * i
    }

    /// Number of stored fields, `6 + 2p`.
    #[inline]
    pub fn nf(&self) -> usize {
        6 + 2 * self.p
    }

    /// Number of value slots, `3 + p`.
    #[inline]
    pub fn nvf(&self) -> usize {
        3 + self.p
    }

    pub fn name(&self, f: usize) -> String {
        let base = match f / 2 {
            0 => "w".to_string(),
            1 => "W1".to_string(),
            2 => "W2".to_string(),
            k => format!("v{}", k - 2),
        };
        if f.is_multiple_of(2) {
            base
        } else {
            format!("dt_{base}")
        }
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.nf()).map(|f| self.name(f)).collect()
    }
}

/// All evolved fields on the grid at one time, stored cell by cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub grid: Grid2D,
    pub layout: FieldLayout,
    pub data: Vec<f64>,
}

impl FieldState {
    pub fn zeros(grid: &Grid2D, layout: FieldLayout, t: f64) -> Self {
        let n = grid.nodes();
        Self {
            t,
            grid: *grid,
            layout,
            data: vec![0.0; n * n * layout.nf()],
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (j * self.grid.nodes() + i) * self.layout.nf()
    }

    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let k = self.index(i, j);
        &self.data[k..k + self.layout.nf()]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let k = self.index(i, j);
        let nf = self.layout.nf();
        &mut self.data[k..k + nf]
    }

    #[inline]
    pub fn get(&self, f: usize, i: usize, j: usize) -> f64 {
        self.data[self.index(i, j) + f]
    }

    /// One field as a row-major array.
    pub fn field(&self, f: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(f)
            .step_by(self.layout.nf())
            .copied()
            .collect()
    }

    pub fn set_field(&mut self, f: usize, values: &[f64]) {
        let nf = self.layout.nf();
        for (cell, v) in self.data.chunks_exact_mut(nf).zip(values) {
            cell[f] = *v;
        }
    }

    pub fn max_abs(&self, f: usize) -> f64 {
        self.data
            .iter()
            .skip(f)
            .step_by(self.layout.nf())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest radius carrying a value above `threshold` in any field.
    pub fn support_radius(&self, threshold: f64) -> f64 {
        let n = self.grid.nodes();
        let nf = self.layout.nf();
        let mut rmax: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let k = (j * n + i) * nf;
                if self.data[k..k + nf].iter().any(|v| v.abs() > threshold) {
                    let [x, y] = self.grid.coords(i, j);
                    rmax = rmax.max((x * x + y * y).sqrt());
                }
            }
        }
        rmax
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evolution_grid_contains_cone() {
        let g = Grid2D::for_evolution(0.05, 64.0).unwrap();
        assert!(g.half_width >= 63.0 + 0.2 - 1e-12);
        assert_eq!(g.n_per_axis % 2, 0);
        assert!((g.n_per_axis as f64 * g.h - 2.0 * g.half_width).abs() < 1e-9);
        assert_eq!(g.coord(g.n_per_axis / 2), 0.0);
    }

    #[test]
    fn layout_names() {
        let l = FieldLayout::new(2);
        assert_eq!(l.nf(), 10);
        assert_eq!(
            l.names(),
            ["w", "dt_w", "W1", "dt_W1", "W2", "dt_W2", "v1", "dt_v1", "v2", "dt_v2"]
        );
        assert_eq!(FieldLayout::v(1), 8);
    }

    #[test]
    fn span_is_symmetric() {
        let g = Grid2D::new(2.0, 0.5, 8).unwrap();
        assert_eq!(g.span(1.0, 0, 8), Some((2, 6)));
        assert_eq!(g.span(0.2, 0, 8), Some((4, 4)));
        assert_eq!(g.span(-1.0, 0, 8), None);
        assert_eq!(g.span(10.0, 2, 6), Some((2, 6)));
    }
}
