//! Dynamic time warping with squared local cost.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Optimal warping between two series.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Minimal accumulated squared cost (the squared DTW distance).
    pub cost: f64,
    /// Matched `(index in a, index in b)` pairs from `(0, 0)` to the last points.
    pub path: Vec<(usize, usize)>,
}

impl Alignment {
    pub fn distance(&self) -> f64 {
        libm::sqrt(self.cost)
    }
}

/// DTW settings. Series are row-major with `dim` values per point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Dtw {
    /// Sakoe-Chiba band half-width; `None` leaves the warping unconstrained.
    pub band: Option<usize>,
}

impl Dtw {
    pub fn with_band(band: usize) -> Self {
        Self { band: Some(band) }
    }

    fn points(series: &[f64], dim: usize) -> Result<usize> {
        if dim == 0 || series.is_empty() {
            return Err(Error::EmptySeries);
        }
        if series.len() % dim != 0 {
            return Err(Error::ShapeMismatch("series length is not a multiple of its dimension".into()));
        }
        Ok(series.len() / dim)
    }

    fn allowed(&self, i: usize, j: usize, n: usize, m: usize) -> bool {
        match self.band {
            None => true,
            Some(w) => i.abs_diff(j) <= w.max(n.abs_diff(m)),
        }
    }

    fn accumulate(&self, a: &[f64], b: &[f64], dim: usize) -> Result<(Vec<f64>, usize, usize)> {
        let n = Self::points(a, dim)?;
        let m = Self::points(b, dim)?;
        let mut acc = alloc::vec![f64::INFINITY; n * m];
        for i in 0..n {
            let pa = &a[i * dim..(i + 1) * dim];
            for j in 0..m {
                if !self.allowed(i, j, n, m) {
                    continue;
                }
                let pb = &b[j * dim..(j + 1) * dim];
                let local: f64 = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum();
                let best = match (i, j) {
                    (0, 0) => 0.0,
                    (0, _) => acc[j - 1],
                    (_, 0) => acc[(i - 1) * m],
                    _ => acc[(i - 1) * m + j - 1]
                        .min(acc[(i - 1) * m + j])
                        .min(acc[i * m + j - 1]),
                };
                acc[i * m + j] = local + best;
            }
        }
        Ok((acc, n, m))
    }

    /// Square root of the minimal accumulated squared cost.
    pub fn distance(&self, a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
        let (acc, n, m) = self.accumulate(a, b, dim)?;
        Ok(libm::sqrt(acc[n * m - 1]))
    }

    pub fn align(&self, a: &[f64], b: &[f64], dim: usize) -> Result<Alignment> {
        let (acc, n, m) = self.accumulate(a, b, dim)?;
        let mut path = Vec::with_capacity(n + m);
        let (mut i, mut j) = (n - 1, m - 1);
        path.push((i, j));
        while i > 0 || j > 0 {
            (i, j) = if i == 0 {
                (0, j - 1)
            } else if j == 0 {
                (i - 1, 0)
            } else {
                let diag = acc[(i - 1) * m + j - 1];
                let up = acc[(i - 1) * m + j];
                let left = acc[i * m + j - 1];
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up <= left {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            };
            path.push((i, j));
        }
        path.reverse();
        Ok(Alignment { cost: acc[n * m - 1], path })
    }
}

/// Unconstrained DTW distance between two univariate series.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    Dtw::default().distance(a, b, 1)
}

/// Euclidean distance between equal-length series.
pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    if a.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_and_warped_series() {
        assert_eq!(dtw(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]).unwrap(), 0.0);
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((dtw(&[0.0; 3], &[1.0; 3]).unwrap() - libm::sqrt(3.0)).abs() < 1e-15);
        assert_eq!(dtw(&[], &[1.0]), Err(Error::EmptySeries));
    }

    #[test]
    fn multivariate_local_cost_sums_channels() {
        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [1.0, 1.0, 1.0, 1.0];
        // first point costs 2, second 0; the best path matches (0,0),(1,1)
        assert!((Dtw::default().distance(&a, &b, 2).unwrap() - libm::sqrt(2.0)).abs() < 1e-15);
    }

    #[test]
    fn path_is_monotone_and_matches_cost() {
        let a = [0.0, 2.0, 1.0, 3.0, 3.0];
        let b = [0.0, 1.0, 2.0, 3.0];
        let al = Dtw::default().align(&a, &b, 1).unwrap();
        assert_eq!(al.path.first(), Some(&(0, 0)));
        assert_eq!(al.path.last(), Some(&(4, 3)));
        let recomputed: f64 = al.path.iter().map(|&(i, j)| (a[i] - b[j]) * (a[i] - b[j])).sum();
        assert!((recomputed - al.cost).abs() < 1e-12);
        for w in al.path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(matches!((di, dj), (1, 0) | (0, 1) | (1, 1)));
        }
    }

    #[test]
    fn zero_band_on_equal_lengths_is_euclidean() {
        let a = [0.0, 3.0, 1.0, 4.0];
        let b = [1.0, 0.0, 2.0, 2.0];
        let banded = Dtw::with_band(0).distance(&a, &b, 1).unwrap();
        assert!((banded - euclidean(&a, &b).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn premetric_properties(
            a in prop::collection::vec(-5.0f64..5.0, 1..12),
            b in prop::collection::vec(-5.0f64..5.0, 1..12),
        ) {
            let ab = dtw(&a, &b).unwrap();
            let ba = dtw(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert_eq!(dtw(&a, &a).unwrap(), 0.0);
            if a.len() == b.len() {
                prop_assert!(ab <= euclidean(&a, &b).unwrap() + 1e-12);
            }
        }

        #[test]
        fn band_never_beats_unconstrained(
            a in prop::collection::vec(-5.0f64..5.0, 2..10),
            b in prop::collection::vec(-5.0f64..5.0, 2..10),
            w in 0usize..4,
        ) {
            let free = dtw(&a, &b).unwrap();
            let banded = Dtw::with_band(w).distance(&a, &b, 1).unwrap();
            prop_assert!(banded + 1e-12 >= free);
        }
    }
}
