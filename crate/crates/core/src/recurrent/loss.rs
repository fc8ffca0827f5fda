use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample training loss over a forecast vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Mae,
    #[default]
    Mse,
    /// `1 − cos(forecast, target)`.
    Cosine,
}

const NORM_FLOOR: f64 = 1e-12;

fn check(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch { expected: target.len(), actual: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(NORM_FLOOR)
}

impl Loss {
    pub fn value(self, pred: &[f64], target: &[f64]) -> Result<f64> {
        check(pred, target)?;
        let n = pred.len() as f64;
        Ok(match self {
            Self::Mae => pred.iter().zip(target).map(|(p, y)| libm::fabs(p - y)).sum::<f64>() / n,
            Self::Mse => pred.iter().zip(target).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n,
            Self::Cosine => {
                let dot: f64 = pred.iter().zip(target).map(|(p, y)| p * y).sum();
                1.0 - dot / (norm(pred) * norm(target))
            }
        })
    }

    /// Gradient of [`Loss::value`] with respect to `pred`.
    pub fn gradient(self, pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
        check(pred, target)?;
        let n = pred.len() as f64;
        Ok(match self {
            Self::Mae => pred
                .iter()
                .zip(target)
                .map(|(p, y)| {
                    let e = p - y;
                    if e > 0.0 {
                        1.0 / n
                    } else if e < 0.0 {
                        -1.0 / n
                    } else {
                        0.0
                    }
                })
                .collect(),
            Self::Mse => pred.iter().zip(target).map(|(p, y)| 2.0 * (p - y) / n).collect(),
            Self::Cosine => {
                let np = norm(pred);
                let ny = norm(target);
                let dot: f64 = pred.iter().zip(target).map(|(p, y)| p * y).sum();
                pred.iter()
                    .zip(target)
                    .map(|(p, y)| -(y / (np * ny) - dot * p / (np * np * np * ny)))
                    .collect()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn values() {
        assert_eq!(Loss::Mae.value(&[1.0, 3.0], &[2.0, 1.0]).unwrap(), 1.5);
        assert_eq!(Loss::Mse.value(&[1.0, 3.0], &[2.0, 1.0]).unwrap(), 2.5);
        assert!(Loss::Cosine.value(&[1.0, 2.0], &[2.0, 4.0]).unwrap().abs() < 1e-15);
        assert!((Loss::Cosine.value(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(Loss::Mse.value(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let pred = vec![0.3, -1.2, 0.8];
        let target = vec![0.5, -0.4, 1.1];
        for loss in [Loss::Mae, Loss::Mse, Loss::Cosine] {
            let g = loss.gradient(&pred, &target).unwrap();
            for i in 0..pred.len() {
                let mut up = pred.clone();
                let mut down = pred.clone();
                up[i] += 1e-6;
                down[i] -= 1e-6;
                let num = (loss.value(&up, &target).unwrap() - loss.value(&down, &target).unwrap()) / 2e-6;
                assert!((num - g[i]).abs() < 1e-8, "{loss:?} {i}: {num} vs {}", g[i]);
            }
        }
    }
}
