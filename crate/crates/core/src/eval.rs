//! Forecast error metrics, fold evaluation and paired significance tests.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{Fold, Instance};

/// `(mae, rmse)` of `forecast` against `truth`.
pub fn metrics(forecast: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if forecast.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), actual: forecast.len() });
    }
    if truth.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = truth.len() as f64;
    let (abs, sq) = forecast
        .iter()
        .zip(truth)
        .fold((0.0, 0.0), |(a, s), (f, y)| (a + libm::fabs(f - y), s + (f - y) * (f - y)));
    Ok((abs / n, libm::sqrt(sq / n)))
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Alternative hypothesis of a one-sided paired test on `d = a − b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// `mean(a) < mean(b)`.
    Less,
    /// `mean(a) > mean(b)`.
    Greater,
}

impl Alternative {
    pub fn flipped(self) -> Self {
        match self {
            Self::Less => Self::Greater,
            Self::Greater => Self::Less,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Less => "<",
            Self::Greater => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// One-sided paired t-test on `d = a − b`.
///
/// When every difference is identical the statistic is `0` (p = 0.5) for
/// zero differences and `±∞` otherwise, with p = 0 or 1 depending on
/// whether the sign agrees with `alternative`.
pub fn paired_t_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewPairs(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let t = if var > 0.0 {
        mean / libm::sqrt(var / n as f64)
    } else if mean == 0.0 {
        0.0
    } else if mean > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    let lower = student_t_cdf(t, df as f64);
    let p = match alternative {
        Alternative::Less => lower,
        Alternative::Greater => student_t_cdf(-t, df as f64),
    };
    Ok(TTest { t, p, df })
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `I_x(a, b)` via Lentz's continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log(1.0 - x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if libm::fabs(delta - 1.0) < EPS {
            break;
        }
    }
    h
}

/// A fitted model that forecasts raw instances in original units.
pub trait Forecaster {
    fn forecast(&self, instance: &Instance) -> Result<Vec<f64>>;
}

impl<F: Forecaster + ?Sized> Forecaster for &F {
    fn forecast(&self, instance: &Instance) -> Result<Vec<f64>> {
        (**self).forecast(instance)
    }
}

/// How residues are pooled into the reported mean and deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// One MAE/RMSE value per test instance.
    #[default]
    PerInstance,
    /// One absolute/squared error per forecast step.
    PerTimestep,
}

/// Residues (`forecast − truth`) of every test instance of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResidues {
    pub residues: Vec<Vec<f64>>,
}

/// Forecasts the test split of `fold` with `model`.
pub fn evaluate_fold<F: Forecaster>(model: &F, fold: &Fold) -> Result<FoldResidues> {
    if fold.test.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    let residues = fold
        .test
        .iter()
        .map(|inst| {
            let f = model.forecast(inst)?;
            let truth = inst.output.values();
            if f.len() != truth.len() {
                return Err(Error::LengthMismatch { expected: truth.len(), actual: f.len() });
            }
            Ok(f.iter().zip(truth).map(|(p, y)| p - y).collect())
        })
        .collect::<Result<_>>()?;
    Ok(FoldResidues { residues })
}

/// Pooled results of one model over all folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub name: String,
    pub folds: Vec<FoldResidues>,
    pub mae_values: Vec<f64>,
    pub rmse_values: Vec<f64>,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

impl ModelEvaluation {
    pub fn from_folds(name: impl Into<String>, folds: Vec<FoldResidues>, pooling: Pooling) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::EmptyFolds);
        }
        let all = folds.iter().flat_map(|f| f.residues.iter());
        let (mae_values, rmse_values, mae, rmse) = match pooling {
            Pooling::PerInstance => {
                let mut mae_v = Vec::new();
                let mut rmse_v = Vec::new();
                for r in all {
                    let zeros = alloc::vec![0.0; r.len()];
                    let (a, s) = metrics(r, &zeros)?;
                    mae_v.push(a);
                    rmse_v.push(s);
                }
                let mae = mean_std(&mae_v);
                let rmse = mean_std(&rmse_v);
                (mae_v, rmse_v, mae, rmse)
            }
            Pooling::PerTimestep => {
                let flat: Vec<f64> = all.flatten().copied().collect();
                let abs: Vec<f64> = flat.iter().map(|e| libm::fabs(*e)).collect();
                let sq: Vec<f64> = flat.iter().map(|e| e * e).collect();
                let mae = mean_std(&abs);
                let (ms, ms_std) = mean_std(&sq);
                let rmse = libm::sqrt(ms);
                // delta method for the deviation of a square root
                let rmse_std = if rmse > 0.0 { ms_std / (2.0 * rmse) } else { 0.0 };
                (abs, sq, mae, (rmse, rmse_std))
            }
        };
        if mae_values.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(Self {
            name: name.into(),
            folds,
            mae_values,
            rmse_values,
            mae_mean: mae.0,
            mae_std: mae.1,
            rmse_mean: rmse.0,
            rmse_std: rmse.1,
        })
    }
}

/// Trains one model per fold with `factory` and pools its test residues.
pub fn evaluate_folds<F, M>(name: &str, folds: &[Fold], pooling: Pooling, mut factory: F) -> Result<ModelEvaluation>
where
    F: FnMut(&Fold) -> Result<M>,
    M: Forecaster,
{
    if folds.is_empty() {
        return Err(Error::EmptyFolds);
    }
    let residues = folds
        .iter()
        .map(|fold| evaluate_fold(&factory(fold)?, fold))
        .collect::<Result<Vec<_>>>()?;
    ModelEvaluation::from_folds(name, residues, pooling)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub model_a: String,
    pub model_b: String,
    pub alternative: Alternative,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub models: Vec<ModelEvaluation>,
    pub tests: Vec<PairwiseTest>,
}

impl EvaluationReport {
    /// Tests every ordered pair `(a, b)` with `a` listed before `b` for
    /// `MAE(a) < MAE(b)` on the pooled metric values.
    pub fn new(models: Vec<ModelEvaluation>) -> Result<Self> {
        let mut tests = Vec::new();
        for (i, a) in models.iter().enumerate() {
            for b in &models[i + 1..] {
                let r = paired_t_test(&a.mae_values, &b.mae_values, Alternative::Less)?;
                tests.push(PairwiseTest {
                    model_a: a.name.clone(),
                    model_b: b.name.clone(),
                    alternative: Alternative::Less,
                    t: r.t,
                    p: r.p,
                });
            }
        }
        Ok(Self { models, tests })
    }

    pub fn model(&self, name: &str) -> Option<&ModelEvaluation> {
        self.models.iter().find(|m| m.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn metric_examples() {
        assert_eq!(metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
        assert_eq!(metrics(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), (1.0, 1.0));
        assert_eq!(metrics(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), (1.0, libm::sqrt(2.0)));
        assert!(matches!(metrics(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn t_test_degenerate_cases() {
        let a = [1.0, 2.0, 3.0];
        let r = paired_t_test(&a, &a, Alternative::Less).unwrap();
        assert_eq!((r.t, r.p), (0.0, 0.5));
        assert_eq!(paired_t_test(&[1.0], &[2.0], Alternative::Less), Err(Error::TooFewPairs(1)));
        let r = paired_t_test(&[1.0, 2.0], &[2.0, 3.0], Alternative::Less).unwrap();
        assert_eq!((r.t, r.p), (f64::NEG_INFINITY, 0.0));
        let r = paired_t_test(&[1.0, 2.0], &[2.0, 3.0], Alternative::Greater).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn t_cdf_known_values() {
        // df = 1 is the Cauchy distribution
        for t in [-3.0, -0.5, 0.0, 0.7, 2.0] {
            let cauchy = 0.5 + libm::atan(t) / core::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-13, "{t}");
        }
        // df = 2 has a closed form
        for t in [-2.5, -1.0, 0.3, 4.0] {
            let closed = 0.5 + t / (2.0 * libm::sqrt(2.0 + t * t));
            assert!((student_t_cdf(t, 2.0) - closed).abs() < 1e-13, "{t}");
        }
    }

    #[test]
    fn singleton_fold_has_zero_std() {
        let folds = vec![FoldResidues { residues: vec![vec![1.0, -3.0]] }];
        let m = ModelEvaluation::from_folds("m", folds, Pooling::PerInstance).unwrap();
        assert_eq!((m.mae_mean, m.mae_std), (2.0, 0.0));
        assert_eq!(m.rmse_mean, libm::sqrt(5.0));
        assert_eq!(ModelEvaluation::from_folds("m", Vec::new(), Pooling::PerInstance).unwrap_err(), Error::EmptyFolds);
    }

    #[test]
    fn per_timestep_pooling() {
        let folds = vec![FoldResidues { residues: vec![vec![1.0, -3.0], vec![0.0, 2.0]] }];
        let m = ModelEvaluation::from_folds("m", folds, Pooling::PerTimestep).unwrap();
        assert_eq!(m.mae_mean, 1.5);
        assert_eq!(m.rmse_mean, libm::sqrt(14.0 / 4.0));
        assert_eq!(m.mae_values.len(), 4);
    }
}
