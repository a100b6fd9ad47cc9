//! Statistical models, datasets, and the empirical log loss.
//!
//! A [`Model`] supplies a per-record log likelihood `log p(x|w)`, a log prior
//! density `log φ(w)`, and a way to draw from the prior. Everything downstream
//! (samplers, grids, criteria) works in terms of `n·L_n(w)`, the summed
//! negative log likelihood, which models may compute through a sufficient
//! statistic fast path via [`Model::total_nll`].

mod conjugate;
mod rrr;
mod theory;
mod toy;

pub use conjugate::{ConjugateNormalModel, ConjugateTruth};
pub use rrr::{generate_rrr_dataset, ReducedRankModel, RrrDataConfig, RrrTruth};
pub use theory::{theoretical_rlct_rrr, TheoryRlct};
pub use toy::{MeanMap, PolynomialMeanModel};

use std::sync::OnceLock;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A point `w` in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        ParameterVector(v)
    }
}

/// One observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Record {
    Plain(Vec<f64>),
    Pair { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordShape {
    Plain(usize),
    Pair { inputs: usize, outputs: usize },
}

impl Record {
    pub fn shape(&self) -> RecordShape {
        match self {
            Record::Plain(v) => RecordShape::Plain(v.len()),
            Record::Pair { x, y } => RecordShape::Pair {
                inputs: x.len(),
                outputs: y.len(),
            },
        }
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let (a, b): (&[f64], &[f64]) = match self {
            Record::Plain(v) => (v, &[]),
            Record::Pair { x, y } => (x, y),
        };
        a.iter().chain(b.iter()).copied()
    }
}

/// Per-coordinate sums of plain records.
#[derive(Debug, Clone)]
pub struct PlainMoments {
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

/// Cross-moments of regression records: `Σ x xᵀ`, `Σ y xᵀ` (both row-major) and `Σ ‖y‖²`.
#[derive(Debug, Clone)]
pub struct RegressionMoments {
    pub xx: Vec<f64>,
    pub yx: Vec<f64>,
    pub yy: f64,
}

/// An ordered, immutable collection of i.i.d. observations sharing one shape.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<Record>,
    shape: RecordShape,
    plain: OnceLock<PlainMoments>,
    regression: OnceLock<RegressionMoments>,
    fingerprint: OnceLock<String>,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Config("dataset must contain at least one record".into()))?;
        let shape = first.shape();
        if let Some(i) = records.iter().position(|r| r.shape() != shape) {
            return Err(Error::Config(format!(
                "record {i} has shape {:?}, expected {shape:?}",
                records[i].shape()
            )));
        }
        if let Some(i) = records.iter().position(|r| r.values().any(|v| !v.is_finite())) {
            return Err(Error::Config(format!("record {i} has a non-finite entry")));
        }
        Ok(Dataset {
            records,
            shape,
            plain: OnceLock::new(),
            regression: OnceLock::new(),
            fingerprint: OnceLock::new(),
        })
    }

    pub fn plain(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Record::Plain).collect())
    }

    pub fn regression(xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Config(format!(
                "{} inputs but {} outputs",
                xs.len(),
                ys.len()
            )));
        }
        Self::new(
            xs.into_iter()
                .zip(ys)
                .map(|(x, y)| Record::Pair { x, y })
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn shape(&self) -> RecordShape {
        self.shape
    }

    /// Sums for plain records; `None` for regression data.
    pub fn plain_moments(&self) -> Option<&PlainMoments> {
        let RecordShape::Plain(d) = self.shape else {
            return None;
        };
        Some(self.plain.get_or_init(|| {
            let mut sum = vec![0.0; d];
            let mut sum_sq = vec![0.0; d];
            for r in &self.records {
                if let Record::Plain(v) = r {
                    for k in 0..d {
                        sum[k] += v[k];
                        sum_sq[k] += v[k] * v[k];
                    }
                }
            }
            PlainMoments { sum, sum_sq }
        }))
    }

    /// Cross-moments for regression records; `None` for plain data.
    pub fn regression_moments(&self) -> Option<&RegressionMoments> {
        let RecordShape::Pair { inputs: m, outputs: q } = self.shape else {
            return None;
        };
        Some(self.regression.get_or_init(|| {
            let mut xx = vec![0.0; m * m];
            let mut yx = vec![0.0; q * m];
            let mut yy = 0.0;
            for r in &self.records {
                if let Record::Pair { x, y } = r {
                    for a in 0..m {
                        for b in 0..m {
                            xx[a * m + b] += x[a] * x[b];
                        }
                    }
                    for a in 0..q {
                        for b in 0..m {
                            yx[a * m + b] += y[a] * x[b];
                        }
                        yy += y[a] * y[a];
                    }
                }
            }
            RegressionMoments { xx, yx, yy }
        }))
    }

    /// Content hash over record shapes and the bit patterns of every value.
    pub fn fingerprint(&self) -> &str {
        self.fingerprint.get_or_init(|| {
            let mut h = Sha256::new();
            h.update(format!("{:?}", self.shape).as_bytes());
            for r in &self.records {
                for v in r.values() {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
            hex::encode(&h.finalize()[..16])
        })
    }
}

/// Closed-form tempered-posterior quantities, available for conjugate families.
pub trait ClosedFormOracle: Sync {
    /// `log ∫ exp(−β n L_n(w)) φ(w) dw`.
    fn log_partition(&self, beta: f64, data: &Dataset) -> Result<f64>;

    /// `E_w^β[n L_n(w)]`.
    fn expected_nll(&self, beta: f64, data: &Dataset) -> Result<f64>;
}

/// A parametric statistical model `p(x|w)` with prior `φ(w)`.
///
/// Implementations are immutable and shared across worker threads.
pub trait Model: Send + Sync {
    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    /// Family name plus structural hyperparameters, e.g. `rrr(M=6,N=6,H=3,...)`.
    fn label(&self) -> String;

    /// `log p(x|w)` for one record.
    fn log_likelihood(&self, w: &[f64], record: &Record) -> f64;

    /// `log φ(w)`; `-inf` outside the support.
    fn log_prior(&self, w: &[f64]) -> f64;

    /// One exact draw from the prior.
    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Rejects datasets whose record shape the model cannot score.
    fn check_data(&self, _data: &Dataset) -> Result<()> {
        Ok(())
    }

    /// `n·L_n(w) = −Σᵢ log p(Xᵢ|w)`. Non-finite values are returned as-is.
    fn total_nll(&self, w: &[f64], data: &Dataset) -> f64 {
        -data
            .records()
            .iter()
            .map(|r| self.log_likelihood(w, r))
            .sum::<f64>()
    }

    fn oracle(&self) -> Option<&dyn ClosedFormOracle> {
        None
    }

    fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.label().as_bytes());
        hex::encode(&digest[..16])
    }
}

/// The generating density `q(x)` of simulated data, on the same scale as the
/// model likelihood (input densities excluded).
pub trait TrueDensity {
    fn log_density(&self, record: &Record) -> f64;
}

fn check_parameter(model: &dyn Model, w: &[f64]) -> Result<()> {
    if w.len() != model.dim() {
        return Err(Error::Config(format!(
            "parameter has length {}, model dimension is {}",
            w.len(),
            model.dim()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("parameter has a non-finite entry".into()));
    }
    Ok(())
}

/// `L_n(w) = −(1/n) Σᵢ log p(Xᵢ|w)`, evaluated record by record.
pub fn empirical_log_loss(model: &dyn Model, w: &[f64], data: &Dataset) -> Result<f64> {
    check_parameter(model, w)?;
    model.check_data(data)?;
    let mut total = 0.0;
    for (index, r) in data.records().iter().enumerate() {
        let ll = model.log_likelihood(w, r);
        if !ll.is_finite() {
            return Err(Error::NonFiniteRecord { index });
        }
        total -= ll;
    }
    Ok(total / data.n() as f64)
}

/// `S_n = −(1/n) Σᵢ log q(Xᵢ)`. Requires the generating density.
pub fn empirical_entropy(truth: Option<&dyn TrueDensity>, data: &Dataset) -> Result<f64> {
    let truth = truth.ok_or_else(|| {
        Error::Unavailable("empirical entropy needs the generating distribution".into())
    })?;
    let mut total = 0.0;
    for (index, r) in data.records().iter().enumerate() {
        let lq = truth.log_density(r);
        if !lq.is_finite() {
            return Err(Error::NonFiniteRecord { index });
        }
        total -= lq;
    }
    Ok(total / data.n() as f64)
}

/// Restricts a model's prior to an axis-aligned box.
///
/// Proposals outside the box have zero prior density and are rejected by the
/// sampler. The restricted prior is not renormalised, so the box should hold
/// essentially all of the base prior's mass when free energies are compared.
pub struct Bounded<M> {
    inner: M,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<M: Model> Bounded<M> {
    pub fn new(inner: M, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = inner.dim();
        if lower.len() != d || upper.len() != d {
            return Err(Error::Config(format!("box bounds must have length {d}")));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Config("box bounds need lower < upper".into()));
        }
        Ok(Bounded { inner, lower, upper })
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }
}

impl<M: Model> Model for Bounded<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn label(&self) -> String {
        format!("bounded({})", self.inner.label())
    }

    fn log_likelihood(&self, w: &[f64], record: &Record) -> f64 {
        self.inner.log_likelihood(w, record)
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        if self.contains(w) {
            self.inner.log_prior(w)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        loop {
            let w = self.inner.sample_prior(rng);
            if self.contains(&w) {
                return w;
            }
        }
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        self.inner.check_data(data)
    }

    fn total_nll(&self, w: &[f64], data: &Dataset) -> f64 {
        self.inner.total_nll(w, data)
    }
}

/// Log density of an isotropic `N(0, std²·I)` at `w`.
pub(crate) fn isotropic_normal_log_density(w: &[f64], std: f64) -> f64 {
    let ss: f64 = w.iter().map(|v| v * v).sum();
    -0.5 * w.len() as f64 * (2.0 * std::f64::consts::PI * std * std).ln() - ss / (2.0 * std * std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::compensated_sum;

    /// p(x|w) = N(x; w, 1), prior N(0, 1).
    struct UnitNormalMean;

    impl Model for UnitNormalMean {
        fn dim(&self) -> usize {
            1
        }
        fn label(&self) -> String {
            "unit-normal-mean".into()
        }
        fn log_likelihood(&self, w: &[f64], record: &Record) -> f64 {
            let Record::Plain(x) = record else { unreachable!() };
            let r = x[0] - w[0];
            -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * r * r
        }
        fn log_prior(&self, w: &[f64]) -> f64 {
            isotropic_normal_log_density(w, 1.0)
        }
        fn sample_prior(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
            vec![0.0]
        }
    }

    /// Same likelihood for every w.
    struct Flat;

    impl Model for Flat {
        fn dim(&self) -> usize {
            2
        }
        fn label(&self) -> String {
            "flat".into()
        }
        fn log_likelihood(&self, _w: &[f64], record: &Record) -> f64 {
            let Record::Plain(x) = record else { unreachable!() };
            -0.5 * x[0] * x[0] - 0.5 * (2.0 * std::f64::consts::PI).ln()
        }
        fn log_prior(&self, w: &[f64]) -> f64 {
            isotropic_normal_log_density(w, 1.0)
        }
        fn sample_prior(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
            vec![0.0, 0.0]
        }
    }

    struct FlatTruth;

    impl TrueDensity for FlatTruth {
        fn log_density(&self, record: &Record) -> f64 {
            Flat.log_likelihood(&[0.0, 0.0], record)
        }
    }

    #[test]
    fn log_loss_by_hand_three_points() {
        let data = Dataset::plain(vec![vec![0.5], vec![-1.0], vec![2.0]]).unwrap();
        let w = 0.25;
        // −log N(x; w, 1) = ½log(2π) + (x − w)²/2
        let half_log_2pi = 0.918_938_533_204_672_7;
        let want = half_log_2pi + (0.0625 + 1.5625 + 3.0625) / 2.0 / 3.0;
        let got = empirical_log_loss(&UnitNormalMean, &[w], &data).unwrap();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn constant_likelihood_gives_entropy_for_every_w() {
        let data = Dataset::plain(vec![vec![0.3], vec![-0.7], vec![1.1]]).unwrap();
        let s_n = empirical_entropy(Some(&FlatTruth), &data).unwrap();
        for w in [[0.0, 0.0], [5.0, -3.0], [1e3, 2.0]] {
            let l = empirical_log_loss(&Flat, &w, &data).unwrap();
            assert_eq!(l, s_n);
        }
    }

    #[test]
    fn entropy_without_truth_is_unavailable() {
        let data = Dataset::plain(vec![vec![0.0]]).unwrap();
        assert!(matches!(
            empirical_entropy(None, &data),
            Err(Error::Unavailable(_))
        ));
    }

    #[test]
    fn non_finite_record_is_reported_with_index() {
        struct Spiky;
        impl Model for Spiky {
            fn dim(&self) -> usize {
                1
            }
            fn label(&self) -> String {
                "spiky".into()
            }
            fn log_likelihood(&self, _w: &[f64], record: &Record) -> f64 {
                let Record::Plain(x) = record else { unreachable!() };
                if x[0] > 1.0 {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            fn log_prior(&self, _w: &[f64]) -> f64 {
                0.0
            }
            fn sample_prior(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
                vec![0.0]
            }
        }
        let data = Dataset::plain(vec![vec![0.0], vec![0.5], vec![3.0]]).unwrap();
        match empirical_log_loss(&Spiky, &[0.0], &data) {
            Err(Error::NonFiniteRecord { index }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dataset_rejects_mixed_shapes_and_empty() {
        assert!(Dataset::new(vec![]).is_err());
        let mixed = vec![Record::Plain(vec![1.0]), Record::Plain(vec![1.0, 2.0])];
        assert!(Dataset::new(mixed).is_err());
    }

    #[test]
    fn log_loss_matches_compensated_sum() {
        let rows: Vec<Vec<f64>> = (0..5000).map(|i| vec![(i as f64 * 0.37).sin() * 40.0]).collect();
        let data = Dataset::plain(rows).unwrap();
        let w = [1.3];
        let naive = empirical_log_loss(&UnitNormalMean, &w, &data).unwrap();
        let comp = compensated_sum(
            data.records()
                .iter()
                .map(|r| -UnitNormalMean.log_likelihood(&w, r)),
        ) / data.n() as f64;
        assert!(((naive - comp) / comp).abs() < 1e-10);
    }

    #[test]
    fn bounded_prior_rejects_outside_box() {
        let m = Bounded::new(UnitNormalMean, vec![-1.0], vec![1.0]).unwrap();
        assert_eq!(m.log_prior(&[2.0]), f64::NEG_INFINITY);
        assert!(m.log_prior(&[0.5]).is_finite());
        assert!(Bounded::new(UnitNormalMean, vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn fingerprint_depends_on_values() {
        let a = Dataset::plain(vec![vec![1.0]]).unwrap();
        let b = Dataset::plain(vec![vec![1.0 + 1e-15]]).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
