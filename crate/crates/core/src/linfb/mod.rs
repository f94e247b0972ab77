//! Linear-feedback schemes with a message point.
//!
//! A blocklength-n scheme sends `X = theta * d + sum_k A_k Z_k` with every
//! `A_k` strictly lower triangular, so each input only depends on noise the
//! transmitter has already learned through feedback.

mod private;

pub use private::{
    default_combining_vectors, lmmse, LmmseEstimate, MessageLattice, PowerBreakdown,
    PrivateScheme, Slot, DEFAULT_DELTA_FRACTION,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, NoiseBlock};
use crate::error::{Error, Result};

/// Tolerance on unit-norm checks of combining vectors.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// One blocklength-n linear-feedback code for the common message.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeedbackScheme {
    d: DVector<f64>,
    a_mats: Vec<DMatrix<f64>>,
    theta_variance: f64,
}

/// JSON layout: `{n, K, d: [...], A: [[[...]]], theta_variance}` with row-major
/// matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeDocument {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
    pub theta_variance: f64,
}

/// Left side of the block-power condition and the causality verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeReport {
    pub power_lhs: f64,
    pub budget: f64,
    pub power_ok: bool,
    pub strictly_lower_triangular: bool,
}

impl LinearFeedbackScheme {
    pub fn new(d: DVector<f64>, a_mats: Vec<DMatrix<f64>>, theta_variance: f64) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::Dimension("blocklength must be >= 1".into()));
        }
        if a_mats.is_empty() {
            return Err(Error::Dimension("at least one feedback matrix is required".into()));
        }
        for (k, a) in a_mats.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "A[{k}] is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        if !(theta_variance >= 0.0) {
            return Err(Error::Validation(format!(
                "theta variance must be >= 0, got {theta_variance}"
            )));
        }
        check_strictly_lower(&a_mats)?;
        Ok(LinearFeedbackScheme {
            d,
            a_mats,
            theta_variance,
        })
    }

    pub fn from_document(doc: &SchemeDocument) -> Result<Self> {
        if doc.d.len() != doc.n {
            return Err(Error::Dimension(format!(
                "d has {} entries, n = {}",
                doc.d.len(),
                doc.n
            )));
        }
        if doc.a.len() != doc.k {
            return Err(Error::Dimension(format!(
                "{} matrices for K = {}",
                doc.a.len(),
                doc.k
            )));
        }
        let mut mats = Vec::with_capacity(doc.k);
        for (k, rows) in doc.a.iter().enumerate() {
            if rows.len() != doc.n || rows.iter().any(|r| r.len() != doc.n) {
                return Err(Error::Dimension(format!("A[{k}] is not {0}x{0}", doc.n)));
            }
            mats.push(DMatrix::from_fn(doc.n, doc.n, |i, j| rows[i][j]));
        }
        Self::new(DVector::from_vec(doc.d.clone()), mats, doc.theta_variance)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SchemeDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn to_document(&self) -> SchemeDocument {
        let n = self.blocklength();
        SchemeDocument {
            n,
            k: self.a_mats.len(),
            d: self.d.iter().copied().collect(),
            a: self
                .a_mats
                .iter()
                .map(|a| (0..n).map(|i| a.row(i).iter().copied().collect()).collect())
                .collect(),
            theta_variance: self.theta_variance,
        }
    }

    pub fn blocklength(&self) -> usize {
        self.d.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.a_mats.len()
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn a_mats(&self) -> &[DMatrix<f64>] {
        &self.a_mats
    }

    pub fn theta_variance(&self) -> f64 {
        self.theta_variance
    }
}

fn check_strictly_lower(a_mats: &[DMatrix<f64>]) -> Result<()> {
    for (k, a) in a_mats.iter().enumerate() {
        for row in 0..a.nrows() {
            for col in row..a.ncols() {
                if a[(row, col)] != 0.0 {
                    return Err(Error::Causality {
                        receiver: k,
                        row,
                        col,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Checks causality and the block-power condition
/// `sum_k ||A_k||_F^2 sigma_k^2 + ||d||^2 E|theta|^2 <= n P`.
pub fn validate_scheme(
    d: &DVector<f64>,
    a_mats: &[DMatrix<f64>],
    theta_variance: f64,
    ch: &ChannelModel,
) -> Result<SchemeReport> {
    if a_mats.len() != ch.num_receivers() {
        return Err(Error::Dimension(format!(
            "{} feedback matrices for {} receivers",
            a_mats.len(),
            ch.num_receivers()
        )));
    }
    check_strictly_lower(a_mats)?;
    let n = d.len();
    let power_lhs = a_mats
        .iter()
        .zip(ch.noise_variances())
        .map(|(a, s2)| a.norm_squared() * s2)
        .sum::<f64>()
        + d.norm_squared() * theta_variance;
    let budget = n as f64 * ch.power_budget();
    Ok(SchemeReport {
        power_lhs,
        budget,
        power_ok: power_lhs <= budget * (1.0 + 1e-12),
        strictly_lower_triangular: true,
    })
}

impl LinearFeedbackScheme {
    pub fn validate(&self, ch: &ChannelModel) -> Result<SchemeReport> {
        validate_scheme(&self.d, &self.a_mats, self.theta_variance, ch)
    }
}

fn check_noise_dims(s: &LinearFeedbackScheme, noise: &NoiseBlock) -> Result<()> {
    if noise.num_receivers() != s.num_receivers() || noise.len() != s.blocklength() {
        return Err(Error::Dimension(format!(
            "noise block is {}x{}, scheme needs {}x{}",
            noise.num_receivers(),
            noise.len(),
            s.num_receivers(),
            s.blocklength()
        )));
    }
    Ok(())
}

/// Matrix form of the encoder, `theta * d + sum_k A_k Z_k`.
pub fn encode_linear(s: &LinearFeedbackScheme, theta: f64, noise: &NoiseBlock) -> Result<Vec<f64>> {
    check_noise_dims(s, noise)?;
    let mut x = &s.d * theta;
    for (k, a) in s.a_mats.iter().enumerate() {
        let z = DVector::from_iterator(noise.len(), noise.samples().row(k).iter().copied());
        x += a * z;
    }
    Ok(x.iter().copied().collect())
}

/// Symbol-by-symbol encoder: the transmitter only sees past channel outputs
/// and recovers each receiver's past noise as `Y_{k,i'} - X_{i'}`.
pub fn encode_sequential(
    s: &LinearFeedbackScheme,
    theta: f64,
    noise: &NoiseBlock,
) -> Result<Vec<f64>> {
    check_noise_dims(s, noise)?;
    let n = s.blocklength();
    let k_count = s.num_receivers();
    let mut x = vec![0.0; n];
    // feedback[k][i] = Y_{k,i}, filled after slot i is sent
    let mut feedback = vec![vec![0.0; n]; k_count];
    for i in 0..n {
        let mut xi = theta * s.d[i];
        for (k, a) in s.a_mats.iter().enumerate() {
            for past in 0..i {
                let learned = feedback[k][past] - x[past];
                xi += a[(i, past)] * learned;
            }
        }
        x[i] = xi;
        for (k, fb) in feedback.iter_mut().enumerate() {
            fb[i] = xi + noise.get(k, i);
        }
    }
    Ok(x)
}

fn check_unit(v: &DVector<f64>, k: usize) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Validation(format!(
            "combining vector v[{k}] has norm {norm}, expected 1"
        )));
    }
    Ok(())
}

/// `c_k = sigma_k^2 ||v_k (I + A_k)||^2 + sum_{k' != k} sigma_k'^2 ||v_k' A_k'||^2`
/// with `v_k` read as row vectors.
pub fn c_coefficients(
    a_mats: &[DMatrix<f64>],
    v: &[DVector<f64>],
    ch: &ChannelModel,
) -> Result<Vec<f64>> {
    let k_count = ch.num_receivers();
    if a_mats.len() != k_count || v.len() != k_count {
        return Err(Error::Dimension(format!(
            "{} matrices and {} vectors for {k_count} receivers",
            a_mats.len(),
            v.len()
        )));
    }
    for (k, vk) in v.iter().enumerate() {
        check_unit(vk, k)?;
        if vk.len() != a_mats[k].nrows() {
            return Err(Error::Dimension(format!("v[{k}] has wrong length")));
        }
    }
    // ||v A||^2 for row vector v equals ||A^T v||^2
    let cross: Vec<f64> = v
        .iter()
        .zip(a_mats)
        .zip(ch.noise_variances())
        .map(|((vk, a), s2)| s2 * (a.transpose() * vk).norm_squared())
        .collect();
    let cross_total: f64 = cross.iter().sum();
    Ok((0..k_count)
        .map(|k| {
            let own = &v[k] + a_mats[k].transpose() * &v[k];
            ch.noise_variance(k) * own.norm_squared() + cross_total - cross[k]
        })
        .collect())
}

/// Multi-letter rate `-(1/2n) log c`.
pub fn multiletter_rate(c: f64, n: usize) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Validation(format!("c must be > 0, got {c}")));
    }
    if n == 0 {
        return Err(Error::Validation("blocklength must be >= 1".into()));
    }
    Ok(-c.ln() / (2.0 * n as f64))
}

/// `1/2 log(1 + |v_{k, j_k}|^2 / c)`.
///
/// This is the mutual information carried by the projection `v_k . Y~_k`
/// (and hence a lower bound on `I(Z_{k,1-k}; Y~_k)`) when `c` is the
/// projected noise from [`PrivateScheme::projected_noise`].
pub fn dpi_lower_bound(v_k: &[f64], c: f64, j_k: usize) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Validation(format!("c must be > 0, got {c}")));
    }
    let vj = *v_k
        .get(j_k)
        .ok_or_else(|| Error::Dimension(format!("index {j_k} outside vector of length {}", v_k.len())))?;
    Ok(0.5 * (vj * vj / c).ln_1p())
}
