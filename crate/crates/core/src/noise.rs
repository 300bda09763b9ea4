//! Fractional Gaussian noise: autocovariances, Toeplitz Cholesky factors and
//! exact synthesis by either Cholesky or circulant embedding.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::seed;

/// Largest length synthesised by Cholesky when the backend is [`Backend::Auto`].
pub const CHOLESKY_MAX_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgnSpec {
    pub hurst: f64,
    /// Time step `h` between observations.
    pub step: f64,
    /// Number of increments.
    pub length: usize,
}

impl FgnSpec {
    pub fn new(hurst: f64, step: f64, length: usize) -> Result<Self> {
        let spec = Self {
            hurst,
            step,
            length,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::InvalidParams(format!(
                "hurst must lie in (0,1), got {}",
                self.hurst
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if self.length == 0 {
            return Err(Error::InvalidParams("length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Autocovariance of fractional Gaussian noise sampled at step `h`:
/// `h^{2H} * (|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H}) / 2`.
pub fn fgn_autocovariance(hurst: f64, step: f64, lag: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let scale = step.powf(two_h);
    if lag == 0 {
        return scale;
    }
    let k = lag as f64;
    let v = 0.5 * ((k + 1.0).powf(two_h) + (k - 1.0).powf(two_h) - 2.0 * k.powf(two_h));
    // Exact zero for Brownian increments; the powf expression leaves ~1e-16 residue.
    if hurst == 0.5 {
        return 0.0;
    }
    scale * v
}

/// Autocovariance of the mixed increments `sigma dB + gamma dB^H`.
pub fn mixed_increment_autocovariance(params: &ModelParams, lag: usize) -> f64 {
    let brownian = if lag == 0 {
        params.sigma_sq * params.step
    } else {
        0.0
    };
    brownian + params.gamma_sq * fgn_autocovariance(params.hurst, params.step, lag)
}

/// Symmetric Toeplitz matrix described by its first row.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceToeplitz {
    first_row: Vec<f64>,
}

impl CovarianceToeplitz {
    pub fn new(first_row: Vec<f64>) -> Result<Self> {
        match first_row.first() {
            Some(&v) if v > 0.0 => Ok(Self { first_row }),
            Some(&v) => Err(Error::NotPositiveDefinite { pivot: 0, value: v }),
            None => Err(Error::InsufficientData("empty Toeplitz row".into())),
        }
    }

    pub fn fgn(spec: &FgnSpec) -> Result<Self> {
        spec.validate()?;
        Self::new(
            (0..spec.length)
                .map(|k| fgn_autocovariance(spec.hurst, spec.step, k))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.first_row[i.abs_diff(j)]
    }
}

/// Lower-triangular matrix in packed row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    #[inline]
    fn offset(i: usize) -> usize {
        i * (i + 1) / 2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)`; zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[Self::offset(i) + j]
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = Self::offset(i);
        &self.data[start..start + i + 1]
    }

    /// `L z` for a vector of the same dimension.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim, "dimension mismatch in L*z");
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(z)
                    .map(|(l, x)| l * x)
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Cholesky factor `L` with `L L^T` equal to the Toeplitz matrix.
pub fn cholesky_toeplitz(cov: &CovarianceToeplitz) -> Result<LowerTriangular> {
    let n = cov.dim();
    let mut data = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        let row_i = LowerTriangular::offset(i);
        for j in 0..=i {
            let row_j = LowerTriangular::offset(j);
            let dot: f64 = data[row_i..row_i + j]
                .iter()
                .zip(&data[row_j..row_j + j])
                .map(|(a, b)| a * b)
                .sum();
            let s = cov.get(i, j) - dot;
            if i == j {
                if !s.is_finite() || s <= 0.0 {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                }
                data[row_i + i] = s.sqrt();
            } else {
                data[row_i + j] = s / data[row_j + j];
            }
        }
    }
    Ok(LowerTriangular { dim: n, data })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Cholesky up to [`CHOLESKY_MAX_LEN`], circulant embedding beyond.
    #[default]
    Auto,
    Cholesky,
    Circulant,
}

enum Method {
    Cholesky(LowerTriangular),
    Circulant {
        /// `sqrt(lambda_k / M)` for the embedding of size `M = 2 * len`.
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
}

impl std::fmt::Debug for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Cholesky(l) => write!(f, "Cholesky(dim={})", l.dim()),
            Method::Circulant { sqrt_eig, .. } => write!(f, "Circulant(size={})", sqrt_eig.len()),
        }
    }
}

/// Prepared fGn generator. The factorization is computed once and shared.
#[derive(Debug, Clone)]
pub struct FgnSampler {
    spec: FgnSpec,
    method: Arc<Method>,
    fell_back: bool,
}

impl FgnSampler {
    pub fn new(spec: FgnSpec, backend: Backend) -> Result<Self> {
        spec.validate()?;
        let use_circulant = match backend {
            Backend::Cholesky => false,
            Backend::Circulant => true,
            Backend::Auto => spec.length > CHOLESKY_MAX_LEN,
        };
        if use_circulant {
            if let Some(sqrt_eig) = circulant_sqrt_eigenvalues(&spec) {
                let fft = FftPlanner::new().plan_fft_forward(sqrt_eig.len());
                return Ok(Self {
                    spec,
                    method: Arc::new(Method::Circulant { sqrt_eig, fft }),
                    fell_back: false,
                });
            }
            log::warn!(
                "circulant embedding has negative eigenvalues for H={}, n={}; falling back to Cholesky",
                spec.hurst,
                spec.length
            );
        }
        let factor = cholesky_toeplitz(&CovarianceToeplitz::fgn(&spec)?)?;
        Ok(Self {
            spec,
            method: Arc::new(Method::Cholesky(factor)),
            fell_back: use_circulant,
        })
    }

    pub fn spec(&self) -> &FgnSpec {
        &self.spec
    }

    pub fn backend(&self) -> Backend {
        match *self.method {
            Method::Cholesky(_) => Backend::Cholesky,
            Method::Circulant { .. } => Backend::Circulant,
        }
    }

    /// True when circulant embedding was requested but Cholesky is in use.
    pub fn fell_back(&self) -> bool {
        self.fell_back
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &*self.method {
            Method::Cholesky(factor) => {
                let z: Vec<f64> = (0..self.spec.length)
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                factor.mul_vec(&z)
            }
            Method::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(self.spec.length);
                buf.into_iter().map(|c| c.re).collect()
            }
        }
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        self.sample_with(&mut seed::rng_for(seed, seed::stream::FRACTIONAL, 0))
    }
}

/// `sqrt(lambda_k / M)` for the minimal circulant embedding of size `M = 2n`,
/// or `None` when an eigenvalue is materially negative.
fn circulant_sqrt_eigenvalues(spec: &FgnSpec) -> Option<Vec<f64>> {
    let n = spec.length;
    let size = 2 * n;
    let mut row: Vec<Complex64> = (0..size)
        .map(|k| {
            let lag = if k <= n { k } else { size - k };
            Complex64::new(fgn_autocovariance(spec.hurst, spec.step, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    let scale = fgn_autocovariance(spec.hurst, spec.step, 0);
    let tol = -1e-10 * scale * size as f64;
    let mut out = Vec::with_capacity(size);
    for c in row {
        if c.re < tol {
            return None;
        }
        out.push((c.re.max(0.0) / size as f64).sqrt());
    }
    Some(out)
}

/// One-shot fGn draw. Builds the factorization on every call; use
/// [`FgnSampler`] to amortize it.
pub fn sample_fgn(spec: &FgnSpec, seed: u64, backend: Backend) -> Result<Vec<f64>> {
    Ok(FgnSampler::new(*spec, backend)?.sample(seed))
}
