//! Random-state ensembles on a fixed-Schmidt-basis subspace: sampling,
//! exact typical-entanglement and linear-entropy values, and Monte-Carlo
//! averages with standard errors.
//!
//! Because the uncoupled basis is the Schmidt basis for every state of a
//! fixed-F_z block, Haar-typical entanglement reduces to the entropy of the
//! squared coefficients of a Gaussian random vector: complex Gaussians for
//! the unitary ensemble, real for the orthogonal one. Restricting to a
//! chaotic subspace is sampling over an orthonormal basis of that subspace;
//! there the closed forms no longer apply and only the Monte-Carlo estimate
//! is reported.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::SubspaceSpec;
use crate::states::SubspaceState;
use crate::{C64, Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Circular-ensemble symmetry class of the sampled states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    /// Real Gaussian coefficients; the class of time-reversal-invariant
    /// dynamics.
    #[serde(rename = "oe", alias = "orthogonal")]
    Orthogonal,
    /// Complex Gaussian coefficients.
    #[serde(rename = "ue", alias = "unitary")]
    Unitary,
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oe" | "orthogonal" => Ok(EnsembleKind::Orthogonal),
            "ue" | "unitary" => Ok(EnsembleKind::Unitary),
            other => Err(Error::InvalidEnsemble(format!(
                "unknown ensemble '{other}' (expected oe or ue)"
            ))),
        }
    }
}

impl std::fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnsembleKind::Orthogonal => write!(f, "oe"),
            EnsembleKind::Unitary => write!(f, "ue"),
        }
    }
}

/// What to sample: the ensemble class, the sampling dimension, an optional
/// orthonormal basis embedding the samples into a larger block, and the RNG
/// seed. Sample k is drawn from stream k of a counter-based generator, so
/// parallel estimates are deterministic.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    kind: EnsembleKind,
    dim: usize,
    basis: Option<Array2<C64>>,
    seed: u64,
}

impl EnsembleSpec {
    /// Samples over the full d-dimensional space.
    pub fn full(kind: EnsembleKind, dim: usize, seed: u64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidEnsemble("dimension must be positive".into()));
        }
        Ok(EnsembleSpec {
            kind,
            dim,
            basis: None,
            seed,
        })
    }

    /// Samples over the span of the given orthonormal columns, re-expressed
    /// in the ambient basis.
    pub fn with_basis(kind: EnsembleKind, basis: Array2<C64>, seed: u64) -> Result<Self> {
        let n = basis.ncols();
        if n < 1 || basis.nrows() < n {
            return Err(Error::InvalidEnsemble(format!(
                "basis of {} columns in dimension {} is not a subspace",
                n,
                basis.nrows()
            )));
        }
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let dot: C64 = basis
                    .column(a)
                    .iter()
                    .zip(basis.column(b).iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).norm());
            }
        }
        if worst > 1e-10 {
            return Err(Error::InvalidEnsemble(format!(
                "basis columns are not orthonormal (residual {worst:.3e})"
            )));
        }
        Ok(EnsembleSpec {
            kind,
            dim: n,
            basis: Some(basis),
            seed,
        })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    /// Number of independent coefficients drawn per sample.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn basis(&self) -> Option<&Array2<C64>> {
        self.basis.as_ref()
    }

    /// Length of the emitted amplitude vectors.
    pub fn output_dim(&self) -> usize {
        self.basis.as_ref().map_or(self.dim, |b| b.nrows())
    }

    /// The normalized sample with the given index. Deterministic: the index
    /// selects an independent RNG stream under the configured seed.
    pub fn sample_amplitudes(&self, sample_index: u64) -> Array1<C64> {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(sample_index);
        loop {
            let coeffs = Array1::from_iter((0..self.dim).map(|_| match self.kind {
                EnsembleKind::Unitary => Complex64::new(
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ),
                EnsembleKind::Orthogonal => Complex64::new(rng.sample(StandardNormal), 0.0),
            }));
            let mut out = match &self.basis {
                Some(b) => b.dot(&coeffs),
                None => coeffs,
            };
            let norm = out.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.mapv_inplace(|c| c / norm);
                return out;
            }
        }
    }

    /// [`EnsembleSpec::sample_amplitudes`] wrapped as a state on a block.
    pub fn sample_state(&self, spec: SubspaceSpec, sample_index: u64) -> Result<SubspaceState> {
        SubspaceState::new(spec, self.sample_amplitudes(sample_index))
    }
}

/// The scalar functional averaged by [`mc_average`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// Shannon entropy of |c_m|^2 (fixed-basis entanglement entropy).
    Entropy,
    /// 1 - sum |c_m|^4.
    LinearEntropy,
}

impl Functional {
    pub fn evaluate(&self, amplitudes: &Array1<C64>) -> f64 {
        match self {
            Functional::Entropy => amplitudes
                .iter()
                .map(|c| c.norm_sqr())
                .filter(|&l| l > 0.0)
                .map(|l| -l * l.ln())
                .sum(),
            Functional::LinearEntropy => {
                1.0 - amplitudes
                    .iter()
                    .map(|c| {
                        let l = c.norm_sqr();
                        l * l
                    })
                    .sum::<f64>()
            }
        }
    }
}

/// Monte-Carlo estimate with the matching closed-form value when one exists.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleReport {
    pub kind: EnsembleKind,
    #[serde(rename = "d")]
    pub dim: usize,
    pub functional: Functional,
    /// Names the restricted subspace the samples were drawn from, when any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subspace_id: Option<String>,
    /// Closed-form ensemble average; absent for basis-restricted sampling,
    /// where the coefficients in the ambient Schmidt basis are no longer
    /// independent.
    pub analytic: Option<f64>,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// Sample mean and standard error of a functional over the ensemble.
pub fn mc_average(
    spec: &EnsembleSpec,
    functional: Functional,
    n_samples: u64,
) -> Result<EnsembleReport> {
    if n_samples < 2 {
        return Err(Error::InvalidEnsemble(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    let (sum, sum_sq) = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let v = functional.evaluate(&spec.sample_amplitudes(k));
            (v, v * v)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_samples as f64;
    let mean = sum / n;
    let variance = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let analytic = if spec.basis.is_none() {
        Some(match functional {
            Functional::Entropy => match spec.kind {
                EnsembleKind::Unitary => typical_entanglement_ue(spec.dim)?,
                EnsembleKind::Orthogonal => typical_entanglement_oe(spec.dim)?,
            },
            Functional::LinearEntropy => typical_linear_entropy(spec.kind, spec.dim)?,
        })
    } else {
        None
    };
    Ok(EnsembleReport {
        kind: spec.kind,
        dim: spec.dim,
        functional,
        subspace_id: None,
        analytic,
        mc_mean: mean,
        mc_stderr: (variance / n).sqrt(),
        n_samples,
        seed: spec.seed,
    })
}

/// Digamma function for positive arguments: upward recurrence into the
/// asymptotic region, then the Bernoulli series through 1/x^12.
fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

/// Generalized harmonic number H_x = psi(x + 1) + gamma for x >= 0.
pub fn harmonic(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "harmonic number needs x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(digamma(x + 1.0) + EULER_GAMMA)
}

/// Mean fixed-basis entanglement of a unitary-ensemble state in dimension d:
/// H_d - 1.
pub fn typical_entanglement_ue(d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidEnsemble("dimension must be positive".into()));
    }
    Ok(harmonic(d as f64)? - 1.0)
}

/// Mean fixed-basis entanglement of an orthogonal-ensemble state:
/// H_(d/2) + ln 4 - 2.
pub fn typical_entanglement_oe(d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidEnsemble("dimension must be positive".into()));
    }
    Ok(harmonic(d as f64 / 2.0)? + 4.0f64.ln() - 2.0)
}

/// Mean entanglement of a Haar-random state of a full d1 x d2 product space
/// (d1 <= d2): H_(d1 d2) - H_(d2) - (d1 - 1)/(2 d2).
pub fn typical_entanglement_full(d1: usize, d2: usize) -> Result<f64> {
    if d1 < 1 || d2 < d1 {
        return Err(Error::InvalidEnsemble(format!(
            "need 1 <= d1 <= d2, got ({d1}, {d2})"
        )));
    }
    Ok(harmonic((d1 * d2) as f64)? - harmonic(d2 as f64)?
        - (d1 as f64 - 1.0) / (2.0 * d2 as f64))
}

/// Mean linear entropy: 1 - 3/(d+2) for the orthogonal ensemble,
/// 1 - 2/(d+1) for the unitary one.
pub fn typical_linear_entropy(kind: EnsembleKind, d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidEnsemble("dimension must be positive".into()));
    }
    let d = d as f64;
    Ok(match kind {
        EnsembleKind::Orthogonal => 1.0 - 3.0 / (d + 2.0),
        EnsembleKind::Unitary => 1.0 - 2.0 / (d + 1.0),
    })
}
