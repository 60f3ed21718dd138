//! Separation of Floquet eigenstates into regular and chaotic classes from
//! their phase-space features, and assembly of the chaotic-subspace basis
//! that feeds the ensemble predictions.
//!
//! The features are the Husimi entropy S_Q (how spread the state is over the
//! section) and <J_z> (where it sits). Chaotic-sea states cluster at high
//! S_Q in a bounded band of <J_z>; regular states line up along ladders tied
//! to stable structures. The classifier is deliberately a configurable box
//! with an ambiguous margin rather than anything clever: the separation is
//! approximate by nature and the margin makes that explicit.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::floquet::EigenSystem;
use crate::states::{CoherentFrame, PhaseSpaceGrid, husimi_entropy};
use crate::{C64, Error, Result};

/// Classification outcome for one eigenstate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Regular,
    Chaotic,
    /// Within the grey margin of a box boundary; excluded from the chaotic
    /// subspace.
    Ambiguous,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Regular => write!(f, "regular"),
            Label::Chaotic => write!(f, "chaotic"),
            Label::Ambiguous => write!(f, "ambiguous"),
        }
    }
}

/// Phase-space features of one Floquet eigenstate. `label` is `None` until
/// [`classify_eigenstates`] has run.
#[derive(Clone, Copy, Debug)]
pub struct EigenstateFeatures {
    /// Index into the eigensystem's phase-sorted order.
    pub k: usize,
    /// Eigenphase in [0, 2pi).
    pub phase: f64,
    /// Husimi entropy over the shared section grid.
    pub s_q: f64,
    /// <J_z>, in [-J, J].
    pub jz: f64,
    /// Fixed-basis entanglement entropy of the eigenstate.
    pub entanglement: f64,
    pub label: Option<Label>,
}

/// Rectangular chaotic region in the (s_q, jz) plane with a grey margin.
///
/// A state is chaotic when s_q >= s_q_min and jz_min <= jz <= jz_max, except
/// that states within `grey_fraction` of the observed range of either
/// feature from a box edge are labeled ambiguous instead. The defaults are
/// calibrated on the alpha = 3/2, beta = pi/2, J = 150 system; for other
/// parameters they are a starting point, not truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub s_q_min: f64,
    pub jz_min: f64,
    pub jz_max: f64,
    pub grey_fraction: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            s_q_min: 1.0,
            jz_min: -30.0,
            jz_max: 90.0,
            grey_fraction: 0.05,
        }
    }
}

impl FilterConfig {
    fn validate(&self) -> Result<()> {
        if !(self.s_q_min.is_finite() && self.jz_min.is_finite() && self.jz_max.is_finite()) {
            return Err(Error::InvalidParameter(
                "filter thresholds must be finite".into(),
            ));
        }
        if self.jz_min > self.jz_max {
            return Err(Error::InvalidParameter(format!(
                "jz_min {} exceeds jz_max {}",
                self.jz_min, self.jz_max
            )));
        }
        if !(0.0..0.5).contains(&self.grey_fraction) {
            return Err(Error::InvalidParameter(format!(
                "grey_fraction must lie in [0, 0.5), got {}",
                self.grey_fraction
            )));
        }
        Ok(())
    }
}

/// Husimi entropy, <J_z>, and entanglement for every eigenstate, unlabeled.
/// The Husimi overlaps for all states are computed in one matrix product.
pub fn eigenstate_features(
    eigen: &EigenSystem,
    grid: &PhaseSpaceGrid,
) -> Result<Vec<EigenstateFeatures>> {
    let frame = CoherentFrame::build(eigen.spec(), grid.points())?;
    let q = frame.q_columns(&eigen.vectors().view())?;
    let m_values: Vec<f64> = eigen
        .spec()
        .m_j_values()
        .into_iter()
        .map(|m| m.as_f64())
        .collect();
    (0..eigen.dim())
        .into_par_iter()
        .map(|k| {
            let column: Vec<f64> = q.column(k).to_vec();
            let s_q = husimi_entropy(&column, grid.weights())?;
            let mut jz = 0.0;
            let mut entanglement = 0.0;
            for (m, c) in m_values.iter().zip(eigen.vectors().column(k).iter()) {
                let l = c.norm_sqr();
                jz += m * l;
                if l > 0.0 {
                    entanglement -= l * l.ln();
                }
            }
            Ok(EigenstateFeatures {
                k,
                phase: eigen.phases()[k],
                s_q,
                jz,
                entanglement,
                label: None,
            })
        })
        .collect()
}

/// Labels every feature point against the config's box. The grey margins are
/// `grey_fraction` of the observed spread of each feature, so the outcome
/// depends only on the feature set, not on its ordering.
pub fn classify_eigenstates(
    mut features: Vec<EigenstateFeatures>,
    config: &FilterConfig,
) -> Result<Vec<EigenstateFeatures>> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot classify an empty feature list".into(),
        ));
    }
    let (mut sq_lo, mut sq_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut jz_lo, mut jz_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in &features {
        sq_lo = sq_lo.min(f.s_q);
        sq_hi = sq_hi.max(f.s_q);
        jz_lo = jz_lo.min(f.jz);
        jz_hi = jz_hi.max(f.jz);
    }
    let sq_margin = config.grey_fraction * (sq_hi - sq_lo);
    let jz_margin = config.grey_fraction * (jz_hi - jz_lo);
    for f in &mut features {
        let near_edge = (f.s_q - config.s_q_min).abs() < sq_margin
            || (f.jz - config.jz_min).abs() < jz_margin
            || (f.jz - config.jz_max).abs() < jz_margin;
        let inside = f.s_q >= config.s_q_min
            && f.jz >= config.jz_min
            && f.jz <= config.jz_max;
        f.label = Some(if near_edge {
            Label::Ambiguous
        } else if inside {
            Label::Chaotic
        } else {
            Label::Regular
        });
    }
    Ok(features)
}

/// How many states carry each label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub regular: usize,
    pub chaotic: usize,
    pub ambiguous: usize,
    pub unlabeled: usize,
}

pub fn label_counts(features: &[EigenstateFeatures]) -> LabelCounts {
    let mut counts = LabelCounts::default();
    for f in features {
        match f.label {
            Some(Label::Regular) => counts.regular += 1,
            Some(Label::Chaotic) => counts.chaotic += 1,
            Some(Label::Ambiguous) => counts.ambiguous += 1,
            None => counts.unlabeled += 1,
        }
    }
    counts
}

/// The chaotic-labeled eigenvectors as the columns of an orthonormal basis
/// matrix, in ascending eigenstate order, ready to seed a basis-restricted
/// ensemble.
pub fn chaotic_subspace(
    eigen: &EigenSystem,
    features: &[EigenstateFeatures],
) -> Result<Array2<C64>> {
    let mut indices: Vec<usize> = features
        .iter()
        .filter(|f| f.label == Some(Label::Chaotic))
        .map(|f| f.k)
        .collect();
    indices.sort_unstable();
    indices.dedup();
    if indices.is_empty() {
        return Err(Error::EmptyChaoticSubspace);
    }
    if *indices.last().unwrap() >= eigen.dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature index {} outside eigensystem of dimension {}",
            indices.last().unwrap(),
            eigen.dim()
        )));
    }
    let mut basis = Array2::<C64>::zeros((eigen.dim(), indices.len()));
    for (col, &k) in indices.iter().enumerate() {
        basis.column_mut(col).assign(&eigen.vectors().column(k));
    }
    Ok(basis)
}
