//! States of the two-spin system restricted to a fixed-F_z subspace, and the
//! phase-space tools built on them: spin coherent states, their projections
//! onto the symmetric F_z = 0 block, section grids, and Husimi distributions.
//!
//! Amplitudes are always stored in the uncoupled basis |m_i = M - m, m_j = m>
//! ordered by ascending m, matching [`crate::angular::SubspaceSpec`].

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::angular::{op_j_z, HalfInt, SubspaceSpec};
use crate::classical::SectionPoint;
use crate::{C64, Error, Result};

/// A normalized state vector on a fixed-F_z subspace.
#[derive(Clone, Debug)]
pub struct SubspaceState {
    spec: SubspaceSpec,
    amplitudes: Array1<C64>,
}

impl SubspaceState {
    /// Wraps an already normalized amplitude vector (norm within 1e-9 of 1);
    /// the stored copy is rescaled to unit norm exactly.
    pub fn new(spec: SubspaceSpec, amplitudes: Array1<C64>) -> Result<Self> {
        let state = Self::normalized(spec, amplitudes)?;
        if (state.norm_input - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "amplitude vector has norm {}, expected 1",
                state.norm_input
            )));
        }
        Ok(state.state)
    }

    /// Normalizes an arbitrary finite, nonzero amplitude vector.
    pub fn from_unnormalized(spec: SubspaceSpec, amplitudes: Array1<C64>) -> Result<Self> {
        Ok(Self::normalized(spec, amplitudes)?.state)
    }

    fn normalized(spec: SubspaceSpec, mut amplitudes: Array1<C64>) -> Result<Normalized> {
        if amplitudes.len() != spec.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a dimension {} subspace",
                amplitudes.len(),
                spec.dim()
            )));
        }
        let norm_sq: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !norm_sq.is_finite() || norm_sq == 0.0 {
            return Err(Error::InvalidParameter(
                "amplitude vector must be finite and nonzero".into(),
            ));
        }
        let norm = norm_sq.sqrt();
        amplitudes.mapv_inplace(|c| c / norm);
        Ok(Normalized {
            state: SubspaceState { spec, amplitudes },
            norm_input: norm,
        })
    }

    /// The basis state at projection m_j = m (one-hot).
    pub fn basis_state(spec: SubspaceSpec, m_j: HalfInt) -> Result<Self> {
        let idx = spec.index_of_m_j(m_j).ok_or_else(|| {
            Error::InvalidQuantumNumbers(format!("m_j = {m_j} not in subspace"))
        })?;
        let mut amplitudes = Array1::zeros(spec.dim());
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(SubspaceState { spec, amplitudes })
    }

    pub fn spec(&self) -> &SubspaceSpec {
        &self.spec
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Array1<C64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// <J_z> = sum over m of m |c_m|^2.
    pub fn jz_expectation(&self) -> f64 {
        op_j_z(&self.spec)
            .iter()
            .zip(self.amplitudes.iter())
            .map(|(m, c)| m * c.norm_sqr())
            .sum()
    }

    /// Section coordinates of the expectation values, defined on symmetric
    /// F_z = 0 blocks: delta_fz from <J_z>, delta_phi from the phase of
    /// <I_+ J_->.
    pub fn section_expectation(&self) -> Result<SectionPoint> {
        if !self.spec.is_symmetric_zero_block() {
            return Err(Error::InvalidQuantumNumbers(
                "section expectation values need the symmetric F_z = 0 block".into(),
            ));
        }
        let j = self.spec.spin_j().as_f64();
        let jj = j * (j + 1.0);
        let delta_fz = -2.0 * self.jz_expectation() / j;
        // <I_+ J_-> couples m to m - 1 with weight J(J+1) - m(m-1) inside
        // the block.
        let mut raising = Complex64::new(0.0, 0.0);
        for (idx, m) in self.spec.m_j_values().into_iter().enumerate().skip(1) {
            let m = m.as_f64();
            raising += self.amplitudes[idx - 1].conj() * self.amplitudes[idx] * (jj - m * (m - 1.0));
        }
        Ok(SectionPoint {
            delta_fz,
            delta_phi: raising.arg().rem_euclid(std::f64::consts::TAU),
        })
    }
}

struct Normalized {
    state: SubspaceState,
    norm_input: f64,
}

/// Amplitudes of the spin coherent state |theta, phi> of a single spin in
/// ascending-m order: c_m = cos(theta/2)^(j+m) sin(theta/2)^(j-m)
/// sqrt(C(2j, j-m)) e^(i (j-m) phi). theta must lie in [0, pi].
pub fn spin_coherent(spin: HalfInt, theta: f64, phi: f64) -> Result<Array1<C64>> {
    if spin.doubled() < 0 {
        return Err(Error::InvalidQuantumNumbers(format!(
            "spin {spin} is negative"
        )));
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) || !phi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "coherent state angles theta = {theta}, phi = {phi} out of range"
        )));
    }
    let d = spin.doubled() as usize + 1;
    let two_j = spin.doubled() as usize;
    let half = theta / 2.0;
    let (s, c) = (half.sin(), half.cos());
    let mut amps = Array1::zeros(d);
    // The poles are exact one-hot states; cos(pi/2) also rounds to a
    // nonzero f64, so theta == pi is matched directly.
    if theta == 0.0 || s == 0.0 {
        amps[d - 1] = Complex64::new(1.0, 0.0);
        return Ok(amps);
    }
    if theta == std::f64::consts::PI || c == 0.0 {
        amps[0] = Complex64::new(1.0, 0.0);
        return Ok(amps);
    }
    let (ls, lc) = (s.ln(), c.ln());
    // Index idx corresponds to m = idx - j, so j - m = 2j - idx;
    // ln C(2j, k) accumulates incrementally over k = j - m.
    let mut ln_choose = 0.0;
    let mut log_mag = vec![0.0f64; d];
    for k in 0..=two_j {
        let idx = two_j - k;
        log_mag[idx] = (two_j - k) as f64 * lc + k as f64 * ls + 0.5 * ln_choose;
        if k < two_j {
            ln_choose += ((two_j - k) as f64 / (k + 1) as f64).ln();
        }
    }
    let shift = log_mag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (idx, lm) in log_mag.iter().enumerate() {
        let k = (two_j - idx) as f64;
        amps[idx] = Complex64::from_polar((lm - shift).exp(), k * phi);
    }
    let norm = amps.iter().map(|a: &C64| a.norm_sqr()).sum::<f64>().sqrt();
    amps.mapv_inplace(|a| a / norm);
    Ok(amps)
}

/// Projection of the product coherent state attached to a section point onto
/// the symmetric F_z = 0 block (mean azimuth zero), normalized. In-block
/// amplitudes follow c_m proportional to r^m C(2j, j-m) with
/// r = e^(i delta_phi) (1 + s)/(1 - s) and s = -delta_fz / 2.
pub fn projected_coherent(spec: &SubspaceSpec, point: SectionPoint) -> Result<SubspaceState> {
    if !spec.is_symmetric_zero_block() {
        return Err(Error::InvalidQuantumNumbers(
            "projected coherent states are defined on the symmetric F_z = 0 block".into(),
        ));
    }
    if !point.delta_fz.is_finite() || point.delta_fz.abs() > 2.0 || !point.delta_phi.is_finite() {
        return Err(Error::OffSection(format!(
            "section point ({}, {}) invalid",
            point.delta_fz, point.delta_phi
        )));
    }
    let d = spec.dim();
    let two_j = d - 1;
    let s = -point.delta_fz / 2.0;
    let mut amps = Array1::zeros(d);
    if 1.0 - s == 0.0 {
        amps[d - 1] = Complex64::new(1.0, 0.0);
        return SubspaceState::new(*spec, amps);
    }
    if 1.0 + s == 0.0 {
        amps[0] = Complex64::new(1.0, 0.0);
        return SubspaceState::new(*spec, amps);
    }
    let ln_r = (1.0 + s).ln() - (1.0 - s).ln();
    let j = two_j as f64 / 2.0;
    let mut ln_choose = 0.0;
    let mut log_mag = vec![0.0f64; d];
    for k in 0..=two_j {
        // k = j - m, idx = 2j - k.
        let m = j - k as f64;
        log_mag[two_j - k] = m * ln_r + ln_choose;
        if k < two_j {
            ln_choose += ((two_j - k) as f64 / (k + 1) as f64).ln();
        }
    }
    let shift = log_mag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (idx, lm) in log_mag.iter().enumerate() {
        let m = idx as f64 - j;
        amps[idx] = Complex64::from_polar((lm - shift).exp(), m * point.delta_phi);
    }
    SubspaceState::from_unnormalized(*spec, amps)
}

/// A quadrature grid on the section, uniform in (delta_fz/2, delta_phi) so
/// the weights represent the invariant measure; total weight 4 pi. Nodes are
/// stored row-major with delta_fz as the outer index.
#[derive(Clone, Debug)]
pub struct PhaseSpaceGrid {
    n_v: usize,
    n_phi: usize,
    points: Vec<SectionPoint>,
    weights: Vec<f64>,
}

impl PhaseSpaceGrid {
    /// Cell-centered nodes; no node touches the poles. Every weight is
    /// 4 pi / (n_v n_phi).
    pub fn cell_centered(n_v: usize, n_phi: usize) -> Result<Self> {
        if n_v < 1 || n_phi < 1 {
            return Err(Error::InvalidGrid(format!(
                "cell-centered grid needs n_v, n_phi >= 1, got {n_v} x {n_phi}"
            )));
        }
        let mut points = Vec::with_capacity(n_v * n_phi);
        let w = 4.0 * std::f64::consts::PI / (n_v * n_phi) as f64;
        for a in 0..n_v {
            let v = -1.0 + 2.0 * (a as f64 + 0.5) / n_v as f64;
            for b in 0..n_phi {
                let phi = std::f64::consts::TAU * (b as f64 + 0.5) / n_phi as f64;
                points.push(SectionPoint::new(2.0 * v, phi));
            }
        }
        let weights = vec![w; points.len()];
        Ok(PhaseSpaceGrid {
            n_v,
            n_phi,
            points,
            weights,
        })
    }

    /// Vertex-centered nodes including both poles, trapezoid weights along
    /// delta_fz and uniform weights along the periodic delta_phi.
    pub fn vertex_centered(n_v: usize, n_phi: usize) -> Result<Self> {
        if n_v < 2 || n_phi < 1 {
            return Err(Error::InvalidGrid(format!(
                "vertex-centered grid needs n_v >= 2, n_phi >= 1, got {n_v} x {n_phi}"
            )));
        }
        let dv = 2.0 / (n_v - 1) as f64;
        let w_phi = std::f64::consts::TAU / n_phi as f64;
        let mut points = Vec::with_capacity(n_v * n_phi);
        let mut weights = Vec::with_capacity(n_v * n_phi);
        for a in 0..n_v {
            let v = -1.0 + a as f64 * dv;
            let w_v = if a == 0 || a == n_v - 1 { dv / 2.0 } else { dv };
            for b in 0..n_phi {
                let phi = std::f64::consts::TAU * b as f64 / n_phi as f64;
                points.push(SectionPoint::new((2.0 * v).clamp(-2.0, 2.0), phi));
                weights.push(w_v * w_phi);
            }
        }
        Ok(PhaseSpaceGrid {
            n_v,
            n_phi,
            points,
            weights,
        })
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SectionPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Rows of conjugated coherent-state amplitudes over a set of section
/// points, so overlaps with many states reduce to one matrix product.
#[derive(Clone, Debug)]
pub struct CoherentFrame {
    spec: SubspaceSpec,
    rows: Array2<C64>,
}

impl CoherentFrame {
    pub fn build(spec: &SubspaceSpec, points: &[SectionPoint]) -> Result<Self> {
        let d = spec.dim();
        let amps: Vec<Array1<C64>> = points
            .par_iter()
            .map(|&p| Ok(projected_coherent(spec, p)?.into_amplitudes()))
            .collect::<Result<_>>()?;
        let mut rows = Array2::zeros((points.len(), d));
        for (mut row, a) in rows.axis_iter_mut(Axis(0)).zip(amps) {
            for (r, v) in row.iter_mut().zip(a.iter()) {
                *r = v.conj();
            }
        }
        Ok(CoherentFrame { spec: *spec, rows })
    }

    pub fn spec(&self) -> &SubspaceSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    /// Husimi values |<coherent_k | state>|^2 over the frame points.
    pub fn q_values(&self, state: &SubspaceState) -> Result<Vec<f64>> {
        if state.dim() != self.rows.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} vs frame dimension {}",
                state.dim(),
                self.rows.ncols()
            )));
        }
        Ok(self
            .rows
            .dot(state.amplitudes())
            .iter()
            .map(|c| c.norm_sqr())
            .collect())
    }

    /// Husimi values for many states at once; `columns` holds one state per
    /// column and the result is frame points x states.
    pub fn q_columns(&self, columns: &ArrayView2<C64>) -> Result<Array2<f64>> {
        if columns.nrows() != self.rows.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} vs frame dimension {}",
                columns.nrows(),
                self.rows.ncols()
            )));
        }
        Ok(self.rows.dot(columns).mapv(|c| c.norm_sqr()))
    }
}

/// Husimi distribution of a state over a grid.
pub fn husimi(state: &SubspaceState, grid: &PhaseSpaceGrid) -> Result<Vec<f64>> {
    CoherentFrame::build(state.spec(), grid.points())?.q_values(state)
}

/// Entropy -integral of q ln q over the measure, after normalizing q to unit
/// integral with the given quadrature weights. The uniform distribution on
/// the section gives ln 4 pi.
pub fn husimi_entropy(q: &[f64], weights: &[f64]) -> Result<f64> {
    if q.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} Husimi values vs {} weights",
            q.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for (&qi, &wi) in q.iter().zip(weights) {
        if qi < 0.0 || !qi.is_finite() || wi < 0.0 || !wi.is_finite() {
            return Err(Error::InvalidParameter(
                "Husimi values and weights must be finite and nonnegative".into(),
            ));
        }
        total += qi * wi;
    }
    if total <= 0.0 {
        return Err(Error::ZeroHusimi);
    }
    let mut entropy = 0.0;
    for (&qi, &wi) in q.iter().zip(weights) {
        let qn = qi / total;
        if qn > 0.0 {
            entropy -= wi * qn * qn.ln();
        }
    }
    Ok(entropy)
}
