//! Entanglement between the two spins for states on a fixed-F_z subspace.
//!
//! On such a subspace the uncoupled product basis is the Schmidt basis of
//! every state, so the Schmidt coefficients are simply |c_m|^2 and both the
//! entanglement entropy and the linear entropy are direct functions of the
//! amplitudes. Dynamical histories are computed spectrally from a
//! diagonalized one-period operator, and phase-space maps batch all grid
//! nodes through shared matrix products.

use ndarray::{Array2, Axis};

use crate::classical::SectionPoint;
use crate::floquet::EigenSystem;
use crate::states::{projected_coherent, PhaseSpaceGrid, SubspaceState};
use crate::{C64, Error, Result};

/// Schmidt coefficients lambda_m = |c_m|^2 in basis order.
pub fn schmidt_coefficients(state: &SubspaceState) -> Vec<f64> {
    state.amplitudes().iter().map(|c| c.norm_sqr()).collect()
}

fn shannon(lambdas: impl IntoIterator<Item = f64>) -> f64 {
    lambdas
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum()
}

/// Shannon entropy (natural log) of the Schmidt coefficients.
pub fn entanglement_entropy(state: &SubspaceState) -> f64 {
    shannon(schmidt_coefficients(state))
}

/// 1 - sum of lambda_m^2, the impurity of either reduced state.
pub fn linear_entropy(state: &SubspaceState) -> f64 {
    1.0 - state
        .amplitudes()
        .iter()
        .map(|c| {
            let l = c.norm_sqr();
            l * l
        })
        .sum::<f64>()
}

/// An inclusive range of step counts, used for long-time averaging.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    start: u64,
    end: u64,
}

impl Window {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidWindow(format!(
                "window [{start}, {end}] is empty"
            )));
        }
        Ok(Window { start, end })
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn end(&self) -> u64 {
        self.end
    }

    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn steps(&self) -> impl Iterator<Item = u64> {
        self.start..=self.end
    }
}

/// The transient is over well before step 300 in every regime studied here.
impl Default for Window {
    fn default() -> Self {
        Window {
            start: 300,
            end: 320,
        }
    }
}

/// Entanglement entropy along a stroboscopic trajectory.
#[derive(Clone, Debug)]
pub struct EntanglementHistory {
    alpha: f64,
    beta: f64,
    /// Section coordinates of the initial projected coherent state, when the
    /// history started from one.
    initial: Option<SectionPoint>,
    series: Vec<f64>,
}

impl EntanglementHistory {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn initial(&self) -> Option<SectionPoint> {
        self.initial
    }

    /// E_n indexed by step count, starting at n = 0.
    pub fn series(&self) -> &[f64] {
        &self.series
    }
}

/// E_n for n = 0..=n_max, computed spectrally from the eigensystem.
pub fn entanglement_history(
    eigen: &EigenSystem,
    initial: &SubspaceState,
    n_max: u64,
) -> Result<EntanglementHistory> {
    let coeffs = eigen.coefficients(initial)?;
    let mut series = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let amps = eigen.state_at(&coeffs, n)?;
        series.push(shannon(amps.iter().map(|c| c.norm_sqr())));
    }
    Ok(EntanglementHistory {
        alpha: eigen.alpha(),
        beta: eigen.beta(),
        initial: None,
        series,
    })
}

/// [`entanglement_history`] started from the projected coherent state at a
/// section point.
pub fn entanglement_history_from_point(
    eigen: &EigenSystem,
    point: SectionPoint,
    n_max: u64,
) -> Result<EntanglementHistory> {
    let state = projected_coherent(eigen.spec(), point)?;
    let mut history = entanglement_history(eigen, &state, n_max)?;
    history.initial = Some(point);
    Ok(history)
}

/// Mean of E_n over an inclusive window of steps.
pub fn long_time_average(history: &EntanglementHistory, window: Window) -> Result<f64> {
    if window.end as usize >= history.series.len() {
        return Err(Error::InvalidWindow(format!(
            "window [{}, {}] exceeds history of length {}",
            window.start,
            window.end,
            history.series.len()
        )));
    }
    let sum: f64 = history.series[window.start as usize..=window.end as usize]
        .iter()
        .sum();
    Ok(sum / window.len() as f64)
}

/// Long-time average entanglement of the projected coherent state at every
/// grid node. All nodes advance together: one matrix product per window step
/// over the whole batch, so cost scales with the window, not with n_max.
pub fn entanglement_map(
    eigen: &EigenSystem,
    grid: &PhaseSpaceGrid,
    window: Window,
) -> Result<Vec<f64>> {
    let d = eigen.dim();
    let n = grid.len();
    let mut initial = Array2::<C64>::zeros((d, n));
    for (k, &p) in grid.points().iter().enumerate() {
        let state = projected_coherent(eigen.spec(), p)?;
        initial.column_mut(k).assign(state.amplitudes());
    }
    let coeffs = eigen.coefficients_batch(&initial.view())?;
    let mut averages = vec![0.0f64; n];
    for step in window.steps() {
        let states = eigen.states_at(&coeffs.view(), step)?;
        for (k, col) in states.axis_iter(Axis(1)).enumerate() {
            averages[k] += shannon(col.iter().map(|c| c.norm_sqr()));
        }
    }
    let scale = 1.0 / window.len() as f64;
    for e in &mut averages {
        *e *= scale;
    }
    Ok(averages)
}
