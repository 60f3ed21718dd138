//! The one-period (Floquet) operator on a fixed-F_z subspace and its
//! spectral decomposition.
//!
//! In the uncoupled basis the operator factors as
//! U = B^T diag(e^(-i alpha F(F+1) / (2 j))) B diag(e^(-i beta m)),
//! where B is the real orthogonal change of basis to total-spin states: the
//! kick acts first, the interaction phase is diagonal in the coupled basis.
//! Eigenphases are reported as phi_k in [0, 2 pi) with e^(-i phi_k) the
//! eigenvalue, sorted ascending.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::angular::{cg_block_cached, op_j_z, SubspaceSpec};
use crate::states::SubspaceState;
use crate::{C64, Error, Result};

/// Eigenvalues closer than this in phase are treated as one degenerate
/// cluster and re-orthonormalized.
const CLUSTER_GAP: f64 = 1e-8;
/// Acceptable max-norm residual for eigenpairs and orthonormality.
const EIGEN_TOL: f64 = 1e-10;

const CACHE_MAGIC: &[u8; 4] = b"KTEG";
const CACHE_VERSION: u32 = 1;

/// The one-period unitary on a subspace, with its parameters.
#[derive(Clone, Debug)]
pub struct FloquetSystem {
    spec: SubspaceSpec,
    alpha: f64,
    beta: f64,
    matrix: Array2<C64>,
}

/// Builds the one-period operator. The interaction strength scales as
/// alpha / j so the classical limit is independent of the spin size; `beta`
/// is the kick angle. CG coefficients are loaded from `cache_dir` when
/// possible.
pub fn build_floquet(
    spec: &SubspaceSpec,
    alpha: f64,
    beta: f64,
    cache_dir: Option<&Path>,
) -> Result<FloquetSystem> {
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Floquet parameters must be finite, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let block = cg_block_cached(spec, cache_dir);
    let d = spec.dim();
    let scaled = alpha / spec.spin_j().as_f64();

    // M = B with columns scaled by the kick phases, then rows scaled by the
    // interaction phases; U = B^T M.
    let mut m = Array2::<C64>::zeros((d, d));
    let kick: Vec<C64> = op_j_z(spec)
        .iter()
        .map(|&mj| Complex64::from_polar(1.0, -beta * mj))
        .collect();
    for (r, f) in block.f_values().iter().enumerate() {
        let ff = f.as_f64();
        let inter = Complex64::from_polar(1.0, -scaled * ff * (ff + 1.0) / 2.0);
        for c in 0..d {
            m[[r, c]] = inter * kick[c] * block.matrix()[[r, c]];
        }
    }
    let bt = block.matrix().t().mapv(|x| Complex64::new(x, 0.0));
    let matrix = bt.dot(&m);
    Ok(FloquetSystem {
        spec: *spec,
        alpha,
        beta,
        matrix,
    })
}

impl FloquetSystem {
    pub fn spec(&self) -> &SubspaceSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// One period of evolution.
    pub fn apply(&self, state: &SubspaceState) -> Result<SubspaceState> {
        if state.spec() != &self.spec {
            return Err(Error::DimensionMismatch(
                "state subspace does not match the operator".into(),
            ));
        }
        SubspaceState::new(self.spec, self.matrix.dot(state.amplitudes()))
    }

    /// `n_steps` periods of evolution by repeated application.
    pub fn evolve(&self, state: &SubspaceState, n_steps: usize) -> Result<SubspaceState> {
        let mut s = state.clone();
        for _ in 0..n_steps {
            s = self.apply(&s)?;
        }
        Ok(s)
    }

    /// max |(U^H U - 1)_(a b)|.
    pub fn unitarity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let g = self.matrix.t().mapv(|c| c.conj()).dot(&self.matrix);
        for a in 0..g.nrows() {
            for b in 0..g.ncols() {
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g[[a, b]] - expect).norm());
            }
        }
        worst
    }

    /// Residual of the antiunitary symmetry
    /// e^(i beta J_z) conj(U) e^(-i beta J_z) = U^H, as a max-norm.
    pub fn time_reversal_residual(&self) -> f64 {
        let mj = op_j_z(&self.spec);
        let d = self.dim();
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let twist = Complex64::from_polar(1.0, self.beta * (mj[a] - mj[b]));
                let lhs = twist * self.matrix[[a, b]].conj();
                let rhs = self.matrix[[b, a]].conj();
                worst = worst.max((lhs - rhs).norm());
            }
        }
        worst
    }

    /// Full spectral decomposition.
    pub fn diagonalize(&self) -> Result<EigenSystem> {
        let (values, vectors) = self
            .matrix
            .eig()
            .map_err(|e| Error::EigenSolve(format!("eigensolver failed: {e}")))?;
        for v in &values {
            if (v.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::EigenSolve(format!(
                    "eigenvalue {v} is off the unit circle"
                )));
            }
        }
        let d = values.len();
        let mut order: Vec<usize> = (0..d).collect();
        let phases_raw: Vec<f64> = values
            .iter()
            .map(|v| (-v.arg()).rem_euclid(std::f64::consts::TAU))
            .collect();
        order.sort_by(|&a, &b| {
            phases_raw[a]
                .partial_cmp(&phases_raw[b])
                .unwrap()
                .then(a.cmp(&b))
        });
        let phases = Array1::from_iter(order.iter().map(|&k| phases_raw[k]));
        let mut cols = Array2::zeros((d, d));
        for (new, &old) in order.iter().enumerate() {
            cols.column_mut(new).assign(&vectors.column(old));
        }

        let mut system = EigenSystem {
            spec: self.spec,
            alpha: self.alpha,
            beta: self.beta,
            phases,
            vectors: cols,
        };
        system.orthonormalize_clusters()?;
        system.fix_column_phases();
        let residual = system.eigenpair_residual(&self.matrix.view());
        let ortho = system.orthonormality_residual();
        if residual > EIGEN_TOL || ortho > EIGEN_TOL {
            return Err(Error::EigenSolve(format!(
                "eigenpair residual {residual:.3e}, orthonormality residual {ortho:.3e}"
            )));
        }
        Ok(system)
    }

    /// Like [`FloquetSystem::diagonalize`], but reuses a binary cache keyed
    /// by the subspace and parameters when `cache_dir` is given. Cached data
    /// is verified against the operator before use.
    pub fn diagonalize_cached(&self, cache_dir: Option<&Path>) -> Result<EigenSystem> {
        let Some(dir) = cache_dir else {
            return self.diagonalize();
        };
        let path = dir.join(format!(
            "eigen-{}-{}-{}-{:016x}-{:016x}.bin",
            self.spec.spin_i().doubled(),
            self.spec.spin_j().doubled(),
            self.spec.m_f().doubled(),
            self.alpha.to_bits(),
            self.beta.to_bits()
        ));
        if let Some(system) = self.load_cache(&path) {
            return Ok(system);
        }
        let system = self.diagonalize()?;
        // Failure to persist is not an error; the result is still valid.
        let _ = self.store_cache(&path, &system);
        Ok(system)
    }

    fn load_cache(&self, path: &Path) -> Option<EigenSystem> {
        let mut file = fs::File::open(path).ok()?;
        let mut header = [0u8; 4 + 4 + 12 + 16 + 8];
        file.read_exact(&mut header).ok()?;
        if &header[0..4] != CACHE_MAGIC {
            return None;
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let i32_at = |o: usize| i32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let d = self.dim();
        if u32_at(4) != CACHE_VERSION
            || i32_at(8) != self.spec.spin_i().doubled()
            || i32_at(12) != self.spec.spin_j().doubled()
            || i32_at(16) != self.spec.m_f().doubled()
            || u64_at(20) != self.alpha.to_bits()
            || u64_at(28) != self.beta.to_bits()
            || u64_at(36) != d as u64
        {
            return None;
        }
        let mut body = vec![0u8; 8 * d + 16 * d * d];
        file.read_exact(&mut body).ok()?;
        let mut extra = [0u8; 1];
        if file.read(&mut extra).ok()? != 0 {
            return None;
        }
        let f64_at = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
        let phases = Array1::from_iter((0..d).map(|k| f64_at(8 * k)));
        let mut vectors = Array2::zeros((d, d));
        for r in 0..d {
            for c in 0..d {
                let o = 8 * d + 16 * (r * d + c);
                vectors[[r, c]] = Complex64::new(f64_at(o), f64_at(o + 8));
            }
        }
        let system = EigenSystem {
            spec: self.spec,
            alpha: self.alpha,
            beta: self.beta,
            phases,
            vectors,
        };
        let ok = system.phases.iter().all(|p| p.is_finite())
            && system.eigenpair_residual(&self.matrix.view()) <= EIGEN_TOL
            && system.orthonormality_residual() <= EIGEN_TOL;
        ok.then_some(system)
    }

    fn store_cache(&self, path: &Path, system: &EigenSystem) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(CACHE_MAGIC)?;
            f.write_all(&CACHE_VERSION.to_le_bytes())?;
            for t in [
                self.spec.spin_i().doubled(),
                self.spec.spin_j().doubled(),
                self.spec.m_f().doubled(),
            ] {
                f.write_all(&t.to_le_bytes())?;
            }
            f.write_all(&self.alpha.to_bits().to_le_bytes())?;
            f.write_all(&self.beta.to_bits().to_le_bytes())?;
            f.write_all(&(self.dim() as u64).to_le_bytes())?;
            for p in &system.phases {
                f.write_all(&p.to_le_bytes())?;
            }
            for r in 0..self.dim() {
                for c in 0..self.dim() {
                    let v = system.vectors[[r, c]];
                    f.write_all(&v.re.to_le_bytes())?;
                    f.write_all(&v.im.to_le_bytes())?;
                }
            }
        }
        fs::rename(&tmp, path)
    }
}

/// Sorted eigenphases and matching orthonormal eigenvector columns, tagged
/// with the parameters of the operator they diagonalize.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    spec: SubspaceSpec,
    alpha: f64,
    beta: f64,
    phases: Array1<f64>,
    vectors: Array2<C64>,
}

impl EigenSystem {
    pub fn spec(&self) -> &SubspaceSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Eigenphases in [0, 2 pi), ascending.
    pub fn phases(&self) -> &Array1<f64> {
        &self.phases
    }

    /// Eigenvector columns in the uncoupled basis; column k pairs with
    /// phase k.
    pub fn vectors(&self) -> &Array2<C64> {
        &self.vectors
    }

    pub fn eigenstate(&self, k: usize) -> Result<SubspaceState> {
        if k >= self.dim() {
            return Err(Error::InvalidParameter(format!(
                "eigenstate index {k} out of range for dimension {}",
                self.dim()
            )));
        }
        SubspaceState::new(self.spec, self.vectors.column(k).to_owned())
    }

    /// Expansion coefficients a_k = <v_k | state>.
    pub fn coefficients(&self, state: &SubspaceState) -> Result<Array1<C64>> {
        if state.spec() != &self.spec {
            return Err(Error::DimensionMismatch(
                "state subspace does not match the eigensystem".into(),
            ));
        }
        Ok(self.adjoint().dot(state.amplitudes()))
    }

    /// Batched coefficients; one initial state per column.
    pub fn coefficients_batch(&self, columns: &ArrayView2<C64>) -> Result<Array2<C64>> {
        if columns.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "column dimension {} vs eigensystem dimension {}",
                columns.nrows(),
                self.dim()
            )));
        }
        Ok(self.adjoint().dot(columns))
    }

    /// Amplitudes after n steps from expansion coefficients:
    /// V (a ⊙ e^(-i n phi)).
    pub fn state_at(&self, coefficients: &Array1<C64>, n_steps: u64) -> Result<Array1<C64>> {
        if coefficients.len() != self.dim() {
            return Err(Error::DimensionMismatch(
                "coefficient vector does not match the eigensystem".into(),
            ));
        }
        let phased = Array1::from_iter(
            coefficients
                .iter()
                .zip(self.phases.iter())
                .map(|(a, p)| a * Complex64::from_polar(1.0, -(n_steps as f64) * p)),
        );
        Ok(self.vectors.dot(&phased))
    }

    /// Batched [`EigenSystem::state_at`]: every column of `coefficients` is
    /// advanced by the same n.
    pub fn states_at(&self, coefficients: &ArrayView2<C64>, n_steps: u64) -> Result<Array2<C64>> {
        if coefficients.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(
                "coefficient columns do not match the eigensystem".into(),
            ));
        }
        let mut phased = coefficients.to_owned();
        for (mut row, p) in phased.axis_iter_mut(Axis(0)).zip(self.phases.iter()) {
            let rot = Complex64::from_polar(1.0, -(n_steps as f64) * p);
            row.mapv_inplace(|a| a * rot);
        }
        Ok(self.vectors.dot(&phased))
    }

    /// max |(V^H V - 1)_(a b)|.
    pub fn orthonormality_residual(&self) -> f64 {
        let g = self.adjoint().dot(&self.vectors);
        let mut worst = 0.0f64;
        for a in 0..g.nrows() {
            for b in 0..g.ncols() {
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g[[a, b]] - expect).norm());
            }
        }
        worst
    }

    /// max over k of the 2-norm of U v_k - e^(-i phi_k) v_k.
    pub fn eigenpair_residual(&self, matrix: &ArrayView2<C64>) -> f64 {
        let image = matrix.dot(&self.vectors);
        let mut worst = 0.0f64;
        for (k, p) in self.phases.iter().enumerate() {
            let lambda = Complex64::from_polar(1.0, -p);
            let r: f64 = image
                .column(k)
                .iter()
                .zip(self.vectors.column(k).iter())
                .map(|(u, v)| (u - lambda * v).norm_sqr())
                .sum();
            worst = worst.max(r.sqrt());
        }
        worst
    }

    fn adjoint(&self) -> Array2<C64> {
        self.vectors.t().mapv(|c| c.conj())
    }

    /// Gram-Schmidt within clusters of (circularly) near-equal phases, where
    /// the solver is free to return non-orthogonal vectors.
    fn orthonormalize_clusters(&mut self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Ok(());
        }
        let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
        for k in 1..d {
            if self.phases[k] - self.phases[k - 1] < CLUSTER_GAP {
                clusters.last_mut().unwrap().push(k);
            } else {
                clusters.push(vec![k]);
            }
        }
        // Phases wrap: a cluster touching 2 pi continues at 0.
        if clusters.len() > 1
            && self.phases[0] + std::f64::consts::TAU - self.phases[d - 1] < CLUSTER_GAP
        {
            let tail = clusters.pop().unwrap();
            clusters[0].splice(0..0, tail);
        }
        for cluster in clusters {
            for (pos, &k) in cluster.iter().enumerate() {
                let mut col = self.vectors.column(k).to_owned();
                for &prev in &cluster[..pos] {
                    let basis = self.vectors.column(prev);
                    let proj: C64 = basis.iter().zip(col.iter()).map(|(b, c)| b.conj() * c).sum();
                    col.zip_mut_with(&basis, |c, b| *c -= proj * b);
                }
                let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-6 {
                    return Err(Error::EigenSolve(
                        "degenerate cluster is numerically defective".into(),
                    ));
                }
                col.mapv_inplace(|c| c / norm);
                self.vectors.column_mut(k).assign(&col);
            }
        }
        Ok(())
    }

    /// Rotates each column so its largest component is real positive,
    /// making the decomposition reproducible across solvers.
    fn fix_column_phases(&mut self) {
        for mut col in self.vectors.columns_mut() {
            let mut best = 0usize;
            let mut best_mag = -1.0;
            for (i, c) in col.iter().enumerate() {
                let m = c.norm_sqr();
                if m > best_mag {
                    best_mag = m;
                    best = i;
                }
            }
            let pivot = col[best];
            if pivot.norm() > 0.0 {
                let rot = pivot.conj() / pivot.norm();
                col.mapv_inplace(|c| c * rot);
            }
        }
    }
}

/// Nearest-neighbor spacing statistics of the eigenphases on the circle.
#[derive(Clone, Debug)]
pub struct SpacingDiagnostic {
    /// Spacings scaled to unit mean (d of them, including the wrap-around
    /// gap).
    pub spacings: Vec<f64>,
    /// Kolmogorov-Smirnov distance to the level-repulsion surmise
    /// 1 - exp(-pi s^2 / 4).
    pub ks_distance_wigner: f64,
}

/// Unit-mean circular spacing distribution and its distance from the
/// spectral statistics expected of time-reversal-invariant chaotic maps.
/// Purely diagnostic; no thresholding.
pub fn spacing_diagnostic(system: &EigenSystem) -> Result<SpacingDiagnostic> {
    let d = system.dim();
    if d < 2 {
        return Err(Error::InvalidParameter(
            "spacing diagnostic needs at least 2 phases".into(),
        ));
    }
    let phases = system.phases();
    let mut spacings: Vec<f64> = (1..d).map(|k| phases[k] - phases[k - 1]).collect();
    spacings.push(phases[0] + std::f64::consts::TAU - phases[d - 1]);
    let mean = std::f64::consts::TAU / d as f64;
    for s in &mut spacings {
        *s /= mean;
    }
    let mut sorted = spacings.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut ks = 0.0f64;
    for (i, s) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-std::f64::consts::PI * s * s / 4.0).exp();
        ks = ks.max((cdf - i as f64 / n).abs());
        ks = ks.max((cdf - (i + 1) as f64 / n).abs());
    }
    Ok(SpacingDiagnostic {
        spacings,
        ks_distance_wigner: ks,
    })
}
