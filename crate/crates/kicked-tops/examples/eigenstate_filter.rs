//! Separating eigenstates of the mixed-regime map into regular and chaotic
//! classes from their (S_Q, <J_z>) features, with a grey margin around the
//! box edges left unlabeled. Random states in the span of the chaotic class
//! reproduce the sea's saturation entanglement.

use kicked_tops::angular::{HalfInt, SubspaceSpec};
use kicked_tops::ensembles::{mc_average, EnsembleKind, EnsembleSpec, Functional};
use kicked_tops::filtering::{
    chaotic_subspace, classify_eigenstates, eigenstate_features, label_counts, FilterConfig,
};
use kicked_tops::floquet::build_floquet;
use kicked_tops::io;
use kicked_tops::states::PhaseSpaceGrid;
use serde_json::json;
use std::f64::consts::FRAC_PI_2;

fn main() -> kicked_tops::Result<()> {
    let spec = SubspaceSpec::symmetric(HalfInt::from_int(150))?;
    let eigen = build_floquet(&spec, 1.5, FRAC_PI_2, None)?.diagonalize()?;
    let grid = PhaseSpaceGrid::vertex_centered(61, 61)?;

    let config = FilterConfig::default();
    let features = classify_eigenstates(eigenstate_features(&eigen, &grid)?, &config)?;
    let counts = label_counts(&features);
    println!(
        "labeled {} states: {} chaotic, {} regular, {} ambiguous (box: S_Q >= {}, {} <= <J_z> <= {})",
        features.len(),
        counts.chaotic,
        counts.regular,
        counts.ambiguous,
        config.s_q_min,
        config.jz_min,
        config.jz_max,
    );

    let hash = io::config_hash(&json!({
        "alpha": 1.5,
        "beta": FRAC_PI_2,
        "spin": 150,
        "grid": "61x61",
        "s_q_min": config.s_q_min,
        "jz_min": config.jz_min,
        "jz_max": config.jz_max,
        "grey_fraction": config.grey_fraction,
    }))?;
    let rows: Vec<Vec<String>> = features
        .iter()
        .map(|f| {
            vec![
                f.k.to_string(),
                format!("{}", f.phase),
                format!("{}", f.s_q),
                format!("{}", f.jz),
                format!("{}", f.entanglement),
                f.label.map_or("".into(), |l| l.to_string()),
            ]
        })
        .collect();
    io::write_csv(
        "eigenstate_features.csv",
        &hash,
        &["k", "phase", "s_q", "jz", "E_eigenstate", "label"],
        &rows,
    )?;

    let basis = chaotic_subspace(&eigen, &features)?;
    let subspace = EnsembleSpec::with_basis(EnsembleKind::Unitary, basis, 20)?;
    let mc = mc_average(&subspace, Functional::Entropy, 200)?;
    println!(
        "random states in the {}-dimensional chaotic span: E = {:.4} +- {:.4}",
        subspace.dim(),
        mc.mc_mean,
        mc.mc_stderr,
    );
    Ok(())
}
