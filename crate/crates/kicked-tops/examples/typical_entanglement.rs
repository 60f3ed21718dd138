//! Exact typical entanglement of random states against Monte Carlo
//! estimates, for both symmetry classes, across three decades of dimension.
//! Also prints the full-bipartite average and the large-d closed forms.

use kicked_tops::ensembles::{
    mc_average, typical_entanglement_full, typical_entanglement_oe, typical_entanglement_ue,
    typical_linear_entropy, EnsembleKind, EnsembleSpec, Functional,
};

fn main() -> kicked_tops::Result<()> {
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "d", "E_oe", "E_ue", "SL_oe", "SL_ue");
    for d in [2usize, 4, 8, 16, 64, 301, 1024] {
        println!(
            "{d:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            typical_entanglement_oe(d)?,
            typical_entanglement_ue(d)?,
            typical_linear_entropy(EnsembleKind::Orthogonal, d)?,
            typical_linear_entropy(EnsembleKind::Unitary, d)?,
        );
    }

    println!("\nMonte Carlo at d = 301 (10^4 samples):");
    for kind in [EnsembleKind::Orthogonal, EnsembleKind::Unitary] {
        let spec = EnsembleSpec::full(kind, 301, 42)?;
        let mc = mc_average(&spec, Functional::Entropy, 10_000)?;
        println!(
            "  {kind}: {:.4} +- {:.4} (exact {:.4})",
            mc.mc_mean,
            mc.mc_stderr,
            mc.analytic.unwrap(),
        );
    }

    println!(
        "\nfull bipartite 2x2 average: {:.6} (exactly 1/3)",
        typical_entanglement_full(2, 2)?
    );

    let d = 10_000;
    let gamma = 0.577_215_664_901_532_9_f64;
    println!(
        "large-d check at d = {d}: oe {:.6} vs ln d - 2 + ln 2 + gamma = {:.6}",
        typical_entanglement_oe(d)?,
        (d as f64).ln() - 2.0 + 2.0f64.ln() + gamma,
    );
    println!(
        "                          ue {:.6} vs ln d - 1 + gamma     = {:.6}",
        typical_entanglement_ue(d)?,
        (d as f64).ln() - 1.0 + gamma,
    );
    Ok(())
}
