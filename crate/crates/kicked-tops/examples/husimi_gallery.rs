//! Husimi distributions over the section at mixed coupling: the most
//! localized eigenstate, the most delocalized one, and a projected coherent
//! state for scale. Grayscale heatmaps land next to the binary.

use kicked_tops::angular::{HalfInt, SubspaceSpec};
use kicked_tops::classical::SectionPoint;
use kicked_tops::filtering::eigenstate_features;
use kicked_tops::floquet::build_floquet;
use kicked_tops::io;
use kicked_tops::states::{husimi, husimi_entropy, projected_coherent, PhaseSpaceGrid};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

fn main() -> kicked_tops::Result<()> {
    let spec = SubspaceSpec::symmetric(HalfInt::from_int(150))?;
    let eigen = build_floquet(&spec, 1.5, FRAC_PI_2, None)?.diagonalize()?;

    let features = eigenstate_features(&eigen, &PhaseSpaceGrid::vertex_centered(61, 61)?)?;
    let most_regular = features
        .iter()
        .min_by(|a, b| a.s_q.total_cmp(&b.s_q))
        .unwrap();
    let most_chaotic = features
        .iter()
        .max_by(|a, b| a.s_q.total_cmp(&b.s_q))
        .unwrap();

    let render = PhaseSpaceGrid::vertex_centered(121, 121)?;
    for (name, feature) in [("island", most_regular), ("sea", most_chaotic)] {
        let state = eigen.eigenstate(feature.k)?;
        let q = husimi(&state, &render)?;
        let path = format!("husimi_{name}.pgm");
        io::write_pgm(&path, render.n_phi(), render.n_v(), &q)?;
        println!(
            "eigenstate {} ({name}): S_Q = {:.3}, <J_z> = {:+.1} -> {path}",
            feature.k, feature.s_q, feature.jz,
        );
    }

    let packet = projected_coherent(&spec, SectionPoint::from_angles(FRAC_PI_2, FRAC_PI_3))?;
    let q = husimi(&packet, &render)?;
    io::write_pgm("husimi_packet.pgm", render.n_phi(), render.n_v(), &q)?;
    println!(
        "coherent packet: S_Q = {:.3} (uniform limit {:.3}) -> husimi_packet.pgm",
        husimi_entropy(&q, render.weights())?,
        (4.0 * PI).ln(),
    );
    Ok(())
}
