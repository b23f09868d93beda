//! Initial data generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::FieldPair;
use crate::mesh::{Geometry, Mesh};
use crate::model::ModelParams;
use crate::scheme::State;

/// `η ≡ 1`, `θ ≡ r0`.
pub fn ground(mesh: &Mesh, params: &ModelParams) -> State {
    State::new(FieldPair::constant(mesh, 1.0), FieldPair::constant(mesh, params.r0))
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Step of width `w` centred at the origin, rising from 0 to 1.
fn ramp(x: f64, w: f64) -> f64 {
    smoothstep(x / w + 0.5)
}

/// Grain interface positions along x.
pub fn interface_positions(mesh: &Mesh) -> Vec<f64> {
    let lx = mesh.spec().lx;
    match mesh.geometry() {
        Geometry::Interval => vec![0.5 * lx],
        Geometry::PeriodicStrip => vec![0.25 * lx, 0.75 * lx],
    }
}

/// Two grains separated by vertical interfaces.
///
/// θ rises from r0 to r1 through a smoothstep of width `4h` at each interface
/// (on the strip the middle band is the r1 grain), and η dips to 0.2 with a
/// Gaussian profile of standard deviation `2h` around the nearest interface.
pub fn two_grain(mesh: &Mesh, params: &ModelParams) -> State {
    let h = mesh.hx();
    let lx = mesh.spec().lx;
    let periodic = mesh.geometry() == Geometry::PeriodicStrip;
    let xs = interface_positions(mesh);
    let width = 4.0 * h;
    let sigma = 2.0 * h;
    let (r0, r1) = (params.r0, params.r1);

    let mut eta = Vec::with_capacity(mesh.n_nodes());
    let mut theta = Vec::with_capacity(mesh.n_nodes());
    for c in mesh.coords() {
        let x = c[0];
        let s = if periodic {
            ramp(x - xs[0], width) - ramp(x - xs[1], width)
        } else {
            ramp(x - xs[0], width)
        };
        theta.push((r0 + (r1 - r0) * s).clamp(r0, r1));

        let d = xs
            .iter()
            .map(|&p| {
                let d = (x - p).abs();
                if periodic {
                    d.min(lx - d)
                } else {
                    d
                }
            })
            .fold(f64::INFINITY, f64::min);
        eta.push((1.0 - 0.8 * (-d * d / (2.0 * sigma * sigma)).exp()).clamp(0.0, 1.0));
    }
    State::new(FieldPair::new(eta), FieldPair::new(theta))
}

/// Two grains with a sharp jump: r1 on the middle band (strip) or right half (interval), η ≡ 1.
pub fn sharp_two_grain(mesh: &Mesh, params: &ModelParams) -> State {
    let xs = interface_positions(mesh);
    let theta = mesh
        .coords()
        .iter()
        .map(|c| {
            let inside = if xs.len() == 2 {
                c[0] >= xs[0] && c[0] < xs[1]
            } else {
                c[0] >= xs[0]
            };
            if inside {
                params.r1
            } else {
                params.r0
            }
        })
        .collect();
    State::new(FieldPair::constant(mesh, 1.0), FieldPair::new(theta))
}

/// Independent uniform samples: η in [0, 1], θ in [r0, r1].
pub fn random(mesh: &Mesh, params: &ModelParams, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mesh.n_nodes();
    let eta = (0..n).map(|_| rng.random::<f64>()).collect();
    let theta = (0..n)
        .map(|_| params.r0 + (params.r1 - params.r0) * rng.random::<f64>())
        .collect();
    State::new(FieldPair::new(eta), FieldPair::new(theta))
}
