//! Plateau interpolants for ReLU networks in one and two dimensions.

use crate::activation::Activation;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::network::{MlpNetwork, DEFAULT_KINK_TOLERANCE};

/// Minimum depth of a ReLU plateau interpolant in `d` dimensions: ⌈log₂(d+1)⌉ + 1.
pub fn min_depth(d: usize) -> usize {
    let mut k = 0;
    while (1usize << k) < d + 1 {
        k += 1;
    }
    k + 1
}

fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest power of two not exceeding a quarter of the smallest ∞-distance between nodes
/// (and from interior nodes to the boundary), halved until no coordinate difference between
/// nodes sits on a breakpoint `r` or `2r`. Powers of two keep plateau values exact.
pub fn plateau_radius(nodes: &[Vec<f64>], domain: Option<&BoxDomain>) -> Result<f64> {
    let mut sep = f64::INFINITY;
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[..i] {
            sep = sep.min(inf_distance(a, b));
        }
        if let Some(dom) = domain {
            if dom.is_interior(a) {
                sep = sep.min(dom.distance_to_boundary(a));
            }
        }
    }
    if !sep.is_finite() {
        // Lone node without a domain: any radius works.
        sep = 1.0;
    }
    let scale = nodes.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut r = 2f64.powi((0.25 * sep).log2().floor() as i32);
    for _ in 0..64 {
        if r <= 1e3 * DEFAULT_KINK_TOLERANCE * scale {
            return Err(Error::NodesTooClose { separation: sep });
        }
        let on_breakpoint = nodes.iter().enumerate().any(|(i, a)| {
            nodes[..i].iter().any(|b| {
                a.iter().zip(b).any(|(x, y)| {
                    let t = (x - y).abs();
                    (t - r).abs() <= 1e-6 * r || (t - 2.0 * r).abs() <= 1e-6 * r
                })
            })
        });
        if !on_breakpoint {
            return Ok(r);
        }
        r *= 0.5;
    }
    Err(Error::NodesTooClose { separation: sep })
}

/// Hidden units `σ(x_k − a)` realising the trapezoid `T(x_k)` = 1 on `[c−r, c+r]`, 0 outside `(c−2r, c+2r)`,
/// as biases and output coefficients (to be scaled by `1/r`).
fn trapezoid(c: f64, r: f64) -> ([f64; 4], [f64; 4]) {
    let breaks = [c - 2.0 * r, c - r, c + r, c + 2.0 * r];
    (breaks.map(|a| -a), [1.0, -1.0, -1.0, 1.0])
}

/// ReLU network of depth `depth` with `u(x_i) = g_i`, constant near every node.
pub fn relu_hermite_interpolant(
    nodes: &[Vec<f64>],
    data: &[f64],
    depth: usize,
    domain: Option<&BoxDomain>,
) -> Result<MlpNetwork> {
    let d = nodes.first().map_or(1, Vec::len);
    if nodes.len() != data.len() {
        return Err(Error::Precondition(format!("{} nodes but {} data values", nodes.len(), data.len())));
    }
    if nodes.iter().any(|x| x.len() != d) {
        return Err(Error::Precondition("nodes of mixed dimension".into()));
    }
    if d > 2 || d == 0 {
        return Err(Error::UnsupportedDimension(d));
    }
    if depth < min_depth(d) {
        return Err(Error::Precondition(format!("ReLU plateau interpolant in {d}D needs depth ≥ {}", min_depth(d))));
    }
    if let Some(dom) = domain {
        if dom.dim() != d {
            return Err(Error::DimensionMismatch { expected: dom.dim(), got: d });
        }
        if nodes.iter().any(|x| !dom.contains(x)) {
            return Err(Error::Precondition("node outside the domain".into()));
        }
    }
    for (i, a) in nodes.iter().enumerate() {
        if nodes[..i].contains(a) {
            return Err(Error::NodesTooClose { separation: 0.0 });
        }
    }
    let r = if nodes.is_empty() { 1.0 } else { plateau_radius(nodes, domain)? };

    let mut order: Vec<usize> = (0..nodes.len()).filter(|&i| data[i] != 0.0).collect();
    order.sort_by(|&i, &j| {
        nodes[i].iter().zip(&nodes[j]).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let net = if order.is_empty() {
        MlpNetwork::constant(Activation::Relu, &vec![1; min_depth(d) - 1], d, 0.0)
    } else if d == 1 && depth == 2 {
        one_dimensional(nodes, data, &order, r)?
    } else {
        clamped(nodes, data, &order, r)?
    };
    net.extend_depth_identity(depth, None)
}

fn one_dimensional(nodes: &[Vec<f64>], data: &[f64], order: &[usize], r: f64) -> Result<MlpNetwork> {
    let width = 4 * order.len();
    let mut b1 = Vec::with_capacity(width);
    let mut w2 = Vec::with_capacity(width);
    for &i in order {
        let (b, c) = trapezoid(nodes[i][0], r);
        b1.extend(b);
        w2.extend(c.map(|s| s * data[i] / r));
    }
    MlpNetwork::new(Activation::Relu, vec![1, width, 1], vec![vec![1.0; width], w2], vec![b1, vec![0.0]])
}

/// `Σ_j g_j σ(A_j(x))` with `A_j = 1 − (2/r) Σ_a [σ(c_a − r − x_a) + σ(x_a − c_a − r)]`.
/// Every first-layer unit is off on the plateau, so `A_j = 1` and the node value is `g_j` exactly;
/// beyond ∞-distance `1.5r` the clamp returns an exact zero.
fn clamped(nodes: &[Vec<f64>], data: &[f64], order: &[usize], r: f64) -> Result<MlpNetwork> {
    let d = nodes[order[0]].len();
    let k = order.len();
    let w1_width = 2 * d * k;
    let mut w1 = Vec::with_capacity(d * w1_width);
    let mut b1 = Vec::with_capacity(w1_width);
    let mut w2 = vec![0.0; k * w1_width];
    let mut w3 = Vec::with_capacity(k);
    for (j, &i) in order.iter().enumerate() {
        for axis in 0..d {
            for sign in [-1.0, 1.0] {
                let mut row = vec![0.0; d];
                row[axis] = sign;
                w1.extend(row);
                b1.push(-sign * nodes[i][axis] - r);
                w2[j * w1_width + b1.len() - 1] = -2.0 / r;
            }
        }
        w3.push(data[i]);
    }
    MlpNetwork::new(
        Activation::Relu,
        vec![d, w1_width, k, 1],
        vec![w1, w2, w3],
        vec![b1, vec![1.0; k], vec![0.0]],
    )
}
