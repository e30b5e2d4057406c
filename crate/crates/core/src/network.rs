//! Fully connected scalar networks with explicit parameters.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};

pub const DEFAULT_KINK_TOLERANCE: f64 = 1e-9;

/// Largest tolerated error of a smooth identity extension on its box.
pub const SMOOTH_EXTENSION_TOLERANCE: f64 = 1e-10;

/// `φ_0 = x`, `φ_i = σ(W_i φ_{i-1} + b_i)` for `i < L`, output `W_L φ_{L-1} + b_L`.
///
/// Weights are stored row-major per layer, `W_i` of shape `d_i × d_{i-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDocument")]
pub struct MlpNetwork {
    activation: Activation,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct NetworkDocument {
    activation: Activation,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl TryFrom<NetworkDocument> for MlpNetwork {
    type Error = Error;
    fn try_from(doc: NetworkDocument) -> Result<Self> {
        MlpNetwork::new(doc.activation, doc.layer_dims, doc.weights, doc.biases)
    }
}

impl MlpNetwork {
    pub fn new(
        activation: Activation,
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidNetwork("need at least input and output dimension".into()));
        }
        if *layer_dims.last().unwrap() != 1 {
            return Err(Error::InvalidNetwork("output dimension must be 1".into()));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidNetwork("layer dimensions must be positive".into()));
        }
        let depth = layer_dims.len() - 1;
        if weights.len() != depth || biases.len() != depth {
            return Err(Error::InvalidNetwork(format!(
                "expected {depth} weight and bias blocks, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for i in 0..depth {
            let (rows, cols) = (layer_dims[i + 1], layer_dims[i]);
            if weights[i].len() != rows * cols {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} weight has {} entries, expected {rows}×{cols}",
                    i + 1,
                    weights[i].len()
                )));
            }
            if biases[i].len() != rows {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} bias has {} entries, expected {rows}",
                    i + 1,
                    biases[i].len()
                )));
            }
        }
        Ok(MlpNetwork { activation, layer_dims, weights, biases })
    }

    /// Network with all parameters zero except the output bias.
    pub fn constant(activation: Activation, hidden: &[usize], input_dim: usize, c: f64) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let weights = dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let mut biases: Vec<Vec<f64>> = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        biases.last_mut().unwrap()[0] = c;
        MlpNetwork { activation, layer_dims: dims, weights, biases }
    }

    /// Depth-1 network `w·x + b`.
    pub fn affine(activation: Activation, w: Vec<f64>, b: f64) -> Self {
        let d = w.len();
        MlpNetwork { activation, layer_dims: vec![d, 1], weights: vec![w], biases: vec![vec![b]] }
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn depth(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.layer_dims[1..self.layer_dims.len() - 1]
    }

    /// Row-major weight block of layer `i` (1-based).
    pub fn weight(&self, i: usize) -> &[f64] {
        &self.weights[i - 1]
    }

    pub fn bias(&self, i: usize) -> &[f64] {
        &self.biases[i - 1]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    fn affine_layer(&self, i: usize, input: &[f64]) -> Vec<f64> {
        let cols = self.layer_dims[i];
        self.weights[i]
            .chunks(cols)
            .zip(&self.biases[i])
            .map(|(row, b)| row.iter().zip(input).fold(*b, |acc, (w, v)| acc + w * v))
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut phi = x.to_vec();
        let depth = self.depth();
        for i in 0..depth {
            let mut a = self.affine_layer(i, &phi);
            if i + 1 < depth {
                for v in &mut a {
                    *v = self.activation.eval(*v);
                }
            }
            phi = a;
        }
        Ok(phi[0])
    }

    /// Preactivations of every hidden layer at `x`.
    pub fn hidden_preactivations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut out = Vec::with_capacity(self.depth().saturating_sub(1));
        let mut phi = x.to_vec();
        for i in 0..self.depth() - 1 {
            let a = self.affine_layer(i, &phi);
            phi = a.iter().map(|&v| self.activation.eval(v)).collect();
            out.push(a);
        }
        Ok(out)
    }

    /// True iff the network is classically smooth in a neighbourhood of `x`.
    pub fn is_smooth_at(&self, x: &[f64], kink_tolerance: f64) -> bool {
        if self.activation != Activation::Relu {
            return true;
        }
        match self.hidden_preactivations(x) {
            Ok(layers) => layers.iter().flatten().all(|a| a.abs() > kink_tolerance),
            Err(_) => false,
        }
    }

    /// Enclosure of the output over a box by interval arithmetic.
    pub fn output_bounds(&self, domain: &BoxDomain) -> Result<(f64, f64)> {
        self.check_input(&domain.lo)?;
        let mut lo = domain.lo.clone();
        let mut hi = domain.hi.clone();
        let depth = self.depth();
        for i in 0..depth {
            let cols = self.layer_dims[i];
            let mut nlo = Vec::with_capacity(self.layer_dims[i + 1]);
            let mut nhi = Vec::with_capacity(self.layer_dims[i + 1]);
            for (row, b) in self.weights[i].chunks(cols).zip(&self.biases[i]) {
                let (mut l, mut h) = (*b, *b);
                for (k, w) in row.iter().enumerate() {
                    if *w >= 0.0 {
                        l += w * lo[k];
                        h += w * hi[k];
                    } else {
                        l += w * hi[k];
                        h += w * lo[k];
                    }
                }
                if i + 1 < depth {
                    let (a, c) = self.activation.image(l, h);
                    l = a;
                    h = c;
                }
                nlo.push(l);
                nhi.push(h);
            }
            lo = nlo;
            hi = nhi;
        }
        Ok((lo[0], hi[0]))
    }

    /// Same network with the output layer multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        let last = out.depth() - 1;
        out.weights[last].iter_mut().for_each(|w| *w *= c);
        out.biases[last].iter_mut().for_each(|b| *b *= c);
        out
    }

    /// Same network with `c` added to the output bias.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        let last = out.depth() - 1;
        out.biases[last][0] += c;
        out
    }

    /// Network computing `Σ_j coeffs_j · nets_j` by width concatenation.
    pub fn linear_combine(nets: &[&MlpNetwork], coeffs: &[f64]) -> Result<MlpNetwork> {
        let first = nets.first().ok_or_else(|| Error::Incompatible("empty network list".into()))?;
        if nets.len() != coeffs.len() {
            return Err(Error::Incompatible(format!("{} networks but {} coefficients", nets.len(), coeffs.len())));
        }
        let depth = first.depth();
        let d = first.input_dim();
        for n in nets {
            if n.depth() != depth {
                return Err(Error::Incompatible(format!("depth {} vs {depth}", n.depth())));
            }
            if n.activation != first.activation {
                return Err(Error::Incompatible(format!("activation {} vs {}", n.activation, first.activation)));
            }
            if n.input_dim() != d {
                return Err(Error::Incompatible(format!("input dimension {} vs {d}", n.input_dim())));
            }
        }
        let output_bias: f64 = nets.iter().zip(coeffs).map(|(n, c)| c * n.biases[depth - 1][0]).sum();
        if depth == 1 {
            let mut w = vec![0.0; d];
            for (n, c) in nets.iter().zip(coeffs) {
                for (acc, v) in w.iter_mut().zip(&n.weights[0]) {
                    *acc += c * v;
                }
            }
            return Ok(MlpNetwork::affine(first.activation, w, output_bias));
        }

        let mut dims = vec![d];
        for i in 1..depth {
            dims.push(nets.iter().map(|n| n.layer_dims[i]).sum());
        }
        dims.push(1);

        let mut weights = Vec::with_capacity(depth);
        let mut biases = Vec::with_capacity(depth);
        weights.push(nets.iter().flat_map(|n| n.weights[0].iter().copied()).collect());
        biases.push(nets.iter().flat_map(|n| n.biases[0].iter().copied()).collect());
        for i in 1..depth - 1 {
            let (rows, cols) = (dims[i + 1], dims[i]);
            let mut w = vec![0.0; rows * cols];
            let (mut r0, mut c0) = (0, 0);
            for n in nets {
                let (nr, nc) = (n.layer_dims[i + 1], n.layer_dims[i]);
                for r in 0..nr {
                    w[(r0 + r) * cols + c0..(r0 + r) * cols + c0 + nc]
                        .copy_from_slice(&n.weights[i][r * nc..(r + 1) * nc]);
                }
                r0 += nr;
                c0 += nc;
            }
            weights.push(w);
            biases.push(nets.iter().flat_map(|n| n.biases[i].iter().copied()).collect());
        }
        weights.push(
            nets.iter()
                .zip(coeffs)
                .flat_map(|(n, c)| n.weights[depth - 1].iter().map(move |w| c * w))
                .collect(),
        );
        biases.push(vec![output_bias]);
        MlpNetwork::new(first.activation, dims, weights, biases)
    }

    /// Deepen the network without changing the function it computes.
    ///
    /// ReLU and identity activations are extended exactly. Other strictly monotone
    /// activations need `domain`: the inserted layer `κ(σ(εt) − σ(−εt))` reproduces
    /// the last affine map `t` to within [`SMOOTH_EXTENSION_TOLERANCE`] on that box.
    pub fn extend_depth_identity(&self, target_depth: usize, domain: Option<&BoxDomain>) -> Result<MlpNetwork> {
        if target_depth < self.depth() {
            return Err(Error::DepthExtension(format!(
                "target depth {target_depth} below current depth {}",
                self.depth()
            )));
        }
        let mut net = self.clone();
        while net.depth() < target_depth {
            net = match net.activation {
                Activation::Relu => net.insert_output_layer(&[1.0, -1.0], &[1.0, -1.0]),
                Activation::Identity => net.insert_output_layer(&[1.0], &[1.0]),
                act if act.strictly_monotone() => {
                    let domain = domain.ok_or_else(|| {
                        Error::DepthExtension(format!("{act} extension needs a bounding box"))
                    })?;
                    let (lo, hi) = net.output_bounds(domain)?;
                    let (eps, bound) = smooth_identity_scale(act, lo.abs().max(hi.abs()));
                    if bound > SMOOTH_EXTENSION_TOLERANCE * (1.0 + lo.abs().max(hi.abs())) {
                        return Err(Error::DepthExtension(format!(
                            "{act} identity layer error bound {bound:e} too large on the given box"
                        )));
                    }
                    let kappa = 1.0 / (2.0 * eps * act.derivatives(0.0, 1)[1]);
                    net.insert_output_layer(&[eps, -eps], &[kappa, -kappa])
                }
                act => {
                    return Err(Error::DepthExtension(format!("{act} is not strictly monotone")));
                }
            };
        }
        Ok(net)
    }

    /// Replace the output map `t = W_L φ + b_L` by hidden units `σ(s_k t)` and output `Σ c_k σ(s_k t)`.
    fn insert_output_layer(&self, scales: &[f64], out: &[f64]) -> MlpNetwork {
        let depth = self.depth();
        let w = &self.weights[depth - 1];
        let b = self.biases[depth - 1][0];
        let mut weights = self.weights[..depth - 1].to_vec();
        let mut biases = self.biases[..depth - 1].to_vec();
        weights.push(scales.iter().flat_map(|s| w.iter().map(move |v| s * v)).collect());
        biases.push(scales.iter().map(|s| s * b).collect());
        weights.push(out.to_vec());
        biases.push(vec![0.0]);
        let mut dims = self.layer_dims[..depth].to_vec();
        dims.push(scales.len());
        dims.push(1);
        MlpNetwork { activation: self.activation, layer_dims: dims, weights, biases }
    }
}

/// Scale ε of the symmetric identity layer and its estimated worst-case error for `|t| ≤ h`.
///
/// Truncation `ε²h³|σ'''(0)|/(6σ'(0))` is balanced against the cancellation error
/// `u|σ(0)|/(εσ'(0))` of the difference quotient.
fn smooth_identity_scale(act: Activation, h: f64) -> (f64, f64) {
    let u = f64::EPSILON;
    let d = act.derivatives(0.0, 3);
    let h = h.max(1.0);
    let a = h.powi(3) * d[3].abs() / (6.0 * d[1]);
    let b = u * d[0].abs() / d[1];
    let eps = if a == 0.0 {
        1.0
    } else if b == 0.0 {
        (1e-8 / h).min(1.0)
    } else {
        (b / (2.0 * a)).cbrt().min(1.0)
    };
    let bound = a * eps * eps + b / eps + 4.0 * u * h;
    (eps, bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu_ramp(shift: f64) -> MlpNetwork {
        MlpNetwork::new(Activation::Relu, vec![1, 1, 1], vec![vec![1.0], vec![1.0]], vec![vec![-shift], vec![0.0]]).unwrap()
    }

    #[test]
    fn constant_and_ramp() {
        let c = MlpNetwork::constant(Activation::Tanh, &[3], 2, 4.5);
        assert_eq!(c.forward(&[0.3, -7.0]).unwrap(), 4.5);
        assert_eq!(relu_ramp(0.5).forward(&[1.0]).unwrap(), 0.5);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(relu_ramp(0.5).forward(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn smoothness_probe() {
        assert!(!relu_ramp(0.0).is_smooth_at(&[0.0], DEFAULT_KINK_TOLERANCE));
        assert!(relu_ramp(0.5).is_smooth_at(&[0.4], 1e-3));
        let t = MlpNetwork::constant(Activation::Tanh, &[2], 1, 0.0);
        assert!(t.is_smooth_at(&[0.0], 1.0));
    }

    #[test]
    fn combined_widths_and_count() {
        let a = MlpNetwork::constant(Activation::Tanh, &[3], 2, 1.0);
        let b = MlpNetwork::constant(Activation::Tanh, &[3], 2, 2.0);
        let c = MlpNetwork::linear_combine(&[&a, &b], &[1.0, 1.0]).unwrap();
        assert_eq!(c.hidden_widths(), &[6]);
        assert_eq!(c.parameter_count(), 3 * 6 + 7);
    }

    #[test]
    fn combine_depth_one() {
        let a = MlpNetwork::affine(Activation::Relu, vec![2.0], 1.0);
        let b = MlpNetwork::affine(Activation::Relu, vec![-1.0], 3.0);
        let c = MlpNetwork::linear_combine(&[&a, &b], &[2.0, 1.0]).unwrap();
        assert_eq!(c.forward(&[0.5]).unwrap(), 2.0 * 2.0 + 2.5);
    }

    #[test]
    fn combine_rejects_mismatch() {
        let a = MlpNetwork::constant(Activation::Tanh, &[3], 1, 1.0);
        let b = MlpNetwork::constant(Activation::Relu, &[3], 1, 1.0);
        let c = MlpNetwork::constant(Activation::Tanh, &[3, 2], 1, 1.0);
        assert!(MlpNetwork::linear_combine(&[&a, &b], &[1.0, 1.0]).is_err());
        assert!(MlpNetwork::linear_combine(&[&a, &c], &[1.0, 1.0]).is_err());
        assert!(MlpNetwork::linear_combine(&[], &[]).is_err());
    }

    #[test]
    fn relu_extension_is_exact() {
        let n = relu_ramp(0.3).scaled(-2.0).shifted(0.7);
        let e = n.extend_depth_identity(4, None).unwrap();
        assert_eq!(e.depth(), 4);
        for i in 0..200 {
            let x = -2.0 + 0.02 * i as f64;
            assert_eq!(e.forward(&[x]).unwrap(), n.forward(&[x]).unwrap());
        }
    }

    #[test]
    fn extension_to_same_depth_is_noop() {
        let n = relu_ramp(0.3);
        assert_eq!(n.extend_depth_identity(2, None).unwrap(), n);
        assert!(n.extend_depth_identity(1, None).is_err());
    }

    #[test]
    fn smooth_extension_requires_box() {
        let n = MlpNetwork::constant(Activation::Tanh, &[2], 1, 1.0);
        assert!(n.extend_depth_identity(3, None).is_err());
    }

    #[test]
    fn sigmoid_and_softplus_extension() {
        let dom = BoxDomain::symmetric(1, 1.0);
        for act in [Activation::Sigmoid, Activation::Softplus, Activation::Identity] {
            let n = MlpNetwork::new(act, vec![1, 2, 1], vec![vec![1.5, -0.7], vec![0.8, 1.1]], vec![vec![0.1, 0.2], vec![-0.3]]).unwrap();
            let e = n.extend_depth_identity(3, Some(&dom)).unwrap();
            for i in 0..=100 {
                let x = -1.0 + 0.02 * i as f64;
                let diff = (e.forward(&[x]).unwrap() - n.forward(&[x]).unwrap()).abs();
                assert!(diff <= 1e-10, "{act} {diff:e}");
            }
        }
    }

    #[test]
    fn output_bounds_enclose_samples() {
        let n = MlpNetwork::new(Activation::Tanh, vec![2, 2, 1], vec![vec![1.0, -2.0, 0.5, 0.3], vec![2.0, -1.0]], vec![vec![0.1, -0.1], vec![0.5]]).unwrap();
        let dom = BoxDomain::symmetric(2, 1.0);
        let (lo, hi) = n.output_bounds(&dom).unwrap();
        let (pts, _) = dom.midpoints(20);
        for p in pts {
            let v = n.forward(&p).unwrap();
            assert!(lo <= v && v <= hi);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let n = MlpNetwork::new(Activation::Tanh, vec![1, 2, 1], vec![vec![0.1 + 0.2, 1.0 / 3.0], vec![std::f64::consts::PI, -1e-300]], vec![vec![2.0f64.sqrt(), 0.0], vec![-0.0]]).unwrap();
        let s = serde_json::to_string(&n).unwrap();
        let back: MlpNetwork = serde_json::from_str(&s).unwrap();
        for (a, b) in n.weights().iter().flatten().zip(back.weights().iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(n, back);
    }

    #[test]
    fn deserialization_validates_shapes() {
        let bad = r#"{"activation":"relu","layer_dims":[1,2,1],"weights":[[1.0],[1.0,1.0]],"biases":[[0.0,0.0],[0.0]]}"#;
        assert!(serde_json::from_str::<MlpNetwork>(bad).is_err());
    }
}
