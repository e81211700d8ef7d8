use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::autodiff::{sigmoid_stable, softplus_stable, Tape, Var};
use super::encoding::{coordinate_selector, encode_batch, encode_dim, encode_jacobian_batch};
use super::scalar::Real;
use crate::error::{Error, Result};

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Architecture of the SDF network. Defaults follow the implicit-surface
/// lineage: 8 softplus hidden layers of width 256, positional encoding with
/// 10 bands, input skip-connected into the 4th hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub width: usize,
    pub hidden_layers: usize,
    /// 1-based hidden layer whose input is the concatenation of the previous
    /// activation and the encoded input; 0 disables the skip.
    pub skip_layer: usize,
    pub frequencies: usize,
    pub softplus_beta: f64,
    /// Radius of the sphere the geometric initialization approximates.
    pub init_radius: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            width: 256,
            hidden_layers: 8,
            skip_layer: 4,
            frequencies: 10,
            softplus_beta: 100.0,
            init_radius: 0.5,
        }
    }
}

impl NetworkConfig {
    pub fn encode_dim(&self) -> usize {
        encode_dim(self.frequencies)
    }

    /// 0-based linear-layer index whose input receives the skip, if any.
    fn skip_index(&self) -> Option<usize> {
        (self.skip_layer > 0).then(|| self.skip_layer - 1)
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let e = self.encode_dim();
        let w = self.width;
        (0..=self.hidden_layers)
            .map(|l| {
                let input = if l == 0 {
                    e
                } else if Some(l) == self.skip_index() {
                    w + e
                } else {
                    w
                };
                let output = if l == self.hidden_layers { 1 } else { w };
                (input, output)
            })
            .collect()
    }
}

/// MLP representing a signed distance field. Parameters are stored as a flat
/// list `[W0, b0, W1, b1, ...]` with weights in `[input, output]` layout
/// (row-vector convention) and biases as `[1, output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfNetwork<T: Real> {
    cfg: NetworkConfig,
    params: Vec<Array2<T>>,
}

/// Tape handles for one registration of the network parameters.
pub struct TapedNetwork {
    pub param_vars: Vec<Var>,
}

impl<T: Real> SdfNetwork<T> {
    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[Array2<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    fn weight(&self, l: usize) -> &Array2<T> {
        &self.params[2 * l]
    }

    fn bias(&self, l: usize) -> &Array2<T> {
        &self.params[2 * l + 1]
    }

    pub fn from_params(cfg: NetworkConfig, params: Vec<Array2<T>>) -> Result<Self> {
        let dims = cfg.layer_dims();
        if params.len() != 2 * dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameter tensors, got {}",
                2 * dims.len(),
                params.len()
            )));
        }
        for (l, &(input, output)) in dims.iter().enumerate() {
            if params[2 * l].dim() != (input, output) || params[2 * l + 1].dim() != (1, output) {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l}: expected W [{input}x{output}], b [1x{output}]"
                )));
            }
        }
        if params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numerical("non-finite network parameter".into()));
        }
        Ok(Self { cfg, params })
    }

    /// Geometric initialization: the fresh network approximates the signed
    /// distance of a sphere with radius `cfg.init_radius`.
    ///
    /// Random weights in the usual geometric scaling get the level set near
    /// the sphere but at this width still wobble by a few tenths, so the
    /// random init is followed by a short Adam fit against `|x| - r` on box
    /// samples (deterministic under `seed`).
    pub fn geometric_init(cfg: NetworkConfig, seed: u64) -> Self {
        let mut net = Self::lineage_init(cfg, seed);
        net.calibrate_to_sphere(seed ^ 0x5c5c_5c5c_5c5c_5c5c);
        net
    }

    /// Raw random initialization: last layer mean `sqrt(pi/fan_in)` with bias
    /// `-r`, hidden layers `N(0, sqrt(2/fan_out))`, weights touching
    /// positional-encoding features zeroed so raw coordinates dominate early.
    fn lineage_init(cfg: NetworkConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = move |mean: f64, std: f64| -> f64 {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            mean + std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let dims = cfg.layer_dims();
        let skip = cfg.skip_index();
        let mut params = Vec::with_capacity(2 * dims.len());
        for (l, &(input, output)) in dims.iter().enumerate() {
            let last = l == cfg.hidden_layers;
            let mut w = Array2::<T>::zeros((input, output));
            let mut b = Array2::<T>::zeros((1, output));
            if last {
                let mean = (std::f64::consts::PI / input as f64).sqrt();
                for v in w.iter_mut() {
                    *v = T::from_f64(normal(mean, 1e-5));
                }
                b[(0, 0)] = T::from_f64(-cfg.init_radius);
            } else {
                let std = (2.0 / output as f64).sqrt();
                for (idx, v) in w.indexed_iter_mut() {
                    let (row, _) = idx;
                    let zero = if l == 0 {
                        row >= 3 // positional-encoding features
                    } else if Some(l) == skip {
                        row >= cfg.width + 3 // encoding part of the skip block
                    } else {
                        false
                    };
                    if !zero {
                        *v = T::from_f64(normal(0.0, std));
                    }
                }
            }
            params.push(w);
            params.push(b);
        }
        Self { cfg, params }
    }

    /// Fit the fresh network to the analytic sphere `|x| - r` over
    /// `[-1.5, 1.5]^3`. Stops once the probe deviation drops below 0.04.
    fn calibrate_to_sphere(&mut self, seed: u64) {
        use super::adam::AdamState;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = 1.5f64;
        let mut sample = |n: usize| -> Array2<T> {
            Array2::from_shape_fn((n, 3), |_| {
                T::from_f64(rng.gen_range(-span..span))
            })
        };
        let radius = T::from_f64(self.cfg.init_radius);
        let target_of = |pts: &Array2<T>| -> Array2<T> {
            let mut t = Array2::zeros((pts.nrows(), 1));
            for (i, row) in pts.axis_iter(Axis(0)).enumerate() {
                let r = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
                t[(i, 0)] = r - radius;
            }
            t
        };
        let probe = sample(512);
        let probe_target = target_of(&probe);
        let mut adam = AdamState::new(&self.params, T::from_f64(1e-3));
        for step in 0..500 {
            if step % 25 == 0 {
                let f = self.eval_batch(&probe);
                let dev = f
                    .iter()
                    .zip(probe_target.iter())
                    .map(|(a, b)| (*a - *b).abs().to_f64())
                    .fold(0.0f64, f64::max);
                if dev < 0.04 {
                    break;
                }
            }
            let pts = sample(512);
            let target = target_of(&pts);
            let mut tape = Tape::new();
            let tn = self.register(&mut tape);
            let (f, _) = self.taped_forward(&mut tape, &tn, &pts, false);
            let t = tape.constant(target);
            let diff = tape.sub(f, t);
            let sq = tape.square(diff);
            let sum = tape.sum(sq);
            let loss = tape.scale(sum, T::from_f64(1.0 / pts.nrows() as f64));
            let grads = tape.backward(loss).expect("scalar loss");
            let grad_arrays: Vec<Array2<T>> = tn
                .param_vars
                .iter()
                .zip(self.params.iter())
                .map(|(v, p)| {
                    grads
                        .wrt(*v)
                        .cloned()
                        .unwrap_or_else(|| Array2::zeros(p.dim()))
                })
                .collect();
            adam.step(&mut self.params, &grad_arrays).expect("shapes");
        }
    }

    /// Convert parameter precision (training runs f32, oracles f64).
    pub fn cast<U: Real>(&self) -> SdfNetwork<U> {
        SdfNetwork {
            cfg: self.cfg.clone(),
            params: self
                .params
                .iter()
                .map(|p| p.mapv(|v| U::from_f64(v.to_f64())))
                .collect(),
        }
    }

    fn affine(&self, l: usize, input: &Array2<T>) -> Array2<T> {
        input.dot(self.weight(l)) + self.bias(l)
    }

    /// Batched forward evaluation; `pts` is `[n, 3]`.
    pub fn eval_batch(&self, pts: &Array2<T>) -> Array1<T> {
        let e = encode_batch(pts, self.cfg.frequencies);
        let mut a = e.clone();
        for l in 0..=self.cfg.hidden_layers {
            if Some(l) == self.cfg.skip_index() {
                a = ndarray::concatenate(Axis(1), &[a.view(), e.view()]).unwrap()
                    * T::from_f64(INV_SQRT2);
            }
            let z = self.affine(l, &a);
            if l == self.cfg.hidden_layers {
                return z.index_axis(Axis(1), 0).to_owned();
            }
            let beta = T::from_f64(self.cfg.softplus_beta);
            a = z.mapv(|x| softplus_stable(x, beta));
        }
        unreachable!()
    }

    /// Forward evaluation plus the exact spatial gradient, both batched.
    pub fn eval_with_gradient(&self, pts: &Array2<T>) -> (Array1<T>, Array2<T>) {
        let n = pts.nrows();
        let w = self.cfg.width;
        let beta = T::from_f64(self.cfg.softplus_beta);
        let skip = self.cfg.skip_index();
        let e = encode_batch(pts, self.cfg.frequencies);

        let mut zs: Vec<Array2<T>> = Vec::with_capacity(self.cfg.hidden_layers);
        let mut a = e.clone();
        let mut f = Array1::zeros(n);
        for l in 0..=self.cfg.hidden_layers {
            if Some(l) == skip {
                a = ndarray::concatenate(Axis(1), &[a.view(), e.view()]).unwrap()
                    * T::from_f64(INV_SQRT2);
            }
            let z = self.affine(l, &a);
            if l == self.cfg.hidden_layers {
                f = z.index_axis(Axis(1), 0).to_owned();
            } else {
                a = z.mapv(|x| softplus_stable(x, beta));
                zs.push(z);
            }
        }

        // Reverse pass for d f / d encoding.
        let w_last = self.weight(self.cfg.hidden_layers); // [w, 1]
        let mut v = w_last
            .t()
            .broadcast((n, w))
            .expect("broadcast output weights")
            .to_owned();
        let mut ge: Array2<T> = Array2::zeros((n, self.cfg.encode_dim()));
        for l in (0..self.cfg.hidden_layers).rev() {
            let sig = zs[l].mapv(|x| sigmoid_stable(x * beta));
            let u = &v * &sig;
            let dinput = u.dot(&self.weight(l).t());
            if Some(l) == skip {
                let scaled = dinput * T::from_f64(INV_SQRT2);
                v = scaled.slice(ndarray::s![.., ..w]).to_owned();
                ge += &scaled.slice(ndarray::s![.., w..]);
            } else if l == 0 {
                ge += &dinput;
            } else {
                v = dinput;
            }
        }

        let jac = encode_jacobian_batch(pts, self.cfg.frequencies);
        let sel = coordinate_selector::<T>(self.cfg.frequencies);
        let grad = (&ge * &jac).dot(&sel);
        (f, grad)
    }

    /// Convenience single-point wrappers.
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let pts = Array2::from_shape_vec((1, 3), p.iter().map(|&v| T::from_f64(v)).collect())
            .unwrap();
        self.eval_batch(&pts)[0].to_f64()
    }

    pub fn spatial_gradient(&self, p: [f64; 3]) -> [f64; 3] {
        let pts = Array2::from_shape_vec((1, 3), p.iter().map(|&v| T::from_f64(v)).collect())
            .unwrap();
        let (_, g) = self.eval_with_gradient(&pts);
        [g[(0, 0)].to_f64(), g[(0, 1)].to_f64(), g[(0, 2)].to_f64()]
    }

    /// Register every parameter tensor on a tape.
    pub fn register(&self, tape: &mut Tape<T>) -> TapedNetwork {
        TapedNetwork {
            param_vars: self.params.iter().map(|p| tape.param(p.clone())).collect(),
        }
    }

    /// Build the forward graph (and, optionally, the spatial-gradient graph)
    /// for a fixed batch of points. Returns `(f, grad)` where `f` is `[n,1]`
    /// and `grad` is `[n,3]`. The gradient is expressed in tape primitives,
    /// so losses built on it differentiate through to the parameters.
    pub fn taped_forward(
        &self,
        tape: &mut Tape<T>,
        net: &TapedNetwork,
        pts: &Array2<T>,
        with_gradient: bool,
    ) -> (Var, Option<Var>) {
        let n = pts.nrows();
        let w = self.cfg.width;
        let beta = T::from_f64(self.cfg.softplus_beta);
        let skip = self.cfg.skip_index();
        let weight = |l: usize| net.param_vars[2 * l];
        let bias = |l: usize| net.param_vars[2 * l + 1];

        let e = tape.constant(encode_batch(pts, self.cfg.frequencies));
        let mut zs: Vec<Var> = Vec::with_capacity(self.cfg.hidden_layers);
        let mut a = e;
        let mut f = e;
        for l in 0..=self.cfg.hidden_layers {
            if Some(l) == skip {
                let cat = tape.concat_cols(a, e);
                a = tape.scale(cat, T::from_f64(INV_SQRT2));
            }
            let prod = tape.matmul(a, weight(l));
            let z = tape.add_row(prod, bias(l));
            if l == self.cfg.hidden_layers {
                f = z;
            } else {
                a = tape.softplus(z, beta);
                zs.push(z);
            }
        }

        if !with_gradient {
            return (f, None);
        }

        let ones = tape.constant(Array2::from_elem((n, 1), T::one()));
        let w_last_t = tape.transpose(weight(self.cfg.hidden_layers));
        let mut v = tape.matmul(ones, w_last_t);
        let mut ge: Option<Var> = None;
        for l in (0..self.cfg.hidden_layers).rev() {
            let bz = tape.scale(zs[l], beta);
            let sig = tape.sigmoid(bz);
            let u = tape.mul(v, sig);
            let wt = tape.transpose(weight(l));
            let dinput = tape.matmul(u, wt);
            if Some(l) == skip {
                let scaled = tape.scale(dinput, T::from_f64(INV_SQRT2));
                v = tape.slice_cols(scaled, 0, w);
                let part = tape.slice_cols(scaled, w, w + self.cfg.encode_dim());
                ge = Some(match ge {
                    Some(g) => tape.add(g, part),
                    None => part,
                });
            } else if l == 0 {
                ge = Some(match ge {
                    Some(g) => tape.add(g, dinput),
                    None => dinput,
                });
            } else {
                v = dinput;
            }
        }
        let ge = ge.expect("at least one layer feeds the encoding");
        let jac = tape.constant(encode_jacobian_batch(pts, self.cfg.frequencies));
        let sel = tape.constant(coordinate_selector::<T>(self.cfg.frequencies));
        let h = tape.mul(ge, jac);
        let grad = tape.matmul(h, sel);
        (f, Some(grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> NetworkConfig {
        NetworkConfig {
            width: 24,
            hidden_layers: 5,
            skip_layer: 3,
            frequencies: 3,
            softplus_beta: 25.0,
            init_radius: 0.5,
        }
    }

    fn pseudo_points(n: usize, seed: u64, span: f64) -> Array2<f64> {
        let mut state = seed | 1;
        Array2::from_shape_fn((n, 3), |_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 * span - span
        })
    }

    #[test]
    fn geometric_init_brackets_the_sphere() {
        let net = SdfNetwork::<f64>::geometric_init(NetworkConfig::default(), 1);
        assert!(net.eval([0.0, 0.0, 0.0]) < 0.0);
        assert!(net.eval([2.0, 0.0, 0.0]) > 0.0);
    }

    #[test]
    fn geometric_init_approximates_sphere_radius_half() {
        let net = SdfNetwork::<f64>::geometric_init(NetworkConfig::default(), 3);
        let pts = pseudo_points(500, 11, 1.0);
        let f = net.eval_batch(&pts);
        let mut max_err = 0.0f64;
        for (i, row) in pts.axis_iter(Axis(0)).enumerate() {
            let r = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
            max_err = max_err.max((f[i] - (r - 0.5)).abs());
        }
        assert!(max_err < 0.1, "geometric init deviation {max_err}");
    }

    #[test]
    fn spatial_gradient_matches_finite_differences() {
        let net = SdfNetwork::<f64>::geometric_init(tiny_cfg(), 5);
        let pts = pseudo_points(40, 17, 0.9);
        let (_, grad) = net.eval_with_gradient(&pts);
        let h = 1e-4;
        for i in 0..pts.nrows() {
            for c in 0..3 {
                let mut pp = pts.clone();
                let mut pm = pts.clone();
                pp[(i, c)] += h;
                pm[(i, c)] -= h;
                let fp = net.eval_batch(&pp)[i];
                let fm = net.eval_batch(&pm)[i];
                let fd = (fp - fm) / (2.0 * h);
                let rel = (grad[(i, c)] - fd).abs() / (1.0 + fd.abs());
                assert!(rel < 1e-4, "point {i} coord {c}: {} vs {}", grad[(i, c)], fd);
            }
        }
    }

    #[test]
    fn gradient_is_continuous() {
        let net = SdfNetwork::<f64>::geometric_init(tiny_cfg(), 7);
        let p = pseudo_points(1, 23, 0.5);
        let (_, g0) = net.eval_with_gradient(&p);
        let mut deltas = vec![];
        for &d in &[1e-2, 1e-4, 1e-6] {
            let mut q = p.clone();
            q[(0, 0)] += d;
            let (_, g1) = net.eval_with_gradient(&q);
            deltas.push(
                (0..3)
                    .map(|c| (g1[(0, c)] - g0[(0, c)]).abs())
                    .fold(0.0f64, f64::max),
            );
        }
        assert!(deltas[1] < deltas[0] && deltas[2] < deltas[1]);
    }

    #[test]
    fn taped_forward_agrees_with_plain_eval() {
        let net = SdfNetwork::<f64>::geometric_init(tiny_cfg(), 9);
        let pts = pseudo_points(12, 31, 0.8);
        let (f_plain, g_plain) = net.eval_with_gradient(&pts);
        let mut tape = Tape::new();
        let tn = net.register(&mut tape);
        let (f_var, g_var) = net.taped_forward(&mut tape, &tn, &pts, true);
        let f_tape = tape.value(f_var);
        let g_tape = tape.value(g_var.unwrap());
        for i in 0..pts.nrows() {
            assert!((f_plain[i] - f_tape[(i, 0)]).abs() < 1e-12);
            for c in 0..3 {
                assert!((g_plain[(i, c)] - g_tape[(i, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        // loss = sum(f(x)^2) at fixed points: d loss / d theta checked by
        // central differences on a few entries of every parameter tensor.
        let net = SdfNetwork::<f64>::geometric_init(tiny_cfg(), 13);
        let pts = pseudo_points(6, 37, 0.7);

        let loss_of = |net: &SdfNetwork<f64>| -> f64 {
            let f = net.eval_batch(&pts);
            f.iter().map(|v| v * v).sum()
        };

        let mut tape = Tape::new();
        let tn = net.register(&mut tape);
        let (f_var, _) = net.taped_forward(&mut tape, &tn, &pts, false);
        let sq = tape.square(f_var);
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();

        let h = 1e-5;
        for (pi, pvar) in tn.param_vars.iter().enumerate() {
            let g = grads.wrt(*pvar).expect("param gradient");
            let plen = net.params()[pi].len();
            let probes = [0, plen / 2, plen - 1];
            for &flat in probes.iter() {
                let (r, c) = (flat / g.ncols(), flat % g.ncols());
                let mut plus = net.clone();
                plus.params_mut()[pi][(r, c)] += h;
                let mut minus = net.clone();
                minus.params_mut()[pi][(r, c)] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let rel = (g[(r, c)] - fd).abs() / (1.0 + fd.abs());
                assert!(
                    rel < 1e-4,
                    "param {pi} entry {flat}: {} vs {}",
                    g[(r, c)],
                    fd
                );
            }
        }
    }

    #[test]
    fn gradient_of_spatial_gradient_matches_finite_differences() {
        // Eikonal-style loss: sum((|grad f| - 1)^2). Exercises the
        // second-order path through the explicit gradient graph.
        let net = SdfNetwork::<f64>::geometric_init(tiny_cfg(), 19);
        let pts = pseudo_points(5, 41, 0.6);

        let loss_of = |net: &SdfNetwork<f64>| -> f64 {
            let (_, g) = net.eval_with_gradient(&pts);
            g.axis_iter(Axis(0))
                .map(|row| {
                    let n = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
                    (n - 1.0) * (n - 1.0)
                })
                .sum()
        };

        let mut tape = Tape::new();
        let tn = net.register(&mut tape);
        let (_, g_var) = net.taped_forward(&mut tape, &tn, &pts, true);
        let norms = tape.norm_rows(g_var.unwrap(), 0.0);
        let shifted = tape.offset(norms, -1.0);
        let sq = tape.square(shifted);
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();

        let h = 1e-5;
        for (pi, pvar) in tn.param_vars.iter().enumerate().take(6) {
            let g = grads.wrt(*pvar).expect("param gradient");
            let plen = net.params()[pi].len();
            for &flat in [plen / 3, 2 * plen / 3].iter() {
                let (r, c) = (flat / g.ncols(), flat % g.ncols());
                let mut plus = net.clone();
                plus.params_mut()[pi][(r, c)] += h;
                let mut minus = net.clone();
                minus.params_mut()[pi][(r, c)] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let rel = (g[(r, c)] - fd).abs() / (1.0 + fd.abs());
                assert!(
                    rel < 1e-4,
                    "param {pi} entry {flat}: {} vs {}",
                    g[(r, c)],
                    fd
                );
            }
        }
    }

    #[test]
    fn f32_and_f64_networks_agree() {
        let net64 = SdfNetwork::<f64>::geometric_init(tiny_cfg(), 21);
        let net32 = net64.cast::<f32>();
        let pts64 = pseudo_points(10, 43, 0.8);
        let pts32 = pts64.mapv(|v| v as f32);
        let f64v = net64.eval_batch(&pts64);
        let f32v = net32.eval_batch(&pts32);
        for (a, b) in f64v.iter().zip(f32v.iter()) {
            assert!((a - *b as f64).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn from_params_checks_shapes() {
        let net = SdfNetwork::<f32>::geometric_init(tiny_cfg(), 2);
        let mut params = net.params().to_vec();
        params[0] = Array2::zeros((2, 2));
        assert!(SdfNetwork::from_params(tiny_cfg(), params).is_err());
    }
}
