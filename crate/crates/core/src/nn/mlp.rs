use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: &[usize], output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            output_dim,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(NnError::Shape(format!("all layer widths must be >= 1: {self:?}")));
        }
        Ok(())
    }

    /// (fan_in, fan_out) of every affine layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden_dims.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }
}

/// A feed-forward network whose parameters live in a [`ParamStore`] under
/// `{prefix}.{layer}.weight` (fan_in x fan_out) and `{prefix}.{layer}.bias`.
/// The final layer is affine.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub prefix: String,
    names: Vec<(String, String)>,
    dims: Vec<(usize, usize)>,
}

/// Activations recorded by [`Mlp::forward`] for the reverse pass.
#[derive(Clone, Debug)]
pub struct MlpTape {
    /// Input to each affine layer.
    inputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// Describes a network without touching any store.
    pub fn describe(spec: MlpSpec, prefix: &str) -> Result<Self, NnError> {
        spec.validate()?;
        let names = (0..spec.layer_dims().len())
            .map(|l| (format!("{prefix}.{l}.weight"), format!("{prefix}.{l}.bias")))
            .collect();
        Ok(Self {
            dims: spec.layer_dims(),
            spec,
            prefix: prefix.to_string(),
            names,
        })
    }

    /// Registers freshly initialized parameters in `store`: every entry is
    /// drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(spec: MlpSpec, prefix: &str, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Self, NnError> {
        let mlp = Self::describe(spec, prefix)?;
        for ((w, b), (fan_in, fan_out)) in mlp.names.iter().zip(mlp.dims.clone()) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let biases = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            store.insert(w, vec![fan_in, fan_out], weights)?;
            store.insert(b, vec![fan_out], biases)?;
        }
        Ok(mlp)
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().flat_map(|(w, b)| [w.as_str(), b.as_str()])
    }

    fn layer<'s>(&self, store: &'s ParamStore, l: usize) -> Result<(ArrayView2<'s, f64>, ArrayView1<'s, f64>), NnError> {
        let (fan_in, fan_out) = self.dims[l];
        let w = store.get(&self.names[l].0)?;
        let b = store.get(&self.names[l].1)?;
        let w = ArrayView2::from_shape((fan_in, fan_out), &w.value)
            .map_err(|e| NnError::Shape(format!("{}: {e}", self.names[l].0)))?;
        let b = ArrayView1::from_shape(fan_out, &b.value)
            .map_err(|e| NnError::Shape(format!("{}: {e}", self.names[l].1)))?;
        Ok((w, b))
    }

    fn activate(&self, x: &mut Array2<f64>) {
        match self.spec.activation {
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
        }
    }

    /// Batched forward pass over the rows of `input`.
    pub fn forward(&self, store: &ParamStore, input: ArrayView2<f64>) -> Result<(Array2<f64>, MlpTape), NnError> {
        if input.ncols() != self.spec.input_dim {
            return Err(NnError::Dimension {
                expected: self.spec.input_dim,
                got: input.ncols(),
            });
        }
        let n_layers = self.names.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut x = input.to_owned();
        for l in 0..n_layers {
            let (w, b) = self.layer(store, l)?;
            let mut y = Array2::zeros((x.nrows(), w.ncols()));
            y += &b;
            general_mat_mul(1.0, &x, &w, 1.0, &mut y);
            if l + 1 < n_layers {
                self.activate(&mut y);
            }
            inputs.push(x);
            x = y;
        }
        Ok((x, MlpTape { inputs }))
    }

    pub fn forward_vec(&self, store: &ParamStore, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| NnError::Shape(e.to_string()))?;
        let (out, _) = self.forward(store, view)?;
        Ok(out.into_raw_vec_and_offset().0)
    }

    /// Reverse pass: accumulates parameter gradients into `store` and returns
    /// the gradient with respect to the input.
    pub fn backward(&self, store: &mut ParamStore, tape: &MlpTape, grad_out: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        let n_layers = self.names.len();
        if grad_out.ncols() != self.spec.output_dim || grad_out.nrows() != tape.inputs[0].nrows() {
            return Err(NnError::Dimension {
                expected: self.spec.output_dim,
                got: grad_out.ncols(),
            });
        }
        let mut g = grad_out.to_owned();
        for l in (0..n_layers).rev() {
            if l + 1 < n_layers {
                // tape.inputs[l + 1] is the activated output of layer l
                self.mask_grad(&mut g, &tape.inputs[l + 1]);
            }
            let (fan_in, fan_out) = self.dims[l];
            let bias = store.get_mut(&self.names[l].1)?;
            let mut db = ArrayViewMut1::from_shape(fan_out, &mut bias.grad)
                .map_err(|e| NnError::Shape(e.to_string()))?;
            db += &g.sum_axis(Axis(0));

            let wp = store.get_mut(&self.names[l].0)?;
            let w = ArrayView2::from_shape((fan_in, fan_out), &wp.value)
                .map_err(|e| NnError::Shape(e.to_string()))?;
            let next_g = g.dot(&w.t());
            let mut dw = ArrayViewMut2::from_shape((fan_in, fan_out), &mut wp.grad)
                .map_err(|e| NnError::Shape(e.to_string()))?;
            general_mat_mul(1.0, &tape.inputs[l].t(), &g, 1.0, &mut dw);
            g = next_g;
        }
        Ok(g)
    }

    /// Reverse pass that only propagates to the input, leaving parameter
    /// gradients untouched.
    pub fn input_grad(&self, store: &ParamStore, tape: &MlpTape, grad_out: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        let n_layers = self.names.len();
        let mut g = grad_out.to_owned();
        for l in (0..n_layers).rev() {
            if l + 1 < n_layers {
                self.mask_grad(&mut g, &tape.inputs[l + 1]);
            }
            let (w, _) = self.layer(store, l)?;
            g = g.dot(&w.t());
        }
        Ok(g)
    }

    fn mask_grad(&self, g: &mut Array2<f64>, activated: &Array2<f64>) {
        match self.spec.activation {
            Activation::Relu => g.zip_mut_with(activated, |gv, &a| {
                if a <= 0.0 {
                    *gv = 0.0
                }
            }),
            Activation::Tanh => g.zip_mut_with(activated, |gv, &a| *gv *= 1.0 - a * a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;

    #[test]
    fn identity_layer_is_identity() {
        let mut store = ParamStore::new();
        store.insert("id.0.weight", vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        store.insert("id.0.bias", vec![3], vec![0.0; 3]).unwrap();
        let mlp = Mlp::describe(MlpSpec::new(3, &[], 3), "id").unwrap();
        let out = mlp.forward_vec(&store, &[0.3, -1.2, 7.0]).unwrap();
        assert_eq!(out, vec![0.3, -1.2, 7.0]);
    }

    #[test]
    fn zero_weights_emit_bias() {
        let mut rng = rng_from_seed(1);
        let mut store = ParamStore::new();
        let mlp = Mlp::init(MlpSpec::new(4, &[8, 8], 2), "f", &mut store, &mut rng).unwrap();
        for (name, p) in store.iter_mut() {
            if name == "f.2.bias" {
                p.value = vec![0.25, -4.0];
            } else {
                p.value.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let out = mlp.forward_vec(&store, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out, vec![0.25, -4.0]);
    }

    #[test]
    fn linear_regression_gradient_is_analytic() {
        // loss = 0.5 * |W x - y|^2 with W the only parameter
        let mut store = ParamStore::new();
        store.insert("lin.0.weight", vec![2, 2], vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        store.insert("lin.0.bias", vec![2], vec![0.0, 0.0]).unwrap();
        let mlp = Mlp::describe(MlpSpec::new(2, &[], 2), "lin").unwrap();
        let x = array![[1.5, -0.5]];
        let y = array![[0.2, 0.7]];
        let (out, tape) = mlp.forward(&store, x.view()).unwrap();
        let resid = &out - &y;
        mlp.backward(&mut store, &tape, resid.view()).unwrap();
        // weight stored as (in, out): dL/dW[i][j] = x_i * resid_j
        let g = &store.get("lin.0.weight").unwrap().grad;
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[i * 2 + j] - x[[0, i]] * resid[[0, j]]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut store = ParamStore::new();
        let mlp = Mlp::init(MlpSpec::new(3, &[4], 1), "q", &mut store, &mut rng_from_seed(0)).unwrap();
        assert!(matches!(
            mlp.forward_vec(&store, &[1.0, 2.0]),
            Err(NnError::Dimension { expected: 3, got: 2 })
        ));
        assert!(MlpSpec::new(3, &[0], 1).validate().is_err());
    }

    #[test]
    fn input_grad_matches_backward() {
        let mut rng = rng_from_seed(5);
        let mut store = ParamStore::new();
        let mlp = Mlp::init(MlpSpec::new(3, &[6, 5], 2), "n", &mut store, &mut rng).unwrap();
        let x = array![[0.1, -0.4, 0.9], [1.0, 0.3, -0.2]];
        let (_, tape) = mlp.forward(&store, x.view()).unwrap();
        let go = array![[1.0, -2.0], [0.5, 0.5]];
        let a = mlp.input_grad(&store, &tape, go.view()).unwrap();
        let b = mlp.backward(&mut store, &tape, go.view()).unwrap();
        assert_eq!(a, b);
    }
}
