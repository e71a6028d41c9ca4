use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::layers::{Layer, LayerAux, LayerSpec};
use crate::nn::tensor::Tensor;
use crate::seeds;

/// Ordered feedforward parameter stack.
#[derive(Clone, Debug)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Activations recorded by a training forward pass, consumed by `backward`.
pub struct Cache {
    aux: Vec<LayerAux>,
}

impl Network {
    /// Builds a network from layer specs with seeded initialization.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Network> {
        let mut layers = Vec::with_capacity(specs.len());
        for (idx, spec) in specs.iter().enumerate() {
            let mut rng = seeds::stream(seed, &[0x1a7e5, idx as u64]);
            layers.push(Layer::from_spec(spec, &mut rng)?);
        }
        Ok(Network { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Network {
        Network { layers }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Flattened list of parameter tensors, in layer order.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Concatenated copy of all parameter values; cheap integrity fingerprinting.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for p in self.params() {
            out.extend_from_slice(p.data());
        }
        out
    }

    /// Training-mode forward: dropout active, activations cached for backward.
    pub fn forward_train(&self, input: &Tensor, rng: &mut ChaCha8Rng) -> Result<(Tensor, Cache)> {
        self.forward_inner(input, true, Some(rng), self.layers.len())
    }

    /// Eval-mode forward: dropout inactive, nothing cached.
    pub fn forward_eval(&self, input: &Tensor) -> Result<Tensor> {
        let (out, _) = self.forward_inner(input, false, None, self.layers.len())?;
        Ok(out)
    }

    /// Eval-mode forward that stops before a trailing `Sigmoid`, yielding logits.
    pub fn forward_eval_logits(&self, input: &Tensor) -> Result<Tensor> {
        let (out, _) = self.forward_inner(input, false, None, self.logits_depth())?;
        Ok(out)
    }

    /// Training-mode forward that stops before a trailing `Sigmoid`.
    pub fn forward_train_logits(&self, input: &Tensor, rng: &mut ChaCha8Rng) -> Result<(Tensor, Cache)> {
        self.forward_inner(input, true, Some(rng), self.logits_depth())
    }

    fn logits_depth(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Sigmoid) => self.layers.len() - 1,
            _ => self.layers.len(),
        }
    }

    fn forward_inner(
        &self,
        input: &Tensor,
        train: bool,
        mut rng: Option<&mut ChaCha8Rng>,
        depth: usize,
    ) -> Result<(Tensor, Cache)> {
        if !input.all_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        let mut aux = Vec::with_capacity(depth);
        let mut current = input.clone();
        for layer in &self.layers[..depth] {
            let (out, a) = layer.forward(&current, train, rng.as_deref_mut())?;
            aux.push(a);
            current = out;
        }
        Ok((current, Cache { aux }))
    }

    /// Backpropagates `grad_out` through the layers covered by `cache`.
    ///
    /// Returns gradients matching `params()` order plus the input gradient.
    pub fn backward(&self, cache: &Cache, grad_out: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        if cache.aux.is_empty() && !self.layers.is_empty() {
            return Err(Error::invalid("backward called before forward"));
        }
        let depth = cache.aux.len();
        let mut param_grads_rev: Vec<Vec<Tensor>> = Vec::with_capacity(depth);
        let mut grad = grad_out.clone();
        for (layer, aux) in self.layers[..depth].iter().zip(cache.aux.iter()).rev() {
            let (pg, gin) = layer.backward(aux, &grad)?;
            param_grads_rev.push(pg);
            grad = gin;
        }
        let mut grads = Vec::new();
        for pg in param_grads_rev.into_iter().rev() {
            grads.extend(pg);
        }
        // Layers past the cache depth (a skipped trailing sigmoid) have no params
        // by construction of the logits path; assert in debug builds.
        debug_assert_eq!(
            grads.len(),
            self.layers[..depth].iter().map(|l| l.params().len()).sum::<usize>()
        );
        for l in &self.layers[depth..] {
            for p in l.params() {
                grads.push(p.scalar_like(0.0));
            }
        }
        Ok((grads, grad))
    }

    /// Zero-filled gradient accumulator matching `params()` order.
    pub fn grad_zeros(&self) -> Vec<Tensor> {
        self.params().iter().map(|p| p.scalar_like(0.0)).collect()
    }
}
