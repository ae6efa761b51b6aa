//! Layer graphs with skip wiring, forward caching and reverse-mode gradients.

use rand::Rng;

use super::kernels::{conv2d_forward, conv2d_input_grad, conv2d_weight_grad, dense_backward, dense_forward, ConvDims};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Affine map over the last axis; weight `inputs x outputs`.
    Dense { inputs: usize, outputs: usize },
    /// Same-padded, stride-1 NHWC convolution; weight `kh x kw x cin x cout`.
    Conv2d { kh: usize, kw: usize, cin: usize, cout: usize },
    Relu,
    /// Elementwise sum of two sources.
    Add,
}

/// Where a layer reads its input from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Input,
    Layer(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub sources: Vec<Source>,
}

impl LayerSpec {
    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match self.kind {
            LayerKind::Dense { inputs, outputs } => Some((vec![inputs, outputs], vec![outputs])),
            LayerKind::Conv2d { kh, kw, cin, cout } => Some((vec![kh, kw, cin, cout], vec![cout])),
            LayerKind::Relu | LayerKind::Add => None,
        }
    }
}

/// Ordered layer list. Each layer reads from the network input or an earlier
/// layer; the last layer is the output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Architecture {
    layers: Vec<LayerSpec>,
}

impl Architecture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    fn last(&self) -> Source {
        match self.layers.len() {
            0 => Source::Input,
            n => Source::Layer(n - 1),
        }
    }

    /// Appends a layer reading from `sources` and returns a handle to its output.
    pub fn push(&mut self, name: &str, kind: LayerKind, sources: Vec<Source>) -> Source {
        let arity = if kind == LayerKind::Add { 2 } else { 1 };
        assert_eq!(sources.len(), arity, "layer `{name}` takes {arity} source(s)");
        for s in &sources {
            if let Source::Layer(i) = s {
                assert!(*i < self.layers.len(), "layer `{name}` reads from a later layer");
            }
        }
        self.layers.push(LayerSpec {
            name: name.to_string(),
            kind,
            sources,
        });
        self.last()
    }

    pub fn dense(&mut self, name: &str, inputs: usize, outputs: usize) -> Source {
        let src = self.last();
        self.push(name, LayerKind::Dense { inputs, outputs }, vec![src])
    }

    pub fn conv2d(&mut self, name: &str, kh: usize, kw: usize, cin: usize, cout: usize) -> Source {
        let src = self.last();
        self.push(name, LayerKind::Conv2d { kh, kw, cin, cout }, vec![src])
    }

    pub fn relu(&mut self, name: &str) -> Source {
        let src = self.last();
        self.push(name, LayerKind::Relu, vec![src])
    }

    pub fn add(&mut self, name: &str, a: Source, b: Source) -> Source {
        self.push(name, LayerKind::Add, vec![a, b])
    }

    /// `(name, shape)` of every parameter tensor, in storage order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .filter_map(|l| {
                l.param_shapes().map(|(w, b)| {
                    [(format!("{}.weight", l.name), w), (format!("{}.bias", l.name), b)]
                })
            })
            .flatten()
            .collect()
    }

    /// Output shape of every layer for a given full input shape.
    pub fn infer_shapes(&self, input: &[usize]) -> Result<Vec<Vec<usize>>> {
        let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let src = |s: &Source| -> Vec<usize> {
                match s {
                    Source::Input => input.to_vec(),
                    Source::Layer(i) => shapes[*i].clone(),
                }
            };
            let a = src(&layer.sources[0]);
            let out = match layer.kind {
                LayerKind::Dense { inputs, outputs } => {
                    if a.last() != Some(&inputs) {
                        return Err(Error::shape(&layer.name, format!("expected last axis {inputs}, got shape {a:?}")));
                    }
                    let mut o = a.clone();
                    *o.last_mut().unwrap() = outputs;
                    o
                }
                LayerKind::Conv2d { kh, kw, .. } if kh % 2 == 0 || kw % 2 == 0 => {
                    return Err(Error::shape(&layer.name, "same padding needs odd kernel sizes"));
                }
                LayerKind::Conv2d { cin, cout, .. } => {
                    if a.len() != 4 || a[3] != cin {
                        return Err(Error::shape(&layer.name, format!("expected NHWC input with {cin} channels, got {a:?}")));
                    }
                    vec![a[0], a[1], a[2], cout]
                }
                LayerKind::Relu => a,
                LayerKind::Add => {
                    let b = src(&layer.sources[1]);
                    if a != b {
                        return Err(Error::shape(&layer.name, format!("cannot add {a:?} and {b:?}")));
                    }
                    a
                }
            };
            shapes.push(out);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.infer_shapes(input)?
            .pop()
            .ok_or_else(|| Error::shape("<network>", "empty architecture"))
    }
}

/// Named, ordered parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    entries: Vec<(String, Tensor<F>)>,
}

impl<F: Real> ModelParams<F> {
    pub fn new(entries: Vec<(String, Tensor<F>)>) -> Self {
        Self { entries }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        Self {
            entries: arch
                .param_layout()
                .into_iter()
                .map(|(n, s)| (n, Tensor::zeros(&s)))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(String, Tensor<F>)] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [(String, Tensor<F>)] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<(String, Tensor<F>)> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Stores `grads` (aligned with `entries`) in the tensors' gradient slots.
    pub fn accumulate_grads(&mut self, grads: &[Vec<F>]) -> Result<()> {
        if grads.len() != self.entries.len() {
            return Err(Error::invalid("gradient list does not match parameters"));
        }
        for ((_, t), g) in self.entries.iter_mut().zip(grads) {
            t.accumulate_grad(g)?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.entries.iter_mut().for_each(|(_, t)| t.zero_grad());
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            entries: self.entries.iter().map(|(n, t)| (n.clone(), t.cast())).collect(),
        }
    }

    /// Flat copy of all parameter values.
    pub fn flatten(&self) -> Vec<F> {
        self.entries.iter().flat_map(|(_, t)| t.data().iter().copied()).collect()
    }

    pub fn unflatten(&mut self, values: &[F]) -> Result<()> {
        if values.len() != self.total_count() {
            return Err(Error::invalid("flat parameter vector has the wrong length"));
        }
        let mut off = 0;
        for (_, t) in &mut self.entries {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases. Conv fans are `kh kw cin` and `kh kw cout`.
pub fn init_params<F: Real>(arch: &Architecture, seed: u64) -> ModelParams<F> {
    let mut params = ModelParams::zeros(arch);
    let mut slot = 0;
    for (li, layer) in arch.layers().iter().enumerate() {
        let (fan_in, fan_out) = match layer.kind {
            LayerKind::Dense { inputs, outputs } => (inputs, outputs),
            LayerKind::Conv2d { kh, kw, cin, cout } => (kh * kw * cin, kh * kw * cout),
            _ => continue,
        };
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut rng = stream(seed, &[tag::INIT, li as u64]);
        let w = &mut params.entries[slot].1;
        for v in w.data_mut() {
            *v = F::of(rng.gen_range(-bound..bound));
        }
        slot += 2;
    }
    params
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Cache<F> {
    input: Option<Tensor<F>>,
    outputs: Vec<Tensor<F>>,
}

impl<F: Real> Cache<F> {
    pub fn new() -> Self {
        Self {
            input: None,
            outputs: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_none()
    }

    pub fn output(&self) -> Option<&Tensor<F>> {
        self.outputs.last()
    }

    pub fn clear(&mut self) {
        self.input = None;
        self.outputs.clear();
    }
}

#[derive(Clone, Debug)]
pub struct Gradients<F> {
    /// Aligned with `ModelParams::entries`.
    pub params: Vec<Vec<F>>,
    pub input: Option<Vec<F>>,
}

impl<F: Real> Gradients<F> {
    pub fn add_assign(&mut self, other: &Gradients<F>) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
    }
}

/// Architecture plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<F> {
    arch: Architecture,
    params: ModelParams<F>,
    /// Index of each layer's weight entry in `params`.
    slots: Vec<Option<usize>>,
}

impl<F: Real> Network<F> {
    pub fn new(arch: Architecture, params: ModelParams<F>) -> Result<Self> {
        let layout = arch.param_layout();
        if layout.len() != params.len() {
            return Err(Error::invalid(format!(
                "architecture has {} parameter tensors, params have {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), (pname, t)) in layout.iter().zip(params.entries()) {
            if name != pname || shape.as_slice() != t.shape() {
                return Err(Error::shape(name, format!("expected {shape:?}, got `{pname}` {:?}", t.shape())));
            }
        }
        let mut slots = Vec::with_capacity(arch.len());
        let mut next = 0;
        for l in arch.layers() {
            if l.param_shapes().is_some() {
                slots.push(Some(next));
                next += 2;
            } else {
                slots.push(None);
            }
        }
        Ok(Self { arch, params, slots })
    }

    pub fn initialized(arch: Architecture, seed: u64) -> Self {
        let params = init_params(&arch, seed);
        Self::new(arch, params).expect("layout matches by construction")
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ModelParams<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams<F> {
        &mut self.params
    }

    pub fn into_params(self) -> ModelParams<F> {
        self.params
    }

    pub fn cast<G: Real>(&self) -> Network<G> {
        Network {
            arch: self.arch.clone(),
            params: self.params.cast(),
            slots: self.slots.clone(),
        }
    }

    fn weight_bias(&self, layer: usize) -> (&Tensor<F>, &Tensor<F>) {
        let s = self.slots[layer].expect("parametric layer");
        (&self.params.entries[s].1, &self.params.entries[s + 1].1)
    }

    pub fn forward(&self, input: &Tensor<F>) -> Result<Tensor<F>> {
        let mut cache = Cache::new();
        self.forward_cached(input.clone(), &mut cache)?;
        Ok(cache.outputs.pop().expect("nonempty network"))
    }

    /// Runs the network, keeping every layer output in `cache` for `backward`.
    pub fn forward_cached<'c>(&self, input: Tensor<F>, cache: &'c mut Cache<F>) -> Result<&'c Tensor<F>> {
        let shapes = self.arch.infer_shapes(input.shape())?;
        cache.outputs.clear();
        cache.input = Some(input);
        for (li, layer) in self.arch.layers().iter().enumerate() {
            let out = {
                let get = |s: &Source| -> &Tensor<F> {
                    match s {
                        Source::Input => cache.input.as_ref().unwrap(),
                        Source::Layer(i) => &cache.outputs[*i],
                    }
                };
                let a = get(&layer.sources[0]);
                let mut out = Tensor::zeros(&shapes[li]);
                match layer.kind {
                    LayerKind::Dense { inputs, outputs } => {
                        let (w, b) = self.weight_bias(li);
                        let rows = a.len() / inputs;
                        dense_forward(a.data(), rows, inputs, outputs, w.data(), b.data(), out.data_mut());
                    }
                    LayerKind::Conv2d { kh, kw, cin, cout } => {
                        let (w, b) = self.weight_bias(li);
                        let s = a.shape();
                        let d = ConvDims { n: s[0], h: s[1], w: s[2], cin, cout, kh, kw };
                        conv2d_forward(a.data(), d, w.data(), b.data(), out.data_mut());
                    }
                    LayerKind::Relu => {
                        for (o, v) in out.data_mut().iter_mut().zip(a.data()) {
                            *o = if *v > F::zero() { *v } else { F::zero() };
                        }
                    }
                    LayerKind::Add => {
                        let b = get(&layer.sources[1]);
                        for ((o, x), y) in out.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
                            *o = *x + *y;
                        }
                    }
                }
                out
            };
            cache.outputs.push(out);
        }
        cache.outputs.last().ok_or_else(|| Error::shape("<network>", "empty architecture"))
    }

    /// Gradients of a scalar loss given `upstream = dL/d(output)`.
    pub fn backward(&self, cache: &Cache<F>, upstream: &Tensor<F>, want_input_grad: bool) -> Result<Gradients<F>> {
        let input = cache
            .input
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        if cache.outputs.len() != self.arch.len() {
            return Err(Error::State("cache does not belong to this network".into()));
        }
        let out = cache.outputs.last().unwrap();
        if out.shape() != upstream.shape() {
            return Err(Error::shape(
                &self.arch.layers().last().unwrap().name,
                format!("upstream gradient {:?} vs output {:?}", upstream.shape(), out.shape()),
            ));
        }
        let mut param_grads: Vec<Vec<F>> = self
            .params
            .entries()
            .iter()
            .map(|(_, t)| vec![F::zero(); t.len()])
            .collect();
        let mut layer_grads: Vec<Option<Vec<F>>> = vec![None; self.arch.len()];
        let mut input_grad: Option<Vec<F>> = None;
        layer_grads[self.arch.len() - 1] = Some(upstream.data().to_vec());

        fn deposit<F: Real>(dst: &mut Option<Vec<F>>, g: Vec<F>) {
            match dst {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += *b),
                None => *dst = Some(g),
            }
        }

        for li in (0..self.arch.len()).rev() {
            let Some(g) = layer_grads[li].take() else { continue };
            let layer = &self.arch.layers()[li];
            let value = |s: &Source| -> &Tensor<F> {
                match s {
                    Source::Input => input,
                    Source::Layer(i) => &cache.outputs[*i],
                }
            };
            let needs = |s: &Source| match s {
                Source::Input => want_input_grad,
                Source::Layer(_) => true,
            };
            let src = layer.sources[0];
            let a = value(&src);
            let mut to_sources: Vec<(Source, Vec<F>)> = Vec::with_capacity(2);
            match layer.kind {
                LayerKind::Dense { inputs, outputs } => {
                    let slot = self.slots[li].unwrap();
                    let (w, _) = self.weight_bias(li);
                    let rows = a.len() / inputs;
                    let (gw, gb) = split_pair(&mut param_grads, slot);
                    let mut gx = needs(&src).then(|| vec![F::zero(); a.len()]);
                    dense_backward(a.data(), &g, rows, inputs, outputs, w.data(), gw, gb, gx.as_deref_mut());
                    if let Some(gx) = gx {
                        to_sources.push((src, gx));
                    }
                }
                LayerKind::Conv2d { kh, kw, cin, cout } => {
                    let slot = self.slots[li].unwrap();
                    let (w, _) = self.weight_bias(li);
                    let s = a.shape();
                    let d = ConvDims { n: s[0], h: s[1], w: s[2], cin, cout, kh, kw };
                    let (gw, gb) = split_pair(&mut param_grads, slot);
                    conv2d_weight_grad(a.data(), d, &g, gw, gb);
                    if needs(&src) {
                        let mut gx = vec![F::zero(); a.len()];
                        conv2d_input_grad(d, w.data(), &g, &mut gx);
                        to_sources.push((src, gx));
                    }
                }
                LayerKind::Relu => {
                    if needs(&src) {
                        let out = &cache.outputs[li];
                        let gx = g
                            .iter()
                            .zip(out.data())
                            .map(|(gv, o)| if *o > F::zero() { *gv } else { F::zero() })
                            .collect();
                        to_sources.push((src, gx));
                    }
                }
                LayerKind::Add => {
                    let other = layer.sources[1];
                    if needs(&other) {
                        to_sources.push((other, g.clone()));
                    }
                    if needs(&src) {
                        to_sources.push((src, g));
                    }
                }
            }
            for (s, gx) in to_sources {
                match s {
                    Source::Input => deposit(&mut input_grad, gx),
                    Source::Layer(i) => deposit(&mut layer_grads[i], gx),
                }
            }
        }
        if want_input_grad && input_grad.is_none() {
            input_grad = Some(vec![F::zero(); input.len()]);
        }
        Ok(Gradients {
            params: param_grads,
            input: input_grad,
        })
    }
}

fn split_pair<F>(grads: &mut [Vec<F>], slot: usize) -> (&mut [F], &mut [F]) {
    let (left, right) = grads.split_at_mut(slot + 1);
    (&mut left[slot], &mut right[0])
}
