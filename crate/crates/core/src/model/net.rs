//! The assembled driving network: pre-activation residual encoder with
//! total stride 32, optional transposed-convolution semantic decoder, and
//! four command-selected policy branches over the pooled latent.

use ndarray::{Array1, Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Variant, DECODER_STRIDES};
use super::nn::{
    dropout_mask, gap, gap_backward, relu2, relu2_backward, relu4, relu4_backward, sigmoid,
    softmax_channels, softmax_channels_backward, BatchNorm2d, BnCache, Conv2d, ConvTranspose2d,
    Dense, MaxPool2d,
};
use super::params::{ParamAlloc, ParamStore, StateStore};
use super::ModelError;
use crate::types::NavCommand;

pub struct Bottleneck {
    bn1: BatchNorm2d,
    conv1: Conv2d,
    bn2: BatchNorm2d,
    conv2: Conv2d,
    bn3: BatchNorm2d,
    conv3: Conv2d,
    proj: Option<Conv2d>,
}

pub struct BottleneckCache {
    a: Array4<f64>,
    a2: Array4<f64>,
    a3: Array4<f64>,
    bn1: BnCache,
    bn2: BnCache,
    bn3: BnCache,
}

impl Bottleneck {
    fn new(alloc: &mut ParamAlloc, c_in: usize, width: usize, stride: usize) -> Self {
        let mid = (width / 4).max(1);
        let needs_proj = c_in != width || stride != 1;
        Bottleneck {
            bn1: BatchNorm2d::new(alloc, c_in),
            conv1: Conv2d::new(alloc, c_in, mid, 1, 1, 0, false),
            bn2: BatchNorm2d::new(alloc, mid),
            conv2: Conv2d::new(alloc, mid, mid, 3, stride, 1, false),
            bn3: BatchNorm2d::new(alloc, mid),
            conv3: Conv2d::new(alloc, mid, width, 1, 1, 0, false),
            proj: needs_proj.then(|| Conv2d::new(alloc, c_in, width, 1, stride, 0, false)),
        }
    }

    fn init(&self, store: &mut ParamStore, states: &mut StateStore, rng: &mut ChaCha8Rng) {
        self.bn1.init(store, states);
        self.conv1.init(store, rng);
        self.bn2.init(store, states);
        self.conv2.init(store, rng);
        self.bn3.init(store, states);
        self.conv3.init(store, rng);
        if let Some(p) = &self.proj {
            p.init(store, rng);
        }
    }

    fn forward_train(
        &self,
        params: &ParamStore,
        states: &mut StateStore,
        x: &Array4<f64>,
    ) -> (Array4<f64>, BottleneckCache) {
        let (b1, bn1) = self.bn1.forward_train(params, states, x);
        let a = relu4(&b1);
        let sc = match &self.proj {
            Some(p) => p.forward(params, &a),
            None => x.clone(),
        };
        let h1 = self.conv1.forward(params, &a);
        let (b2, bn2) = self.bn2.forward_train(params, states, &h1);
        let a2 = relu4(&b2);
        let h2 = self.conv2.forward(params, &a2);
        let (b3, bn3) = self.bn3.forward_train(params, states, &h2);
        let a3 = relu4(&b3);
        let y = self.conv3.forward(params, &a3) + &sc;
        (
            y,
            BottleneckCache {
                a,
                a2,
                a3,
                bn1,
                bn2,
                bn3,
            },
        )
    }

    fn forward_eval(
        &self,
        params: &ParamStore,
        states: &StateStore,
        x: &Array4<f64>,
    ) -> Array4<f64> {
        let a = relu4(&self.bn1.forward_eval(params, states, x));
        let sc = match &self.proj {
            Some(p) => p.forward(params, &a),
            None => x.clone(),
        };
        let a2 = relu4(&self.bn2.forward_eval(params, states, &self.conv1.forward(params, &a)));
        let a3 = relu4(&self.bn3.forward_eval(params, states, &self.conv2.forward(params, &a2)));
        self.conv3.forward(params, &a3) + &sc
    }

    fn backward(
        &self,
        params: &mut ParamStore,
        cache: &BottleneckCache,
        dy: &Array4<f64>,
    ) -> Array4<f64> {
        let da3 = self.conv3.backward(params, &cache.a3, dy);
        let db3 = relu4_backward(&cache.a3, &da3);
        let dh2 = self.bn3.backward(params, &cache.bn3, &db3);
        let da2 = self.conv2.backward(params, &cache.a2, &dh2);
        let db2 = relu4_backward(&cache.a2, &da2);
        let dh1 = self.bn2.backward(params, &cache.bn2, &db2);
        let mut da = self.conv1.backward(params, &cache.a, &dh1);
        if let Some(p) = &self.proj {
            da += &p.backward(params, &cache.a, dy);
            let db1 = relu4_backward(&cache.a, &da);
            self.bn1.backward(params, &cache.bn1, &db1)
        } else {
            let db1 = relu4_backward(&cache.a, &da);
            let mut dx = self.bn1.backward(params, &cache.bn1, &db1);
            dx += dy;
            dx
        }
    }
}

pub struct Encoder {
    stem: Conv2d,
    pool: MaxPool2d,
    stages: Vec<Vec<Bottleneck>>,
    final_bn: BatchNorm2d,
}

pub struct EncoderTape {
    x: Array4<f64>,
    stem_out: Array4<f64>,
    pool_arg: Array4<usize>,
    blocks: Vec<BottleneckCache>,
    final_bn: BnCache,
    /// relu(final_bn) output, i.e. the feature map itself.
    feature: Array4<f64>,
}

impl Encoder {
    fn new(alloc: &mut ParamAlloc, config: &ModelConfig) -> Self {
        let stem = Conv2d::new(alloc, config.input_channels(), config.stem_width, 7, 2, 3, false);
        let pool = MaxPool2d {
            k: 3,
            stride: 2,
            pad: 1,
        };
        let mut stages = Vec::new();
        let mut c_in = config.stem_width;
        for (si, (&width, &blocks)) in config
            .stage_widths
            .iter()
            .zip(config.stage_blocks.iter())
            .enumerate()
        {
            let mut stage = Vec::new();
            for bi in 0..blocks {
                let stride = if si > 0 && bi == 0 { 2 } else { 1 };
                stage.push(Bottleneck::new(alloc, c_in, width, stride));
                c_in = width;
            }
            stages.push(stage);
        }
        let final_bn = BatchNorm2d::new(alloc, c_in);
        Encoder {
            stem,
            pool,
            stages,
            final_bn,
        }
    }

    fn init(&self, store: &mut ParamStore, states: &mut StateStore, rng: &mut ChaCha8Rng) {
        self.stem.init(store, rng);
        for stage in &self.stages {
            for block in stage {
                block.init(store, states, rng);
            }
        }
        self.final_bn.init(store, states);
    }

    fn forward_train(
        &self,
        params: &ParamStore,
        states: &mut StateStore,
        x: &Array4<f64>,
    ) -> (Array4<f64>, EncoderTape) {
        let stem_out = self.stem.forward(params, x);
        let (pooled, pool_arg) = self.pool.forward(&stem_out);
        let mut h = pooled;
        let mut blocks = Vec::new();
        for stage in &self.stages {
            for block in stage {
                let (out, cache) = block.forward_train(params, states, &h);
                blocks.push(cache);
                h = out;
            }
        }
        let (bn_out, final_bn) = self.final_bn.forward_train(params, states, &h);
        let feature = relu4(&bn_out);
        let tape = EncoderTape {
            x: x.clone(),
            stem_out,
            pool_arg,
            blocks,
            final_bn,
            feature: feature.clone(),
        };
        (feature, tape)
    }

    fn forward_eval(&self, params: &ParamStore, states: &StateStore, x: &Array4<f64>) -> Array4<f64> {
        let (mut h, _) = self.pool.forward(&self.stem.forward(params, x));
        for stage in &self.stages {
            for block in stage {
                h = block.forward_eval(params, states, &h);
            }
        }
        relu4(&self.final_bn.forward_eval(params, states, &h))
    }

    fn backward(
        &self,
        params: &mut ParamStore,
        tape: &EncoderTape,
        d_feature: &Array4<f64>,
    ) -> Array4<f64> {
        let db = relu4_backward(&tape.feature, d_feature);
        let mut d = self.final_bn.backward(params, &tape.final_bn, &db);
        let all_blocks: Vec<&Bottleneck> = self.stages.iter().flat_map(|s| s.iter()).collect();
        for (block, cache) in all_blocks.iter().zip(tape.blocks.iter()).rev() {
            d = block.backward(params, cache, &d);
        }
        let d_stem = self.pool.backward(tape.stem_out.dim(), &tape.pool_arg, &d);
        self.stem.backward(params, &tape.x, &d_stem)
    }
}

pub struct Decoder {
    layers: Vec<ConvTranspose2d>,
    bns: Vec<BatchNorm2d>,
}

pub struct DecoderTape {
    /// Input of each transposed convolution; `inputs[0]` is the feature map.
    inputs: Vec<Array4<f64>>,
    bn_caches: Vec<BnCache>,
    probs: Array4<f64>,
}

impl Decoder {
    fn new(alloc: &mut ParamAlloc, config: &ModelConfig) -> Self {
        let mut layers = Vec::new();
        let mut bns = Vec::new();
        let mut c_in = config.latent_len();
        for (i, (&filters, &stride)) in config
            .decoder_filters
            .iter()
            .zip(DECODER_STRIDES.iter())
            .enumerate()
        {
            let (pad, out_pad) = match stride {
                4 => (0, 1),
                2 => (1, 1),
                1 => (1, 0),
                other => panic!("unsupported decoder stride {other}"),
            };
            let last = i == 4;
            layers.push(ConvTranspose2d::new(
                alloc, c_in, filters, 3, stride, pad, out_pad, last,
            ));
            if !last {
                bns.push(BatchNorm2d::new(alloc, filters));
            }
            c_in = filters;
        }
        Decoder { layers, bns }
    }

    fn init(&self, store: &mut ParamStore, states: &mut StateStore, rng: &mut ChaCha8Rng) {
        for (i, layer) in self.layers.iter().enumerate() {
            layer.init(store, rng);
            if i < self.bns.len() {
                self.bns[i].init(store, states);
            }
        }
    }

    fn forward_train(
        &self,
        params: &ParamStore,
        states: &mut StateStore,
        feature: &Array4<f64>,
    ) -> (Array4<f64>, DecoderTape) {
        let mut inputs = vec![feature.clone()];
        let mut bn_caches = Vec::new();
        let mut h = feature.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let out = layer.forward(params, &h);
            if i < self.bns.len() {
                let (b, cache) = self.bns[i].forward_train(params, states, &out);
                bn_caches.push(cache);
                h = relu4(&b);
                inputs.push(h.clone());
            } else {
                h = out;
            }
        }
        let probs = softmax_channels(&h);
        (
            probs.clone(),
            DecoderTape {
                inputs,
                bn_caches,
                probs,
            },
        )
    }

    fn forward_eval(
        &self,
        params: &ParamStore,
        states: &StateStore,
        feature: &Array4<f64>,
    ) -> Array4<f64> {
        let mut h = feature.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(params, &h);
            if i < self.bns.len() {
                h = relu4(&self.bns[i].forward_eval(params, states, &h));
            }
        }
        softmax_channels(&h)
    }

    /// Backward from the probability gradient to the feature-map gradient.
    fn backward(
        &self,
        params: &mut ParamStore,
        tape: &DecoderTape,
        d_probs: &Array4<f64>,
    ) -> Array4<f64> {
        let mut d = softmax_channels_backward(&tape.probs, d_probs);
        for i in (0..self.layers.len()).rev() {
            if i < self.bns.len() {
                // Forward was deconv -> bn -> relu; reverse it.
                let relu_out = &tape.inputs[i + 1];
                let d_relu = relu4_backward(relu_out, &d);
                let d_bn = self.bns[i].backward(params, &tape.bn_caches[i], &d_relu);
                d = self.layers[i].backward(params, &tape.inputs[i], &d_bn);
            } else {
                d = self.layers[i].backward(params, &tape.inputs[i], &d);
            }
        }
        d
    }
}

pub struct Branch {
    fc1: Dense,
    fc2: Dense,
    out: Dense,
}

pub struct BranchCache {
    rows: Vec<usize>,
    x: Array2<f64>,
    h1r: Array2<f64>,
    h1d: Array2<f64>,
    h2r: Array2<f64>,
    h2d: Array2<f64>,
    m1: Option<Array2<f64>>,
    m2: Option<Array2<f64>>,
    steer: Array1<f64>,
    speed: Array1<f64>,
}

impl Branch {
    fn new(alloc: &mut ParamAlloc, latent: usize, hidden: [usize; 2]) -> Self {
        Branch {
            fc1: Dense::new(alloc, latent, hidden[0]),
            fc2: Dense::new(alloc, hidden[0], hidden[1]),
            out: Dense::new(alloc, hidden[1], 2),
        }
    }

    fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        self.fc1.init(store, rng);
        self.fc2.init(store, rng);
        self.out.init(store, rng);
    }

    fn forward(
        &self,
        params: &ParamStore,
        rows: Vec<usize>,
        x: Array2<f64>,
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> BranchCache {
        let h1r = relu2(&self.fc1.forward(params, &x));
        let (m1, m2) = match dropout {
            Some((rate, rng)) if rate > 0.0 => {
                let m1 = dropout_mask(h1r.dim(), rate, rng);
                // Second mask drawn with the same rng, sized for fc2 output.
                let m2 = dropout_mask((h1r.dim().0, self.fc2.out_f), rate, rng);
                (Some(m1), Some(m2))
            }
            _ => (None, None),
        };
        let h1d = match &m1 {
            Some(m) => &h1r * m,
            None => h1r.clone(),
        };
        let h2r = relu2(&self.fc2.forward(params, &h1d));
        let h2d = match &m2 {
            Some(m) => &h2r * m,
            None => h2r.clone(),
        };
        let raw = self.out.forward(params, &h2d);
        let steer = raw.column(0).mapv(f64::tanh);
        let speed = raw.column(1).mapv(sigmoid);
        BranchCache {
            rows,
            x,
            h1r,
            h1d,
            h2r,
            h2d,
            m1,
            m2,
            steer,
            speed,
        }
    }

    /// Returns the latent gradient for this branch's sub-batch.
    fn backward(
        &self,
        params: &mut ParamStore,
        cache: &BranchCache,
        d_steer: &[f64],
        d_speed: &[f64],
    ) -> Array2<f64> {
        let n = cache.rows.len();
        let mut draw = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let s = cache.steer[i];
            let v = cache.speed[i];
            draw[[i, 0]] = d_steer[i] * (1.0 - s * s);
            draw[[i, 1]] = d_speed[i] * v * (1.0 - v);
        }
        let dh2d = self.out.backward(params, &cache.h2d, &draw);
        let dh2r = match &cache.m2 {
            Some(m) => &dh2d * m,
            None => dh2d,
        };
        let dh1d = self
            .fc2
            .backward(params, &cache.h1d, &relu2_backward(&cache.h2r, &dh2r));
        let dh1r = match &cache.m1 {
            Some(m) => &dh1d * m,
            None => dh1d,
        };
        self.fc1
            .backward(params, &cache.x, &relu2_backward(&cache.h1r, &dh1r))
    }
}

pub struct MsfsuNet {
    pub config: ModelConfig,
    encoder: Encoder,
    decoder: Option<Decoder>,
    branches: Vec<Branch>,
    param_len: usize,
    state_len: usize,
    /// Per-branch trainable ranges, for isolation checks.
    branch_spans: Vec<(usize, usize)>,
}

pub struct Tape {
    enc: EncoderTape,
    dec: Option<DecoderTape>,
    branch_caches: Vec<Option<BranchCache>>,
    feature_dim: (usize, usize, usize, usize),
}

#[derive(Debug, Clone)]
pub struct NetOutput {
    /// (N, n_classes, H, W) per-pixel probabilities; None for MSF.
    pub semantics: Option<Array4<f64>>,
    pub steer: Array1<f64>,
    pub speed: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct OutputGrads {
    pub d_sem_probs: Option<Array4<f64>>,
    pub d_steer: Array1<f64>,
    pub d_speed: Array1<f64>,
}

pub struct EncodeOut {
    pub feature_map: Array4<f64>,
    pub latent: Array2<f64>,
}

impl MsfsuNet {
    pub fn build(config: ModelConfig) -> Result<MsfsuNet, ModelError> {
        config.validate()?;
        let mut alloc = ParamAlloc::default();
        let encoder = Encoder::new(&mut alloc, &config);
        let decoder = config.has_decoder().then(|| Decoder::new(&mut alloc, &config));
        let mut branches = Vec::new();
        let mut branch_spans = Vec::new();
        for _ in 0..4 {
            let start = alloc.param_len();
            branches.push(Branch::new(
                &mut alloc,
                config.latent_len(),
                config.branch_hidden,
            ));
            branch_spans.push((start, alloc.param_len()));
        }
        Ok(MsfsuNet {
            config,
            encoder,
            decoder,
            branches,
            param_len: alloc.param_len(),
            state_len: alloc.state_len(),
            branch_spans,
        })
    }

    pub fn param_count(&self) -> usize {
        self.param_len
    }

    pub fn state_len(&self) -> usize {
        self.state_len
    }

    pub fn branch_span(&self, branch: usize) -> (usize, usize) {
        self.branch_spans[branch]
    }

    pub fn init_stores(&self, seed: u64) -> (ParamStore, StateStore) {
        let mut params = ParamStore::zeros(self.param_len);
        let mut states = StateStore::zeros(self.state_len);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.encoder.init(&mut params, &mut states, &mut rng);
        if let Some(d) = &self.decoder {
            d.init(&mut params, &mut states, &mut rng);
        }
        for b in &self.branches {
            b.init(&mut params, &mut rng);
        }
        (params, states)
    }

    fn check_input(&self, x: &Array4<f64>) -> Result<(), ModelError> {
        let (_, c, h, w) = x.dim();
        let s = self.config.input_size;
        if c != self.config.input_channels() || h != s || w != s {
            return Err(ModelError::ShapeMismatch {
                expected: format!("(N, {}, {s}, {s})", self.config.input_channels()),
                got: format!("{:?}", x.dim()),
            });
        }
        Ok(())
    }

    pub fn encode_eval(
        &self,
        params: &ParamStore,
        states: &StateStore,
        x: &Array4<f64>,
    ) -> Result<EncodeOut, ModelError> {
        self.check_input(x)?;
        let feature_map = self.encoder.forward_eval(params, states, x);
        let latent = gap(&feature_map);
        Ok(EncodeOut {
            feature_map,
            latent,
        })
    }

    pub fn decode_eval(
        &self,
        params: &ParamStore,
        states: &StateStore,
        feature_map: &Array4<f64>,
    ) -> Result<Array4<f64>, ModelError> {
        match &self.decoder {
            Some(d) => Ok(d.forward_eval(params, states, feature_map)),
            None => Err(ModelError::NoDecoder),
        }
    }

    /// Route each latent row through the branch its command selects.
    pub fn policy_eval(
        &self,
        params: &ParamStore,
        latent: &Array2<f64>,
        commands: &[NavCommand],
    ) -> (Array1<f64>, Array1<f64>) {
        let n = latent.dim().0;
        assert_eq!(n, commands.len(), "one command per latent row");
        let mut steer = Array1::<f64>::zeros(n);
        let mut speed = Array1::<f64>::zeros(n);
        for (bi, branch) in self.branches.iter().enumerate() {
            let rows: Vec<usize> = (0..n)
                .filter(|&i| commands[i].branch_index() == bi)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let sub = gather_rows(latent, &rows);
            let cache = branch.forward(params, rows, sub, None);
            for (j, &row) in cache.rows.iter().enumerate() {
                steer[row] = cache.steer[j];
                speed[row] = cache.speed[j];
            }
        }
        (steer, speed)
    }

    pub fn forward_eval(
        &self,
        params: &ParamStore,
        states: &StateStore,
        x: &Array4<f64>,
        commands: &[NavCommand],
    ) -> Result<NetOutput, ModelError> {
        let enc = self.encode_eval(params, states, x)?;
        let semantics = match &self.decoder {
            Some(d) => Some(d.forward_eval(params, states, &enc.feature_map)),
            None => None,
        };
        let (steer, speed) = self.policy_eval(params, &enc.latent, commands);
        Ok(NetOutput {
            semantics,
            steer,
            speed,
        })
    }

    pub fn forward_train(
        &self,
        params: &ParamStore,
        states: &mut StateStore,
        x: &Array4<f64>,
        commands: &[NavCommand],
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<(NetOutput, Tape), ModelError> {
        self.check_input(x)?;
        let n = x.dim().0;
        assert_eq!(n, commands.len(), "one command per sample");
        let (feature, enc_tape) = self.encoder.forward_train(params, states, x);
        let latent = gap(&feature);
        let (semantics, dec_tape) = match &self.decoder {
            Some(d) => {
                let (probs, tape) = d.forward_train(params, states, &feature);
                (Some(probs), Some(tape))
            }
            None => (None, None),
        };
        let mut steer = Array1::<f64>::zeros(n);
        let mut speed = Array1::<f64>::zeros(n);
        let mut branch_caches = Vec::new();
        let rate = self.config.dropout;
        for (bi, branch) in self.branches.iter().enumerate() {
            let rows: Vec<usize> = (0..n)
                .filter(|&i| commands[i].branch_index() == bi)
                .collect();
            if rows.is_empty() {
                branch_caches.push(None);
                continue;
            }
            let sub = gather_rows(&latent, &rows);
            let cache = branch.forward(params, rows, sub, Some((rate, dropout_rng)));
            for (j, &row) in cache.rows.iter().enumerate() {
                steer[row] = cache.steer[j];
                speed[row] = cache.speed[j];
            }
            branch_caches.push(Some(cache));
        }
        let feature_dim = feature.dim();
        Ok((
            NetOutput {
                semantics,
                steer,
                speed,
            },
            Tape {
                enc: enc_tape,
                dec: dec_tape,
                branch_caches,
                feature_dim,
            },
        ))
    }

    /// Accumulate parameter gradients; returns the input gradient.
    pub fn backward(
        &self,
        params: &mut ParamStore,
        tape: &Tape,
        grads: &OutputGrads,
    ) -> Array4<f64> {
        let (_, _, fh, fw) = tape.feature_dim;
        let mut d_feature = Array4::<f64>::zeros(tape.feature_dim);
        if let (Some(dec), Some(d_probs)) = (&self.decoder, &grads.d_sem_probs) {
            let tape_dec = tape.dec.as_ref().expect("decoder tape");
            d_feature += &dec.backward(params, tape_dec, d_probs);
        }
        let n = grads.d_steer.len();
        let mut d_latent = Array2::<f64>::zeros((n, self.config.latent_len()));
        for (bi, branch) in self.branches.iter().enumerate() {
            let Some(cache) = &tape.branch_caches[bi] else {
                continue;
            };
            let ds: Vec<f64> = cache.rows.iter().map(|&r| grads.d_steer[r]).collect();
            let dv: Vec<f64> = cache.rows.iter().map(|&r| grads.d_speed[r]).collect();
            let dsub = branch.backward(params, cache, &ds, &dv);
            for (j, &row) in cache.rows.iter().enumerate() {
                for c in 0..dsub.dim().1 {
                    d_latent[[row, c]] += dsub[[j, c]];
                }
            }
        }
        d_feature += &gap_backward(&d_latent, fh, fw);
        self.encoder.backward(params, &tape.enc, &d_feature)
    }
}

fn gather_rows(latent: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let c = latent.dim().1;
    let mut out = Array2::<f64>::zeros((rows.len(), c));
    for (j, &r) in rows.iter().enumerate() {
        out.row_mut(j).assign(&latent.row(r));
    }
    out
}

/// Network plus its parameter and state buffers.
pub struct Model {
    pub net: MsfsuNet,
    pub params: ParamStore,
    pub states: StateStore,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model, ModelError> {
        let net = MsfsuNet::build(config)?;
        let (params, states) = net.init_stores(seed);
        Ok(Model {
            net,
            params,
            states,
        })
    }

    pub fn variant(&self) -> Variant {
        self.net.config.variant
    }

    pub fn encode(&self, x: &Array4<f64>) -> Result<EncodeOut, ModelError> {
        self.net.encode_eval(&self.params, &self.states, x)
    }

    pub fn decode_semantics(&self, feature_map: &Array4<f64>) -> Result<Array4<f64>, ModelError> {
        self.net.decode_eval(&self.params, &self.states, feature_map)
    }

    pub fn policy(&self, latent: &Array2<f64>, commands: &[NavCommand]) -> (Array1<f64>, Array1<f64>) {
        self.net.policy_eval(&self.params, latent, commands)
    }

    /// Single-sample convenience: (steer, normalized speed).
    pub fn policy_single(&self, latent: &Array2<f64>, command: NavCommand) -> (f64, f64) {
        let (s, v) = self.net.policy_eval(&self.params, latent, &[command]);
        (s[0], v[0])
    }

    pub fn forward(&self, x: &Array4<f64>, commands: &[NavCommand]) -> Result<NetOutput, ModelError> {
        self.net.forward_eval(&self.params, &self.states, x, commands)
    }

    pub fn forward_train(
        &mut self,
        x: &Array4<f64>,
        commands: &[NavCommand],
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<(NetOutput, Tape), ModelError> {
        self.net
            .forward_train(&self.params, &mut self.states, x, commands, dropout_rng)
    }

    pub fn backward(&mut self, tape: &Tape, grads: &OutputGrads) -> Array4<f64> {
        self.net.backward(&mut self.params, tape, grads)
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn summary(&self) -> String {
        let c = &self.net.config;
        let spans = &self.net.branch_spans;
        let branch_params: usize = spans.iter().map(|(a, b)| b - a).sum();
        let decoder_params = match (&self.net.decoder, spans.first()) {
            (Some(_), Some(&(first_branch, _))) => {
                // Everything between the encoder and the first branch.
                first_branch - self.encoder_param_end()
            }
            _ => 0,
        };
        let encoder_params = self.encoder_param_end();
        format!(
            "variant {} input {}x{}x{} feature {} latent {}\n\
             encoder params {}\ndecoder params {}\nbranch params {} (4 branches)\n\
             total params {}\n",
            c.variant.name(),
            c.input_size,
            c.input_size,
            c.input_channels(),
            c.feature_size(),
            c.latent_len(),
            encoder_params,
            decoder_params,
            branch_params,
            self.param_count()
        )
    }

    fn encoder_param_end(&self) -> usize {
        // The encoder allocates first; its span ends where the decoder (or
        // first branch) begins.
        match &self.net.decoder {
            Some(d) => d.layers[0].w.offset,
            None => self.net.branch_spans[0].0,
        }
    }
}
