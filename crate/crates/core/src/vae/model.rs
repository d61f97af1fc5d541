use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{VaeConfig, VaeError};
use crate::formats::ModelCheckpoint;
use crate::geometry::{Point3, PointCloud};
use crate::nn::{Scalar, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// N(0, 2 / fan_in)
    He { fan_in: usize },
    Zero,
    /// PReLU slope
    Slope,
}

/// Name, shape and initializer of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    init: Init,
}

const PRELU_INIT: f64 = 0.25;

/// Layer plan. `Conv` and `Dense` may carry a PReLU.
#[derive(Debug, Clone, Copy)]
enum Layer {
    Conv { k: usize, cin: usize, cout: usize, prelu: bool },
    Dense { inp: usize, out: usize, prelu: bool },
}

fn encoder_plan(cfg: &VaeConfig) -> Vec<(&'static str, Layer)> {
    let c = cfg.channels(1024);
    vec![
        ("enc.conv0", Layer::Conv { k: 1, cin: 3, cout: c, prelu: true }),
        ("enc.conv1", Layer::Conv { k: 1, cin: c, cout: c, prelu: true }),
        ("enc.conv2", Layer::Conv { k: 1, cin: c, cout: c, prelu: true }),
        ("enc.latent", Layer::Dense { inp: c, out: cfg.latent_dim, prelu: false }),
    ]
}

fn decoder_plan(cfg: &VaeConfig) -> Vec<(&'static str, Layer)> {
    let hidden = cfg.channels(1000);
    let wide = cfg.channels(1024);
    let narrow = cfg.channels(200);
    let d = cfg.latent_dim;
    vec![
        ("dec.dense0", Layer::Dense { inp: d, out: hidden, prelu: true }),
        ("dec.dense1", Layer::Dense { inp: hidden, out: hidden, prelu: true }),
        ("dec.dense2", Layer::Dense { inp: hidden, out: 3 * cfg.base_rows(), prelu: true }),
        ("dec.conv0", Layer::Conv { k: 10, cin: 3, cout: wide, prelu: true }),
        ("dec.conv1", Layer::Conv { k: 50, cin: wide, cout: narrow, prelu: true }),
        ("dec.conv2", Layer::Conv { k: 50, cin: narrow, cout: narrow, prelu: true }),
        ("dec.conv3", Layer::Conv { k: 50, cin: narrow, cout: narrow, prelu: true }),
        ("dec.out", Layer::Conv { k: 50, cin: narrow, cout: 3, prelu: false }),
    ]
}

fn specs_for(plan: &[(&'static str, Layer)], out: &mut Vec<ParamSpec>) {
    let spec = |name: String, shape: Vec<usize>, init| ParamSpec { name, shape, init };
    for &(name, layer) in plan {
        let (wshape, fan_in, width, prelu) = match layer {
            Layer::Conv { k, cin, cout, prelu } => (vec![k, cin, cout], k * cin, cout, prelu),
            Layer::Dense { inp, out, prelu } => (vec![inp, out], inp, out, prelu),
        };
        out.push(spec(format!("{name}.w"), wshape, Init::He { fan_in }));
        out.push(spec(format!("{name}.b"), vec![width], Init::Zero));
        if prelu {
            out.push(spec(format!("{name}.a"), vec![width], Init::Slope));
        }
    }
}

/// Encoder/decoder parameters plus the config that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct Vae<F: Scalar = f32> {
    config: VaeConfig,
    specs: Vec<ParamSpec>,
    params: Vec<Tensor<F>>,
    n_encoder: usize,
}

/// Which labelled shapes to record during a forward pass.
type Trace<'a> = Option<&'a mut Vec<(String, Vec<usize>)>>;

fn record(trace: &mut Trace<'_>, label: impl Into<String>, shape: &[usize]) {
    if let Some(t) = trace.as_mut() {
        t.push((label.into(), shape.to_vec()));
    }
}

impl<F: Scalar> Vae<F> {
    /// Parameter layout for a config, in storage order.
    pub fn layout(cfg: &VaeConfig) -> (Vec<ParamSpec>, usize) {
        let mut specs = Vec::new();
        specs_for(&encoder_plan(cfg), &mut specs);
        let n_encoder = specs.len();
        specs_for(&decoder_plan(cfg), &mut specs);
        (specs, n_encoder)
    }

    /// Fresh parameters: He-normal weights, zero biases, PReLU slopes 0.25.
    pub fn new(cfg: &VaeConfig) -> Result<Self, VaeError> {
        cfg.validate()?;
        let (specs, n_encoder) = Self::layout(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = specs
            .iter()
            .map(|s| {
                let n: usize = s.shape.iter().product();
                let data: Vec<F> = match s.init {
                    Init::Zero => vec![F::zero(); n],
                    Init::Slope => vec![F::of(PRELU_INIT); n],
                    Init::He { fan_in } => {
                        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
                        (0..n).map(|_| F::of(normal.sample(&mut rng))).collect()
                    }
                };
                Tensor::new(s.shape.clone(), data).map_err(VaeError::from)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            config: cfg.clone(),
            specs,
            params,
            n_encoder,
        })
    }

    pub fn config(&self) -> &VaeConfig {
        &self.config
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Tensor<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Same parameters in another precision.
    pub fn cast<G: Scalar>(&self) -> Vae<G> {
        Vae {
            config: self.config.clone(),
            specs: self.specs.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            n_encoder: self.n_encoder,
        }
    }

    /// Puts every parameter on the tape; returns their handles in storage order.
    pub fn bind<'p>(&'p self, tape: &mut Tape<'p, F>) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p)).collect()
    }

    pub fn cloud_tensor(&self, cloud: &PointCloud) -> Result<Tensor<F>, VaeError> {
        if cloud.len() != self.config.n_points {
            return Err(VaeError::PointCount {
                expected: self.config.n_points,
                got: cloud.len(),
            });
        }
        let data = cloud
            .points()
            .iter()
            .flat_map(|p| [p.x, p.y, p.z])
            .map(F::of)
            .collect();
        Ok(Tensor::new(vec![cloud.len(), 3], data)?)
    }

    fn run_plan(
        &self,
        tape: &mut Tape<'_, F>,
        plan: &[(&'static str, Layer)],
        vars: &mut std::slice::Iter<'_, Var>,
        mut h: Var,
        trace: &mut Trace<'_>,
        mut before: impl FnMut(&str, &mut Tape<'_, F>, Var, &mut Trace<'_>) -> Result<Var, VaeError>,
    ) -> Result<Var, VaeError> {
        for &(name, layer) in plan {
            h = before(name, tape, h, trace)?;
            let (w, b) = (*vars.next().unwrap(), *vars.next().unwrap());
            let prelu = match layer {
                Layer::Conv { prelu, .. } => {
                    h = tape.conv1d(h, w, b)?;
                    prelu
                }
                Layer::Dense { prelu, .. } => {
                    h = tape.dense(h, w, b)?;
                    prelu
                }
            };
            if prelu {
                h = tape.prelu(h, *vars.next().unwrap())?;
            }
            record(trace, name, tape.shape(h));
        }
        Ok(h)
    }

    /// Encoder on the tape: pointwise convs, global max pool, dense latent head.
    pub fn encoder_on(
        &self,
        tape: &mut Tape<'_, F>,
        vars: &[Var],
        x: Var,
        mut trace: Trace<'_>,
    ) -> Result<Var, VaeError> {
        record(&mut trace, "input", tape.shape(x));
        let mut it = vars[..self.n_encoder].iter();
        self.run_plan(tape, &encoder_plan(&self.config), &mut it, x, &mut trace, |name, tape, h, trace| {
            if name == "enc.latent" {
                let pooled = tape.global_max_pool(h)?;
                record(trace, "enc.maxpool", tape.shape(pooled));
                Ok(pooled)
            } else {
                Ok(h)
            }
        })
    }

    /// Decoder on the tape: dense stack, reshape to `[base_rows, 3]`,
    /// upsample x2, conv k=10, upsample x5, convs k=50, then trim to
    /// `n_points` rows.
    pub fn decoder_on(
        &self,
        tape: &mut Tape<'_, F>,
        vars: &[Var],
        z: Var,
        mut trace: Trace<'_>,
    ) -> Result<Var, VaeError> {
        let base = self.config.base_rows();
        let mut it = vars[self.n_encoder..].iter();
        let h = self.run_plan(tape, &decoder_plan(&self.config), &mut it, z, &mut trace, |name, tape, h, trace| {
            match name {
                "dec.conv0" => {
                    let r = tape.reshape(h, vec![base, 3])?;
                    record(trace, "dec.reshape", tape.shape(r));
                    let u = tape.upsample_repeat(r, 2)?;
                    record(trace, "dec.upsample2", tape.shape(u));
                    Ok(u)
                }
                "dec.conv1" => {
                    let u = tape.upsample_repeat(h, 5)?;
                    record(trace, "dec.upsample5", tape.shape(u));
                    Ok(u)
                }
                _ => Ok(h),
            }
        })?;
        if base * 10 == self.config.n_points {
            Ok(h)
        } else {
            let t = tape.take_rows(h, self.config.n_points)?;
            record(&mut trace, "dec.trim", tape.shape(t));
            Ok(t)
        }
    }

    /// Latent code of a cloud.
    pub fn encode(&self, cloud: &PointCloud) -> Result<Vec<f64>, VaeError> {
        let x = self.cloud_tensor(cloud)?;
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let xv = tape.input(x, false);
        let z = self.encoder_on(&mut tape, &vars, xv, None)?;
        Ok(tape.value(z).data().iter().map(|v| v.as_f64()).collect())
    }

    /// Reconstructed cloud for a latent code.
    pub fn decode(&self, z: &[f64]) -> Result<PointCloud, VaeError> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let zv = self.latent_input(&mut tape, z)?;
        let out = self.decoder_on(&mut tape, &vars, zv, None)?;
        Ok(tensor_to_cloud(tape.value(out)))
    }

    pub(crate) fn latent_input(&self, tape: &mut Tape<'_, F>, z: &[f64]) -> Result<Var, VaeError> {
        if z.len() != self.config.latent_dim {
            return Err(VaeError::LatentDim {
                expected: self.config.latent_dim,
                got: z.len(),
            });
        }
        let t = Tensor::new(vec![z.len()], z.iter().map(|&v| F::of(v)).collect())?;
        Ok(tape.input(t, false))
    }

    /// Runs encoder and decoder once, returning every labelled layer's
    /// output shape in order.
    pub fn trace_shapes(&self, cloud: &PointCloud) -> Result<Vec<(String, Vec<usize>)>, VaeError> {
        let mut trace = Vec::new();
        let x = self.cloud_tensor(cloud)?;
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let xv = tape.input(x, false);
        let z = self.encoder_on(&mut tape, &vars, xv, Some(&mut trace))?;
        let _ = self.decoder_on(&mut tape, &vars, z, Some(&mut trace))?;
        Ok(trace)
    }
}

pub(crate) fn tensor_to_cloud<F: Scalar>(t: &Tensor<F>) -> PointCloud {
    let pts = t
        .data()
        .chunks_exact(3)
        .map(|c| Point3::new(c[0].as_f64(), c[1].as_f64(), c[2].as_f64()))
        .collect();
    PointCloud::new(pts).expect("decoder output is non-empty and finite")
}

impl Vae<f32> {
    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            config: self.config.clone(),
            tensors: self
                .specs
                .iter()
                .zip(&self.params)
                .map(|(s, p)| (s.name.clone(), p.clone()))
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self, VaeError> {
        ckpt.config.validate()?;
        let (specs, n_encoder) = Self::layout(&ckpt.config);
        if specs.len() != ckpt.tensors.len() {
            return Err(VaeError::Checkpoint(format!(
                "expected {} tensors, found {}",
                specs.len(),
                ckpt.tensors.len()
            )));
        }
        let mut params = Vec::with_capacity(specs.len());
        for (s, (name, t)) in specs.iter().zip(&ckpt.tensors) {
            if &s.name != name || s.shape != t.shape() {
                return Err(VaeError::Checkpoint(format!(
                    "expected {} {:?}, found {name} {:?}",
                    s.name,
                    s.shape,
                    t.shape()
                )));
            }
            params.push(t.clone());
        }
        Ok(Self {
            config: ckpt.config.clone(),
            specs,
            params,
            n_encoder,
        })
    }
}
