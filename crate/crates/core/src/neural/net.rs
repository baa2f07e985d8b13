use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{encode_state, EncodedState, NetConfig, ACTION_DIM, IN_CHANNELS};
use crate::env::{CutAction, ParseState};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Actor,
    Critic,
}

#[derive(Clone, Debug, PartialEq)]
enum Layer {
    /// 3x3 kernel, stride 2, zero padding 1, ReLU.
    Conv {
        cin: usize,
        cout: usize,
        h_in: usize,
        w_in: usize,
        h_out: usize,
        w_out: usize,
        w_off: usize,
        b_off: usize,
    },
    Dense {
        nin: usize,
        nout: usize,
        w_off: usize,
        b_off: usize,
        relu: bool,
    },
}

/// A named contiguous slice of the parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub range: Range<usize>,
}

/// Actor or critic with a flat parameter vector.
///
/// Layout, layer by layer: convolution weights as `[cout][ky][kx][cin]`
/// then the `cout` biases; dense weights as `[out][in]` then the biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    cfg: NetConfig,
    role: Role,
    layers: Vec<Layer>,
    names: Vec<String>,
    pub params: Vec<f64>,
}

/// A batch of network inputs, one row per sample.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub images: Array2<f64>,
    pub extras: Array2<f64>,
    pub actions: Option<Array2<f64>>,
}

impl Inputs {
    pub fn from_encoded(states: &[&EncodedState], actions: Option<&[[f64; ACTION_DIM]]>) -> Self {
        let b = states.len();
        let il = states.first().map_or(0, |s| s.image.len());
        let el = states.first().map_or(0, |s| s.extras.len());
        let mut images = Array2::zeros((b, il));
        let mut extras = Array2::zeros((b, el));
        for (i, s) in states.iter().enumerate() {
            images.row_mut(i).assign(&ArrayView1::from(&s.image[..]));
            extras.row_mut(i).assign(&ArrayView1::from(&s.extras[..]));
        }
        let actions = actions.map(|a| {
            let mut m = Array2::zeros((a.len(), ACTION_DIM));
            for (i, row) in a.iter().enumerate() {
                m.row_mut(i).assign(&ArrayView1::from(&row[..]));
            }
            m
        });
        Inputs { images, extras, actions }
    }

    pub fn with_actions(&self, actions: Array2<f64>) -> Self {
        Inputs {
            images: self.images.clone(),
            extras: self.extras.clone(),
            actions: Some(actions),
        }
    }

    pub fn batch(&self) -> usize {
        self.images.nrows()
    }
}

/// Values saved by [`Network::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    /// Per layer: im2col patches (conv) or the input matrix (dense).
    inputs: Vec<Array2<f64>>,
    /// Per layer: post-activation output.
    outputs: Vec<Array2<f64>>,
    flat: usize,
    extra: usize,
}

fn im2col(x: &[f64], b: usize, h: usize, w: usize, c: usize, ho: usize, wo: usize) -> Array2<f64> {
    let k = 9 * c;
    let mut p = Array2::<f64>::zeros((b * ho * wo, k));
    let ps = p.as_slice_mut().expect("fresh array is contiguous");
    for bi in 0..b {
        for oy in 0..ho {
            for ox in 0..wo {
                let row = ((bi * ho + oy) * wo + ox) * k;
                for ky in 0..3 {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix < 0 || ix as usize >= w {
                            continue;
                        }
                        let src = ((bi * h + iy as usize) * w + ix as usize) * c;
                        let dst = row + (ky * 3 + kx) * c;
                        ps[dst..dst + c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
    }
    p
}

#[allow(clippy::too_many_arguments)]
fn col2im(p: &Array2<f64>, b: usize, h: usize, w: usize, c: usize, ho: usize, wo: usize) -> Array2<f64> {
    let k = 9 * c;
    let mut x = Array2::<f64>::zeros((b, h * w * c));
    let xs = x.as_slice_mut().expect("fresh array is contiguous");
    let p = p.as_standard_layout();
    let ps = p.as_slice().expect("standard layout");
    for bi in 0..b {
        for oy in 0..ho {
            for ox in 0..wo {
                let row = ((bi * ho + oy) * wo + ox) * k;
                for ky in 0..3 {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix < 0 || ix as usize >= w {
                            continue;
                        }
                        let dst = ((bi * h + iy as usize) * w + ix as usize) * c;
                        let src = row + (ky * 3 + kx) * c;
                        for q in 0..c {
                            xs[dst + q] += ps[src + q];
                        }
                    }
                }
            }
        }
    }
    x
}

fn check_finite(m: &Array2<f64>, layer: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer: layer.to_string() })
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Network {
    /// Seeded uniform fan-in initialisation; the output layer starts within
    /// ±3e-3 so initial actions sit near 0.5 and initial Q near 0.
    pub fn new(cfg: &NetConfig, role: Role) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::new();
        let mut names = Vec::new();
        let mut off = 0;
        let (mut h, mut w, mut c) = (cfg.input_h, cfg.input_w, IN_CHANNELS);
        for (i, &cout) in cfg.channels.iter().enumerate() {
            let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
            let w_off = off;
            let b_off = w_off + cout * 9 * c;
            off = b_off + cout;
            layers.push(Layer::Conv {
                cin: c,
                cout,
                h_in: h,
                w_in: w,
                h_out: ho,
                w_out: wo,
                w_off,
                b_off,
            });
            names.push(format!("conv{i}"));
            (h, w, c) = (ho, wo, cout);
        }
        let mut nin = h * w * c + cfg.extra_dim() + if role == Role::Critic { ACTION_DIM } else { 0 };
        let out_dim = if role == Role::Actor { ACTION_DIM } else { 1 };
        let widths: Vec<(usize, bool)> = cfg
            .mlp
            .iter()
            .map(|&m| (m, true))
            .chain(std::iter::once((out_dim, false)))
            .collect();
        for (i, &(nout, relu)) in widths.iter().enumerate() {
            let w_off = off;
            let b_off = w_off + nout * nin;
            off = b_off + nout;
            layers.push(Layer::Dense {
                nin,
                nout,
                w_off,
                b_off,
                relu,
            });
            names.push(if relu { format!("fc{i}") } else { "out".to_string() });
            nin = nout;
        }

        let salt = match role {
            Role::Actor => 0x41,
            Role::Critic => 0x43,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt);
        let mut params = vec![0.0; off];
        let last = layers.len() - 1;
        for (li, layer) in layers.iter().enumerate() {
            let (fan_in, range) = match *layer {
                Layer::Conv { cin, b_off, cout, w_off, .. } => (9 * cin, w_off..b_off + cout),
                Layer::Dense { nin, b_off, nout, w_off, .. } => (nin, w_off..b_off + nout),
            };
            let bound = if li == last { 3e-3 } else { 1.0 / (fan_in as f64).sqrt() };
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound) as f32 as f64;
            }
        }
        Ok(Network {
            cfg: cfg.clone(),
            role,
            layers,
            names,
            params,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Weight and bias groups of every layer, in layout order.
    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter().zip(&self.names) {
            let (w_off, b_off, n_b) = match *layer {
                Layer::Conv { w_off, b_off, cout, .. } => (w_off, b_off, cout),
                Layer::Dense { w_off, b_off, nout, .. } => (w_off, b_off, nout),
            };
            out.push(ParamGroup {
                name: format!("{name}.weight"),
                range: w_off..b_off,
            });
            out.push(ParamGroup {
                name: format!("{name}.bias"),
                range: b_off..b_off + n_b,
            });
        }
        out
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    fn weights(&self, off: usize, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[off..off + rows * cols]).expect("layout")
    }

    fn bias(&self, off: usize, n: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[off..off + n])
    }

    pub fn forward(&self, inp: &Inputs) -> Result<(Array2<f64>, Tape)> {
        let b = inp.batch();
        if inp.images.ncols() != self.cfg.image_len() || inp.extras.ncols() != self.cfg.extra_dim() {
            return Err(Error::DimensionMismatch(format!(
                "inputs {}+{} vs network {}+{}",
                inp.images.ncols(),
                inp.extras.ncols(),
                self.cfg.image_len(),
                self.cfg.extra_dim()
            )));
        }
        match (self.role, &inp.actions) {
            (Role::Critic, None) => return Err(Error::invalid("critic needs actions")),
            (Role::Critic, Some(a)) if a.ncols() != ACTION_DIM || a.nrows() != b => {
                return Err(Error::DimensionMismatch("action batch shape".into()))
            }
            _ => {}
        }
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
            flat: 0,
            extra: inp.extras.ncols(),
        };
        let mut x = inp.images.as_standard_layout().into_owned();
        for (li, layer) in self.layers.iter().enumerate() {
            match *layer {
                Layer::Conv {
                    cin,
                    cout,
                    h_in,
                    w_in,
                    h_out,
                    w_out,
                    w_off,
                    b_off,
                } => {
                    let p = im2col(x.as_slice().expect("standard layout"), b, h_in, w_in, cin, h_out, w_out);
                    let mut y = p.dot(&self.weights(w_off, cout, 9 * cin).t());
                    y += &self.bias(b_off, cout);
                    y.mapv_inplace(|v| v.max(0.0));
                    check_finite(&y, &self.names[li])?;
                    let y = y.into_shape_with_order((b, h_out * w_out * cout)).expect("contiguous");
                    tape.inputs.push(p);
                    tape.outputs.push(y.clone());
                    x = y;
                }
                Layer::Dense {
                    nin,
                    nout,
                    w_off,
                    b_off,
                    relu,
                } => {
                    if tape.flat == 0 {
                        tape.flat = x.ncols();
                        let mut parts = vec![x.view(), inp.extras.view()];
                        if let Some(a) = &inp.actions {
                            if self.role == Role::Critic {
                                parts.push(a.view());
                            }
                        }
                        x = concatenate(Axis(1), &parts).expect("row counts agree");
                    }
                    debug_assert_eq!(x.ncols(), nin);
                    let mut y = x.dot(&self.weights(w_off, nout, nin).t());
                    y += &self.bias(b_off, nout);
                    if relu {
                        y.mapv_inplace(|v| v.max(0.0));
                    } else if self.role == Role::Actor {
                        y.mapv_inplace(sigmoid);
                    }
                    check_finite(&y, &self.names[li])?;
                    tape.inputs.push(x);
                    tape.outputs.push(y.clone());
                    x = y;
                }
            }
        }
        Ok((x, tape))
    }

    /// Gradient of `sum(d_out ⊙ output)` with respect to the parameters,
    /// and for the critic also with respect to the action inputs.
    pub fn backward(&self, tape: &Tape, d_out: &Array2<f64>) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut d_action = None;
        let mut dy = d_out.to_owned();
        for li in (0..self.layers.len()).rev() {
            let y = &tape.outputs[li];
            let x = &tape.inputs[li];
            match self.layers[li] {
                Layer::Dense {
                    nin,
                    nout,
                    w_off,
                    b_off,
                    relu,
                } => {
                    if relu {
                        dy.zip_mut_with(y, |d, &v| {
                            if v <= 0.0 {
                                *d = 0.0
                            }
                        });
                    } else if self.role == Role::Actor {
                        dy.zip_mut_with(y, |d, &v| *d *= v * (1.0 - v));
                    }
                    let dw = dy.t().dot(x);
                    for (g, v) in grad[w_off..w_off + nout * nin].iter_mut().zip(dw.iter()) {
                        *g += v;
                    }
                    for (g, v) in grad[b_off..b_off + nout].iter_mut().zip(dy.sum_axis(Axis(0)).iter()) {
                        *g += v;
                    }
                    let dx = dy.dot(&self.weights(w_off, nout, nin));
                    let first_dense = li == 0 || matches!(self.layers[li - 1], Layer::Conv { .. });
                    if first_dense {
                        if self.role == Role::Critic {
                            let a0 = tape.flat + tape.extra;
                            d_action = Some(dx.slice(s![.., a0..a0 + ACTION_DIM]).to_owned());
                        }
                        dy = dx.slice(s![.., ..tape.flat]).to_owned();
                    } else {
                        dy = dx;
                    }
                }
                Layer::Conv {
                    cin,
                    cout,
                    h_in,
                    w_in,
                    h_out,
                    w_out,
                    w_off,
                    b_off,
                } => {
                    let b = y.nrows();
                    let mut d = dy
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order((b * h_out * w_out, cout))
                        .expect("contiguous");
                    let yy = y.view().into_shape_with_order((b * h_out * w_out, cout)).expect("contiguous");
                    d.zip_mut_with(&yy, |g, &v| {
                        if v <= 0.0 {
                            *g = 0.0
                        }
                    });
                    let dw = d.t().dot(x);
                    for (g, v) in grad[w_off..b_off].iter_mut().zip(dw.iter()) {
                        *g += v;
                    }
                    for (g, v) in grad[b_off..b_off + cout].iter_mut().zip(d.sum_axis(Axis(0)).iter()) {
                        *g += v;
                    }
                    if li > 0 {
                        let dp = d.dot(&self.weights(w_off, cout, 9 * cin));
                        dy = col2im(&dp, b, h_in, w_in, cin, h_out, w_out);
                    }
                }
            }
        }
        Ok((grad, d_action))
    }

    /// Single-sample forward.
    pub fn forward_one(&self, enc: &EncodedState, action: Option<[f64; ACTION_DIM]>) -> Result<Vec<f64>> {
        let acts = action.map(|a| vec![a]);
        let inp = Inputs::from_encoded(&[enc], acts.as_deref());
        Ok(self.forward(&inp)?.0.row(0).to_vec())
    }

    /// The actor's action for a state.
    pub fn act(&self, state: &ParseState, zero_projections: bool) -> Result<CutAction> {
        if self.role != Role::Actor {
            return Err(Error::invalid("only the actor produces actions"));
        }
        let out = self.forward_one(&encode_state(state, &self.cfg, zero_projections), None)?;
        Ok(CutAction::new(out[0], out[1], out[2], out[3], out[4]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_inputs(cfg: &NetConfig, b: usize, with_actions: bool, seed: u64) -> Inputs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = Array2::from_shape_fn((b, cfg.image_len()), |_| rng.gen_range(-1.0..1.0));
        let extras = Array2::from_shape_fn((b, cfg.extra_dim()), |_| rng.gen_range(-1.0..1.0));
        let actions = with_actions.then(|| Array2::from_shape_fn((b, ACTION_DIM), |_| rng.gen_range(0.0..1.0)));
        Inputs { images, extras, actions }
    }

    #[test]
    fn actor_outputs_are_bounded_and_reproducible() {
        let cfg = NetConfig::miniature();
        let net = Network::new(&cfg, Role::Actor).unwrap();
        assert_eq!(net, Network::new(&cfg, Role::Actor).unwrap());
        let inp = random_inputs(&cfg, 4, false, 1);
        let (a, _) = net.forward(&inp).unwrap();
        let (b, _) = net.forward(&inp).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(net.params.iter().all(|&p| p as f32 as f64 == p));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let cfg = NetConfig::miniature();
        let net = Network::new(&cfg, Role::Critic).unwrap();
        let inp = random_inputs(&cfg, 3, true, 2);
        let (_, tape) = net.forward(&inp).unwrap();
        let (g, da) = net.backward(&tape, &Array2::zeros((3, 1))).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(da.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_rows_are_independent() {
        let cfg = NetConfig::miniature();
        let net = Network::new(&cfg, Role::Critic).unwrap();
        let inp = random_inputs(&cfg, 3, true, 3);
        let (q, _) = net.forward(&inp).unwrap();
        for i in 0..3 {
            let one = Inputs {
                images: inp.images.slice(s![i..i + 1, ..]).to_owned(),
                extras: inp.extras.slice(s![i..i + 1, ..]).to_owned(),
                actions: Some(inp.actions.as_ref().unwrap().slice(s![i..i + 1, ..]).to_owned()),
            };
            let (qi, _) = net.forward(&one).unwrap();
            assert!((qi[[0, 0]] - q[[i, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn groups_tile_the_parameter_vector() {
        for role in [Role::Actor, Role::Critic] {
            let net = Network::new(&NetConfig::default(), role).unwrap();
            let groups = net.param_groups();
            assert_eq!(groups[0].range.start, 0);
            for w in groups.windows(2) {
                assert_eq!(w[0].range.end, w[1].range.start);
            }
            assert_eq!(groups.last().unwrap().range.end, net.n_params());
        }
    }

    #[test]
    fn critic_needs_actions() {
        let cfg = NetConfig::miniature();
        let net = Network::new(&cfg, Role::Critic).unwrap();
        assert!(net.forward(&random_inputs(&cfg, 2, false, 4)).is_err());
    }
}
