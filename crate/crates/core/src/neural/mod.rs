//! Actor and critic networks: two stride-2 convolutions over the three
//! silhouettes plus two coordinate channels, then an MLP that also receives
//! the corner lists, the step fraction and (for the critic) the action.
//!
//! Parameters live in a flat `f64` vector whose values are always exactly
//! representable as `f32`, so checkpoints store them losslessly in 32 bits.

mod checkpoint;
pub mod gradcheck;
mod net;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use net::{Inputs, Network, ParamGroup, Role, Tape};

use serde::{Deserialize, Serialize};

use crate::env::{ParseState, CORNER_SENTINEL};
use crate::error::{Error, Result};
use crate::geom::Mask2D;

/// Three silhouettes plus row and column coordinate channels.
pub const IN_CHANNELS: usize = 5;
pub const ACTION_DIM: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub input_h: usize,
    pub input_w: usize,
    /// Output channels of the stride-2 convolutions.
    pub channels: Vec<usize>,
    /// Hidden widths of the MLP.
    pub mlp: Vec<usize>,
    pub max_corners: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            input_h: 32,
            input_w: 32,
            channels: vec![8, 16],
            mlp: vec![256, 128],
            max_corners: 32,
            seed: 0,
        }
    }
}

impl NetConfig {
    /// The small configuration used for gradient checks.
    pub fn miniature() -> Self {
        NetConfig {
            input_h: 8,
            input_w: 8,
            channels: vec![4, 4],
            mlp: vec![16, 8],
            max_corners: 2,
            seed: 7,
        }
    }

    pub fn corner_feature_dim(&self) -> usize {
        3 * self.max_corners * 2
    }

    /// Corner features plus the step fraction.
    pub fn extra_dim(&self) -> usize {
        self.corner_feature_dim() + 1
    }

    pub fn image_len(&self) -> usize {
        self.input_h * self.input_w * IN_CHANNELS
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_h == 0 || self.input_w == 0 || self.max_corners == 0 {
            return Err(Error::invalid("input size and max_corners must be >= 1"));
        }
        if self.channels.iter().chain(&self.mlp).any(|&w| w == 0) {
            return Err(Error::invalid("all layer widths must be >= 1"));
        }
        Ok(())
    }
}

/// Network input for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedState {
    /// `input_h x input_w x IN_CHANNELS`, channels fastest.
    pub image: Vec<f64>,
    pub extras: Vec<f64>,
}

/// Source-pixel weights for area-averaging `src` samples into `dst` bins.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (a, b) = (i as f64 * scale, (i + 1) as f64 * scale);
            let mut w = Vec::new();
            let mut s = a.floor() as usize;
            while (s as f64) < b && s < src {
                let overlap = (b.min((s + 1) as f64) - a.max(s as f64)).max(0.0);
                if overlap > 0.0 {
                    w.push((s, overlap / scale));
                }
                s += 1;
            }
            w
        })
        .collect()
}

/// Area-averaged resampling of a mask to `h x w`.
pub fn downsample(mask: &Mask2D, h: usize, w: usize) -> Vec<f64> {
    let wr = area_weights(mask.rows(), h);
    let wc = area_weights(mask.cols(), w);
    let mut out = vec![0.0; h * w];
    for (i, rows) in wr.iter().enumerate() {
        for (j, cols) in wc.iter().enumerate() {
            let mut v = 0.0;
            for &(r, a) in rows {
                for &(c, b) in cols {
                    if mask.get(r, c) {
                        v += a * b;
                    }
                }
            }
            out[i * w + j] = v;
        }
    }
    out
}

fn coord(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    }
}

/// Builds the network input. With `zero_projections` the silhouette
/// channels are all zero (the no-projection baseline).
pub fn encode_state(state: &ParseState, cfg: &NetConfig, zero_projections: bool) -> EncodedState {
    let (h, w) = (cfg.input_h, cfg.input_w);
    let mut image = vec![0.0; h * w * IN_CHANNELS];
    if !zero_projections {
        for (v, p) in state.projections.iter().enumerate() {
            for (k, val) in downsample(&p.mask, h, w).into_iter().enumerate() {
                image[k * IN_CHANNELS + v] = val;
            }
        }
    }
    for i in 0..h {
        for j in 0..w {
            let k = (i * w + j) * IN_CHANNELS;
            image[k + 3] = coord(i, h);
            image[k + 4] = coord(j, w);
        }
    }
    let lists = state.corner_lists();
    let mut extras = Vec::with_capacity(cfg.extra_dim());
    for list in &lists {
        for k in 0..cfg.max_corners {
            let (r, c) = list.get(k).copied().unwrap_or(CORNER_SENTINEL);
            extras.push(r);
            extras.push(c);
        }
    }
    extras.push(state.step_fraction());
    EncodedState { image, extras }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;
    use crate::geom::{GridFrame, VoxelGrid};

    #[test]
    fn full_projections_give_constant_channels() {
        let g = VoxelGrid::full(GridFrame::unit(16));
        let s = ParseState::of_region(&g, 3, &EnvConfig::default()).unwrap();
        let cfg = NetConfig {
            input_h: 8,
            input_w: 8,
            ..NetConfig::default()
        };
        let e = encode_state(&s, &cfg, false);
        for k in 0..64 {
            for v in 0..3 {
                assert_eq!(e.image[k * 5 + v], 1.0);
            }
        }
        assert_eq!(e.extras.len(), cfg.extra_dim());
        assert!((e.extras.last().unwrap() - 0.3).abs() < 1e-12);
        let z = encode_state(&s, &cfg, true);
        assert!((0..64).all(|k| z.image[k * 5] == 0.0));
        // Coordinate channels do not depend on the input.
        for k in 0..64 {
            assert_eq!(z.image[k * 5 + 3], e.image[k * 5 + 3]);
            assert_eq!(z.image[k * 5 + 4], e.image[k * 5 + 4]);
        }
        assert_eq!(e.image[3], -1.0);
        assert_eq!(e.image[63 * 5 + 4], 1.0);
    }

    #[test]
    fn checkerboard_averages_to_half() {
        let m = Mask2D::from_fn(16, 16, |r, c| (r + c) % 2 == 0);
        assert!(downsample(&m, 8, 8).iter().all(|&v| (v - 0.5).abs() < 1e-12));
        // Non-integer ratio keeps the mean.
        let d = downsample(&m, 5, 3);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        assert!((mean - 0.5).abs() < 0.05);
        let ones = downsample(&Mask2D::filled(7, 9, true), 3, 4);
        assert!(ones.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }
}
