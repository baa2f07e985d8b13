//! Transitions, replay buffers and their binary formats.
//!
//! A replay file is `SPRB`, `u32` version, `u64` record count, records. A
//! demonstration file is `SPDM`, `u32` version, `u32` demo count, then per
//! demo its shape name, return, metrics and transition records in the same
//! record encoding. All integers and floats are little-endian.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corners::{Corner, CornerSet};
use crate::env::{CutAction, EpisodeMetrics, ParseState};
use crate::error::{Error, Result};
use crate::expert::Demonstration;
use crate::geom::{Mask2D, ProjectionImage, View};

pub const REPLAY_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Arc<ParseState>,
    pub action: CutAction,
    pub reward: f64,
    pub next_state: Arc<ParseState>,
    pub done: bool,
    /// The expert's action in `state`; always present in demonstrations.
    pub expert_action: Option<CutAction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BufferKind {
    Demo,
    Agent,
}

/// Bounded store. Agent buffers evict the oldest item when full; demo
/// buffers refuse new items instead.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    pub kind: BufferKind,
    pub capacity: usize,
    items: VecDeque<T>,
    inserted: u64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(kind: BufferKind, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be >= 1"));
        }
        Ok(ReplayBuffer {
            kind,
            capacity,
            items: VecDeque::new(),
            inserted: 0,
        })
    }

    /// Returns false when a full demo buffer rejected the item.
    pub fn push(&mut self, item: T) -> bool {
        if self.items.len() == self.capacity {
            match self.kind {
                BufferKind::Demo => return false,
                BufferKind::Agent => {
                    self.items.pop_front();
                }
            }
        }
        self.items.push_back(item);
        self.inserted += 1;
        true
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total number of successful insertions.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    pub fn retain(&mut self, f: impl FnMut(&T) -> bool) {
        self.items.retain(f);
    }

    /// `n` distinct items chosen uniformly.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<&T>> {
        if n > self.items.len() {
            return Err(Error::invalid(format!("cannot sample {n} from {} items", self.items.len())));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

fn write_mask<W: Write>(w: &mut W, m: &Mask2D) -> Result<()> {
    w.write_u32::<LittleEndian>(m.rows() as u32)?;
    w.write_u32::<LittleEndian>(m.cols() as u32)?;
    let mut bytes = vec![0u8; m.as_slice().len().div_ceil(8)];
    for (i, &b) in m.as_slice().iter().enumerate() {
        if b {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_mask<R: Read>(r: &mut R) -> Result<Mask2D> {
    let rows = r.read_u32::<LittleEndian>()? as usize;
    let cols = r.read_u32::<LittleEndian>()? as usize;
    if rows.saturating_mul(cols) > 1 << 24 {
        return Err(Error::Format(format!("mask {rows}x{cols} too large")));
    }
    let mut bytes = vec![0u8; (rows * cols).div_ceil(8)];
    r.read_exact(&mut bytes)?;
    let data = (0..rows * cols).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect();
    Mask2D::from_vec(rows, cols, data).ok_or_else(|| Error::Format("mask size".into()))
}

pub fn write_state<W: Write>(w: &mut W, s: &ParseState) -> Result<()> {
    for p in &s.projections {
        write_mask(w, &p.mask)?;
    }
    for set in &s.corners {
        w.write_u32::<LittleEndian>(set.points.len() as u32)?;
        for c in &set.points {
            w.write_u32::<LittleEndian>(c.row as u32)?;
            w.write_u32::<LittleEndian>(c.col as u32)?;
            w.write_f64::<LittleEndian>(c.response)?;
        }
    }
    w.write_u32::<LittleEndian>(s.step_index as u32)?;
    w.write_u32::<LittleEndian>(s.max_steps as u32)?;
    w.write_u32::<LittleEndian>(s.max_corners as u32)?;
    Ok(())
}

pub fn read_state<R: Read>(r: &mut R) -> Result<ParseState> {
    let mut masks = Vec::with_capacity(3);
    for _ in 0..3 {
        masks.push(read_mask(r)?);
    }
    let projections: [ProjectionImage; 3] = std::array::from_fn(|v| ProjectionImage {
        view: View::ALL[v],
        mask: masks[v].clone(),
    });
    let mut sets = Vec::with_capacity(3);
    for (v, m) in masks.iter().enumerate() {
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut set = CornerSet::empty(View::ALL[v], m.rows(), m.cols());
        for _ in 0..n {
            let row = r.read_u32::<LittleEndian>()? as usize;
            let col = r.read_u32::<LittleEndian>()? as usize;
            let response = r.read_f64::<LittleEndian>()?;
            if row >= m.rows() || col >= m.cols() {
                return Err(Error::Format("corner outside its image".into()));
            }
            set.points.push(Corner { row, col, response });
        }
        sets.push(set);
    }
    let corners: [CornerSet; 3] = sets.try_into().expect("three sets");
    let step_index = r.read_u32::<LittleEndian>()? as usize;
    let max_steps = r.read_u32::<LittleEndian>()? as usize;
    let max_corners = r.read_u32::<LittleEndian>()? as usize;
    Ok(ParseState {
        projections,
        corners,
        step_index,
        max_steps,
        max_corners,
    })
}

fn write_action<W: Write>(w: &mut W, a: &CutAction) -> Result<()> {
    for v in a.to_array() {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_action<R: Read>(r: &mut R) -> Result<CutAction> {
    let mut a = [0.0; 5];
    for v in a.iter_mut() {
        *v = r.read_f64::<LittleEndian>()?;
    }
    Ok(CutAction::from_array(a))
}

pub fn write_transition<W: Write>(w: &mut W, t: &Transition) -> Result<()> {
    write_state(w, &t.state)?;
    write_action(w, &t.action)?;
    w.write_f64::<LittleEndian>(t.reward)?;
    write_state(w, &t.next_state)?;
    w.write_u8(t.done as u8)?;
    match &t.expert_action {
        Some(a) => {
            w.write_u8(1)?;
            write_action(w, a)?;
        }
        None => w.write_u8(0)?,
    }
    Ok(())
}

pub fn read_transition<R: Read>(r: &mut R) -> Result<Transition> {
    let state = Arc::new(read_state(r)?);
    let action = read_action(r)?;
    let reward = r.read_f64::<LittleEndian>()?;
    let next_state = Arc::new(read_state(r)?);
    let done = r.read_u8()? != 0;
    let expert_action = match r.read_u8()? {
        0 => None,
        1 => Some(read_action(r)?),
        b => return Err(Error::Format(format!("bad expert flag {b}"))),
    };
    Ok(Transition {
        state,
        action,
        reward,
        next_state,
        done,
        expert_action,
    })
}

fn check_header<R: Read>(r: &mut R, magic: &[u8; 4], what: &str) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!("not a {what} file")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != REPLAY_VERSION {
        return Err(Error::Format(format!("{what} version {version} unsupported (expected {REPLAY_VERSION})")));
    }
    Ok(())
}

pub fn write_transitions<W: Write>(mut w: W, ts: &[Transition]) -> Result<()> {
    w.write_all(b"SPRB")?;
    w.write_u32::<LittleEndian>(REPLAY_VERSION)?;
    w.write_u64::<LittleEndian>(ts.len() as u64)?;
    for t in ts {
        write_transition(&mut w, t)?;
    }
    Ok(())
}

pub fn read_transitions<R: Read>(mut r: R) -> Result<Vec<Transition>> {
    check_header(&mut r, b"SPRB", "replay")?;
    let n = r.read_u64::<LittleEndian>()?;
    (0..n).map(|_| read_transition(&mut r)).collect()
}

pub fn write_demonstrations<W: Write>(mut w: W, demos: &[Demonstration]) -> Result<()> {
    w.write_all(b"SPDM")?;
    w.write_u32::<LittleEndian>(REPLAY_VERSION)?;
    w.write_u32::<LittleEndian>(demos.len() as u32)?;
    for d in demos {
        w.write_u32::<LittleEndian>(d.shape.len() as u32)?;
        w.write_all(d.shape.as_bytes())?;
        w.write_f64::<LittleEndian>(d.total_return)?;
        w.write_f64::<LittleEndian>(d.metrics.surface_iou)?;
        w.write_f64::<LittleEndian>(d.metrics.chamfer_l1.unwrap_or(f64::NAN))?;
        w.write_u32::<LittleEndian>(d.metrics.parts as u32)?;
        w.write_u32::<LittleEndian>(d.metrics.steps as u32)?;
        w.write_u64::<LittleEndian>(d.transitions.len() as u64)?;
        for t in &d.transitions {
            write_transition(&mut w, t)?;
        }
    }
    Ok(())
}

pub fn read_demonstrations<R: Read>(mut r: R) -> Result<Vec<Demonstration>> {
    check_header(&mut r, b"SPDM", "demonstration")?;
    let n = r.read_u32::<LittleEndian>()?;
    let mut out = Vec::new();
    for _ in 0..n {
        let len = r.read_u32::<LittleEndian>()? as usize;
        if len > 4096 {
            return Err(Error::Format("shape name too long".into()));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let shape = String::from_utf8(name).map_err(|_| Error::Format("shape name is not UTF-8".into()))?;
        let total_return = r.read_f64::<LittleEndian>()?;
        let surface_iou = r.read_f64::<LittleEndian>()?;
        let chamfer = r.read_f64::<LittleEndian>()?;
        let parts = r.read_u32::<LittleEndian>()? as usize;
        let steps = r.read_u32::<LittleEndian>()? as usize;
        let nt = r.read_u64::<LittleEndian>()?;
        let transitions = (0..nt).map(|_| read_transition(&mut r)).collect::<Result<Vec<_>>>()?;
        if transitions.iter().any(|t| t.expert_action.is_none()) {
            return Err(Error::Format("demonstration transition without expert action".into()));
        }
        out.push(Demonstration {
            shape,
            transitions,
            total_return,
            metrics: EpisodeMetrics {
                surface_iou,
                chamfer_l1: (!chamfer.is_nan()).then_some(chamfer),
                parts,
                steps,
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agent_buffer_evicts_fifo_and_demo_buffer_refuses() {
        let mut a = ReplayBuffer::new(BufferKind::Agent, 3).unwrap();
        for i in 0..5 {
            assert!(a.push(i));
        }
        assert_eq!(a.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(a.inserted(), 5);
        let mut d = ReplayBuffer::new(BufferKind::Demo, 2).unwrap();
        assert!(d.push(0) && d.push(1));
        assert!(!d.push(2));
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn sampling_is_distinct_and_bounded() {
        let mut b = ReplayBuffer::new(BufferKind::Agent, 10).unwrap();
        for i in 0..10 {
            b.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s: Vec<i32> = b.sample(10, &mut rng).unwrap().into_iter().copied().collect();
        s.sort();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
        assert!(b.sample(11, &mut rng).is_err());
    }
}
