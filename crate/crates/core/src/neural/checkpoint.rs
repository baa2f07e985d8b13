//! Checkpoint file: magic `SPCK`, `u32` version, `u32` length plus JSON
//! `NetConfig`, then the actor and critic parameters, each as a `u64`
//! count followed by little-endian `f32` values.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::net::{Network, Role};
use super::NetConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SPCK";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub actor: Network,
    pub critic: Network,
}

fn write_params<W: Write>(w: &mut W, params: &[f64]) -> Result<()> {
    w.write_u64::<LittleEndian>(params.len() as u64)?;
    for &p in params {
        let f = p as f32;
        if f as f64 != p {
            return Err(Error::Format("parameter not representable as f32".into()));
        }
        w.write_f32::<LittleEndian>(f)?;
    }
    Ok(())
}

fn read_params<R: Read>(r: &mut R, net: &mut Network) -> Result<()> {
    let n = r.read_u64::<LittleEndian>()? as usize;
    if n != net.n_params() {
        return Err(Error::Format(format!("expected {} parameters, file has {n}", net.n_params())));
    }
    for p in net.params.iter_mut() {
        let v = r.read_f32::<LittleEndian>()?;
        if !v.is_finite() {
            return Err(Error::Format("non-finite parameter".into()));
        }
        *p = v as f64;
    }
    Ok(())
}

impl Checkpoint {
    pub fn new(cfg: &NetConfig) -> Result<Self> {
        Ok(Checkpoint {
            actor: Network::new(cfg, Role::Actor)?,
            critic: Network::new(cfg, Role::Critic)?,
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
        let cfg = serde_json::to_vec(self.actor.config())?;
        w.write_u32::<LittleEndian>(cfg.len() as u32)?;
        w.write_all(&cfg)?;
        write_params(&mut w, &self.actor.params)?;
        write_params(&mut w, &self.critic.params)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
            )));
        }
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        let cfg: NetConfig = serde_json::from_slice(&buf)?;
        let mut ck = Checkpoint::new(&cfg)?;
        read_params(&mut r, &mut ck.actor)?;
        read_params(&mut r, &mut ck.critic)?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = Checkpoint::new(&NetConfig::miniature()).unwrap();
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        let back = Checkpoint::read(&buf[..]).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let ck = Checkpoint::new(&NetConfig::miniature()).unwrap();
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        buf[4] = 99;
        let err = Checkpoint::read(&buf[..]).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
        assert!(Checkpoint::read(&b"nope"[..]).is_err());
    }
}
