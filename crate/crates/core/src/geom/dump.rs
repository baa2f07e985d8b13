//! Flat binary grid dump: three little-endian `u32` dims, then one byte
//! per cell (0 or 1) in row-major `(i, j, k)` order.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::grid::{GridFrame, VoxelGrid};
use crate::error::{Error, Result};

pub fn write_grid<W: Write>(grid: &VoxelGrid, mut w: W) -> Result<()> {
    for d in grid.dims() {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    let bytes: Vec<u8> = grid.occupancy().iter().map(|&b| b as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads a dump; the file carries no placement, so the caller supplies
/// voxel size and origin.
pub fn read_grid<R: Read>(mut r: R, voxel_size: f64, origin: [f64; 3]) -> Result<VoxelGrid> {
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        *d = r.read_u32::<LittleEndian>()? as usize;
    }
    let frame = GridFrame::new(dims, voxel_size, origin)?;
    let mut bytes = vec![0u8; frame.cell_count()];
    r.read_exact(&mut bytes)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after grid payload", rest.len())));
    }
    let occupancy = bytes
        .into_iter()
        .map(|b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("grid byte must be 0 or 1, got {other}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    VoxelGrid::from_occupancy(frame, occupancy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_little_endian_row_major() {
        let frame = GridFrame::new([2, 1, 3], 1.0, [0.0; 3]).unwrap();
        let mut g = VoxelGrid::empty(frame);
        g.set([1, 0, 2], true);
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        assert_eq!(&buf[..12], &[2, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&buf[12..], &[0, 0, 0, 0, 0, 1]);
        assert_eq!(read_grid(&buf[..], 1.0, [0.0; 3]).unwrap(), g);
    }

    #[test]
    fn rejects_bad_payload() {
        let mut buf = vec![1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2];
        assert!(read_grid(&buf[..], 1.0, [0.0; 3]).is_err());
        buf[12] = 1;
        buf.push(0);
        assert!(read_grid(&buf[..], 1.0, [0.0; 3]).is_err());
    }
}
