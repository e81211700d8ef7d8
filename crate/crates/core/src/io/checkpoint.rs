use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scene::Aabb;
use crate::sdf::{AdamState, NetworkConfig, SdfNetwork};

const MAGIC: &[u8; 8] = b"TPOLCKPT";
const VERSION: u32 = 1;

/// Versioned binary checkpoint: architecture header (incl. the scene
/// bounding box needed for mesh extraction), 32-bit parameters, and the
/// optional Adam state.
pub fn write_checkpoint(
    path: &Path,
    net: &SdfNetwork<f32>,
    bbox: &Aabb,
    adam: Option<&AdamState<f32>>,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| super::pfm::annotate(path, &e))?,
    );
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let cfg = net.config();
    for v in [
        cfg.width as u32,
        cfg.hidden_layers as u32,
        cfg.skip_layer as u32,
        cfg.frequencies as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&cfg.softplus_beta.to_le_bytes())?;
    w.write_all(&cfg.init_radius.to_le_bytes())?;
    for v in [bbox.min, bbox.max] {
        for c in 0..3 {
            w.write_all(&v[c].to_le_bytes())?;
        }
    }
    w.write_all(&(net.params().len() as u32).to_le_bytes())?;
    for p in net.params() {
        w.write_all(&(p.nrows() as u32).to_le_bytes())?;
        w.write_all(&(p.ncols() as u32).to_le_bytes())?;
    }
    for p in net.params() {
        for v in p.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    match adam {
        None => w.write_all(&[0u8])?,
        Some(state) => {
            w.write_all(&[1u8])?;
            let (step, m, v) = state.flatten();
            w.write_all(&step.to_le_bytes())?;
            w.write_all(&state.lr.to_le_bytes())?;
            for x in m.iter().chain(v.iter()) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub struct Checkpoint {
    pub net: SdfNetwork<f32>,
    pub bbox: Aabb,
    pub adam: Option<AdamState<f32>>,
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = std::io::BufReader::new(
        std::fs::File::open(path).map_err(|e| super::pfm::annotate(path, &e))?,
    );
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor::new(path, &bytes);

    if cur.take(8)? != MAGIC {
        return Err(Error::Parse(format!(
            "{}: not a checkpoint file",
            path.display()
        )));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Parse(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let width = cur.u32()? as usize;
    let hidden_layers = cur.u32()? as usize;
    let skip_layer = cur.u32()? as usize;
    let frequencies = cur.u32()? as usize;
    let softplus_beta = cur.f64()?;
    let init_radius = cur.f64()?;
    let bbox = Aabb::new(
        nalgebra::Vector3::new(cur.f64()?, cur.f64()?, cur.f64()?),
        nalgebra::Vector3::new(cur.f64()?, cur.f64()?, cur.f64()?),
    );
    let cfg = NetworkConfig {
        width,
        hidden_layers,
        skip_layer,
        frequencies,
        softplus_beta,
        init_radius,
    };
    let count = cur.u32()? as usize;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        shapes.push((rows, cols));
    }
    let mut params = Vec::with_capacity(count);
    for &(rows, cols) in &shapes {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(cur.f32()?);
        }
        params.push(
            Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
        );
    }
    let net = SdfNetwork::from_params(cfg, params)?;
    let adam = match cur.u8()? {
        0 => None,
        1 => {
            let step = cur.u64()?;
            let lr = cur.f32()?;
            let total: usize = net.params().iter().map(|p| p.len()).sum();
            let mut m = Vec::with_capacity(total);
            for _ in 0..total {
                m.push(cur.f32()?);
            }
            let mut v = Vec::with_capacity(total);
            for _ in 0..total {
                v.push(cur.f32()?);
            }
            Some(AdamState::restore(net.params(), lr, step, &m, &v)?)
        }
        other => {
            return Err(Error::Parse(format!(
                "{}: bad adam flag {other}",
                path.display()
            )))
        }
    };
    Ok(Checkpoint { net, bbox, adam })
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self {
            path,
            bytes,
            pos: 0,
        }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Parse(format!(
                "{}: checkpoint truncated at byte {}",
                self.path.display(),
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
