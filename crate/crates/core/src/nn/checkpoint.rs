//! Binary model checkpoints: a small header (layer dims, activations)
//! followed by row-major little-endian f64 parameter blocks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::{Activation, DenseLayer, MlpParams};

const MAGIC: &[u8; 8] = b"ESMODEL1";

pub fn write_model<W: Write>(p: &MlpParams, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(p.layers.len() as u32).to_le_bytes())?;
    for layer in &p.layers {
        w.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
        w.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        let act: u8 = match layer.activation {
            Activation::ReLU => 0,
            Activation::Identity => 1,
        };
        w.write_all(&[act])?;
    }
    for layer in &p.layers {
        for &v in layer.weights.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in layer.bias.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<MlpParams> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not an envshift model file".into()));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let n_layers = u32::from_le_bytes(u32buf) as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::Parse(format!("implausible layer count {n_layers}")));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        r.read_exact(&mut u32buf)?;
        let out = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let inp = u32::from_le_bytes(u32buf) as usize;
        let mut act = [0u8; 1];
        r.read_exact(&mut act)?;
        let activation = match act[0] {
            0 => Activation::ReLU,
            1 => Activation::Identity,
            other => return Err(Error::Parse(format!("unknown activation tag {other}"))),
        };
        shapes.push((out, inp, activation));
    }
    let mut f64buf = [0u8; 8];
    let mut read_f64 = |r: &mut R| -> Result<f64> {
        r.read_exact(&mut f64buf)?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let mut layers = Vec::with_capacity(n_layers);
    for &(out, inp, activation) in &shapes {
        let mut weights = Array2::zeros((out, inp));
        for v in weights.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let mut bias = Array1::zeros(out);
        for v in bias.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        layers.push(DenseLayer { weights, bias, activation });
    }
    // Consecutive dims must chain.
    for w in layers.windows(2) {
        if w[0].out_dim() != w[1].in_dim() {
            return Err(Error::Parse(format!(
                "layer dims do not chain: {} -> {}",
                w[0].out_dim(),
                w[1].in_dim()
            )));
        }
    }
    Ok(MlpParams { layers })
}

pub fn save_model(p: &MlpParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(p, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpParams> {
    read_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let p = MlpParams::random(
            &[6, 4, 2],
            &[Activation::ReLU, Activation::Identity],
            &RngHandle::new(11),
        );
        let mut buf = Vec::new();
        write_model(&p, &mut buf).unwrap();
        let q = read_model(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        let mut buf2 = Vec::new();
        write_model(&q, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn rejects_foreign_bytes() {
        assert!(read_model(&b"not a model at all"[..]).is_err());
    }
}
