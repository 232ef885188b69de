//! Checkpoint file: `"FLCK" | u32 version | u64 K | u64 k0 | u64 K_psi |
//! f64 t | K_psi^2 complex values`, column-major global order, all
//! little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use super::{gather_full, scatter_full, Layout, SpectralField};
use crate::comm::Communicator;
use crate::error::{Error, Result};
use crate::scalar::{czero, Scalar};

const MAGIC: [u8; 4] = *b"FLCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub k: u64,
    pub k0: u64,
    pub n_psi: u64,
    pub t: f64,
    /// Column-major global array.
    pub data: Vec<Complex<f64>>,
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let n = ck.n_psi as usize;
    if ck.data.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, actual: ck.data.len() });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |b: &[u8]| w.write_all(b).map_err(|e| Error::io(path, e));
    put(&MAGIC)?;
    put(&VERSION.to_le_bytes())?;
    put(&ck.k.to_le_bytes())?;
    put(&ck.k0.to_le_bytes())?;
    put(&ck.n_psi.to_le_bytes())?;
    put(&ck.t.to_le_bytes())?;
    for v in &ck.data {
        put(&v.re.to_le_bytes())?;
        put(&v.im.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut buf8 = [0u8; 8];
    let mut take8 = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut buf8).map_err(|e| Error::io(path, e))?;
        Ok(buf8)
    };
    let mut head = [0u8; 8];
    r.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
    if head[..4] != MAGIC {
        return Err(Error::Checkpoint(format!("{}: bad magic", path.display())));
    }
    let version = u32::from_le_bytes(head[4..].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("{}: unsupported version {version}", path.display())));
    }
    let k = u64::from_le_bytes(take8(&mut r)?);
    let k0 = u64::from_le_bytes(take8(&mut r)?);
    let n_psi = u64::from_le_bytes(take8(&mut r)?);
    let t = f64::from_le_bytes(take8(&mut r)?);
    if n_psi != 4 * k + k0 + 1 {
        return Err(Error::Checkpoint(format!("{}: K_psi {n_psi} != 4K + k0 + 1", path.display())));
    }
    let n = n_psi as usize;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    if raw.len() != n * n * 16 {
        return Err(Error::Checkpoint(format!(
            "{}: expected {} data bytes, found {}",
            path.display(),
            n * n * 16,
            raw.len()
        )));
    }
    let data = raw
        .chunks_exact(16)
        .map(|c| {
            Complex::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(Checkpoint { k, k0, n_psi, t, data })
}

/// Gathers `f` to rank 0 and writes it there. Collective; a write failure
/// on rank 0 is reported on every rank.
pub fn save_checkpoint<T: Scalar>(comm: &mut Communicator, f: &SpectralField<T>, t: T, path: &Path) -> Result<()> {
    let gathered = gather_full(comm, f)?;
    let mut outcome = Ok(());
    if let Some(global) = gathered {
        let layout = f.layout();
        let ck = Checkpoint {
            k: layout.k() as u64,
            k0: layout.k0() as u64,
            n_psi: layout.n_psi() as u64,
            t: t.to_f64_lossy(),
            data: global.iter().map(|v| Complex::new(v.re.to_f64_lossy(), v.im.to_f64_lossy())).collect(),
        };
        outcome = write_checkpoint(path, &ck);
    }
    let ok = comm.agree(0, outcome.is_ok())?;
    match outcome {
        Err(e) => Err(e),
        Ok(()) if !ok => Err(Error::Checkpoint("rank 0 failed to write checkpoint".into())),
        Ok(()) => Ok(()),
    }
}

/// Reads a checkpoint on rank 0 and scatters it into `layout`.
///
/// The stored `K` must equal `layout.k()`. When the stored `K_psi` differs
/// (a different rank count forced another padding), the retained band
/// `|k| <= K` is carried over and the padding is zero.
pub fn load_checkpoint<T: Scalar>(
    comm: &mut Communicator,
    layout: Layout,
    path: &Path,
) -> Result<(SpectralField<T>, T)> {
    let mut outcome: Result<(Vec<Complex<T>>, f64)> = Err(Error::Checkpoint("not rank 0".into()));
    if comm.rank() == 0 {
        outcome = read_checkpoint(path).and_then(|ck| {
            if ck.k as usize != layout.k() {
                return Err(Error::Checkpoint(format!("checkpoint K = {}, run K = {}", ck.k, layout.k())));
            }
            let data = regrid::<T>(&ck, &layout);
            Ok((data, ck.t))
        });
    }
    let ok = comm.agree(0, comm.rank() != 0 || outcome.is_ok())?;
    if !ok {
        return Err(match outcome {
            Err(e) if comm.rank() == 0 => e,
            _ => Error::Checkpoint("rank 0 failed to read checkpoint".into()),
        });
    }
    let (global, t) = match outcome {
        Ok((d, t)) => (Some(d), t),
        Err(_) => (None, 0.0),
    };
    let t_bytes = comm.broadcast(0, t.to_le_bytes().to_vec())?;
    let t = f64::from_le_bytes(t_bytes[..8].try_into().map_err(|_| Error::Checkpoint("bad time broadcast".into()))?);
    let field = scatter_full(comm, layout, global.as_deref())?;
    Ok((field, T::from_f64_lossy(t)))
}

fn regrid<T: Scalar>(ck: &Checkpoint, layout: &Layout) -> Vec<Complex<T>> {
    let conv = |v: Complex<f64>| Complex::new(T::from_f64_lossy(v.re), T::from_f64_lossy(v.im));
    if ck.n_psi as usize == layout.n_psi() {
        return ck.data.iter().copied().map(conv).collect();
    }
    let src_n = ck.n_psi as usize;
    let dst_n = layout.n_psi();
    let k = layout.k() as i64;
    let off = 2 * k;
    let mut out = vec![czero(); dst_n * dst_n];
    for k2 in -k..=k {
        for k1 in -k..=k {
            let (i, j) = ((k1 + off) as usize, (k2 + off) as usize);
            out[j * dst_n + i] = conv(ck.data[j * src_n + i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("flame-ck-{}-{name}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join("ck.flck")
    }

    #[test]
    fn header_bytes() {
        let ck = Checkpoint { k: 1, k0: 0, n_psi: 5, t: 200.0, data: vec![Complex::new(1.0, -1.0); 25] };
        let p = tmp("header");
        write_checkpoint(&p, &ck).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"FLCK");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &0u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &5u64.to_le_bytes());
        assert_eq!(&bytes[32..40], &200.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 40 + 25 * 16);
        assert_eq!(read_checkpoint(&p).unwrap(), ck);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let ck = Checkpoint { k: 1, k0: 0, n_psi: 5, t: 1.0, data: vec![Complex::new(0.0, 0.0); 25] };
        let p = tmp("trunc");
        write_checkpoint(&p, &ck).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_checkpoint(&p), Err(Error::Checkpoint(_))));
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_checkpoint(&p), Err(Error::Checkpoint(_))));
    }
}
