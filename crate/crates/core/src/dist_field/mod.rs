//! Distributed spectral array: layout, global transposes, Hermitian
//! symmetrization, gather/scatter and checkpoints.

mod checkpoint;
mod field;
mod layout;

use num_complex::Complex;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use field::{Band, Orientation, SpectralField};
pub use layout::{is_five_smooth, Layout};

use crate::comm::Communicator;
use crate::error::{Error, Result};
use crate::scalar::{decode_complex, encode_complex, Scalar};

/// How the global transpose moves data between ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransposeStrategy {
    /// Reshape into per-destination blocks and exchange with one all-to-all.
    #[default]
    AllToAll,
    /// Every rank in turn gathers the blocks it is missing.
    Gather,
}

impl std::str::FromStr for TransposeStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "alltoall" => Ok(TransposeStrategy::AllToAll),
            "gather" => Ok(TransposeStrategy::Gather),
            other => Err(format!("unknown transpose strategy `{other}` (alltoall|gather)")),
        }
    }
}

impl std::fmt::Display for TransposeStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransposeStrategy::AllToAll => "alltoall",
            TransposeStrategy::Gather => "gather",
        })
    }
}

const SYMMETRIZE_TAG: u32 = 0x4000_0000;

fn check_group<T: Scalar>(comm: &Communicator, f: &SpectralField<T>) -> Result<()> {
    if comm.size() != f.layout().n_ranks() || comm.rank() != f.rank() {
        return Err(Error::InvalidParameter(format!(
            "field for rank {}/{} used on rank {}/{}",
            f.rank(),
            f.layout().n_ranks(),
            comm.rank(),
            comm.size()
        )));
    }
    Ok(())
}

/// The `K_p x K_p` sub-block of `f` destined for rank `dest`, stored
/// line-major in `f`'s local line order.
fn outgoing_block<T: Scalar>(f: &SpectralField<T>, dest: usize) -> Vec<Complex<T>> {
    let kp = f.layout().k_p();
    let start = dest * kp;
    let mut block = Vec::with_capacity(kp * kp);
    for l in 0..kp {
        block.extend_from_slice(&f.line(l)[start..start + kp]);
    }
    block
}

/// Places the block received from `src` into the flipped local lines.
fn place_block<T: Scalar>(out: &mut [Complex<T>], n: usize, kp: usize, src: usize, block: &[Complex<T>]) {
    for jl in 0..kp {
        for il in 0..kp {
            out[il * n + src * kp + jl] = block[jl * kp + il];
        }
    }
}

fn local_transpose<T: Scalar>(f: &SpectralField<T>) -> SpectralField<T> {
    let n = f.layout().n_psi();
    let mut out = vec![crate::scalar::czero(); n * n];
    for (j, line) in f.local().chunks_exact(n).enumerate() {
        for (i, &v) in line.iter().enumerate() {
            out[i * n + j] = v;
        }
    }
    SpectralField::from_lines(*f.layout(), f.rank(), f.orientation().flipped(), out)
}

fn decode_block<T: Scalar>(bytes: &[u8], kp: usize) -> Result<Vec<Complex<T>>> {
    let block = decode_complex::<T>(bytes)
        .ok_or(Error::DimensionMismatch { expected: kp * kp * 16, actual: bytes.len() })?;
    if block.len() != kp * kp {
        return Err(Error::DimensionMismatch { expected: kp * kp, actual: block.len() });
    }
    Ok(block)
}

/// Redistributes `f` between column and row ownership.
///
/// The local `K_psi x K_p` lines are cut into `N_p` contiguous `K_p x K_p`
/// blocks ordered by destination, exchanged with a single all-to-all, and
/// reassembled with the other index running along the lines. Viewed as the
/// matrix of local lines the data is transposed; the logical global array
/// is unchanged. Peak memory is three local blocks.
pub fn transpose_alltoall<T: Scalar>(comm: &mut Communicator, f: &SpectralField<T>) -> Result<SpectralField<T>> {
    check_group(comm, f)?;
    let layout = *f.layout();
    let np = layout.n_ranks();
    if np == 1 {
        return Ok(local_transpose(f));
    }
    let (n, kp) = (layout.n_psi(), layout.k_p());
    let send: Vec<Vec<u8>> = (0..np).map(|d| encode_complex(&outgoing_block(f, d))).collect();
    let recv = comm.all_to_all(send)?;
    let mut out = vec![crate::scalar::czero(); layout.local_len()];
    for (src, bytes) in recv.iter().enumerate() {
        place_block(&mut out, n, kp, src, &decode_block::<T>(bytes, kp)?);
    }
    Ok(SpectralField::from_lines(layout, f.rank(), f.orientation().flipped(), out))
}

/// Same contract as [`transpose_alltoall`], built from `N_p` rooted gathers:
/// in round `r` every rank sends rank `r` the block it needs, so each rank
/// fetches exactly its `(N_p - 1) K_p^2` missing elements.
pub fn transpose_gather<T: Scalar>(comm: &mut Communicator, f: &SpectralField<T>) -> Result<SpectralField<T>> {
    check_group(comm, f)?;
    let layout = *f.layout();
    let np = layout.n_ranks();
    if np == 1 {
        return Ok(local_transpose(f));
    }
    let (n, kp) = (layout.n_psi(), layout.k_p());
    let counts = vec![kp * kp * 16; np];
    let mut mine = None;
    for root in 0..np {
        let block = encode_complex(&outgoing_block(f, root));
        if let Some(all) = comm.gather_to(root, &block, &counts)? {
            mine = Some(all);
        }
    }
    let all = mine.expect("every rank is a gather root once");
    let mut out = vec![crate::scalar::czero(); layout.local_len()];
    for (src, bytes) in all.chunks_exact(kp * kp * 16).enumerate() {
        place_block(&mut out, n, kp, src, &decode_block::<T>(bytes, kp)?);
    }
    Ok(SpectralField::from_lines(layout, f.rank(), f.orientation().flipped(), out))
}

pub fn transpose<T: Scalar>(
    comm: &mut Communicator,
    f: &SpectralField<T>,
    strategy: TransposeStrategy,
) -> Result<SpectralField<T>> {
    match strategy {
        TransposeStrategy::AllToAll => transpose_alltoall(comm, f),
        TransposeStrategy::Gather => transpose_gather(comm, f),
    }
}

/// Enforces `f(-k) = conj(f(k))` inside the band `|k1|, |k2| <= half_width`.
///
/// Entries with `k2 > 0`, or `k2 = 0` and `k1 > 0`, are authoritative and
/// their mirrors are overwritten; the zero mode loses its imaginary part.
/// Column `k2` is shipped to the owner of column `-k2` with point-to-point
/// messages, about half the band in total. Padding outside the band is left
/// untouched.
pub fn symmetrize<T: Scalar>(comm: &mut Communicator, f: &mut SpectralField<T>, half_width: usize) -> Result<()> {
    check_group(comm, f)?;
    if f.orientation() != Orientation::Columns {
        return Err(Error::Orientation { expected: Orientation::Columns.name() });
    }
    let layout = *f.layout();
    if half_width > layout.offset() {
        return Err(Error::InvalidParameter(format!(
            "symmetrization band {half_width} exceeds storage band {}",
            layout.offset()
        )));
    }
    let b = half_width as i64;
    let s = |k: i64| layout.storage_index(k).expect("band inside storage");
    let kp = layout.k_p();
    let first = layout.first_line(f.rank());
    let me = f.rank();

    let mut local_segments: Vec<(i64, Vec<Complex<T>>)> = Vec::new();
    let mut pending = Vec::new();
    for l in 0..kp {
        let k2 = layout.wavenumber(first + l);
        if !(1..=b).contains(&k2) {
            continue;
        }
        let col = f.line(l);
        let segment: Vec<Complex<T>> = (-b..=b).map(|k1| col[s(k1)]).collect();
        let dst = layout.owner(s(-k2));
        if dst == me {
            local_segments.push((k2, segment));
        } else {
            pending.push(comm.isend(dst, SYMMETRIZE_TAG + k2 as u32, encode_complex(&segment))?);
        }
    }

    for l in 0..kp {
        let k2 = layout.wavenumber(first + l);
        if k2 == 0 {
            let col = f.line_mut(l);
            for k1 in 1..=b {
                col[s(-k1)] = col[s(k1)].conj();
            }
            let z = &mut col[s(0)];
            z.im = T::zero();
            continue;
        }
        if !(-b..=-1).contains(&k2) {
            continue;
        }
        let src = layout.owner(s(-k2));
        let segment = if src == me {
            let pos = local_segments.iter().position(|(k, _)| *k == -k2).expect("local mirror column");
            local_segments.swap_remove(pos).1
        } else {
            let req = comm.irecv(src, SYMMETRIZE_TAG + (-k2) as u32)?.expect_len((2 * half_width + 1) * 16);
            let bytes = comm.wait_recv(req)?;
            decode_complex::<T>(&bytes).expect("length checked")
        };
        let col = f.line_mut(l);
        for k1 in -b..=b {
            col[s(-k1)] = segment[(k1 + b) as usize].conj();
        }
    }
    for p in pending {
        p.wait()?;
    }
    Ok(())
}

/// Collects the whole array on rank 0 in column-major global order
/// (`(i, j)` at `j * K_psi + i`). Other ranks receive `None`.
pub fn gather_full<T: Scalar>(comm: &mut Communicator, f: &SpectralField<T>) -> Result<Option<Vec<Complex<T>>>> {
    check_group(comm, f)?;
    let layout = *f.layout();
    let n = layout.n_psi();
    let per_rank = layout.local_len() * 16;
    let counts = vec![per_rank; layout.n_ranks()];
    let Some(all) = comm.gather_to(0, &encode_complex(f.local()), &counts)? else {
        return Ok(None);
    };
    let values = decode_complex::<T>(&all).expect("whole complex values");
    if f.orientation() == Orientation::Columns {
        return Ok(Some(values));
    }
    let mut global = vec![crate::scalar::czero(); n * n];
    for (row, line) in values.chunks_exact(n).enumerate() {
        for (j, &v) in line.iter().enumerate() {
            global[j * n + row] = v;
        }
    }
    Ok(Some(global))
}

/// Distributes a column-major global array held by rank 0 into a
/// column-distributed field. Non-root ranks pass `None`.
pub fn scatter_full<T: Scalar>(
    comm: &mut Communicator,
    layout: Layout,
    global: Option<&[Complex<T>]>,
) -> Result<SpectralField<T>> {
    if comm.size() != layout.n_ranks() {
        return Err(Error::InvalidParameter(format!(
            "layout for {} ranks used with {} ranks",
            layout.n_ranks(),
            comm.size()
        )));
    }
    let n = layout.n_psi();
    let per_rank = layout.local_len();
    let mut mismatch = None;
    let blocks = if comm.rank() == 0 {
        match global {
            Some(g) if g.len() == n * n => Some(g.chunks_exact(per_rank).map(encode_complex).collect()),
            other => {
                mismatch = Some(other.map_or(0, |g| g.len()));
                None
            }
        }
    } else {
        None
    };
    let mine = match comm.scatter_from(0, blocks) {
        Ok(b) => b,
        Err(e) => {
            return Err(match mismatch {
                Some(actual) => Error::DimensionMismatch { expected: n * n, actual },
                None => e.into(),
            })
        }
    };
    let lines = decode_complex::<T>(&mine).ok_or(Error::DimensionMismatch { expected: per_rank * 16, actual: mine.len() })?;
    if lines.len() != per_rank {
        return Err(Error::DimensionMismatch { expected: per_rank, actual: lines.len() });
    }
    Ok(SpectralField::from_lines(layout, comm.rank(), Orientation::Columns, lines))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::spawn_inprocess;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, -re / 2.0)
    }

    #[test]
    fn scatter_gather_round_trip() {
        for np in [1, 2, 3] {
            let layout = Layout::build(2, np).unwrap();
            let n = layout.n_psi();
            let global: Vec<Complex<f64>> = (0..n * n).map(|x| c(x as f64)).collect();
            let out = spawn_inprocess(np, |mut comm| {
                let root = comm.rank() == 0;
                let f = scatter_full(&mut comm, layout, root.then_some(global.as_slice()))?;
                gather_full(&mut comm, &f)
            })
            .unwrap();
            assert_eq!(out[0].as_ref().unwrap(), &global);
            assert!(out[1..].iter().all(|o| o.is_none()));
        }
    }

    #[test]
    fn scatter_zeros_and_dimension_mismatch() {
        let layout = Layout::build(1, 2).unwrap();
        let zeros = vec![Complex::new(0.0f64, 0.0); 36];
        let out = spawn_inprocess(2, |mut comm| {
            let f = scatter_full(&mut comm, layout, Some(zeros.as_slice()))?;
            Ok::<_, Error>(f.local().iter().all(|v| *v == Complex::new(0.0, 0.0)))
        })
        .unwrap();
        assert_eq!(out, vec![true, true]);
        let out = spawn_inprocess(2, |mut comm| {
            Ok::<_, Error>(scatter_full::<f64>(&mut comm, layout, Some(&zeros[..35])).unwrap_err().to_string())
        })
        .unwrap();
        assert!(out[0].contains("dimension mismatch"));
    }

    #[test]
    fn six_by_six_over_three_ranks() {
        // Entries 0..35 in line-major order; the serial transpose of that
        // matrix is the expected local data after the exchange.
        let layout = Layout::build(1, 3).unwrap();
        assert_eq!(layout.n_psi(), 6);
        let global: Vec<Complex<f64>> = (0..36).map(|x| Complex::new(x as f64, 0.0)).collect();
        let out = spawn_inprocess(3, |mut comm| {
            let f = scatter_full(&mut comm, layout, Some(global.as_slice()))?;
            let t = transpose_alltoall(&mut comm, &f)?;
            let g = transpose_gather(&mut comm, &f)?;
            assert_eq!(t, g);
            Ok::<_, Error>(t.local().iter().map(|v| v.re as usize).collect::<Vec<_>>())
        })
        .unwrap();
        for (r, local) in out.iter().enumerate() {
            let expect: Vec<usize> = (2 * r..2 * r + 2).flat_map(|row| (0..6).map(move |col| col * 6 + row)).collect();
            assert_eq!(local, &expect);
        }
    }

    #[test]
    fn symmetrize_examples() {
        for np in [1, 2, 3] {
            let layout = Layout::build(3, np).unwrap();
            let out = spawn_inprocess(np, |mut comm| {
                let mut f = SpectralField::<f64>::zeros(layout, comm.rank(), Orientation::Columns);
                if let Some(v) = f.get_k_mut(2, 1) {
                    *v = Complex::new(3.0, 4.0);
                }
                if let Some(v) = f.get_k_mut(0, 0) {
                    *v = Complex::new(5.0, 2.0);
                }
                symmetrize(&mut comm, &mut f, 3)?;
                Ok::<_, Error>((f.get_k(-2, -1), f.get_k(0, 0)))
            })
            .unwrap();
            assert!(out.iter().any(|(m, _)| *m == Some(Complex::new(3.0, -4.0))));
            assert!(out.iter().any(|(_, z)| *z == Some(Complex::new(5.0, 0.0))));
        }
    }

    #[test]
    fn symmetrize_rejects_rows() {
        let layout = Layout::build(1, 1).unwrap();
        let out = spawn_inprocess(1, |mut comm| {
            let mut f = SpectralField::<f64>::zeros(layout, 0, Orientation::Rows);
            Ok::<_, Error>(symmetrize(&mut comm, &mut f, 1).is_err())
        })
        .unwrap();
        assert!(out[0]);
    }
}
