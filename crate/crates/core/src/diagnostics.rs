//! Averaged observables, power-law fits and CSV export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::dist_field::SpectralField;
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::model::{ModelParams, RadiusSchedule};
use crate::scalar::Scalar;
use crate::timing::Phase;

/// Grid-uniform spatial mean of `Phi`, the real part of the zero mode.
/// Collective.
pub fn mean_height<T: Scalar>(sp: &mut Spectral<T>, phi: &SpectralField<T>) -> Result<T> {
    let local = phi.get_k(0, 0).map(|v| v.re.to_f64_lossy()).unwrap_or(0.0);
    let r = sp.communicate(Phase::Diagnostics, |c| Ok(c.all_reduce_sum(&[local])?))?;
    Ok(T::from_f64_lossy(r[0]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySeries<T> {
    times: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> VelocitySeries<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), actual: values.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("series times must be strictly increasing".into()));
        }
        Ok(VelocitySeries { times, values })
    }

    pub fn empty() -> Self {
        VelocitySeries { times: Vec::new(), values: Vec::new() }
    }

    /// Appends a sample; `t` must exceed every earlier time.
    pub fn push(&mut self, t: T, v: T) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::InvalidParameter(format!("time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.values.push(v);
        Ok(())
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Mean front velocity `d(r0 + <Phi>)/dt` by centered differences, one-sided
/// at the ends. `heights` holds `(t, <Phi>)` samples.
pub fn mean_velocity<T: Scalar>(heights: &VelocitySeries<T>, radius: &RadiusSchedule<T>) -> Result<VelocitySeries<T>> {
    let n = heights.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {n}")));
    }
    let t = heights.times();
    let r: Vec<T> = t.iter().zip(heights.values()).map(|(&t, &h)| radius.radius(t) + h).collect();
    let v = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (r[b] - r[a]) / (t[b] - t[a])
        })
        .collect();
    VelocitySeries::new(t.to_vec(), v)
}

/// `v(t) ~ c (t - t_star)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit<T> {
    pub t_star: T,
    pub alpha: T,
    pub c: T,
    /// Root-mean-square misfit of `ln v`.
    pub residual: T,
}

/// Least-squares `(ln c, alpha, rms)` for a fixed `t_star`.
fn regress(t: &[f64], lv: &[f64], t_star: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let x: Vec<f64> = t.iter().map(|&t| (t - t_star).ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = lv.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(lv) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let alpha = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let lnc = my - alpha * mx;
    let ss: f64 = x.iter().zip(lv).map(|(a, b)| (b - lnc - alpha * a).powi(2)).sum();
    (lnc, alpha, (ss / n).sqrt())
}

/// Fits `ln v = ln c + alpha ln(t - t_star)`.
///
/// `t_star` is searched over `[t_min - 10 span, t_min - 1e-6]`: a coarse
/// log-spaced scan picks the bracket, golden-section search refines it,
/// and `(ln c, alpha)` come from linear regression at each trial point.
pub fn fit_power_law<T: Scalar>(series: &VelocitySeries<T>) -> Result<PowerLawFit<T>> {
    let n = series.len();
    if n < 8 {
        return Err(Error::Fit(format!("need at least 8 samples, got {n}")));
    }
    let t: Vec<f64> = series.times().iter().map(|v| v.to_f64_lossy()).collect();
    let v: Vec<f64> = series.values().iter().map(|v| v.to_f64_lossy()).collect();
    if let Some(bad) = v.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Fit(format!("values must be positive, found {bad}")));
    }
    let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let t_min = t[0];
    let span = t[n - 1] - t_min;
    if !(span > 0.0) {
        return Err(Error::Fit("degenerate series: all times equal".into()));
    }
    // Parametrize by the gap d = t_min - t_star in [1e-6, 10 span]; the
    // misfit varies on a logarithmic scale in d.
    let (lo, hi) = (1e-6f64.ln(), (10.0 * span).ln());
    let cost = |u: f64| regress(&t, &lv, t_min - u.exp()).2;
    let scan = 400;
    let grid: Vec<f64> = (0..=scan).map(|i| lo + (hi - lo) * i as f64 / scan as f64).collect();
    let best = (0..=scan).min_by(|&a, &b| cost(grid[a]).total_cmp(&cost(grid[b]))).unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(scan)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let u = if fc < fd { c } else { d };
    let t_star = t_min - u.exp();
    let (lnc, alpha, residual) = regress(&t, &lv, t_star);
    Ok(PowerLawFit {
        t_star: T::from_f64_lossy(t_star),
        alpha: T::from_f64_lossy(alpha),
        c: T::from_f64_lossy(lnc.exp()),
        residual: T::from_f64_lossy(residual),
    })
}

/// `sum |Phi_k|^2` binned by `floor(|k|)`, index = bin. Collective.
pub fn radial_spectrum<T: Scalar>(sp: &mut Spectral<T>, phi: &SpectralField<T>) -> Result<Vec<T>> {
    let layout = *phi.layout();
    let m = layout.wavenumber(0).unsigned_abs().max(layout.wavenumber(layout.n_psi() - 1).unsigned_abs());
    let mut bins = vec![0.0f64; (2 * m * m).isqrt() as usize + 1];
    phi.for_each(|i, j, v| {
        let (k1, k2) = (layout.wavenumber(i), layout.wavenumber(j));
        bins[(k1 * k1 + k2 * k2).unsigned_abs().isqrt() as usize] += v.norm_sqr().to_f64_lossy();
    });
    let r = sp.communicate(Phase::Diagnostics, |c| Ok(c.all_reduce_sum(&bins)?))?;
    let last = r.iter().rposition(|&e| e != 0.0).map_or(0, |i| i + 1);
    Ok(r[..last.max(1)].iter().map(|&e| T::from_f64_lossy(e)).collect())
}

/// `<dir>/<quantity>_<step>.csv`.
pub fn export_path(dir: &Path, quantity: &str, step: u64) -> PathBuf {
    dir.join(format!("{quantity}_{step}.csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `theta_index,phi_index,r` with `r = r0(t) + Phi` on the
/// `K_psi x K_psi` grid. Collective; rank 0 gathers and writes.
pub fn export_physical<T: Scalar>(
    sp: &mut Spectral<T>,
    phi: &SpectralField<T>,
    t: T,
    p: &ModelParams<T>,
    path: &Path,
) -> Result<()> {
    let global = sp.gather_full(phi)?;
    let mut status = Ok(());
    if let Some(global) = global {
        let n = sp.layout().n_psi();
        let grid = sp.to_physical_serial(&global);
        let r0 = p.radius.radius(t).to_f64_lossy();
        status = (|| {
            let mut w = create(path)?;
            let io = |e| Error::io(path, e);
            writeln!(w, "theta_index,phi_index,r").map_err(io)?;
            for j in 0..n {
                for i in 0..n {
                    writeln!(w, "{i},{j},{:.16e}", r0 + grid[j * n + i].re.to_f64_lossy()).map_err(io)?;
                }
            }
            w.flush().map_err(io)
        })();
    }
    let ok = sp.communicate(Phase::Diagnostics, |c| Ok(c.agree(0, status.is_ok())?))?;
    status?;
    if !ok {
        return Err(Error::Io { path: path.to_path_buf(), source: std::io::Error::other("export failed on rank 0") });
    }
    Ok(())
}

/// Writes `t,value` rows with 17 significant digits.
pub fn export_series<T: Scalar>(series: &VelocitySeries<T>, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "t,value").map_err(io)?;
    for (t, v) in series.times().iter().zip(series.values()) {
        writeln!(w, "{:.16e},{:.16e}", t.to_f64_lossy(), v.to_f64_lossy()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a file written by [`export_series`].
pub fn read_series<T: Scalar>(path: &Path) -> Result<VelocitySeries<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut series = VelocitySeries::empty();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::InvalidParameter(format!("{}:{}: malformed row {line:?}", path.display(), n + 1));
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        let t: f64 = a.trim().parse().map_err(|_| bad())?;
        let v: f64 = b.trim().parse().map_err(|_| bad())?;
        series.push(T::from_f64_lossy(t), T::from_f64_lossy(v))?;
    }
    Ok(series)
}
