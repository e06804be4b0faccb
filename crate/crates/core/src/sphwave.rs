//! Characteristic-mode eigenvalues of the perfectly conducting spherical
//! shell.
//!
//! TE modes have `lambda = -y_t(x) / j_t(x)` and TM modes
//! `lambda = -(x y_t(x))' / (x j_t(x))'` with `x = kR`. Poles sit at the
//! zeros of the denominators; the eigenvalue tends to `-inf` from below and
//! to `+inf` from above each pole.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointgroup::{O3IrrepId, Polarization};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphwaveError {
    #[error("argument must be positive, got {0}")]
    Domain(f64),
    #[error("mode index out of range: {0}")]
    OutOfRange(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    /// First kind, `j_t`.
    J,
    /// Second kind, `y_t`.
    Y,
}

/// Largest supported order.
pub const MAX_ORDER: u32 = 30;

/// Relative threshold below which an eigenvalue denominator counts as zero.
pub const POLE_THRESHOLD: f64 = 1e-13;

/// Scan-grid density for pole bracketing, per unit of `kR/pi`.
pub const POLE_SCAN_DENSITY: f64 = 4096.0;

/// `j_0 ..= j_t` at `x`.
fn bessel_j_all(t: usize, x: f64) -> Vec<f64> {
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let mut out = vec![0.0; t + 1];
    out[0] = j0;
    if t == 0 {
        return out;
    }
    out[1] = j1;
    if (t as f64) <= x {
        for n in 1..t {
            out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        }
        return out;
    }
    // Miller: recur downward from well above max(t, x), then normalize
    // against whichever of j_0, j_1 is larger in magnitude.
    let start = t.max(x.ceil() as usize) + 30 + (x.sqrt() * 4.0) as usize;
    let mut upper = 0.0_f64;
    let mut current = 1e-300_f64;
    let mut values = vec![0.0; t + 1];
    let mut f0 = 0.0;
    let mut f1 = 0.0;
    for n in (0..=start).rev() {
        // current = f_n, upper = f_{n+1}
        if n <= t {
            values[n] = current;
        }
        if n == 0 {
            f0 = current;
        }
        if n == 1 {
            f1 = current;
        }
        if n == 0 {
            break;
        }
        let lower = (2 * n + 1) as f64 / x * current - upper;
        upper = current;
        current = lower;
        if current.abs() > 1e250 {
            current *= 1e-250;
            upper *= 1e-250;
            for v in values.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let scale = if j0.abs() >= j1.abs() { j0 / f0 } else { j1 / f1 };
    for (o, v) in out.iter_mut().zip(values) {
        *o = v * scale;
    }
    out
}

/// `y_0 ..= y_t` at `x` (upward recurrence, stable for the second kind).
fn bessel_y_all(t: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; t + 1];
    out[0] = -x.cos() / x;
    if t >= 1 {
        out[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for n in 1..t {
        out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
    }
    out
}

/// Spherical Bessel function `j_t(x)` or `y_t(x)`.
pub fn spherical_bessel(kind: BesselKind, t: u32, x: f64) -> Result<f64, SphwaveError> {
    if x.is_nan() || x <= 0.0 {
        return Err(SphwaveError::Domain(x));
    }
    if t > MAX_ORDER {
        return Err(SphwaveError::OutOfRange(format!("order {t} > {MAX_ORDER}")));
    }
    let t = t as usize;
    Ok(match kind {
        BesselKind::J => bessel_j_all(t, x)[t],
        BesselKind::Y => bessel_y_all(t, x)[t],
    })
}

/// Numerator and denominator of the eigenvalue ratio, plus a magnitude scale
/// for the denominator used to decide whether it vanishes.
fn ratio_parts(id: O3IrrepId, x: f64) -> (f64, f64, f64) {
    let t = id.t as usize;
    let j = bessel_j_all(t, x);
    let y = bessel_y_all(t, x);
    match id.s {
        Polarization::TE => (y[t], j[t], j[t].abs() + j[t - 1].abs()),
        Polarization::TM => {
            let tf = t as f64;
            let num = x * y[t - 1] - tf * y[t];
            let den = x * j[t - 1] - tf * j[t];
            (num, den, x * j[t - 1].abs() + tf * j[t].abs())
        }
    }
}

fn denominator(id: O3IrrepId, x: f64) -> f64 {
    ratio_parts(id, x).1
}

/// Eigenvalue of the spherical-shell mode family `id` at electrical size
/// `kr` (= kR). Returns a signed infinity at a pole.
pub fn eigenvalue(id: O3IrrepId, kr: f64) -> Result<f64, SphwaveError> {
    if kr.is_nan() || kr <= 0.0 {
        return Err(SphwaveError::Domain(kr));
    }
    if id.t > MAX_ORDER {
        return Err(SphwaveError::OutOfRange(format!("order {} > {MAX_ORDER}", id.t)));
    }
    let (num, den, scale) = ratio_parts(id, kr);
    if den.abs() < POLE_THRESHOLD * scale {
        let sign = -num.signum() * if den == 0.0 { 1.0 } else { den.signum() };
        return Ok(sign * f64::INFINITY);
    }
    Ok(-num / den)
}

/// Global mode index of the spherical-wave triple `(t, m, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub t: u32,
    pub m: i32,
    pub s: Polarization,
    pub n: u64,
}

pub fn mode_index(t: u32, m: i32, s: Polarization) -> Result<ModeIndex, SphwaveError> {
    if t == 0 || m.unsigned_abs() > t {
        return Err(SphwaveError::OutOfRange(format!("(t={t}, m={m})")));
    }
    let q = t as i64 * (t as i64 + 1) + m as i64;
    let n = 2 * (q - 1) + s.index() as i64;
    Ok(ModeIndex {
        t,
        m,
        s,
        n: n as u64,
    })
}

pub fn index_to_mode(n: u64) -> Result<ModeIndex, SphwaveError> {
    if n == 0 {
        return Err(SphwaveError::OutOfRange("n must be >= 1".into()));
    }
    let s = if n % 2 == 1 {
        Polarization::TE
    } else {
        Polarization::TM
    };
    let q = (n - s.index() as u64) / 2 + 1;
    // q = t(t+1) + m with |m| <= t  <=>  t^2 <= q <= t^2 + 2t
    let mut t = (q as f64).sqrt() as u64;
    while t * t > q {
        t -= 1;
    }
    while (t + 1) * (t + 1) <= q {
        t += 1;
    }
    let m = q as i64 - (t * (t + 1)) as i64;
    Ok(ModeIndex {
        t: t as u32,
        m: m as i32,
        s,
        n,
    })
}

/// Zeros of the eigenvalue denominator in `[lo, hi]` (in kR), sorted.
pub fn poles(id: O3IrrepId, lo: f64, hi: f64) -> Result<Vec<f64>, SphwaveError> {
    if lo.is_nan() || hi.is_nan() || lo <= 0.0 || hi <= lo {
        return Err(SphwaveError::Domain(lo));
    }
    let steps = (((hi - lo) / PI) * POLE_SCAN_DENSITY).ceil().max(1.0) as usize;
    let h = (hi - lo) / steps as f64;
    let mut out = Vec::new();
    let mut xa = lo;
    let mut fa = denominator(id, xa);
    for i in 1..=steps {
        let xb = if i == steps { hi } else { lo + i as f64 * h };
        let fb = denominator(id, xb);
        if fa == 0.0 {
            out.push(xa);
        } else if fa * fb < 0.0 {
            out.push(bisect(|x| denominator(id, x), xa, xb, fa));
        }
        xa = xb;
        fa = fb;
    }
    if fa == 0.0 {
        out.push(hi);
    }
    Ok(out)
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > 1e-10 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// One analytic eigenvalue trace together with its poles in a working
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalTrace {
    pub id: O3IrrepId,
    /// `2t + 1`
    pub degeneracy: usize,
    /// Pole locations in kR.
    pub poles: Vec<f64>,
}

impl SphericalTrace {
    pub fn new(id: O3IrrepId, lo: f64, hi: f64) -> Result<Self, SphwaveError> {
        Ok(Self {
            id,
            degeneracy: id.dimension(),
            poles: poles(id, lo, hi)?,
        })
    }

    pub fn eval(&self, kr: f64) -> Result<f64, SphwaveError> {
        eigenvalue(self.id, kr)
    }
}

/// One sample of a trace on a grid of `kR/pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub kr_over_pi: f64,
    /// `None` at a pole.
    pub lambda: Option<f64>,
    /// A pole lies within one grid cell of this sample.
    pub pole_adjacent: bool,
}

/// Samples `id` on `grid` (values of `kR/pi`, strictly increasing).
pub fn sample_trace(id: O3IrrepId, grid: &[f64]) -> Result<(Vec<TraceSample>, Vec<f64>), SphwaveError> {
    let (Some(&first), Some(&last)) = (grid.first(), grid.last()) else {
        return Ok((Vec::new(), Vec::new()));
    };
    let pole_list = if last > first {
        poles(id, first * PI, last * PI)?
    } else {
        Vec::new()
    };
    let pole_over_pi: Vec<f64> = pole_list.iter().map(|p| p / PI).collect();
    let mut out = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let left = if i > 0 { grid[i - 1] } else { x };
        let right = grid.get(i + 1).copied().unwrap_or(x);
        let pole_adjacent = pole_over_pi.iter().any(|&p| p >= left && p <= right);
        let lambda = eigenvalue(id, x * PI)?;
        out.push(TraceSample {
            kr_over_pi: x,
            lambda: lambda.is_finite().then_some(lambda),
            pole_adjacent,
        });
    }
    Ok((out, pole_over_pi))
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(t: u32, x: f64) -> f64 {
        spherical_bessel(BesselKind::J, t, x).unwrap()
    }

    fn y(t: u32, x: f64) -> f64 {
        spherical_bessel(BesselKind::Y, t, x).unwrap()
    }

    #[test]
    fn closed_forms_at_pi() {
        assert!((j(1, PI) - 1.0 / PI).abs() < 1e-14);
        assert!((y(1, PI) - 1.0 / (PI * PI)).abs() < 1e-14);
        for x in [0.2, 1.0, 3.0, 7.5] {
            assert!((j(0, x) - x.sin() / x).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_errors() {
        assert_eq!(
            spherical_bessel(BesselKind::J, 1, 0.0),
            Err(SphwaveError::Domain(0.0))
        );
        assert!(eigenvalue(O3IrrepId::te(1), -1.0).is_err());
        assert!(spherical_bessel(BesselKind::Y, 31, 1.0).is_err());
    }

    // closed forms of j_2, j_3 as an independent oracle
    fn j2_closed(x: f64) -> f64 {
        (3.0 / (x * x) - 1.0) * x.sin() / x - 3.0 * x.cos() / (x * x)
    }

    fn j3_closed(x: f64) -> f64 {
        (15.0 / x.powi(3) - 6.0 / x) * x.sin() / x - (15.0 / (x * x) - 1.0) * x.cos() / x
    }

    #[test]
    fn low_orders_match_closed_forms() {
        for x in linspace(0.05 * PI, 2.5 * PI, 97) {
            let r2 = (j(2, x) - j2_closed(x)).abs() / j2_closed(x).abs().max(1e-3);
            let r3 = (j(3, x) - j3_closed(x)).abs() / j3_closed(x).abs().max(1e-3);
            assert!(r2 < 1e-10, "x={x} rel={r2}");
            assert!(r3 < 1e-9, "x={x} rel={r3}");
        }
    }

    #[test]
    fn mode_index_examples() {
        assert_eq!(mode_index(1, -1, Polarization::TE).unwrap().n, 1);
        assert_eq!(mode_index(1, 0, Polarization::TM).unwrap().n, 4);
        let back = index_to_mode(4).unwrap();
        assert_eq!((back.t, back.m, back.s), (1, 0, Polarization::TM));
        assert!(mode_index(1, 2, Polarization::TE).is_err());
        assert!(index_to_mode(0).is_err());
    }

    #[test]
    fn mode_index_roundtrip() {
        for n in 1..=2000u64 {
            let m = index_to_mode(n).unwrap();
            assert_eq!(mode_index(m.t, m.m, m.s).unwrap().n, n);
        }
    }

    #[test]
    fn eigenvalue_examples() {
        let te = eigenvalue(O3IrrepId::te(1), PI).unwrap();
        let tm = eigenvalue(O3IrrepId::tm(1), PI).unwrap();
        assert!((te + 1.0 / PI).abs() < 1e-12);
        assert!((tm - (PI - 1.0 / PI)).abs() < 1e-12);
    }

    #[test]
    fn pole_examples() {
        let p = poles(O3IrrepId::te(1), 0.1, 2.0 * PI).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0] - 4.493409457909064).abs() < 1e-9);
        let p = poles(O3IrrepId::tm(1), 0.1, 2.8).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0] - 2.7437).abs() < 1e-4);
        assert!(poles(O3IrrepId::te(7), 0.1, 1.0).unwrap().is_empty());
    }

    #[test]
    fn pole_approach_signs() {
        let p = poles(O3IrrepId::te(1), 4.0, 5.0).unwrap()[0];
        let below = eigenvalue(O3IrrepId::te(1), p - 1e-6).unwrap();
        let above = eigenvalue(O3IrrepId::te(1), p + 1e-6).unwrap();
        assert!(below < -1e4 && above > 1e4);
    }

    #[test]
    fn no_false_poles_at_small_argument() {
        // j_15 is ~1e-29 here; the ratio is huge but finite
        let v = eigenvalue(O3IrrepId::te(15), 0.05 * PI).unwrap();
        assert!(v.is_finite() && v > 1e20);
    }

    #[test]
    fn degeneracy_is_two_t_plus_one() {
        for t in 1..=12 {
            let tr = SphericalTrace::new(O3IrrepId::tm(t), 0.1, 1.0).unwrap();
            assert_eq!(tr.degeneracy, (2 * t + 1) as usize);
        }
    }
}
