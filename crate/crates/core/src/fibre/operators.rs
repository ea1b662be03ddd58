//! Per-record feature operators.
//!
//! Each operator is a pure map `R^in -> R^out` whose output width is fixed by
//! the input width and the parameters. Operators are described by an
//! [`OperatorSpec`] (name plus parameter map) so that derived strata carry a
//! complete, serialisable provenance chain.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

/// Serialisable description of one operator invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl OperatorSpec {
    fn new(name: &str, params: &[(&str, ParamValue)]) -> Self {
        OperatorSpec {
            name: name.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    pub fn mean() -> Self {
        Self::new("mean", &[])
    }

    pub fn demean() -> Self {
        Self::new("demean", &[])
    }

    pub fn dft() -> Self {
        Self::new("dft", &[])
    }

    /// Welch PSD with Hann window and 50% overlap.
    pub fn welch(segment: usize, sample_rate: f64) -> Self {
        Self::new(
            "welch",
            &[
                ("n_w", (segment as f64).into()),
                ("fs", sample_rate.into()),
                ("overlap", 0.5.into()),
                ("window", "hann".into()),
            ],
        )
    }

    pub fn modal_peaks(count: usize, sample_rate: f64) -> Self {
        Self::new(
            "modal_peaks",
            &[
                ("n", (count as f64).into()),
                ("fs", sample_rate.into()),
                ("min_separation", 2.0.into()),
            ],
        )
    }

    pub fn band(lo: usize, hi: usize) -> Self {
        Self::new("band", &[("lo", (lo as f64).into()), ("hi", (hi as f64).into())])
    }

    fn number(&self, key: &str) -> Result<f64> {
        match self.params.get(key) {
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(*v),
            Some(other) => Err(Error::OperatorContract(format!(
                "{}: parameter {key} must be a finite number, got {other:?}",
                self.name
            ))),
            None => Err(Error::OperatorContract(format!(
                "{}: missing parameter {key}",
                self.name
            ))),
        }
    }

    fn count(&self, key: &str) -> Result<usize> {
        let v = self.number(key)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::OperatorContract(format!(
                "{}: parameter {key} must be a non-negative integer, got {v}",
                self.name
            )));
        }
        Ok(v as usize)
    }
}

/// A registered operator, decoded from its spec.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Mean,
    Demean,
    /// Full DFT packed into `N` reals: `[Re X0, Re X(N/2), Re X1, Im X1, ...]`.
    Dft,
    Welch {
        segment: usize,
        overlap: f64,
        sample_rate: f64,
    },
    /// The `count` largest local maxima of a one-sided spectrum, as ascending
    /// frequencies in Hz.
    ModalPeaks {
        count: usize,
        sample_rate: f64,
        min_separation: usize,
    },
    Band {
        lo: usize,
        hi: usize,
    },
}

impl Operator {
    pub fn from_spec(spec: &OperatorSpec) -> Result<Self> {
        let op = match spec.name.as_str() {
            "mean" => Operator::Mean,
            "demean" => Operator::Demean,
            "dft" => Operator::Dft,
            "welch" => {
                if let Some(w) = spec.params.get("window") {
                    if w != &ParamValue::Text("hann".into()) {
                        return Err(Error::OperatorContract(format!(
                            "welch: unsupported window {w:?}"
                        )));
                    }
                }
                let segment = spec.count("n_w")?;
                let overlap = spec.number("overlap").unwrap_or(0.5);
                let sample_rate = spec.number("fs")?;
                if segment < 4 || segment % 2 != 0 {
                    return Err(Error::OperatorContract(format!(
                        "welch: segment length {segment} must be even and >= 4"
                    )));
                }
                if !(0.0..1.0).contains(&overlap) || sample_rate <= 0.0 {
                    return Err(Error::OperatorContract(
                        "welch: overlap must lie in [0, 1) and fs must be positive".into(),
                    ));
                }
                Operator::Welch {
                    segment,
                    overlap,
                    sample_rate,
                }
            }
            "modal_peaks" => {
                let count = spec.count("n")?;
                let sample_rate = spec.number("fs")?;
                let min_separation = spec.count("min_separation").unwrap_or(2);
                if count == 0 || sample_rate <= 0.0 {
                    return Err(Error::OperatorContract(
                        "modal_peaks: n must be positive and fs positive".into(),
                    ));
                }
                Operator::ModalPeaks {
                    count,
                    sample_rate,
                    min_separation,
                }
            }
            "band" => {
                let lo = spec.count("lo")?;
                let hi = spec.count("hi")?;
                if lo >= hi {
                    return Err(Error::OperatorContract(format!("band: empty range {lo}..{hi}")));
                }
                Operator::Band { lo, hi }
            }
            other => {
                return Err(Error::OperatorContract(format!("unregistered operator {other}")))
            }
        };
        Ok(op)
    }

    /// Output width for a given input width, or a contract error.
    pub fn out_dim(&self, in_dim: usize) -> Result<usize> {
        let fail = |why: String| Err(Error::OperatorContract(why));
        match *self {
            Operator::Mean if in_dim >= 1 => Ok(1),
            Operator::Demean if in_dim >= 1 => Ok(in_dim),
            Operator::Mean | Operator::Demean => fail("operator needs a non-empty record".into()),
            Operator::Dft if in_dim >= 2 && in_dim.is_multiple_of(2) => Ok(in_dim),
            Operator::Dft => fail(format!("dft needs an even record length, got {in_dim}")),
            Operator::Welch { segment, .. } if in_dim >= segment => Ok(segment / 2 + 1),
            Operator::Welch { segment, .. } => fail(format!(
                "welch segment {segment} longer than record {in_dim}"
            )),
            Operator::ModalPeaks { count, .. } if in_dim >= 3 => Ok(count),
            Operator::ModalPeaks { .. } => fail(format!("modal_peaks needs a spectrum, got width {in_dim}")),
            Operator::Band { lo, hi } if hi <= in_dim => Ok(hi - lo),
            Operator::Band { hi, .. } => fail(format!("band end {hi} beyond record width {in_dim}")),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Operator::Mean => vec![mean(x)],
            Operator::Demean => {
                let m = mean(x);
                x.iter().map(|v| v - m).collect()
            }
            Operator::Dft => dft_packed(x),
            Operator::Welch {
                segment,
                overlap,
                sample_rate,
            } => welch(x, segment, overlap, sample_rate),
            Operator::ModalPeaks {
                count,
                sample_rate,
                min_separation,
            } => modal_peaks(x, count, sample_rate, min_separation),
            Operator::Band { lo, hi } => x[lo..hi].to_vec(),
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft(buf: &mut [Complex<f64>]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

fn dft_packed(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft(&mut buf);
    let mut out = vec![0.0; n];
    out[0] = buf[0].re;
    out[1] = buf[n / 2].re;
    for k in 1..n / 2 {
        out[2 * k] = buf[k].re;
        out[2 * k + 1] = buf[k].im;
    }
    out
}

/// Magnitudes `|X_k|`, `k = 0..=N/2`, of a packed DFT record.
pub fn packed_magnitudes(packed: &[f64]) -> Vec<f64> {
    let n = packed.len();
    let mut mags = Vec::with_capacity(n / 2 + 1);
    mags.push(packed[0].abs());
    for k in 1..n / 2 {
        mags.push(packed[2 * k].hypot(packed[2 * k + 1]));
    }
    mags.push(packed[1].abs());
    mags
}

/// `sum_k |X_k|^2` over the full two-sided DFT, recovered from the packing.
pub fn packed_power(packed: &[f64]) -> f64 {
    let n = packed.len();
    let interior: f64 = (1..n / 2)
        .map(|k| packed[2 * k].powi(2) + packed[2 * k + 1].powi(2))
        .sum();
    packed[0].powi(2) + packed[1].powi(2) + 2.0 * interior
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided PSD (units^2/Hz) by Welch's averaged modified periodogram.
fn welch(x: &[f64], segment: usize, overlap: f64, sample_rate: f64) -> Vec<f64> {
    let window = hann(segment);
    let hop = (segment - (overlap * segment as f64).round() as usize).max(1);
    let norm = sample_rate * window.iter().map(|w| w * w).sum::<f64>();
    let bins = segment / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let mut start = 0;
    while start + segment <= x.len() {
        for (b, (&v, &w)) in buf.iter_mut().zip(x[start..start + segment].iter().zip(&window)) {
            *b = Complex::new(v * w, 0.0);
        }
        fft(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (norm * segments as f64);
    for (k, a) in acc.iter_mut().enumerate() {
        let one_sided = if k == 0 || k == segment / 2 { 1.0 } else { 2.0 };
        *a *= scale * one_sided;
    }
    acc
}

/// Largest local maxima of a one-sided spectrum as frequencies in Hz.
///
/// Candidates are strict-left/weak-right local maxima (end bins excluded),
/// taken by decreasing height while keeping `min_separation` bins apart.
/// Sub-bin location comes from a three-point parabola through the log
/// magnitudes. If fewer true peaks exist, the tallest remaining admissible
/// bins fill the gap.
fn modal_peaks(spec: &[f64], count: usize, sample_rate: f64, min_separation: usize) -> Vec<f64> {
    let n = spec.len();
    let segment = 2 * (n - 1);
    let bin_hz = sample_rate / segment as f64;

    let by_height = |a: &usize, b: &usize| spec[*b].total_cmp(&spec[*a]).then(a.cmp(b));
    let mut peaks: Vec<usize> = (1..n - 1)
        .filter(|&k| spec[k] > spec[k - 1] && spec[k] >= spec[k + 1])
        .collect();
    peaks.sort_by(by_height);

    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    let admissible = |k: usize, chosen: &[usize]| chosen.iter().all(|&c| c.abs_diff(k) >= min_separation);
    for k in peaks {
        if chosen.len() == count {
            break;
        }
        if admissible(k, &chosen) {
            chosen.push(k);
        }
    }
    if chosen.len() < count {
        let mut rest: Vec<usize> = (1..n - 1).collect();
        rest.sort_by(by_height);
        for k in rest {
            if chosen.len() == count {
                break;
            }
            if admissible(k, &chosen) {
                chosen.push(k);
            }
        }
    }

    let mut freqs: Vec<f64> = chosen
        .into_iter()
        .map(|k| (k as f64 + parabolic_offset(spec, k)) * bin_hz)
        .collect();
    freqs.sort_by(f64::total_cmp);
    freqs
}

fn parabolic_offset(spec: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= spec.len() {
        return 0.0;
    }
    let (a, b, c) = (spec[k - 1], spec[k], spec[k + 1]);
    let (a, b, c) = if a > 0.0 && b > 0.0 && c > 0.0 {
        (a.ln(), b.ln(), c.ln())
    } else {
        (a, b, c)
    };
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::EPSILON {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_operator_is_rejected() {
        let spec = OperatorSpec {
            name: "wavelet".into(),
            params: BTreeMap::new(),
        };
        assert!(matches!(Operator::from_spec(&spec), Err(Error::OperatorContract(_))));
    }

    #[test]
    fn output_widths() {
        let welch = Operator::from_spec(&OperatorSpec::welch(256, 100.0)).unwrap();
        assert_eq!(welch.out_dim(1024).unwrap(), 129);
        assert!(welch.out_dim(128).is_err());
        let dft = Operator::from_spec(&OperatorSpec::dft()).unwrap();
        assert_eq!(dft.out_dim(64).unwrap(), 64);
        assert!(dft.out_dim(63).is_err());
        let band = Operator::from_spec(&OperatorSpec::band(3, 10)).unwrap();
        assert_eq!(band.out_dim(20).unwrap(), 7);
        assert!(band.out_dim(9).is_err());
        assert!(Operator::from_spec(&OperatorSpec::band(5, 5)).is_err());
    }

    #[test]
    fn mean_of_constant_and_demean() {
        let x = vec![3.25; 17];
        assert_eq!(Operator::Mean.apply(&x), vec![3.25]);
        let y: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin() * 1e3 + 42.0).collect();
        let d = Operator::Demean.apply(&y);
        let m = Operator::Mean.apply(&d)[0];
        let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(m.abs() <= 1e-12 * scale);
    }

    #[test]
    fn peaks_pick_tallest_and_sort_ascending() {
        let mut s = vec![0.0; 65];
        s[10] = 5.0;
        s[30] = 9.0;
        s[31] = 8.0;
        s[50] = 7.0;
        let f = modal_peaks(&s, 2, 128.0, 2);
        assert_eq!(f.len(), 2);
        assert!(f[0] > 29.0 && f[0] < 32.0, "{f:?}");
        assert!((f[1] - 50.0).abs() < 0.5, "{f:?}");
    }
}
