//! Aggregation of click records into fractions and time histograms.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::Detector;
use crate::trajectory::{ClickEvent, TrajectoryResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Counts,
    /// Counts divided by the class total.
    Frequency,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    /// κ⁻¹.
    pub bin_width: f64,
    pub t_min: f64,
    /// `None`: the smallest multiple of `bin_width` covering every event.
    pub t_max: Option<f64>,
    pub normalization: Normalization,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            bin_width: 0.5,
            t_min: 0.0,
            t_max: None,
            normalization: Normalization::Counts,
        }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::InvalidParams(format!("bin_width must be > 0, got {}", self.bin_width)));
        }
        if let Some(t) = self.t_max {
            if t.is_nan() || t <= self.t_min {
                return Err(Error::InvalidParams(format!("histogram t_max {t} must exceed t_min {}", self.t_min)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HistClass {
    T1,
    T2,
    #[serde(rename = "dT_same")]
    DtSame,
    #[serde(rename = "dT_diff")]
    DtDiff,
}

impl HistClass {
    pub const ALL: [HistClass; 4] = [HistClass::T1, HistClass::T2, HistClass::DtSame, HistClass::DtDiff];

    pub fn label(self) -> &'static str {
        match self {
            HistClass::T1 => "T1",
            HistClass::T2 => "T2",
            HistClass::DtSame => "dT_same",
            HistClass::DtDiff => "dT_diff",
        }
    }
}

/// Left-closed, right-open bins `[t_min + i·w, t_min + (i+1)·w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub t_min: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(t_min: f64, bin_width: f64, bins: usize) -> Self {
        Histogram {
            t_min,
            bin_width,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn from_values(values: &[f64], spec: &HistogramSpec) -> Self {
        let bins = match spec.t_max {
            Some(t_max) => ((t_max - spec.t_min) / spec.bin_width).ceil() as usize,
            None => {
                let top = values.iter().copied().fold(spec.t_min, f64::max);
                ((top - spec.t_min) / spec.bin_width).floor() as usize + 1
            }
        };
        let mut h = Histogram::new(spec.t_min, spec.bin_width, bins.max(1));
        for &v in values {
            h.add(v);
        }
        h
    }

    pub fn bin_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_min) / self.bin_width;
        if x < 0.0 {
            return None;
        }
        let i = x.floor() as usize;
        (i < self.counts.len()).then_some(i)
    }

    pub fn add(&mut self, t: f64) {
        if t < self.t_min {
            self.underflow += 1;
        } else {
            match self.bin_of(t) {
                Some(i) => self.counts[i] += 1,
                None => self.overflow += 1,
            }
        }
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let left = self.t_min + i as f64 * self.bin_width;
        (left, left + self.bin_width)
    }

    /// Events inside the binned range.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// All events, including under- and overflow.
    pub fn events(&self) -> u64 {
        self.total() + self.underflow + self.overflow
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t_min, self.t_min + self.counts.len() as f64 * self.bin_width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_total: usize,
    pub n_complete: usize,
    pub n_censored: usize,
    pub n_aa: usize,
    pub n_ab: usize,
    pub n_ba: usize,
    pub n_bb: usize,
    pub f_same: f64,
    pub f_diff: f64,
    /// √(f(1−f)/n_complete).
    pub binomial_stderr: f64,
    pub mean_dt_same: Option<f64>,
    pub mean_dt_diff: Option<f64>,
    pub normalization: Normalization,
    /// Common (min, max) covering the T₁ and T₂ histograms, for plotting
    /// them on the same axis.
    pub shared_range: (f64, f64),
    pub hist_t1: Histogram,
    pub hist_t2: Histogram,
    pub hist_dt_same: Histogram,
    pub hist_dt_diff: Histogram,
}

impl EnsembleSummary {
    pub fn histogram(&self, class: HistClass) -> &Histogram {
        match class {
            HistClass::T1 => &self.hist_t1,
            HistClass::T2 => &self.hist_t2,
            HistClass::DtSame => &self.hist_dt_same,
            HistClass::DtDiff => &self.hist_dt_diff,
        }
    }

    /// (n_aa − n_bb) in units of its binomial standard error under
    /// P(aa) = P(bb).
    pub fn aa_bb_asymmetry_sigma(&self) -> f64 {
        let n = (self.n_aa + self.n_bb) as f64;
        if n == 0.0 {
            return 0.0;
        }
        (self.n_aa as f64 - self.n_bb as f64).abs() / n.sqrt()
    }

    /// Histogram CSV `bin_left,bin_right,count,class`; `count` holds
    /// relative frequencies under [`Normalization::Frequency`].
    pub fn write_histograms_csv<W: Write>(&self, mut writer: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(writer, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_left", "bin_right", "count", "class"])?;
        for class in HistClass::ALL {
            let h = self.histogram(class);
            let denom = h.events().max(1) as f64;
            for (i, &c) in h.counts.iter().enumerate() {
                let (l, r) = h.edges(i);
                let count = match self.normalization {
                    Normalization::Counts => c.to_string(),
                    Normalization::Frequency => format!("{}", c as f64 / denom),
                };
                w.write_record(&[format!("{l}"), format!("{r}"), count, class.label().to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn complete_pair(r: &TrajectoryResult) -> Option<(ClickEvent, ClickEvent)> {
    r.is_complete().then(|| (r.clicks[0], r.clicks[1]))
}

/// Waiting times T₂ − T₁ of complete records, split into same-detector
/// and different-detector outcomes.
pub fn waiting_time_split(results: &[TrajectoryResult]) -> (Vec<f64>, Vec<f64>) {
    let mut same = Vec::new();
    let mut diff = Vec::new();
    for (c1, c2) in results.iter().filter_map(complete_pair) {
        let dt = c2.time - c1.time;
        if c1.detector == c2.detector {
            same.push(dt);
        } else {
            diff.push(dt);
        }
    }
    (same, diff)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(results: &[TrajectoryResult], spec: &HistogramSpec) -> Result<EnsembleSummary> {
    spec.validate()?;
    let mut counts = [[0usize; 2]; 2];
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    for (c1, c2) in results.iter().filter_map(complete_pair) {
        counts[c1.detector.index()][c2.detector.index()] += 1;
        t1.push(c1.time);
        t2.push(c2.time);
    }
    let n_complete = t1.len();
    if n_complete == 0 {
        return Err(Error::DegenerateSummary(format!(
            "none of {} trajectories recorded two clicks",
            results.len()
        )));
    }
    let n_same = counts[0][0] + counts[1][1];
    let f_same = n_same as f64 / n_complete as f64;
    let (same, diff) = waiting_time_split(results);

    // T₁ and T₂ share one binning so they can be drawn on the same scale.
    let shared = HistogramSpec {
        t_max: Some(spec.t_max.unwrap_or_else(|| {
            let top = t2.iter().copied().fold(spec.t_min, f64::max);
            spec.t_min + (((top - spec.t_min) / spec.bin_width).floor() + 1.0) * spec.bin_width
        })),
        ..*spec
    };
    let hist_t1 = Histogram::from_values(&t1, &shared);
    let hist_t2 = Histogram::from_values(&t2, &shared);

    Ok(EnsembleSummary {
        n_total: results.len(),
        n_complete,
        n_censored: results.len() - n_complete,
        n_aa: counts[0][0],
        n_ab: counts[0][1],
        n_ba: counts[1][0],
        n_bb: counts[1][1],
        f_same,
        f_diff: 1.0 - f_same,
        binomial_stderr: (f_same * (1.0 - f_same) / n_complete as f64).sqrt(),
        mean_dt_same: mean(&same),
        mean_dt_diff: mean(&diff),
        normalization: spec.normalization,
        shared_range: hist_t1.range(),
        hist_t1,
        hist_t2,
        hist_dt_same: Histogram::from_values(&same, spec),
        hist_dt_diff: Histogram::from_values(&diff, spec),
    })
}

/// Fraction of same-detector records among complete ones, read back from
/// per-trajectory click lists.
pub fn same_fraction_from_clicks(records: &[(usize, Vec<ClickEvent>)]) -> Option<f64> {
    let complete: Vec<_> = records.iter().filter(|(_, c)| c.len() == 2).collect();
    if complete.is_empty() {
        return None;
    }
    let same = complete.iter().filter(|(_, c)| c[0].detector == c[1].detector).count();
    Some(same as f64 / complete.len() as f64)
}

/// Percentile bootstrap interval for mean(ΔT_diff) − mean(ΔT_same).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    pub resamples: usize,
}

pub fn bootstrap_mean_difference(same: &[f64], diff: &[f64], confidence: f64, resamples: usize, seed: u64) -> Result<BootstrapInterval> {
    let (Some(ms), Some(md)) = (mean(same), mean(diff)) else {
        return Err(Error::DegenerateSummary("bootstrap needs records of both classes".into()));
    };
    if !(confidence > 0.0 && confidence < 1.0) || resamples < 2 {
        return Err(Error::InvalidParams("confidence must lie in (0,1) and resamples >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resample_mean = |v: &[f64], rng: &mut ChaCha8Rng| {
        (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).sum::<f64>() / v.len() as f64
    };
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| resample_mean(diff, &mut rng) - resample_mean(same, &mut rng))
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - confidence;
    let pick = |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok(BootstrapInterval {
        estimate: md - ms,
        lower: pick(alpha / 2.0),
        upper: pick(1.0 - alpha / 2.0),
        confidence,
        resamples,
    })
}

/// Binomial standard error of a fraction f over n trials.
pub fn binomial_stderr(f: f64, n: usize) -> f64 {
    (f * (1.0 - f) / n as f64).sqrt()
}

#[doc(hidden)]
pub fn record(d1: Detector, t1: f64, d2: Detector, t2: f64) -> TrajectoryResult {
    TrajectoryResult {
        clicks: vec![ClickEvent { detector: d1, time: t1 }, ClickEvent { detector: d2, time: t2 }],
        residual_norm2: 0.0,
        click_mass: 0.0,
        censored: false,
    }
}
