//! Wilson score intervals, continuity-corrected McNemar, confusion matrices.

use core::fmt;

use libm::{erfc, log, sqrt};
use serde::{Deserialize, Serialize};

/// `z` at 95% two-sided confidence.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("need 0 <= k <= n and n >= 1 (k = {k}, n = {n})")]
    Domain { k: u64, n: u64 },
    #[error("confidence must lie strictly between 0 and 1")]
    Confidence,
}

/// Inverse standard-normal CDF.
///
/// Acklam's rational approximation followed by one Halley step against
/// `erfc`, which brings the error well under 1e-12 across (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = if p < P_LOW {
        let q = sqrt(-2.0 * log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = sqrt(-2.0 * log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement
    let e = 0.5 * erfc(-x / core::f64::consts::SQRT_2) - p;
    let u = e * sqrt(2.0 * core::f64::consts::PI) * libm::exp(x * x / 2.0);
    x - u / (1.0 + x * u / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilsonInterval {
    pub low: f64,
    pub high: f64,
    pub k: u64,
    pub n: u64,
    pub z: f64,
}

impl fmt::Display for WilsonInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.2}, {:.2}]", self.low, self.high)
    }
}

/// Wilson score interval for `k` successes in `n` trials, clipped to [0, 1].
pub fn wilson(k: u64, n: u64, confidence: f64) -> Result<WilsonInterval, StatsError> {
    if n == 0 || k > n {
        return Err(StatsError::Domain { k, n });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::Confidence);
    }
    let z = if confidence == 0.95 {
        Z_95
    } else {
        normal_quantile(1.0 - (1.0 - confidence) / 2.0)
    };
    Ok(wilson_with_z(k, n, z))
}

pub fn wilson95(k: u64, n: u64) -> Result<WilsonInterval, StatsError> {
    wilson(k, n, 0.95)
}

fn wilson_with_z(k: u64, n: u64, z: f64) -> WilsonInterval {
    let (kf, nf) = (k as f64, n as f64);
    let z2 = z * z;
    let center = (kf + z2 / 2.0) / (nf + z2);
    let half = z / (nf + z2) * sqrt(kf * (nf - kf) / nf + z2 / 4.0);
    WilsonInterval {
        low: (center - half).clamp(0.0, 1.0),
        high: (center + half).clamp(0.0, 1.0),
        k,
        n,
        z,
    }
}

/// Continuity-corrected McNemar statistic `(|b - c| - 1)^2 / (b + c)`,
/// 0 when there are no disagreements. `|b - c| - 1` is not clamped.
pub fn mcnemar(b: u64, c: u64) -> f64 {
    if b + c == 0 {
        return 0.0;
    }
    let d = b.abs_diff(c) as f64 - 1.0;
    d * d / (b + c) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Adversarial,
    Legit,
}

impl Label {
    pub const fn as_str(self) -> &'static str {
        match self {
            Label::Adversarial => "adversarial",
            Label::Legit => "legit",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn record(&mut self, label: Label, blocked: bool) {
        match (label, blocked) {
            (Label::Adversarial, true) => self.tp += 1,
            (Label::Adversarial, false) => self.fn_ += 1,
            (Label::Legit, false) => self.tn += 1,
            (Label::Legit, true) => self.fp += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    /// Harmonic mean of precision and recall; undefined when either is, and
    /// 0 when both are 0.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
    }

    pub fn precision_interval(&self) -> Option<WilsonInterval> {
        wilson95(self.tp, self.tp + self.fp).ok()
    }

    pub fn recall_interval(&self) -> Option<WilsonInterval> {
        wilson95(self.tp, self.tp + self.fn_).ok()
    }

    pub fn fpr_interval(&self) -> Option<WilsonInterval> {
        wilson95(self.fp, self.fp + self.tn).ok()
    }
}

pub fn confusion<I>(samples: I) -> ConfusionMatrix
where
    I: IntoIterator<Item = (Label, bool)>,
{
    let mut m = ConfusionMatrix::default();
    for (label, blocked) in samples {
        m.record(label, blocked);
    }
    m
}

/// Three-decimal rendering with `--` for undefined metrics.
pub fn fmt_metric(v: Option<f64>) -> alloc::string::String {
    match v {
        Some(x) => alloc::format!("{x:.3}"),
        None => "--".into(),
    }
}
