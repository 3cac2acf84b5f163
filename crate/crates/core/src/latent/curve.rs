use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Recipe for a per-window interpolation curve.
///
/// Text form: `const:1.0`, `lin:0:1`, `sine:p=32,ph=0,a=1,o=0`, `bp:0=0,10=1,20=0`.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveSpec {
    Constant(f64),
    /// Straight line from the first to the last window.
    Linear { from: f64, to: f64 },
    /// `offset + amplitude * sin(2 pi i / period + phase)` with `period` in windows.
    Sine {
        period: f64,
        phase: f64,
        amplitude: f64,
        offset: f64,
    },
    /// `(window index, value)` pairs, linearly interpolated and held flat outside.
    Breakpoints(Vec<(usize, f64)>),
}

/// Per-window blend weights, each clamped to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationCurve {
    values: Vec<f64>,
}

impl InterpolationCurve {
    /// Clamps every value into `[-1, 1]`. Non-finite values are rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite curve value {v}")));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn generate_curve(spec: &CurveSpec, length: usize) -> Result<InterpolationCurve> {
    if length == 0 {
        return Err(Error::InvalidParameter("curve length must be >= 1".into()));
    }
    let values: Vec<f64> = match spec {
        CurveSpec::Constant(c) => vec![*c; length],
        CurveSpec::Linear { from, to } => {
            if length == 1 {
                vec![*from]
            } else {
                let span = (length - 1) as f64;
                (0..length).map(|i| from + (to - from) * (i as f64 / span)).collect()
            }
        }
        CurveSpec::Sine {
            period,
            phase,
            amplitude,
            offset,
        } => {
            if !(*period > 0.0 && period.is_finite()) {
                return Err(Error::InvalidParameter(format!("sine period must be > 0, got {period}")));
            }
            (0..length)
                .map(|i| offset + amplitude * (TAU * i as f64 / period + phase).sin())
                .collect()
        }
        CurveSpec::Breakpoints(points) => {
            if points.is_empty() {
                return Err(Error::EmptySpec("breakpoint list is empty".into()));
            }
            let mut pts = points.clone();
            pts.sort_by_key(|p| p.0);
            (0..length).map(|i| breakpoint_value(&pts, i)).collect()
        }
    };
    InterpolationCurve::new(values)
}

fn breakpoint_value(pts: &[(usize, f64)], i: usize) -> f64 {
    let first = pts[0];
    let last = pts[pts.len() - 1];
    if i <= first.0 {
        return first.1;
    }
    if i >= last.0 {
        return last.1;
    }
    let k = pts.partition_point(|p| p.0 <= i);
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    if x1 == x0 {
        return y1;
    }
    y0 + (y1 - y0) * ((i - x0) as f64 / (x1 - x0) as f64)
}

fn num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("bad {what} `{s}` in curve spec")))
}

impl FromStr for CurveSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::EmptySpec("empty curve expression".into()));
        }
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "const" => Ok(CurveSpec::Constant(num(body, "constant")?)),
            "lin" => {
                let (a, b) = body
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidParameter(format!("`{s}`: expected lin:<from>:<to>")))?;
                Ok(CurveSpec::Linear {
                    from: num(a, "start")?,
                    to: num(b, "end")?,
                })
            }
            "sine" => {
                let (mut period, mut phase, mut amplitude, mut offset) = (None, 0.0, 1.0, 0.0);
                for field in body.split(',').filter(|f| !f.trim().is_empty()) {
                    let (k, v) = field
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidParameter(format!("`{field}`: expected key=value")))?;
                    match k.trim() {
                        "p" => period = Some(num(v, "period")?),
                        "ph" => phase = num(v, "phase")?,
                        "a" => amplitude = num(v, "amplitude")?,
                        "o" => offset = num(v, "offset")?,
                        other => {
                            return Err(Error::InvalidParameter(format!("unknown sine key `{other}`")))
                        }
                    }
                }
                Ok(CurveSpec::Sine {
                    period: period.ok_or_else(|| Error::InvalidParameter("sine curve needs p=<period>".into()))?,
                    phase,
                    amplitude,
                    offset,
                })
            }
            "bp" => {
                let points = body
                    .split(',')
                    .filter(|f| !f.trim().is_empty())
                    .map(|field| {
                        let (k, v) = field
                            .split_once('=')
                            .ok_or_else(|| Error::InvalidParameter(format!("`{field}`: expected index=value")))?;
                        let idx = k
                            .trim()
                            .parse::<usize>()
                            .map_err(|_| Error::InvalidParameter(format!("bad breakpoint index `{k}`")))?;
                        Ok((idx, num(v, "breakpoint value")?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if points.is_empty() {
                    return Err(Error::EmptySpec(format!("`{s}` has no breakpoints")));
                }
                Ok(CurveSpec::Breakpoints(points))
            }
            other => Err(Error::InvalidParameter(format!("unknown curve kind `{other}`"))),
        }
    }
}

impl fmt::Display for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSpec::Constant(c) => write!(f, "const:{c}"),
            CurveSpec::Linear { from, to } => write!(f, "lin:{from}:{to}"),
            CurveSpec::Sine {
                period,
                phase,
                amplitude,
                offset,
            } => write!(f, "sine:p={period},ph={phase},a={amplitude},o={offset}"),
            CurveSpec::Breakpoints(pts) => {
                write!(f, "bp:")?;
                for (i, (x, y)) in pts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}={y}")?;
                }
                Ok(())
            }
        }
    }
}
