//! Parsing of numeric grid flags: `start:step:stop`, `a,b,c` or a single value.

use anyhow::{bail, Context, Result};

/// Endpoint slack, relative to `max(|stop|, 1)`.
const INCLUSIVE_TOL: f64 = 1e-12;

pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("grid {spec:?} must have the form start:step:stop");
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().with_context(|| format!("invalid number {s:?} in grid {spec:?}"))
        };
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
            bail!("grid {spec:?} needs finite endpoints and a positive step");
        }
        if stop < start {
            bail!("grid {spec:?} ends before it starts");
        }
        let slack = INCLUSIVE_TOL * stop.abs().max(1.0);
        let n = ((stop - start + slack) / step).floor() as usize;
        let mut out: Vec<f64> = (0..=n).map(|i| start + i as f64 * step).collect();
        // snap the last point onto `stop` when it lands within the slack
        if let Some(last) = out.last_mut() {
            if (*last - stop).abs() <= slack {
                *last = stop;
            }
        }
        Ok(out)
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .with_context(|| format!("invalid number {s:?} in list {spec:?}"))
            })
            .collect()
    }
}

pub fn parse_bounds(spec: &str) -> Result<[f64; 4]> {
    let v = parse_grid(spec)?;
    if v.len() != 4 || spec.contains(':') {
        bail!("bounds {spec:?} must be four comma-separated values tau',tau*,tau_circ,tau_natural");
    }
    Ok([v[0], v[1], v[2], v[3]])
}
