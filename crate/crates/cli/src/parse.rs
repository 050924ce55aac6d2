//! Shorthand parsers for command-line values.

use anyhow::{anyhow, bail, Context, Result};
use svcert::KernelSpec;

/// `linear`, `gaussian[:width]` or `poly:degree[:offset]`.
pub fn kernel(text: &str) -> Result<KernelSpec> {
    let mut parts = text.split(':');
    let kind = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let num = |s: &str| s.parse::<f64>().with_context(|| format!("bad kernel parameter {s:?}"));
    let spec = match (kind, args.as_slice()) {
        ("linear", []) => KernelSpec::Linear,
        ("gaussian" | "rbf", []) => KernelSpec::Gaussian { width: 1.0 },
        ("gaussian" | "rbf", [w]) => KernelSpec::Gaussian { width: num(w)? },
        ("poly" | "polynomial", [d]) => KernelSpec::Polynomial {
            degree: d.parse().with_context(|| format!("bad polynomial degree {d:?}"))?,
            offset: 0.0,
        },
        ("poly" | "polynomial", [d, c]) => KernelSpec::Polynomial {
            degree: d.parse().with_context(|| format!("bad polynomial degree {d:?}"))?,
            offset: num(c)?,
        },
        _ => bail!("unknown kernel {text:?} (expected linear, gaussian[:width] or poly:degree[:offset])"),
    };
    spec.validate()?;
    Ok(spec)
}

/// A decimal or a fraction such as `3/5`.
fn number(text: &str) -> Result<f64> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().with_context(|| format!("bad number {text:?}"))?;
            let b: f64 = b.trim().parse().with_context(|| format!("bad number {text:?}"))?;
            a / b
        }
        None => text.parse().with_context(|| format!("bad number {text:?}"))?,
    };
    if !value.is_finite() {
        bail!("{text:?} is not a finite number");
    }
    Ok(value)
}

/// `pow(base,lo..hi)` (inclusive range of exponents) or a comma list.
pub fn rhos(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let values = if let Some(inner) = text.strip_prefix("pow(").and_then(|s| s.strip_suffix(')')) {
        let (base, range) = inner
            .rsplit_once(',')
            .ok_or_else(|| anyhow!("expected pow(base,lo..hi), got {text:?}"))?;
        let base = number(base)?;
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| anyhow!("expected an exponent range lo..hi, got {range:?}"))?;
        let lo: i32 = lo.trim().parse().with_context(|| format!("bad exponent {lo:?}"))?;
        let hi: i32 = hi.trim().parse().with_context(|| format!("bad exponent {hi:?}"))?;
        if lo > hi {
            bail!("empty exponent range {lo}..{hi}");
        }
        (lo..=hi).map(|l| base.powi(l)).collect()
    } else {
        text.split(',').map(number).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() || values.iter().any(|&r| r <= 0.0) {
        bail!("relaxation weights must be positive, got {text:?}");
    }
    Ok(values)
}
