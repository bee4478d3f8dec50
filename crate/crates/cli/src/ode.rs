//! The `solve-ode` command for the scalar comparison equation `z' + αz^δ = g`.

use std::io::Write;
use std::str::FromStr;

use anyhow::{bail, Context};
use glx_core::comparison_ode::{
    solve_comparison, stability_gap, Constant, ExtinctionProfile, PiecewiseConstant, Zero,
};
use glx_core::Source;

use crate::{Classify, CliResult};

/// Source grammar: `zero`, `constant:C`, `extinction:T0`, or
/// `piecewise:K1,K2,...:V0,V1,...` with one more value than knots.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceSpec {
    Zero,
    Constant(f64),
    Extinction { t0: f64 },
    Piecewise { knots: Vec<f64>, values: Vec<f64> },
}

fn list(s: &str) -> anyhow::Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number `{x}`")))
        .collect()
}

impl FromStr for SourceSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let mut parts = s.splitn(3, ':');
        let head = parts.next().unwrap_or_default();
        let arg = parts.next();
        Ok(match (head, arg) {
            ("zero", None) => SourceSpec::Zero,
            ("constant", Some(c)) => SourceSpec::Constant(c.parse().with_context(|| format!("bad constant `{c}`"))?),
            ("extinction", Some(t)) => SourceSpec::Extinction {
                t0: t.parse().with_context(|| format!("bad extinction time `{t}`"))?,
            },
            ("piecewise", Some(k)) => {
                let v = parts.next().context("piecewise needs `piecewise:KNOTS:VALUES`")?;
                SourceSpec::Piecewise {
                    knots: list(k)?,
                    values: list(v)?,
                }
            }
            _ => bail!("unknown source `{s}` (expected zero, constant:C, extinction:T0 or piecewise:K:V)"),
        })
    }
}

impl SourceSpec {
    pub fn build(&self, alpha: f64, delta: f64) -> anyhow::Result<Box<dyn Source>> {
        Ok(match self {
            SourceSpec::Zero => Box::new(Zero),
            SourceSpec::Constant(c) => {
                if !(c.is_finite() && *c >= 0.0) {
                    bail!("source must be nonnegative, got {c}");
                }
                Box::new(Constant(*c))
            }
            SourceSpec::Extinction { t0 } => Box::new(ExtinctionProfile::new(alpha, delta, *t0)?.forcing()),
            SourceSpec::Piecewise { knots, values } => {
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    bail!("source must be nonnegative, got {v}");
                }
                Box::new(PiecewiseConstant::new(knots.clone(), values.clone())?)
            }
        })
    }

    fn exact(&self, alpha: f64, delta: f64) -> Option<ExtinctionProfile> {
        match self {
            SourceSpec::Extinction { t0 } => ExtinctionProfile::new(alpha, delta, *t0).ok(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OdeRequest {
    pub alpha: f64,
    pub delta: f64,
    /// Defaults to the matching closed-form start for `extinction` sources.
    pub z0: Option<f64>,
    pub t0: f64,
    pub t_end: f64,
    pub dt_out: f64,
    pub source: SourceSpec,
    /// Second solution for the stability columns.
    pub compare: Option<(SourceSpec, f64)>,
}

/// Writes CSV with `t,z`, plus `exact` for extinction sources and `z2,lhs,rhs`
/// when a comparison solution is requested (`lhs ≤ rhs` is the stability
/// estimate from `t0`).
pub fn cmd_solve_ode(req: &OdeRequest, out: &mut dyn Write) -> CliResult<()> {
    let (alpha, delta) = (req.alpha, req.delta);
    let g = req.source.build(alpha, delta).invalid()?;
    let exact = req.source.exact(alpha, delta);
    let z0 = match (req.z0, &exact) {
        (Some(z), _) => z,
        (None, Some(p)) => p.zeta(req.t0),
        (None, None) => return Err(crate::CliError::validation(anyhow::anyhow!("--z0 is required"))),
    };
    let z = solve_comparison(alpha, delta, g.as_ref(), z0, req.t0, req.t_end, req.dt_out).invalid()?;
    let second = match &req.compare {
        Some((spec, z0b)) => {
            let g2 = spec.build(alpha, delta).invalid()?;
            let z2 = solve_comparison(alpha, delta, g2.as_ref(), *z0b, req.t0, req.t_end, req.dt_out).invalid()?;
            Some((g2, z2))
        }
        None => None,
    };

    let mut header = String::from("t,z");
    if exact.is_some() {
        header.push_str(",exact");
    }
    if second.is_some() {
        header.push_str(",z2,lhs,rhs");
    }
    writeln!(out, "{header}").failed()?;
    for (i, (&t, &v)) in z.times.iter().zip(&z.values).enumerate() {
        let mut line = format!("{t:.16e},{v:.16e}");
        if let Some(p) = &exact {
            line.push_str(&format!(",{:.16e}", p.zeta(t)));
        }
        if let Some((g2, z2)) = &second {
            let (lhs, rhs) = stability_gap(&z, z2, g.as_ref(), g2.as_ref(), req.t0, t).failed()?;
            line.push_str(&format!(",{:.16e},{lhs:.16e},{rhs:.16e}", z2.values[i]));
        }
        writeln!(out, "{line}").failed()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_grammar() {
        assert_eq!("zero".parse::<SourceSpec>().unwrap(), SourceSpec::Zero);
        assert_eq!("constant:0.5".parse::<SourceSpec>().unwrap(), SourceSpec::Constant(0.5));
        assert_eq!(
            "piecewise:1,2:0,3,0".parse::<SourceSpec>().unwrap(),
            SourceSpec::Piecewise {
                knots: vec![1.0, 2.0],
                values: vec![0.0, 3.0, 0.0]
            }
        );
        assert!("piecewise:1".parse::<SourceSpec>().is_err());
        assert!("linear:1".parse::<SourceSpec>().is_err());
        assert!("constant:-1".parse::<SourceSpec>().unwrap().build(1.0, 0.6).is_err());
    }

    #[test]
    fn extinction_source_tracks_closed_form() {
        let req = OdeRequest {
            alpha: 1.0,
            delta: 0.6,
            z0: None,
            t0: 0.0,
            t_end: 1.5,
            dt_out: 0.05,
            source: SourceSpec::Extinction { t0: 1.0 },
            compare: Some((SourceSpec::Zero, 0.2)),
        };
        let mut buf = Vec::new();
        cmd_solve_ode(&req, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,z,exact,z2,lhs,rhs"));
        for line in lines {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!((v[1] - v[2]).abs() <= 1e-8, "{line}");
            assert!(v[4] <= v[5] + 1e-9, "{line}");
        }
    }
}
