//! Text forms for points, choices and orbits on the command line.
//!
//! ```text
//! point  := number (',' number){1,2}
//! choice := 'slide' | 'cross' | ('plus' | 'minus') ('@' dwell)?
//! orbit  := point (':' choice (',' choice)*)?
//! ```

use anyhow::{bail, Context, Result};
use filippov::integrate::{Choice, SigmaAction};
use filippov::Point;

pub fn point(text: &str, dim: usize) -> Result<Point> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad coordinate {s:?}")))
        .collect::<Result<_>>()?;
    if parts.len() != dim {
        bail!("point {text:?} has {} coordinates, the system has {dim}", parts.len());
    }
    let mut p = [0.0; 3];
    p[..dim].copy_from_slice(&parts);
    Ok(p)
}

pub fn choice(text: &str) -> Result<Choice> {
    let (name, dwell) = match text.split_once('@') {
        Some((n, d)) => (n.trim(), Some(d.trim().parse::<f64>().with_context(|| format!("bad dwell in {text:?}"))?)),
        None => (text.trim(), None),
    };
    let action = match name {
        "slide" => SigmaAction::EnterSliding,
        "cross" => SigmaAction::Cross,
        "plus" => SigmaAction::ExitToPlus,
        "minus" => SigmaAction::ExitToMinus,
        other => bail!("unknown choice {other:?} (slide, cross, plus, minus)"),
    };
    Ok(match dwell {
        Some(d) if action == SigmaAction::ExitToPlus || action == SigmaAction::ExitToMinus => Choice::after(action, d),
        Some(_) => bail!("only plus and minus take a dwell: {text:?}"),
        None => Choice::new(action),
    })
}

pub fn choices(text: &str) -> Result<Vec<Choice>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(choice).collect()
}

pub fn orbit(text: &str, dim: usize) -> Result<(Point, Vec<Choice>)> {
    match text.split_once(':') {
        Some((p, c)) => Ok((point(p, dim)?, choices(c)?)),
        None => Ok((point(text, dim)?, Vec::new())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_orbit_spec() {
        let (p, c) = orbit("0.5, 0:plus@1.5,slide", 2).unwrap();
        assert_eq!(p, [0.5, 0.0, 0.0]);
        assert_eq!(c, vec![Choice::after(SigmaAction::ExitToPlus, 1.5), Choice::new(SigmaAction::EnterSliding)]);
        assert!(orbit("1,2,3", 2).is_err());
        assert!(choice("slide@2").is_err());
    }
}
