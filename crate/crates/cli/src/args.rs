//! Value syntaxes shared by flags and config keys.

use std::str::FromStr;

use ising_diag::{Root, C64};

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("{s:?} is not a number"))
}

/// `re` or `re,im`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexArg(pub C64);

impl FromStr for ComplexArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let z = match s.split_once(',') {
            Some((re, im)) => C64::new(parse_f64(re)?, parse_f64(im)?),
            None => C64::new(parse_f64(s)?, 0.0),
        };
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(format!("{s:?} is not finite"));
        }
        Ok(ComplexArg(z))
    }
}

/// Root of unity `p/q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsArg(pub Root);

impl FromStr for EpsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Root::parse(s).map(EpsArg).map_err(|e| e.to_string())
    }
}

/// Radial exponents `j0..j1`, inclusive, for radii `1 - 2^-j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadiiArg {
    pub j0: u32,
    pub j1: u32,
}

impl FromStr for RadiiArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected j0..j1 with 1 <= j0 < j1 <= 52, got {s:?}");
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let j0: u32 = a.trim().parse().map_err(|_| bad())?;
        let j1: u32 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad())?;
        if !(1 <= j0 && j0 < j1 && j1 <= 52) {
            return Err(bad());
        }
        Ok(RadiiArg { j0, j1 })
    }
}

/// A sweep grid: `start:stop:step` (real, inclusive), or a list of `k`
/// values separated by `;` or whitespace, each `re` or `re,im`. The empty
/// string is the empty grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridArg(pub Vec<C64>);

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(GridArg(Vec::new()));
        }
        if s.contains(':') {
            return range(s).map(GridArg);
        }
        s.split(|c: char| c == ';' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<ComplexArg>().map(|c| c.0))
            .collect::<Result<_, _>>()
            .map(GridArg)
    }
}

fn decimals(s: &str) -> Option<u32> {
    if s.contains(['e', 'E']) {
        return None;
    }
    Some(s.split_once('.').map_or(0, |(_, f)| f.len() as u32))
}

/// Points are generated on an integer lattice when the inputs are plain
/// decimals, so `0.1:0.8:0.1` yields exactly the doubles nearest `0.3` etc.
fn range(s: &str) -> Result<Vec<C64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let [a, b, h] = parts[..] else {
        return Err(format!("expected start:stop:step, got {s:?}"));
    };
    let (start, stop, step) = (parse_f64(a)?, parse_f64(b)?, parse_f64(h)?);
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
        return Err(format!(
            "grid {s:?} needs finite bounds and a positive step"
        ));
    }
    if stop < start {
        return Ok(Vec::new());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(format!("grid {s:?} has more than 10^6 points"));
    }
    let digits = [a, b, h]
        .iter()
        .map(|t| decimals(t))
        .collect::<Option<Vec<_>>>();
    let points = match digits.map(|d| d.into_iter().max().unwrap_or(0)) {
        Some(d) if d <= 15 => {
            let scale = 10f64.powi(d as i32);
            let (a, h) = ((start * scale).round(), (step * scale).round());
            (0..count)
                .map(|i| (a + i as f64 * h) / scale)
                .collect::<Vec<_>>()
        }
        _ => (0..count).map(|i| start + i as f64 * step).collect(),
    };
    Ok(points.into_iter().map(|x| C64::new(x, 0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_values() {
        assert_eq!("0.3".parse::<ComplexArg>().unwrap().0, C64::new(0.3, 0.0));
        assert_eq!(
            "0.2,-0.5".parse::<ComplexArg>().unwrap().0,
            C64::new(0.2, -0.5)
        );
        assert!("x".parse::<ComplexArg>().is_err());
        assert!("inf".parse::<ComplexArg>().is_err());
    }

    #[test]
    fn radii_ranges() {
        assert_eq!(
            "4..10".parse::<RadiiArg>().unwrap(),
            RadiiArg { j0: 4, j1: 10 }
        );
        assert_eq!(
            "4..=10".parse::<RadiiArg>().unwrap(),
            RadiiArg { j0: 4, j1: 10 }
        );
        assert!("10..4".parse::<RadiiArg>().is_err());
        assert!("0..4".parse::<RadiiArg>().is_err());
    }

    #[test]
    fn grids() {
        let g = "0.1:0.8:0.1".parse::<GridArg>().unwrap().0;
        assert_eq!(g.len(), 8);
        assert_eq!(g[2].re, 0.3);
        assert_eq!(g[7].re, 0.8);
        assert!("".parse::<GridArg>().unwrap().0.is_empty());
        let l = "0; 0.5,0.1 0.2".parse::<GridArg>().unwrap().0;
        assert_eq!(
            l,
            vec![C64::new(0.0, 0.0), C64::new(0.5, 0.1), C64::new(0.2, 0.0)]
        );
        assert!("0:1:0".parse::<GridArg>().is_err());
        assert_eq!("1e-1:2e-1:1e-1".parse::<GridArg>().unwrap().0.len(), 2);
    }
}
