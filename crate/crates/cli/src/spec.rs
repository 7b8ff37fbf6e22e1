//! Mini-grammars for families, states and scan coordinates.

use cohinfo_core::{family_rho_r, family_rho_u, family_rho_wv, DensityMatrix, StateFamily};

#[derive(Clone, Debug, PartialEq)]
pub enum FamilySpec {
    /// `u:<val>`: ρ(u) at one point.
    UPoint(f64),
    /// `u`: ρ(u) with u free.
    U,
    /// `r`: ρ(r₁, r₂, r₃).
    R,
    /// `wv`: ρ(w, v) with both free.
    Wv,
    /// `wv:<v>`: ρ(w, v) with v fixed.
    WvFixed(f64),
    /// `general`: every input state.
    General,
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("invalid {what} `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("{what} must be finite, got `{s}`"));
    }
    Ok(v)
}

fn numbers(s: &str, n: usize, what: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != n {
        return Err(format!("{what} expects {n} comma-separated numbers, got `{s}`"));
    }
    parts.iter().map(|p| number(p, what)).collect()
}

impl FamilySpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s.split_once(':') {
            None => match s {
                "u" => Ok(FamilySpec::U),
                "r" => Ok(FamilySpec::R),
                "wv" => Ok(FamilySpec::Wv),
                "general" => Ok(FamilySpec::General),
                _ => Err(format!("unknown family `{s}`")),
            },
            Some(("u", v)) => Ok(FamilySpec::UPoint(number(v, "u")?)),
            Some(("wv", v)) => Ok(FamilySpec::WvFixed(number(v, "v")?)),
            Some(_) => Err(format!("unknown family `{s}`")),
        }
    }

    /// The parameterized family, or None for a point or `general`.
    pub fn family(&self) -> Result<Option<StateFamily>, String> {
        Ok(match self {
            FamilySpec::U => Some(StateFamily::rho_u()),
            FamilySpec::R => Some(StateFamily::rho_r()),
            FamilySpec::Wv => Some(StateFamily::rho_wv()),
            FamilySpec::WvFixed(v) => Some(StateFamily::rho_w(*v).map_err(|e| e.to_string())?),
            FamilySpec::UPoint(_) | FamilySpec::General => None,
        })
    }
}

/// Parses `u:<u>`, `wv:<w>,<v>`, `r:<r1>,<r2>,<r3>` or `mixed:<d>`.
pub fn parse_state(s: &str) -> Result<DensityMatrix, String> {
    let s = s.trim();
    let (name, args) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `name:values`, got `{s}`"))?;
    let rho = match name {
        "u" => family_rho_u(number(args, "u")?),
        "wv" => {
            let p = numbers(args, 2, "wv")?;
            family_rho_wv(p[0], p[1])
        }
        "r" => {
            let p = numbers(args, 3, "r")?;
            family_rho_r(p[0], p[1], p[2])
        }
        "mixed" => {
            let d: usize = args
                .trim()
                .parse()
                .map_err(|_| format!("invalid dimension `{args}`"))?;
            if d == 0 || d > 64 {
                return Err(format!("dimension {d} out of range [1, 64]"));
            }
            Ok(DensityMatrix::maximally_mixed(d))
        }
        _ => return Err(format!("unknown state `{name}`")),
    };
    rho.map_err(|e| e.to_string())
}

/// Index of `r1`/`r2`/`r3`.
pub fn parse_axis(s: &str) -> Result<usize, String> {
    match s.trim() {
        "r1" => Ok(0),
        "r2" => Ok(1),
        "r3" => Ok(2),
        other => Err(format!("unknown axis `{other}`, expected r1, r2 or r3")),
    }
}

/// Parses `rI=x,rJ=y` naming exactly the two coordinates other than `axis`,
/// returned in coordinate order.
pub fn parse_fixed(s: &str, axis: usize) -> Result<[f64; 2], String> {
    let mut values: [Option<f64>; 3] = [None; 3];
    for part in s.split(',') {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| format!("expected `key=value`, got `{part}`"))?;
        let idx = parse_axis(key)?;
        if idx == axis {
            return Err(format!("`{}` is the scan axis and cannot be fixed", key.trim()));
        }
        if values[idx].replace(number(val, key.trim())?).is_some() {
            return Err(format!("`{}` given twice", key.trim()));
        }
    }
    let rest: Vec<f64> = (0..3)
        .filter(|&i| i != axis)
        .map(|i| values[i].ok_or_else(|| format!("missing fixed value for r{}", i + 1)))
        .collect::<Result<_, _>>()?;
    Ok([rest[0], rest[1]])
}

pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let p = numbers(s, 2, "range")?;
    if p[0] > p[1] {
        return Err(format!("range `{s}` is decreasing"));
    }
    Ok((p[0], p[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_grammar() {
        assert_eq!(FamilySpec::parse("u").unwrap(), FamilySpec::U);
        assert_eq!(FamilySpec::parse("u:0.445").unwrap(), FamilySpec::UPoint(0.445));
        assert_eq!(FamilySpec::parse("r").unwrap(), FamilySpec::R);
        assert_eq!(FamilySpec::parse("wv:0.27").unwrap(), FamilySpec::WvFixed(0.27));
        assert_eq!(FamilySpec::parse("general").unwrap(), FamilySpec::General);
        for bad in ["x", "u:abc", "r:1", "wv:nan", ""] {
            assert!(FamilySpec::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn state_grammar() {
        assert_eq!(parse_state("u:0.5").unwrap().dim(), 3);
        assert_eq!(parse_state("wv:0.5,0.27").unwrap().dim(), 6);
        assert_eq!(parse_state("r:0.44,0.07,0.27").unwrap().dim(), 6);
        assert_eq!(parse_state("mixed:4").unwrap().dim(), 4);
        assert!(parse_state("u:1.5").is_err());
        assert!(parse_state("r:0.8,0.5,0.1").is_err());
        assert!(parse_state("wv:0.5").is_err());
        assert!(parse_state("u").is_err());
        assert!(parse_state("mixed:0").is_err());
    }

    #[test]
    fn fixed_coordinates() {
        assert_eq!(parse_fixed("r2=0.07,r3=0.27", 0).unwrap(), [0.07, 0.27]);
        assert_eq!(parse_fixed("r3=0.27,r1=0.44", 1).unwrap(), [0.44, 0.27]);
        assert!(parse_fixed("r1=0.1,r3=0.27", 0).is_err());
        assert!(parse_fixed("r2=0.07", 0).is_err());
        assert!(parse_fixed("r2=0.07,r2=0.1", 0).is_err());
        assert!(parse_fixed("r4=0.07,r3=0.1", 0).is_err());
        assert!(parse_fixed("r2:0.07,r3=0.1", 0).is_err());
    }

    #[test]
    fn axes_and_ranges() {
        assert_eq!(parse_axis("r3").unwrap(), 2);
        assert!(parse_axis("w").is_err());
        assert_eq!(parse_range("0.3,0.6").unwrap(), (0.3, 0.6));
        assert!(parse_range("0.6,0.3").is_err());
        assert!(parse_range("0.6").is_err());
    }
}
