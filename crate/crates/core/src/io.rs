//! CSV formats for point clouds, oracle clouds and convergence tables.
//!
//! Floats are written with the shortest decimal that round-trips exactly
//! (standard library formatting); the `+inf` sentinel is encoded as the
//! literal `inf`. Files are UTF-8 with LF line endings.

use crate::grid::{PointSource, SurfacePoint};
use crate::{Error, Result};
use std::io::{BufRead, Write};
use std::path::Path;

pub const CLOUD_HEADER: &str = "i,j,x,y,psi,nx,ny,nt,orient,source,attempts";

pub fn write_cloud(path: &Path, rows: &[SurfacePoint]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CLOUD_HEADER}")?;
    for p in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.i,
            p.j,
            p.x,
            p.y,
            p.psi,
            p.normal3[0],
            p.normal3[1],
            p.normal3[2],
            p.orient,
            p.source.as_str(),
            p.attempts
        )?;
    }
    Ok(())
}

pub fn read_cloud(path: &Path) -> Result<Vec<SurfacePoint>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut rows = Vec::new();
    for (k, line) in file.lines().enumerate() {
        let line = line?;
        if k == 0 {
            if line != CLOUD_HEADER {
                return Err(Error::Config(format!("unexpected cloud header `{line}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(Error::Config(format!("bad cloud row `{line}`")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Config(format!("bad float `{s}`: {e}")))
        };
        let mut p = SurfacePoint::new(
            f[0].parse().map_err(|_| Error::Config(format!("bad index `{}`", f[0])))?,
            f[1].parse().map_err(|_| Error::Config(format!("bad index `{}`", f[1])))?,
            num(f[2])?,
            num(f[3])?,
            num(f[4])?,
            [num(f[5])?, num(f[6])?, num(f[7])?],
            PointSource::parse(f[9])
                .ok_or_else(|| Error::Config(format!("bad source `{}`", f[9])))?,
        );
        p.orient = f[8].parse().map_err(|_| Error::Config(format!("bad orient `{}`", f[8])))?;
        p.attempts =
            f[10].parse().map_err(|_| Error::Config(format!("bad attempts `{}`", f[10])))?;
        Ok::<(), Error>(()).map(|_| rows.push(p))?;
    }
    Ok(rows)
}

pub const ORACLE_HEADER: &str = "x,y,t";

pub fn write_oracle(path: &Path, points: &[[f64; 3]]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{ORACLE_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{}", p[0], p[1], p[2])?;
    }
    Ok(())
}

pub fn read_oracle(path: &Path) -> Result<Vec<[f64; 3]>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut points = Vec::new();
    for (k, line) in file.lines().enumerate() {
        let line = line?;
        if k == 0 {
            if line != ORACLE_HEADER {
                return Err(Error::Config(format!("unexpected oracle header `{line}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::Config(format!("bad oracle row `{line}`")));
        }
        let mut p = [0.0; 3];
        for (k, s) in f.iter().enumerate() {
            p[k] = s.parse().map_err(|e| Error::Config(format!("bad float `{s}`: {e}")))?;
        }
        points.push(p);
    }
    Ok(points)
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub l1: f64,
    pub linf: f64,
    /// Least-squares log-log slope over all rows up to and including this one.
    pub slope: f64,
}

pub const CONVERGENCE_HEADER: &str = "n,h,L1,Linf,slope";

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CONVERGENCE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.n, r.h, r.l1, r.linf, r.slope)?;
    }
    Ok(())
}

/// Per-point relative errors for shading plots: `x,y,psi,e_rel`.
pub fn write_relative_errors(path: &Path, rows: &[(f64, f64, f64, f64)]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,y,psi,e_rel")?;
    for (x, y, psi, e) in rows {
        writeln!(out, "{x},{y},{psi},{e}")?;
    }
    Ok(())
}

/// Least-squares slope of `ln(v)` against `ln(h)`.
pub fn loglog_slope(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return f64::NAN;
    }
    let n = pairs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, v) in pairs {
        let (x, y) = (h.ln(), v.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Flat `key = value` config files; later keys win, `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`", lineno + 1)));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn infinity_round_trips_as_inf() {
        assert_eq!(format!("{}", f64::INFINITY), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn cloud_round_trip() {
        let dir = std::env::temp_dir().join("frontweave-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.csv");
        let mut p = SurfacePoint::new(
            3,
            4,
            -0.123456789012345,
            0.2,
            0.1 + 0.2,
            crate::grid::normalize3([1.0, 2.0, -3.0]),
            PointSource::SidewaysYt,
        );
        p.attempts = 2;
        let q = SurfacePoint::new(
            0,
            0,
            0.0,
            0.0,
            f64::INFINITY,
            [0.0, 0.0, -1.0],
            PointSource::Fmm,
        );
        write_cloud(&path, &[p.clone(), q.clone()]).unwrap();
        let back = read_cloud(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], p);
        assert!(back[1].psi.is_infinite());
    }

    #[test]
    fn config_parsing() {
        let pairs = parse_config("n = 80\n# comment\nr1 = 0.333\ns_fraction=0.25 # tail\n").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("n".into(), "80".into()),
                ("r1".into(), "0.333".into()),
                ("s_fraction".into(), "0.25".into())
            ]
        );
        assert!(parse_config("nonsense line").is_err());
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pairs: Vec<(f64, f64)> =
            [0.1, 0.05, 0.025].iter().map(|&h: &f64| (h, 3.0 * h.powf(1.25))).collect();
        assert!((loglog_slope(&pairs) - 1.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn float_text_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(!v.is_nan());
            let s = format!("{v}");
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
