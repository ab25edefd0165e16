use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::orlicz::OrliczFunction;

/// A probability density given by its values on a grid, linear between nodes
/// and zero outside. Normalised at construction by the trapezoid rule.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl GridDensity {
    /// Builds the density and returns it with the raw (pre-normalisation)
    /// trapezoid integral.
    pub fn with_raw_mass(nodes: Vec<f64>, values: Vec<f64>) -> Result<(Self, f64)> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::Domain("grid density needs >= 2 nodes and matching values".into()));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("grid nodes must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("grid density values must be finite and nonnegative".into()));
        }
        let raw = trapezoid(&nodes, &values);
        if !(raw > 0.0) {
            return Err(Error::Domain("grid density has zero mass".into()));
        }
        let values = values.into_iter().map(|v| v / raw).collect();
        Ok((GridDensity { nodes, values }, raw))
    }

    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::with_raw_mass(nodes, values).map(|(d, _)| d)
    }

    /// Samples an unnormalised density `f` at `nodes`.
    pub fn from_fn(nodes: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(nodes.to_vec(), nodes.iter().map(|&x| f(x)).collect())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid approximation of `∫ g(x) μ(dx)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        let weighted: Vec<f64> = self.nodes.iter().zip(&self.values).map(|(&x, &v)| g(x) * v).collect();
        trapezoid(&self.nodes, &weighted)
    }

    /// `m_V(μ) = ∫ V dμ`.
    pub fn moment(&self, v: &OrliczFunction) -> f64 {
        self.integrate(|x| v.value(x))
    }

    /// Differential entropy `−∫ f log f`, with `0·log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        let integrand: Vec<f64> = self
            .values
            .iter()
            .map(|&f| if f > 0.0 { -f * f.ln() } else { 0.0 })
            .collect();
        trapezoid(&self.nodes, &integrand)
    }

    /// Reads a two-column CSV `x,density` with header. Renormalises, warning
    /// when the raw mass is off by more than `1e−3`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path.as_ref())?;
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Io(format!("expected 2 columns, found {}", rec.len())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("bad number `{s}`: {e}")))
            };
            nodes.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        let (d, raw) = Self::with_raw_mass(nodes, values)?;
        if (raw - 1.0).abs() > 1e-3 {
            warn!(
                "grid density in {} integrates to {raw}; renormalised",
                path.as_ref().display()
            );
        }
        Ok(d)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "density"])?;
        for (x, v) in self.nodes.iter().zip(&self.values) {
            w.write_record([format!("{x:?}"), format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalises_and_integrates() {
        let nodes: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let d = GridDensity::from_fn(&nodes, |_| 3.0).unwrap();
        assert!((d.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
        assert!((d.moment(&OrliczFunction::Power(1.0)) - 0.5).abs() < 1e-12);
        // uniform on [0,1] has zero entropy
        assert!(d.entropy().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridDensity::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(GridDensity::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(GridDensity::new(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(GridDensity::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_renormalises() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x,density\n-1,1\n0,2\n1,1\n").unwrap();
        let d = GridDensity::read_csv(&path).unwrap();
        assert!((d.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
        let out = dir.path().join("e.csv");
        d.write_csv(&out).unwrap();
        assert_eq!(GridDensity::read_csv(&out).unwrap(), d);
    }

    #[test]
    fn csv_rejects_unsorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x,density\n0,1\n-1,1\n").unwrap();
        assert!(GridDensity::read_csv(&path).is_err());
    }
}
