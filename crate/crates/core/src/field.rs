//! Complex wave fields and real potentials sampled on a [`SpectralGrid`].
//!
//! Both serialize to CSV (`j,x,re,im` or `j,x,v`) with 17 significant digits
//! and to a JSON record `{a, b, M, values}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::SpectralGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: SpectralGrid,
    values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: SpectralGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "wave field has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpectralGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: SpectralGrid, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let values = grid.points().into_iter().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scale(&mut self, c: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// Largest pointwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &WaveField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,x,re,im\n");
        for (j, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{j},{:.16e},{:.16e},{:.16e}", self.grid.x(j), v.re, v.im);
        }
        out
    }

    pub fn from_csv(grid: SpectralGrid, text: &str) -> Result<Self> {
        let rows = parse_csv_rows(text, 4)?;
        let values = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
        Self::new(grid, values)
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = FieldRecord {
            a: self.grid.a(),
            b: self.grid.b(),
            m: self.grid.len(),
            values: self.values.iter().map(|c| [c.re, c.im]).collect(),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FieldRecord<[f64; 2]> = serde_json::from_str(text)?;
        let grid = SpectralGrid::new(rec.a, rec.b, rec.m)?;
        Self::new(grid, rec.values.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn new(grid: SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "potential has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("potential value at j={j} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpectralGrid, f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn constant(grid: SpectralGrid, v0: f64) -> Result<Self> {
        Self::new(grid, vec![v0; grid.len()])
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,x,v\n");
        for (j, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{j},{:.16e},{:.16e}", self.grid.x(j), v);
        }
        out
    }

    pub fn from_csv(grid: SpectralGrid, text: &str) -> Result<Self> {
        let rows = parse_csv_rows(text, 3)?;
        Self::new(grid, rows.iter().map(|r| r[2]).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = FieldRecord {
            a: self.grid.a(),
            b: self.grid.b(),
            m: self.grid.len(),
            values: self.values.clone(),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FieldRecord<f64> = serde_json::from_str(text)?;
        let grid = SpectralGrid::new(rec.a, rec.b, rec.m)?;
        Self::new(grid, rec.values)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldRecord<T> {
    a: f64,
    b: f64,
    #[serde(rename = "M")]
    m: usize,
    values: Vec<T>,
}

fn parse_csv_rows(text: &str, cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("csv line {}: {e}", n + 1)))?;
        if row.len() != cols {
            return Err(Error::invalid(format!(
                "csv line {} has {} columns, expected {cols}",
                n + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(-1.5, 1.5, 8).unwrap()
    }

    #[test]
    fn length_checked() {
        assert!(WaveField::new(grid(), vec![Complex64::new(0.0, 0.0); 7]).is_err());
        assert!(PotentialField::new(grid(), vec![0.0; 9]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(PotentialField::new(grid(), v).is_err());
    }

    proptest! {
        #[test]
        fn serialization_roundtrips_bitwise(vals in proptest::collection::vec(-1e6f64..1e6, 16)) {
            let g = grid();
            let psi = WaveField::new(g, vals.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()).unwrap();
            prop_assert_eq!(&WaveField::from_csv(g, &psi.to_csv()).unwrap(), &psi);
            prop_assert_eq!(&WaveField::from_json(&psi.to_json().unwrap()).unwrap(), &psi);

            let v = PotentialField::new(g, vals[..8].to_vec()).unwrap();
            prop_assert_eq!(&PotentialField::from_csv(g, &v.to_csv()).unwrap(), &v);
            prop_assert_eq!(&PotentialField::from_json(&v.to_json().unwrap()).unwrap(), &v);
        }
    }

    #[test]
    fn json_layout() {
        let psi = WaveField::from_fn(grid(), |x| Complex64::new(x, 0.0));
        let v: serde_json::Value = serde_json::from_str(&psi.to_json().unwrap()).unwrap();
        assert_eq!(v["M"], 8);
        assert_eq!(v["values"].as_array().unwrap().len(), 8);
        assert_eq!(v["values"][0][0], -1.5);
    }
}
