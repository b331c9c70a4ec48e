//! Nodal scalar fields, analytic seed profiles, and the binary dump format.
//!
//! A dump is self-describing enough to rebuild its grid:
//! `u32 n, u32 ny, u32 nx, f64 y_extent, f64 x_extent, f64 alpha`, followed
//! by the node values in id order. Everything is little-endian, no magic
//! bytes, no padding.

use crate::error::{Error, Result};
use crate::grid::Grid;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
}

/// Analytic profiles used to seed solves and to exercise the geometry pass.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldPreset {
    Zero,
    Constant { value: f64 },
    /// `e^(-x) cos y₁`; harmonic, with unit-strength flux trace.
    ExpCos,
    /// Planar transition `tanh(ω·y / (√2 w |ω|))`, constant across `x`.
    Tanh { omega: [f64; 2], width: f64 },
    /// `y₁² - y₂²`; needs two lateral dimensions.
    Saddle,
    /// `|y|²`, radially symmetric in the lateral plane.
    Radial,
}

impl FieldPreset {
    pub fn eval(&self, y: [f64; 2], x: f64) -> f64 {
        match self {
            FieldPreset::Zero => 0.0,
            FieldPreset::Constant { value } => *value,
            FieldPreset::ExpCos => (-x).exp() * y[0].cos(),
            FieldPreset::Tanh { omega, width } => {
                let norm = (omega[0] * omega[0] + omega[1] * omega[1]).sqrt();
                let s = (omega[0] * y[0] + omega[1] * y[1]) / norm;
                (s / (2f64.sqrt() * width)).tanh()
            }
            FieldPreset::Saddle => y[0] * y[0] - y[1] * y[1],
            FieldPreset::Radial => y[0] * y[0] + y[1] * y[1],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            FieldPreset::Saddle if n != 2 => {
                Err(Error::InvalidScenario("saddle profile needs n = 2".into()))
            }
            FieldPreset::Tanh { omega, width } => {
                let norm = (omega[0] * omega[0] + omega[1] * omega[1]).sqrt();
                if !(norm.is_finite() && norm > 0.0) {
                    return Err(Error::InvalidScenario("tanh profile needs a nonzero direction".into()));
                }
                if n == 1 && omega[1] != 0.0 {
                    return Err(Error::InvalidScenario(
                        "tanh direction has a second component but n = 1".into(),
                    ));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidScenario("tanh width must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self { values: vec![0.0; grid.num_nodes()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let values = (0..grid.num_nodes())
            .map(|id| {
                let (y, x) = grid.node_point(id);
                f(y, x)
            })
            .collect();
        Self { values }
    }

    pub fn from_preset(grid: &Grid, preset: &FieldPreset) -> Result<Self> {
        preset.validate(grid.n)?;
        Ok(Self::from_fn(grid, |y, x| preset.eval(y, x)))
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Replicates a one-axis field across a second lateral axis, bit for
    /// bit: the result satisfies `v(y₁, y₂, x) = u(y₁, x)`.
    pub fn extend_lateral(&self, from: &Grid, to: &Grid) -> Result<Field> {
        self.matches(from)?;
        let compatible = from.n == 1
            && to.n == 2
            && from.ny == to.ny
            && from.nx == to.nx
            && from.y_extent == to.y_extent
            && from.x_extent == to.x_extent
            && from.alpha == to.alpha;
        if !compatible {
            return Err(Error::FieldMismatch(
                "lateral extension needs matching grids differing only in n".into(),
            ));
        }
        let values = (0..to.num_nodes())
            .map(|id| {
                let (iy, ix) = to.node_multi(id);
                self.values[from.node_index([iy[0], 0], ix)]
            })
            .collect();
        Ok(Field { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matches(&self, grid: &Grid) -> Result<()> {
        if self.values.len() == grid.num_nodes() {
            Ok(())
        } else {
            Err(Error::FieldMismatch(format!(
                "field has {} values, grid has {} nodes",
                self.values.len(),
                grid.num_nodes()
            )))
        }
    }

    pub fn write_dump(&self, grid: &Grid, path: &Path) -> Result<()> {
        self.matches(grid)?;
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&(grid.n as u32).to_le_bytes())?;
        w.write_all(&(grid.ny as u32).to_le_bytes())?;
        w.write_all(&(grid.nx as u32).to_le_bytes())?;
        w.write_all(&grid.y_extent.to_le_bytes())?;
        w.write_all(&grid.x_extent.to_le_bytes())?;
        w.write_all(&grid.alpha.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_dump(path: &Path) -> Result<(Grid, Field)> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut u32buf = [0u8; 4];
        let mut f64buf = [0u8; 8];
        let mut read_u32 = |r: &mut BufReader<std::fs::File>| -> Result<u32> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let n = read_u32(&mut r)? as usize;
        let ny = read_u32(&mut r)? as usize;
        let nx = read_u32(&mut r)? as usize;
        let mut read_f64 = |r: &mut BufReader<std::fs::File>| -> Result<f64> {
            r.read_exact(&mut f64buf)?;
            Ok(f64::from_le_bytes(f64buf))
        };
        let y_extent = read_f64(&mut r)?;
        let x_extent = read_f64(&mut r)?;
        let alpha = read_f64(&mut r)?;
        let grid = Grid::new(n, ny, nx, y_extent, x_extent, alpha)
            .map_err(|e| Error::Format(format!("dump header rebuilds no valid grid: {e}")))?;
        let mut values = Vec::with_capacity(grid.num_nodes());
        for _ in 0..grid.num_nodes() {
            values.push(read_f64(&mut r)?);
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Format("dump has trailing bytes".into()));
        }
        Ok((grid, Field { values }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "halfspace-field-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn preset_values() {
        let p = FieldPreset::ExpCos;
        assert!((p.eval([0.0, 0.0], 0.0) - 1.0).abs() < 1e-15);
        assert!((p.eval([std::f64::consts::PI, 0.0], 1.0) + (-1f64).exp()).abs() < 1e-15);
        let p = FieldPreset::Tanh { omega: [1.0, 0.0], width: 1.0 };
        assert_eq!(p.eval([0.0, 3.0], 2.0), 0.0);
        assert!((p.eval([1.0, 7.0], 0.5) - (1.0 / 2f64.sqrt()).tanh()).abs() < 1e-15);
        let p = FieldPreset::Saddle;
        assert_eq!(p.eval([2.0, 1.0], 0.0), 3.0);
    }

    #[test]
    fn preset_validation() {
        assert!(FieldPreset::Saddle.validate(1).is_err());
        assert!(FieldPreset::Saddle.validate(2).is_ok());
        assert!(FieldPreset::Tanh { omega: [0.0, 0.0], width: 1.0 }.validate(2).is_err());
        assert!(FieldPreset::Tanh { omega: [0.0, 1.0], width: 1.0 }.validate(1).is_err());
        assert!(FieldPreset::Tanh { omega: [1.0, 0.0], width: -1.0 }.validate(1).is_err());
    }

    #[test]
    fn lateral_extension_replicates_slices() {
        let from = Grid::new(1, 3, 4, 1.5, 2.0, 0.25).unwrap();
        let to = Grid::new(2, 3, 4, 1.5, 2.0, 0.25).unwrap();
        let u = Field::from_fn(&from, |y, x| (y[0] * 1.3).sin() - x);
        let v = u.extend_lateral(&from, &to).unwrap();
        for id in 0..to.num_nodes() {
            let (iy, ix) = to.node_multi(id);
            let src = u.values[from.node_index([iy[0], 0], ix)];
            assert_eq!(v.values[id].to_bits(), src.to_bits());
        }
        let wrong = Grid::new(2, 3, 4, 1.5, 2.0, 0.5).unwrap();
        assert!(u.extend_lateral(&from, &wrong).is_err());
        assert!(u.extend_lateral(&from, &from).is_err());
    }

    #[test]
    fn dump_roundtrip() {
        let grid = Grid::new(2, 3, 4, 1.5, 2.0, 0.25).unwrap();
        let field = Field::from_fn(&grid, |y, x| y[0] + 2.0 * y[1] - x * x);
        let path = tmpdir().join("roundtrip.bin");
        field.write_dump(&grid, &path).unwrap();
        let (g2, f2) = Field::read_dump(&path).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(f2, field);
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn dump_layout_is_fixed() {
        let grid = Grid::new(1, 2, 2, 1.0, 1.0, 0.0).unwrap();
        let field = Field::zeros(&grid);
        let path = tmpdir().join("layout.bin");
        field.write_dump(&grid, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 4 * 3 + 8 * 3 + 8 * grid.num_nodes());
        assert_eq!(&bytes[0..4], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &1f64.to_le_bytes());
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn truncated_and_padded_dumps_rejected() {
        let grid = Grid::new(1, 2, 2, 1.0, 1.0, 0.0).unwrap();
        let field = Field::zeros(&grid);
        let path = tmpdir().join("bad.bin");
        field.write_dump(&grid, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(Field::read_dump(&path).is_err());
        bytes.push(0);
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(Field::read_dump(&path).is_err());
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn header_validation_applies_on_read() {
        let path = tmpdir().join("badhead.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&7u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1f64.to_le_bytes());
        bytes.extend_from_slice(&1f64.to_le_bytes());
        bytes.extend_from_slice(&0f64.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(Field::read_dump(&path), Err(Error::Format(_))));
        std::fs::remove_file(path).unwrap();
    }
}
