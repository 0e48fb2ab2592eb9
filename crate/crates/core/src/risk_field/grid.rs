use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::vehicle::VehicleState;

/// A regular planar grid. Cell `(i, j)` has its center at
/// `origin + R(rotation) * ((i + 0.5) h, (j + 0.5) h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub nx: usize,
    pub ny: usize,
    pub resolution: f64,
    /// Rotation of the grid axes relative to the world frame, radians.
    #[serde(default)]
    pub rotation: f64,
}

impl Grid {
    pub fn new(origin_x: f64, origin_y: f64, nx: usize, ny: usize, resolution: f64) -> Self {
        Grid {
            origin_x,
            origin_y,
            nx,
            ny,
            resolution,
            rotation: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.nx >= 1
            && self.ny >= 1
            && self.resolution.is_finite()
            && self.resolution > 0.0
            && self.origin_x.is_finite()
            && self.origin_y.is_finite()
            && self.rotation.is_finite()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area of one cell, m².
    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let u = (i as f64 + 0.5) * self.resolution;
        let v = (j as f64 + 0.5) * self.resolution;
        self.grid_to_world(u, v)
    }

    pub fn center_of(&self, index: usize) -> (f64, f64) {
        self.cell_center(index % self.nx, index / self.nx)
    }

    pub(crate) fn grid_to_world(&self, u: f64, v: f64) -> (f64, f64) {
        if self.rotation == 0.0 {
            return (self.origin_x + u, self.origin_y + v);
        }
        let (s, c) = self.rotation.sin_cos();
        (self.origin_x + u * c - v * s, self.origin_y + u * s + v * c)
    }

    pub(crate) fn world_to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.origin_x;
        let dy = y - self.origin_y;
        if self.rotation == 0.0 {
            return (dx, dy);
        }
        let (s, c) = self.rotation.sin_cos();
        (dx * c + dy * s, -dx * s + dy * c)
    }

    /// Applies a rigid motion (rotation about the world origin, then
    /// translation) to the grid.
    pub fn transformed(&self, angle: f64, tx: f64, ty: f64) -> Grid {
        let (s, c) = angle.sin_cos();
        Grid {
            origin_x: self.origin_x * c - self.origin_y * s + tx,
            origin_y: self.origin_x * s + self.origin_y * c + ty,
            rotation: self.rotation + angle,
            ..self.clone()
        }
    }
}

/// How to place a grid around an ego vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Extent along world x, meters.
    pub length: f64,
    /// Extent along world y, meters.
    pub width: f64,
    pub resolution: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            length: 100.0,
            width: 60.0,
            resolution: 0.5,
        }
    }
}

impl GridSpec {
    /// An axis-aligned grid centered on the ego. The origin snaps to a
    /// multiple of the resolution so that all egos share one world lattice.
    pub fn around(&self, ego: &VehicleState) -> Grid {
        let h = self.resolution;
        let nx = (self.length / h).round().max(1.0) as usize;
        let ny = (self.width / h).round().max(1.0) as usize;
        let ox = ((ego.x - 0.5 * nx as f64 * h) / h).floor() * h;
        let oy = ((ego.y - 0.5 * ny as f64 * h) / h).floor() * h;
        Grid::new(ox, oy, nx, ny, h)
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0 && self.width > 0.0 && self.resolution > 0.0
    }
}

/// Non-negative values on a grid, row-major (`index = j * nx + i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Min-max bounds used to normalize a PGM export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmBounds {
    pub min: f64,
    pub max: f64,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        ScalarField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Element-wise product with another field on the same grid.
    pub fn product(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid, "fields must share a grid");
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// CSV with header `x,y,value`, one row per cell center, row-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,value")?;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let (x, y) = self.grid.cell_center(i, j);
                writeln!(out, "{},{},{}", x, y, self.get(i, j))?;
            }
        }
        Ok(())
    }

    /// Binary 16-bit portable graymap (P5, maxval 65535). Grid row `ny - 1`
    /// is written first so +y points up in viewers.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<PgmBounds> {
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (min, max) = if min.is_finite() { (min, max) } else { (0.0, 0.0) };
        let span = max - min;
        write!(out, "P5\n{} {}\n65535\n", self.grid.nx, self.grid.ny)?;
        let mut row = Vec::with_capacity(self.grid.nx * 2);
        for j in (0..self.grid.ny).rev() {
            row.clear();
            for i in 0..self.grid.nx {
                let level = if span > 0.0 {
                    ((self.get(i, j) - min) / span * 65535.0).round() as u16
                } else {
                    0
                };
                row.extend_from_slice(&level.to_be_bytes());
            }
            out.write_all(&row)?;
        }
        Ok(PgmBounds { min, max })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centers() {
        let g = Grid::new(-1.0, 2.0, 4, 3, 0.5);
        assert_eq!(g.cell_center(0, 0), (-0.75, 2.25));
        assert_eq!(g.cell_center(3, 2), (0.75, 3.25));
        assert_eq!(g.center_of(g.index(3, 2)), (0.75, 3.25));
    }

    #[test]
    fn rotated_round_trip() {
        let g = Grid::new(1.0, -2.0, 10, 10, 0.5).transformed(0.7, 3.0, 4.0);
        let (x, y) = g.cell_center(3, 4);
        let (u, v) = g.world_to_grid(x, y);
        assert!((u - 1.75).abs() < 1e-12 && (v - 2.25).abs() < 1e-12);
    }

    #[test]
    fn ego_grid_snaps_to_lattice() {
        let spec = GridSpec::default();
        let g = spec.around(&VehicleState::sedan(1, 10.3, -4.1, 0.0, 0.0));
        assert_eq!((g.nx, g.ny), (200, 120));
        assert_eq!(g.origin_x % 0.5, 0.0);
        assert_eq!(g.origin_y % 0.5, 0.0);
        assert!(g.origin_x <= 10.3 - 50.0 && g.origin_x > 10.3 - 50.5);
    }

    #[test]
    fn csv_and_pgm_shapes() {
        let mut f = ScalarField::zeros(Grid::new(0.0, 0.0, 3, 2, 1.0));
        f.values[5] = 2.0;
        f.values[0] = 1.0;
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,value");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[1], "0.5,0.5,1");
        assert_eq!(lines[6], "2.5,1.5,2");

        let mut pgm = Vec::new();
        let bounds = f.write_pgm(&mut pgm).unwrap();
        assert_eq!(bounds, PgmBounds { min: 0.0, max: 2.0 });
        let header = b"P5\n3 2\n65535\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 12);
        // top row is grid row 1; its last cell holds the maximum
        assert_eq!(&pgm[header.len() + 4..header.len() + 6], &[0xff, 0xff]);
        // bottom-left cell is 1.0 -> half scale
        let bl = header.len() + 6;
        assert_eq!(u16::from_be_bytes([pgm[bl], pgm[bl + 1]]), 32768);
    }
}
