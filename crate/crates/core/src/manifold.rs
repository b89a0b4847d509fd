//! Flat periodic grids and spectral calculus on them.
//!
//! The internal space is a rectangular torus with up to three resolved axes;
//! flat directions beyond those enter only through a constant volume factor.
//! Derivatives are Fourier multipliers, so the Laplacian of a band-limited
//! grid function is exact to rounding, and uniform-weight quadrature is exact
//! for trigonometric polynomials below the Nyquist frequency. Periodic
//! integration by parts therefore holds discretely, which the solvers and
//! identity checks in the rest of the crate rely on.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::path::Path;

use crate::error::{Error, Result};

/// Largest number of resolved axes.
pub const MAX_DIM: usize = 3;

/// Smallest admissible number of points per axis.
pub const MIN_POINTS: usize = 4;

/// Uniform periodic grid on a rectangular torus.
///
/// `dim` axes are resolved with `points_per_axis[a]` equally spaced nodes on
/// a circle of circumference `lengths[a]`; the volume of any unresolved flat
/// directions is carried by the constant factor `extra_volume`. Node counts
/// must be even so the real Fourier modes pair up cleanly around the Nyquist
/// frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    points_per_axis: Vec<usize>,
    lengths: Vec<f64>,
    extra_volume: f64,
}

/// Unvalidated mirror of [`Grid`] used to funnel deserialized data through
/// [`Grid::new`].
#[derive(Deserialize)]
struct RawGrid {
    dim: usize,
    points_per_axis: Vec<usize>,
    lengths: Vec<f64>,
    #[serde(default = "default_extra_volume")]
    extra_volume: f64,
}

fn default_extra_volume() -> f64 {
    1.0
}

impl Grid {
    pub fn new(
        dim: usize,
        points_per_axis: Vec<usize>,
        lengths: Vec<f64>,
        extra_volume: f64,
    ) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dim must lie in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if points_per_axis.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} axis sizes, got {}",
                points_per_axis.len()
            )));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} axis lengths, got {}",
                lengths.len()
            )));
        }
        for (axis, &n) in points_per_axis.iter().enumerate() {
            if n < MIN_POINTS || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} needs an even node count >= {MIN_POINTS}, got {n}"
                )));
            }
        }
        for (axis, &length) in lengths.iter().enumerate() {
            if !length.is_finite() || length <= 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} needs a positive finite length, got {length}"
                )));
            }
        }
        if !extra_volume.is_finite() || extra_volume <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "extra volume must be positive and finite, got {extra_volume}"
            )));
        }
        Ok(Grid {
            dim,
            points_per_axis,
            lengths,
            extra_volume,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> &[usize] {
        &self.points_per_axis
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn extra_volume(&self) -> f64 {
        self.extra_volume
    }

    /// Total number of nodes.
    pub fn node_count(&self) -> usize {
        self.points_per_axis.iter().product()
    }

    /// Volume of one grid cell, without the `extra_volume` factor.
    pub fn cell_volume(&self) -> f64 {
        self.lengths
            .iter()
            .zip(&self.points_per_axis)
            .map(|(l, &n)| l / n as f64)
            .product()
    }

    /// Volume of the full internal space, including unresolved directions.
    pub fn total_volume(&self) -> f64 {
        self.lengths.iter().product::<f64>() * self.extra_volume
    }

    /// Flat-index stride of `axis` in row-major storage.
    fn axis_stride(&self, axis: usize) -> usize {
        self.points_per_axis[axis + 1..].iter().product()
    }

    /// Node coordinates along `axis`.
    pub fn coordinates(&self, axis: usize) -> Vec<f64> {
        let n = self.points_per_axis[axis];
        let h = self.lengths[axis] / n as f64;
        (0..n).map(|j| j as f64 * h).collect()
    }

    /// Angular wavenumbers along `axis` in FFT storage order. Index `j` maps
    /// to the integer mode `j` for `j <= n/2` and `j - n` above, so the entry
    /// at `n/2` is the (positive) Nyquist wavenumber.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points_per_axis[axis];
        let scale = 2.0 * std::f64::consts::PI / self.lengths[axis];
        (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
                scale * m as f64
            })
            .collect()
    }

    /// Wavenumbers for first derivatives: as [`Grid::wavenumbers`] but with
    /// the Nyquist entry zeroed. The Nyquist cosine has no odd Fourier
    /// partner on the grid, so keeping it would make the derivative of a
    /// real field complex; projecting it out keeps `d/dx` skew-adjoint
    /// against the uniform quadrature.
    pub fn derivative_wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points_per_axis[axis];
        let mut k = self.wavenumbers(axis);
        k[n / 2] = 0.0;
        k
    }

    /// Decomposes a flat row-major index into per-axis indices.
    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            let n = self.points_per_axis[axis];
            idx[axis] = rem % n;
            rem /= n;
        }
        idx
    }

    /// Coordinates of the node at a flat index.
    pub fn node_position(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(axis, &j)| j as f64 * self.lengths[axis] / self.points_per_axis[axis] as f64)
            .collect()
    }

    /// `|k|^2` for every spectral slot in flat storage order: the symbol of
    /// `-laplacian`.
    pub(crate) fn laplacian_symbol(&self) -> Vec<f64> {
        let tables: Vec<Vec<f64>> = (0..self.dim).map(|a| self.wavenumbers(a)).collect();
        let mut symbol = vec![0.0; self.node_count()];
        let mut idx = vec![0usize; self.dim];
        for (flat, slot) in symbol.iter_mut().enumerate() {
            let mut rem = flat;
            for axis in (0..self.dim).rev() {
                let n = self.points_per_axis[axis];
                idx[axis] = rem % n;
                rem /= n;
            }
            *slot = idx
                .iter()
                .zip(&tables)
                .map(|(&j, table)| table[j] * table[j])
                .sum();
        }
        symbol
    }
}

/// Real scalar field sampled on the nodes of a [`Grid`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Field with the same value at every node.
    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![value; grid.node_count()],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Wraps raw nodal values, checking length and finiteness.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value {} at node {pos}",
                values[pos]
            )));
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f` at every node; the argument is the node position.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|flat| f(&grid.node_position(flat)))
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Arithmetic mean over nodes; equals the volume average on a uniform
    /// grid.
    pub fn mean(&self) -> f64 {
        compensated_sum(&self.values) / self.values.len() as f64
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Index and value of the entry of largest magnitude.
    pub fn max_abs_node(&self) -> (usize, f64) {
        self.values
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, &x)| {
                if x.abs() > bv.abs() {
                    (i, x)
                } else {
                    (bi, bv)
                }
            })
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&x| x > 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "field grids differ");
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Pointwise power `x^e`.
    pub fn pow(&self, e: f64) -> Self {
        self.map(|x| x.powf(e))
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    /// In-place `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &ScalarField) {
        assert_eq!(self.grid, other.grid, "field grids differ");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }
}

macro_rules! pointwise_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                self.zip_map(rhs, |a, b| a $op b)
            }
        }
        impl $trait<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                (&self).$method(rhs)
            }
        }
        impl $trait<ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                self.$method(&rhs)
            }
        }
        impl $trait<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                (&self).$method(&rhs)
            }
        }
    };
}

pointwise_binop!(Add, add, +);
pointwise_binop!(Sub, sub, -);
pointwise_binop!(Mul, mul, *);

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scaled(rhs)
    }
}

impl Mul<f64> for ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scaled(rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scaled(-1.0)
    }
}

impl Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scaled(-1.0)
    }
}

impl AddAssign<&ScalarField> for ScalarField {
    fn add_assign(&mut self, rhs: &ScalarField) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&ScalarField> for ScalarField {
    fn sub_assign(&mut self, rhs: &ScalarField) {
        self.add_scaled(-1.0, rhs);
    }
}

/// Single cosine mode `amplitude * cos(k.x + phase)` with integer wavevector
/// `modes` (one entry per axis). Wavevector components must stay strictly
/// below the Nyquist frequency so the mode is fully resolved.
pub fn mode_field(grid: &Grid, modes: &[i64], amplitude: f64, phase: f64) -> Result<ScalarField> {
    if modes.len() != grid.dim() {
        return Err(Error::InvalidField(format!(
            "wavevector has {} components, grid has {} axes",
            modes.len(),
            grid.dim()
        )));
    }
    for (axis, &m) in modes.iter().enumerate() {
        let n = grid.points_per_axis()[axis] as i64;
        if m.abs() > n / 2 - 1 {
            return Err(Error::InvalidField(format!(
                "mode {m} on axis {axis} exceeds the resolved band |m| <= {}",
                n / 2 - 1
            )));
        }
    }
    if !amplitude.is_finite() || !phase.is_finite() {
        return Err(Error::InvalidField(
            "mode amplitude and phase must be finite".into(),
        ));
    }
    let freq: Vec<f64> = modes
        .iter()
        .zip(grid.lengths())
        .map(|(&m, &l)| 2.0 * std::f64::consts::PI * m as f64 / l)
        .collect();
    Ok(ScalarField::from_fn(grid, |x| {
        let arg: f64 = x.iter().zip(&freq).map(|(xi, ki)| xi * ki).sum();
        amplitude * (arg + phase).cos()
    }))
}

pub(crate) fn forward_spectrum(f: &ScalarField) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = f.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_all_axes(&mut data, &f.grid, FftDirection::Forward);
    data
}

pub(crate) fn inverse_to_values(mut spec: Vec<Complex64>, grid: &Grid) -> Vec<f64> {
    fft_all_axes(&mut spec, grid, FftDirection::Inverse);
    let scale = 1.0 / grid.node_count() as f64;
    spec.iter().map(|c| c.re * scale).collect()
}

/// Builds a field directly from nodal values, bypassing finiteness checks.
/// For solver internals operating on already-validated data.
pub(crate) fn field_from_raw(grid: &Grid, values: Vec<f64>) -> ScalarField {
    debug_assert_eq!(values.len(), grid.node_count());
    ScalarField {
        grid: grid.clone(),
        values,
    }
}

fn fft_all_axes(data: &mut [Complex64], grid: &Grid, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    for axis in 0..grid.dim() {
        let n = grid.points_per_axis()[axis];
        let fft = planner.plan_fft(n, direction);
        let stride = grid.axis_stride(axis);
        let block = n * stride;
        let mut line = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + offset + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[base + offset + j * stride] = *value;
                }
            }
        }
    }
}

/// Applies a per-mode multiplier to a spectrum. The closure receives the
/// per-axis mode indices in FFT storage order.
fn apply_multiplier(
    spec: &mut [Complex64],
    grid: &Grid,
    multiplier: impl Fn(&[usize]) -> Complex64,
) {
    let dim = grid.dim();
    let mut idx = vec![0usize; dim];
    for (flat, value) in spec.iter_mut().enumerate() {
        let mut rem = flat;
        for axis in (0..dim).rev() {
            let n = grid.points_per_axis()[axis];
            idx[axis] = rem % n;
            rem /= n;
        }
        *value *= multiplier(&idx);
    }
}

/// Periodic Laplacian, exact on the resolved Fourier band.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid().clone();
    let tables: Vec<Vec<f64>> = (0..grid.dim()).map(|a| grid.wavenumbers(a)).collect();
    let mut spec = forward_spectrum(f);
    apply_multiplier(&mut spec, &grid, |idx| {
        let ksq: f64 = idx
            .iter()
            .zip(&tables)
            .map(|(&j, table)| table[j] * table[j])
            .sum();
        Complex64::new(-ksq, 0.0)
    });
    let values = inverse_to_values(spec, &grid);
    ScalarField { grid, values }
}

/// Partial derivative along `axis`, with the Nyquist mode projected out (see
/// [`Grid::derivative_wavenumbers`]).
pub fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    assert!(axis < f.grid().dim(), "axis out of range");
    let grid = f.grid().clone();
    let table = grid.derivative_wavenumbers(axis);
    let mut spec = forward_spectrum(f);
    apply_multiplier(&mut spec, &grid, |idx| Complex64::new(0.0, table[idx[axis]]));
    let values = inverse_to_values(spec, &grid);
    ScalarField { grid, values }
}

/// Pointwise gradient inner product `grad f . grad g`.
pub fn grad_inner(f: &ScalarField, g: &ScalarField) -> ScalarField {
    assert_eq!(f.grid, g.grid, "field grids differ");
    let grid = f.grid().clone();
    let mut acc = ScalarField::zeros(&grid);
    for axis in 0..grid.dim() {
        let df = derivative(f, axis);
        let dg = derivative(g, axis);
        for ((a, x), y) in acc.values.iter_mut().zip(&df.values).zip(&dg.values) {
            *a += x * y;
        }
    }
    acc
}

/// Divergence-form operator `sum_a d_a (w d_a f)`, the symmetric counterpart
/// of `laplacian` with a spatially varying coefficient.
pub fn divergence_form(w: &ScalarField, f: &ScalarField) -> ScalarField {
    assert_eq!(w.grid, f.grid, "field grids differ");
    let grid = f.grid().clone();
    let mut acc = ScalarField::zeros(&grid);
    for axis in 0..grid.dim() {
        let flux = w * derivative(f, axis);
        acc += &derivative(&flux, axis);
    }
    acc
}

/// Integral over the internal space: uniform-weight quadrature times the
/// unresolved volume factor. Exact for resolved trigonometric polynomials.
pub fn integrate(f: &ScalarField) -> f64 {
    compensated_sum(&f.values) * f.grid.cell_volume() * f.grid.extra_volume()
}

/// Neumaier compensated summation.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Writes a field dump: one JSON header line describing the grid, then the
/// nodal values as little-endian IEEE doubles in row-major order.
pub fn write_field<W: Write>(field: &ScalarField, mut writer: W) -> Result<()> {
    let header = serde_json::to_string(field.grid())
        .map_err(|e| Error::MalformedDump(format!("header encode failed: {e}")))?;
    let io_err = |e: std::io::Error| Error::MalformedDump(format!("write failed: {e}"));
    writer.write_all(header.as_bytes()).map_err(io_err)?;
    writer.write_all(b"\n").map_err(io_err)?;
    for &x in field.values() {
        writer.write_all(&x.to_le_bytes()).map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

/// Reads a field dump produced by [`write_field`], re-validating the grid
/// and the payload.
pub fn read_field<R: Read>(reader: R) -> Result<ScalarField> {
    let mut reader = BufReader::new(reader);
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::MalformedDump(format!("header read failed: {e}")))?;
    let raw: RawGrid = serde_json::from_str(header.trim_end())
        .map_err(|e| Error::MalformedDump(format!("bad header: {e}")))?;
    let grid = Grid::new(raw.dim, raw.points_per_axis, raw.lengths, raw.extra_volume)?;
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::MalformedDump(format!("payload read failed: {e}")))?;
    let expected = grid.node_count() * 8;
    if payload.len() != expected {
        return Err(Error::MalformedDump(format!(
            "payload holds {} bytes, grid needs {expected}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::from_values(&grid, values)
}

pub fn write_field_path(field: &ScalarField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_field(field, BufWriter::new(file))
}

pub fn read_field_path(path: &Path) -> Result<ScalarField> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_field(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_1d(n: usize, length: f64) -> Grid {
        Grid::new(1, vec![n], vec![length], 1.0).unwrap()
    }

    #[test]
    fn grid_validation_rejects_bad_shapes() {
        assert!(Grid::new(0, vec![], vec![], 1.0).is_err());
        assert!(Grid::new(4, vec![8; 4], vec![1.0; 4], 1.0).is_err());
        assert!(Grid::new(1, vec![7], vec![1.0], 1.0).is_err());
        assert!(Grid::new(1, vec![2], vec![1.0], 1.0).is_err());
        assert!(Grid::new(1, vec![8], vec![-1.0], 1.0).is_err());
        assert!(Grid::new(1, vec![8], vec![1.0], 0.0).is_err());
        assert!(Grid::new(2, vec![8], vec![1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn wavenumber_storage_order() {
        let g = grid_1d(8, 2.0 * std::f64::consts::PI);
        let k = g.wavenumbers(0);
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
        let kd = g.derivative_wavenumbers(0);
        assert_eq!(kd[4], 0.0);
    }

    #[test]
    fn laplacian_of_cosine_mode_is_exact() {
        let g = grid_1d(32, 2.0 * std::f64::consts::PI);
        let f = mode_field(&g, &[3], 1.0, 0.4).unwrap();
        let lap = laplacian(&f);
        for (l, x) in lap.values().iter().zip(f.values()) {
            assert_relative_eq!(*l, -9.0 * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_of_cosine_mode_is_exact() {
        let g = grid_1d(32, 2.0 * std::f64::consts::PI);
        let f = mode_field(&g, &[2], 1.5, 0.0).unwrap();
        let df = derivative(&f, 0);
        let exact = ScalarField::from_fn(&g, |x| -3.0 * (2.0 * x[0]).sin());
        for (a, b) in df.values().iter().zip(exact.values()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_projects_nyquist_mode() {
        let g = grid_1d(8, 2.0 * std::f64::consts::PI);
        // cos(4x) at 8 nodes alternates +-1; its spectral derivative must be
        // identically zero after the Nyquist projection.
        let f = ScalarField::from_fn(&g, |x| (4.0 * x[0]).cos());
        let df = derivative(&f, 0);
        assert!(df.max_abs() < 1e-13);
        // The Laplacian keeps the mode: it is a genuine grid function with
        // curvature -16 cos(4x).
        let lap = laplacian(&f);
        for (l, x) in lap.values().iter().zip(f.values()) {
            assert_relative_eq!(*l, -16.0 * x, epsilon = 1e-11);
        }
    }

    #[test]
    fn integrate_counts_extra_volume() {
        let g = Grid::new(1, vec![16], vec![2.0], 3.5).unwrap();
        let f = ScalarField::constant(&g, 2.0);
        assert_relative_eq!(integrate(&f), 2.0 * 2.0 * 3.5, epsilon = 1e-14);
        let m = mode_field(&g, &[1], 0.7, 0.1).unwrap();
        assert!(integrate(&m).abs() < 1e-14);
    }

    #[test]
    fn multi_axis_roundtrip_and_laplacian() {
        let g = Grid::new(2, vec![8, 16], vec![2.0 * std::f64::consts::PI, 4.0], 1.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| {
            (x[0]).cos() + (2.0 * std::f64::consts::PI * x[1] / 4.0).sin()
        });
        let lap = laplacian(&f);
        let k1 = 2.0 * std::f64::consts::PI / 4.0;
        let exact = ScalarField::from_fn(&g, |x| {
            -(x[0]).cos() - k1 * k1 * (k1 * x[1]).sin()
        });
        for (a, b) in lap.values().iter().zip(exact.values()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-11);
        }
    }

    #[test]
    fn integration_by_parts_is_discrete() {
        let g = Grid::new(2, vec![16, 16], vec![3.0, 5.0], 2.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| {
            (2.0 * std::f64::consts::PI * x[0] / 3.0).cos()
                + 0.3 * (2.0 * std::f64::consts::PI * (x[0] / 3.0 + 2.0 * x[1] / 5.0)).sin()
        });
        let h = ScalarField::from_fn(&g, |x| {
            0.5 + (2.0 * std::f64::consts::PI * (2.0 * x[0] / 3.0 - x[1] / 5.0)).cos()
        });
        let lhs = integrate(&(&laplacian(&f) * &h));
        let rhs = -integrate(&grad_inner(&f, &h));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-11, max_relative = 1e-11);
    }

    #[test]
    fn divergence_form_matches_expansion() {
        let g = grid_1d(32, 2.0 * std::f64::consts::PI);
        let w = ScalarField::from_fn(&g, |x| 2.0 + 0.5 * x[0].cos());
        let f = ScalarField::from_fn(&g, |x| (2.0 * x[0]).sin());
        let direct = divergence_form(&w, &f);
        let expanded = &grad_inner(&w, &f) + &(&w * &laplacian(&f));
        for (a, b) in direct.values().iter().zip(expanded.values()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn mode_field_rejects_unresolved_wavevectors() {
        let g = grid_1d(8, 1.0);
        assert!(mode_field(&g, &[3], 1.0, 0.0).is_ok());
        assert!(mode_field(&g, &[4], 1.0, 0.0).is_err());
        assert!(mode_field(&g, &[-4], 1.0, 0.0).is_err());
        assert!(mode_field(&g, &[1, 1], 1.0, 0.0).is_err());
    }

    #[test]
    fn dump_roundtrip_is_bit_exact() {
        let g = Grid::new(2, vec![8, 6], vec![1.0, 2.5], 4.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0] * 7.3 - x[1] * 0.11 + 0.125);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn dump_header_is_json_with_expected_keys() {
        let g = Grid::new(1, vec![8], vec![1.0], 2.0).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let newline = buf.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&buf[..newline]).unwrap();
        assert_eq!(header["dim"], 1);
        assert_eq!(header["points_per_axis"][0], 8);
        assert_eq!(header["lengths"][0], 1.0);
        assert_eq!(header["extra_volume"], 2.0);
        assert_eq!(buf.len() - newline - 1, 8 * 8);
    }

    #[test]
    fn dump_rejects_truncated_payload() {
        let g = grid_1d(8, 1.0);
        let f = ScalarField::constant(&g, 1.0);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            read_field(buf.as_slice()),
            Err(Error::MalformedDump(_))
        ));
    }
}
