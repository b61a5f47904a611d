//! Row-major raster containers shared by every stage.

use crate::algebra::UnitNormal;
use crate::error::{ReliefError, Result};

/// A `width × height` row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Unit normals, one per pixel.
pub type NormalImage = Grid<UnitNormal>;

/// Real values per pixel: grayscale intensities, edge maps, heights.
pub type ScalarField = Grid<f64>;

/// Per-pixel 2-vectors `[x, y]`, with `x` along columns and `y` along rows.
pub type VectorField = Grid<[f64; 2]>;

/// Pixel-centered gradient samples.
pub type GradientField = VectorField;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ReliefError::InvalidParameter(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(ReliefError::InvalidParameter(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, T> {
        self.data.chunks(self.width)
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Combines two equally sized grids pixel by pixel.
    pub fn zip_map<U, V>(&self, other: &Grid<U>, mut f: impl FnMut(&T, &U) -> V) -> Result<Grid<V>> {
        self.ensure_same_dims(other)?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn ensure_same_dims<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(ReliefError::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    /// Mirrors the grid left to right.
    pub fn flip_horizontal(&self) -> Self
    where
        T: Clone,
    {
        Grid::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y).clone())
    }

    /// Sample with coordinates clamped to the image (replicated border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> &T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.get(cx, cy)
    }
}

impl ScalarField {
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Per-pixel weights in `[0, 1]`. A pixel with weight `> 0` is foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask(Grid<f64>);

impl Mask {
    pub fn new(weights: Grid<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(ReliefError::InvalidParameter(format!(
                "mask weight {bad} outside [0, 1]"
            )));
        }
        Ok(Self(weights))
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self(Grid::filled(width, height, 1.0))
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self(Grid::filled(width, height, 0.0))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self(Grid::from_fn(width, height, |x, y| f(x, y).clamp(0.0, 1.0)))
    }

    pub fn weights(&self) -> &Grid<f64> {
        &self.0
    }

    #[inline]
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        *self.0.get(x, y)
    }

    #[inline]
    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.weight(x, y) > 0.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn foreground_count(&self) -> usize {
        self.0.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn is_full(&self) -> bool {
        self.0.iter().all(|&w| w == 1.0)
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(ReliefError::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }
}
