//! Row-major image buffers and the phase map type built on them.

use crate::error::{Error, Result};

/// A rectangular row-major grid of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    /// Creates a raster filled with one value.
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Wraps an existing row-major vector; its length must be `width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "raster data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }
}

impl<T> Raster<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major index of pixel (x, y).
    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.idx(x, y);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_dims<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl Raster<bool> {
    /// Number of `true` entries.
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Pixelwise logical AND of two same-sized masks.
    pub fn and(&self, other: &Raster<bool>) -> Result<Raster<bool>> {
        if !self.same_dims(other) {
            return Err(Error::DimensionMismatch(
                "mask dimensions differ in and()".into(),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(Raster {
            width: self.width,
            height: self.height,
            data,
        })
    }
}

/// A real-valued phase image in radians plus a per-pixel validity mask.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    pub values: Raster<f64>,
    pub mask: Raster<bool>,
}

impl PhaseMap {
    /// Bundles values and mask, checking that dimensions agree and that every
    /// valid pixel holds a finite value.
    pub fn new(values: Raster<f64>, mask: Raster<bool>) -> Result<Self> {
        if !values.same_dims(&mask) {
            return Err(Error::DimensionMismatch(
                "phase values and mask dimensions differ".into(),
            ));
        }
        for (v, m) in values.as_slice().iter().zip(mask.as_slice()) {
            if *m && !v.is_finite() {
                return Err(Error::invalid("non-finite phase at a valid pixel"));
            }
        }
        Ok(PhaseMap { values, mask })
    }

    /// All-valid phase map from raw values; every value must be finite.
    pub fn all_valid(values: Raster<f64>) -> Result<Self> {
        let mask = Raster::filled(values.width(), values.height(), true);
        PhaseMap::new(values, mask)
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.count_true()
    }
}
