//! Interleaved raster images and sampling.
//!
//! Pixel `(x, y)` has its center at integer coordinates; the sampled domain is
//! `[0, width-1] x [0, height-1]`. The value `0` in every channel is the hole
//! sentinel used throughout the remap and registration code.

use std::fmt;

use crate::scalar::Real;

/// Channel storage type of a raster.
pub trait Channel: Copy + Default + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn to_f64(self) -> f64;
    /// Rounds to nearest and saturates to the representable range.
    fn from_f64(v: f64) -> Self;
}

impl Channel for u8 {
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, f64::from(u8::MAX)) as u8
    }
}

impl Channel for u16 {
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, f64::from(u16::MAX)) as u16
    }
}

impl Channel for f32 {
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

/// Sampling mode for inverse-mapped remaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

#[derive(Clone, PartialEq)]
pub struct Raster<C> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<C>,
}

impl<C: fmt::Debug> fmt::Debug for Raster<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl<C: Channel> Raster<C> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, C::default())
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: C) -> Self {
        assert!(channels > 0, "raster needs at least one channel");
        Self { width, height, channels, data: vec![value; width * height * channels] }
    }

    /// Wraps interleaved data; `None` if the length does not match.
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<C>) -> Option<Self> {
        (channels > 0 && data.len() == width * height * channels).then_some(Self { width, height, channels, data })
    }

    /// Single-channel raster from a per-pixel function.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> C) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[C] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[C] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [C] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// First channel of pixel `(x, y)`.
    pub fn get(&self, x: usize, y: usize) -> C {
        self.data[(y * self.width + x) * self.channels]
    }

    pub fn set(&mut self, x: usize, y: usize, v: C) {
        let i = (y * self.width + x) * self.channels;
        self.data[i] = v;
    }

    pub fn is_hole(&self, x: usize, y: usize) -> bool {
        self.pixel(x, y).iter().all(|&c| c == C::default())
    }

    fn in_domain<T: Real>(&self, u: T, v: T) -> bool {
        let w = T::from_usize_lossy(self.width) - T::one();
        let h = T::from_usize_lossy(self.height) - T::one();
        self.width > 0 && self.height > 0 && u >= T::zero() && v >= T::zero() && u <= w && v <= h
    }

    /// Samples all channels at a sub-pixel location into `out`.
    /// Returns `false` (leaving `out` untouched) outside `[0,w-1]x[0,h-1]`.
    pub fn sample_into<T: Real>(&self, u: T, v: T, mode: Interpolation, out: &mut [C]) -> bool {
        if !self.in_domain(u, v) {
            return false;
        }
        match mode {
            Interpolation::Nearest => {
                let x = u.round().to_usize().unwrap_or(0).min(self.width - 1);
                let y = v.round().to_usize().unwrap_or(0).min(self.height - 1);
                out.copy_from_slice(self.pixel(x, y));
            }
            Interpolation::Bilinear => {
                let x0 = u.floor().to_usize().unwrap_or(0).min(self.width - 1);
                let y0 = v.floor().to_usize().unwrap_or(0).min(self.height - 1);
                let ax = (u - T::from_usize_lossy(x0)).as_f64();
                let ay = (v - T::from_usize_lossy(y0)).as_f64();
                let x1 = if ax > 0.0 { x0 + 1 } else { x0 };
                let y1 = if ay > 0.0 { y0 + 1 } else { y0 };
                let (p00, p10) = (self.pixel(x0, y0), self.pixel(x1, y0));
                let (p01, p11) = (self.pixel(x0, y1), self.pixel(x1, y1));
                for c in 0..self.channels {
                    let top = p00[c].to_f64() * (1.0 - ax) + p10[c].to_f64() * ax;
                    let bot = p01[c].to_f64() * (1.0 - ax) + p11[c].to_f64() * ax;
                    out[c] = C::from_f64(top * (1.0 - ay) + bot * ay);
                }
            }
        }
        true
    }

    /// Single-channel convenience around [`Raster::sample_into`].
    pub fn sample<T: Real>(&self, u: T, v: T, mode: Interpolation) -> Option<C> {
        let mut buf = vec![C::default(); self.channels];
        self.sample_into(u, v, mode, &mut buf).then(|| buf[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_on_integer_grid_is_exact() {
        let img = Raster::<u16>::from_fn(4, 3, |x, y| (x * 1000 + y * 7 + 1) as u16);
        for y in 0..3 {
            for x in 0..4 {
                let s = img.sample(x as f64, y as f64, Interpolation::Bilinear);
                assert_eq!(s, Some(img.get(x, y)));
            }
        }
    }

    #[test]
    fn bilinear_interpolates_linear_ramp() {
        let img = Raster::<u16>::from_fn(5, 5, |x, y| (100 + 10 * x + 20 * y) as u16);
        assert_eq!(img.sample(1.5, 2.25, Interpolation::Bilinear), Some(160));
        assert_eq!(img.sample(3.6, 0.0, Interpolation::Nearest), Some(140));
    }

    #[test]
    fn sampling_outside_domain_is_rejected() {
        let img = Raster::<u8>::filled(3, 3, 1, 9);
        assert_eq!(img.sample(-0.01, 1.0, Interpolation::Bilinear), None);
        assert_eq!(img.sample(2.0001, 1.0, Interpolation::Nearest), None);
        assert_eq!(img.sample(2.0, 2.0, Interpolation::Bilinear), Some(9));
    }

    #[test]
    fn saturating_conversion() {
        assert_eq!(u8::from_f64(300.0), 255);
        assert_eq!(u16::from_f64(-4.0), 0);
        assert_eq!(u16::from_f64(2.5), 3);
    }
}
