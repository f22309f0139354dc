use crate::error::{Error, Result};

/// Dense `w × h × c` image, stored row-major in `(u, v, channel)` order:
/// `u` indexes the width axis, `v` the height axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        ImageTensor {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        ImageTensor {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(ImageTensor {
            width,
            height,
            channels,
            data,
        })
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

    /// `[w, h, c]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.width, self.height, self.channels]
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, ch: usize) -> f32 {
        self.data[(u * self.height + v) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, ch: usize, value: f32) {
        self.data[(u * self.height + v) * self.channels + ch] = value;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Mean value of each channel.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0f64; self.channels];
        for px in self.data.chunks_exact(self.channels.max(1)) {
            for (s, &v) in sums.iter_mut().zip(px) {
                *s += v as f64;
            }
        }
        let count = (self.width * self.height).max(1) as f64;
        sums.iter().map(|s| s / count).collect()
    }

    /// `a·self + b·other`, used by linearity checks.
    pub fn combine(&self, a: f32, other: &ImageTensor, b: f32) -> Result<ImageTensor> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot combine {:?} with {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(ImageTensor { data, ..*self })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_layout() {
        let mut img = ImageTensor::zeros(3, 2, 2);
        img.set(2, 1, 1, 5.0);
        assert_eq!(img.as_slice()[(2 * 2 + 1) * 2 + 1], 5.0);
        assert_eq!(img.get(2, 1, 1), 5.0);
    }

    #[test]
    fn channel_means_average_pixels() {
        let img = ImageTensor::from_vec(2, 1, 2, vec![1.0, 0.0, 3.0, 1.0]).unwrap();
        assert_eq!(img.channel_means(), vec![2.0, 0.5]);
    }
}
