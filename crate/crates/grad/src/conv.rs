//! Patch extraction kernels shared by convolution and transposed convolution.
//!
//! Patches are laid out as a row-major matrix with one row per output
//! location `(n, oy, ox)` and one column per `(channel, ky, kx)` tap.

use crate::scalar::Scalar;

/// Geometry of a square-kernel 2-D convolution over an NCHW image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    /// Convolution reading an image of `channels × height × width`.
    pub fn conv(channels: usize, height: usize, width: usize, kernel: usize, stride: usize, pad: usize) -> Option<Self> {
        if stride == 0 || kernel == 0 || height + 2 * pad < kernel || width + 2 * pad < kernel {
            return None;
        }
        Some(Self {
            channels,
            height,
            width,
            kernel,
            stride,
            pad,
            out_h: (height + 2 * pad - kernel) / stride + 1,
            out_w: (width + 2 * pad - kernel) / stride + 1,
        })
    }

    /// Geometry of the convolution that is adjoint to a transposed convolution
    /// producing `channels` maps from an `in_h × in_w` input.
    pub fn transposed(channels: usize, in_h: usize, in_w: usize, kernel: usize, stride: usize, pad: usize) -> Option<Self> {
        if stride == 0 || in_h == 0 || in_w == 0 {
            return None;
        }
        let height = ((in_h - 1) * stride + kernel).checked_sub(2 * pad)?;
        let width = ((in_w - 1) * stride + kernel).checked_sub(2 * pad)?;
        let geom = Self::conv(channels, height, width, kernel, stride, pad)?;
        (geom.out_h == in_h && geom.out_w == in_w).then_some(geom)
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn out_positions(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Extract patches of a batch of `n` images into a `[n·out_h·out_w, c·k·k]` matrix.
pub fn im2col<T: Scalar>(x: &[T], n: usize, g: &ConvGeom) -> Vec<T> {
    assert_eq!(x.len(), n * g.image_len());
    let plen = g.patch_len();
    let kk = g.kernel * g.kernel;
    let mut cols = vec![T::zero(); n * g.out_positions() * plen];
    let mut row = 0;
    for b in 0..n {
        let img = &x[b * g.image_len()..(b + 1) * g.image_len()];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let dst = &mut cols[row * plen..(row + 1) * plen];
                for c in 0..g.channels {
                    let chan = &img[c * g.height * g.width..(c + 1) * g.height * g.width];
                    for ky in 0..g.kernel {
                        let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        let src_row = &chan[iy as usize * g.width..(iy as usize + 1) * g.width];
                        let base = c * kk + ky * g.kernel;
                        for kx in 0..g.kernel {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if ix >= 0 && ix < g.width as isize {
                                dst[base + kx] = src_row[ix as usize];
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add patch rows back into `n` images.
pub fn col2im<T: Scalar>(cols: &[T], n: usize, g: &ConvGeom) -> Vec<T> {
    let plen = g.patch_len();
    assert_eq!(cols.len(), n * g.out_positions() * plen);
    let kk = g.kernel * g.kernel;
    let mut x = vec![T::zero(); n * g.image_len()];
    let mut row = 0;
    for b in 0..n {
        let img = &mut x[b * g.image_len()..(b + 1) * g.image_len()];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let src = &cols[row * plen..(row + 1) * plen];
                for c in 0..g.channels {
                    let chan = &mut img[c * g.height * g.width..(c + 1) * g.height * g.width];
                    for ky in 0..g.kernel {
                        let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        let dst_row = &mut chan[iy as usize * g.width..(iy as usize + 1) * g.width];
                        let base = c * kk + ky * g.kernel;
                        for kx in 0..g.kernel {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if ix >= 0 && ix < g.width as isize {
                                dst_row[ix as usize] = dst_row[ix as usize] + src[base + kx];
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
    x
}

/// `[n, c, p] -> [n·p, c]`
pub fn channels_last<T: Scalar>(x: &[T], n: usize, c: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            let src = &x[(b * c + ch) * p..(b * c + ch + 1) * p];
            for (i, &v) in src.iter().enumerate() {
                out[(b * p + i) * c + ch] = v;
            }
        }
    }
    out
}

/// `[n·p, c] -> [n, c, p]`
pub fn channels_first<T: Scalar>(x: &[T], n: usize, c: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for i in 0..p {
            let src = &x[(b * p + i) * c..(b * p + i + 1) * c];
            for (ch, &v) in src.iter().enumerate() {
                out[(b * c + ch) * p + i] = v;
            }
        }
    }
    out
}
