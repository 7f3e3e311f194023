//! Convolution as matrix multiplication, and channel pruning.
//!
//! A stack of O kernels of shape C x k_h x k_w unfolds into a
//! (C*k_h*k_w) x O matrix whose columns are output channels; the input signal
//! unfolds via im2col into Z with matching row order, and the convolution is
//! the product Z^T A. Removing an output channel is removing a column.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Convolution filter bank, layout `[out_channel][in_channel][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTensor {
    out_channels: usize,
    in_channels: usize,
    k_h: usize,
    k_w: usize,
    data: Vec<f64>,
}

/// A (multi-channel) 2-D signal, layout `[channel][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// Per-output-channel mass, used to rank channels for pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScore {
    pub channel_index: usize,
    /// Sum of absolute kernel entries for this channel.
    pub l1_mass: f64,
    /// Euclidean norm of this channel's column in the unfolded matrix.
    pub l2_mass: f64,
}

impl KernelTensor {
    pub fn from_vec(
        out_channels: usize,
        in_channels: usize,
        k_h: usize,
        k_w: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || k_h == 0 || k_w == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel dimensions must be positive, got [{out_channels}, {in_channels}, {k_h}, {k_w}]"
            )));
        }
        if data.len() != out_channels * in_channels * k_h * k_w {
            return Err(Error::InvalidParameter(format!(
                "kernel data length {} does not match [{out_channels}, {in_channels}, {k_h}, {k_w}]",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        Ok(Self {
            out_channels,
            in_channels,
            k_h,
            k_w,
            data,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.k_h, self.k_w)
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.k_h, self.k_w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, o: usize, c: usize, r: usize, col: usize) -> f64 {
        self.data[((o * self.in_channels + c) * self.k_h + r) * self.k_w + col]
    }

    #[inline]
    fn set(&mut self, o: usize, c: usize, r: usize, col: usize, v: f64) {
        self.data[((o * self.in_channels + c) * self.k_h + r) * self.k_w + col] = v;
    }
}

impl SignalTensor {
    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "signal dimensions must be positive, got [{channels}, {height}, {width}]"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::InvalidParameter(format!(
                "signal data length {} does not match [{channels}, {height}, {width}]",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, r: usize, col: usize) -> f64 {
        self.data[(c * self.height + r) * self.width + col]
    }
}

/// Flatten the filter bank into a (C*k_h*k_w) x O matrix; column o is kernel
/// o in (channel, row, col) order. Exact inverse of [`fold_kernel`].
pub fn unfold_kernel(t: &KernelTensor) -> Matrix {
    let rows = t.in_channels * t.k_h * t.k_w;
    let mut out = Matrix::zeros(rows, t.out_channels);
    for o in 0..t.out_channels {
        for c in 0..t.in_channels {
            for r in 0..t.k_h {
                for col in 0..t.k_w {
                    let row = (c * t.k_h + r) * t.k_w + col;
                    out.set(row, o, t.get(o, c, r, col));
                }
            }
        }
    }
    out
}

/// Rebuild a kernel tensor from its unfolded matrix form.
pub fn fold_kernel(a: &Matrix, o: usize, c: usize, k_h: usize, k_w: usize) -> Result<KernelTensor> {
    if a.rows() != c * k_h * k_w || a.cols() != o {
        return Err(Error::ShapeMismatch {
            op: "fold_kernel",
            left: format!("{}x{}", a.rows(), a.cols()),
            right: format!("expected {}x{} for [{o}, {c}, {k_h}, {k_w}]", c * k_h * k_w, o),
        });
    }
    let mut t = KernelTensor::from_vec(o, c, k_h, k_w, vec![0.0; o * c * k_h * k_w])?;
    for oc in 0..o {
        for ch in 0..c {
            for r in 0..k_h {
                for col in 0..k_w {
                    let row = (ch * k_h + r) * k_w + col;
                    t.set(oc, ch, r, col, a.get(row, oc));
                }
            }
        }
    }
    Ok(t)
}

fn output_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::InvalidParameter(format!(
            "kernel extent {kernel} exceeds padded input extent {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

fn check_conv_args(stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    Ok(())
}

/// Rearrange receptive fields into columns: Z of shape
/// (C*k_h*k_w) x (H_out*W_out), rows in the same (channel, row, col) order as
/// [`unfold_kernel`], columns over output positions row-major, zero padding.
pub fn im2col(x: &SignalTensor, k_h: usize, k_w: usize, stride: usize, pad: usize) -> Result<Matrix> {
    check_conv_args(stride)?;
    let h_out = output_extent(x.height, k_h, stride, pad)?;
    let w_out = output_extent(x.width, k_w, stride, pad)?;
    let rows = x.channels * k_h * k_w;
    let mut z = Matrix::zeros(rows, h_out * w_out);
    for c in 0..x.channels {
        for r in 0..k_h {
            for col in 0..k_w {
                let row = (c * k_h + r) * k_w + col;
                for oh in 0..h_out {
                    for ow in 0..w_out {
                        let ih = (oh * stride + r) as isize - pad as isize;
                        let iw = (ow * stride + col) as isize - pad as isize;
                        let v = if ih >= 0
                            && iw >= 0
                            && (ih as usize) < x.height
                            && (iw as usize) < x.width
                        {
                            x.get(c, ih as usize, iw as usize)
                        } else {
                            0.0
                        };
                        z.set(row, oh * w_out + ow, v);
                    }
                }
            }
        }
    }
    Ok(z)
}

fn check_channels(x: &SignalTensor, t: &KernelTensor) -> Result<()> {
    if x.channels != t.in_channels {
        return Err(Error::ShapeMismatch {
            op: "convolution",
            left: format!("kernel [{}, {}, {}, {}]", t.out_channels, t.in_channels, t.k_h, t.k_w),
            right: format!("signal [{}, {}, {}]", x.channels, x.height, x.width),
        });
    }
    Ok(())
}

/// Naive nested-loop cross-correlation (no kernel flip), the oracle form.
pub fn conv_direct(
    x: &SignalTensor,
    t: &KernelTensor,
    stride: usize,
    pad: usize,
) -> Result<SignalTensor> {
    check_conv_args(stride)?;
    check_channels(x, t)?;
    let h_out = output_extent(x.height, t.k_h, stride, pad)?;
    let w_out = output_extent(x.width, t.k_w, stride, pad)?;
    let mut out = vec![0.0; t.out_channels * h_out * w_out];
    for o in 0..t.out_channels {
        for oh in 0..h_out {
            for ow in 0..w_out {
                let mut acc = 0.0;
                for c in 0..x.channels {
                    for r in 0..t.k_h {
                        for col in 0..t.k_w {
                            let ih = (oh * stride + r) as isize - pad as isize;
                            let iw = (ow * stride + col) as isize - pad as isize;
                            if ih >= 0
                                && iw >= 0
                                && (ih as usize) < x.height
                                && (iw as usize) < x.width
                            {
                                acc += t.get(o, c, r, col) * x.get(c, ih as usize, iw as usize);
                            }
                        }
                    }
                }
                out[(o * h_out + oh) * w_out + ow] = acc;
            }
        }
    }
    SignalTensor::from_vec(t.out_channels, h_out, w_out, out)
}

/// The same convolution computed as `Z^T A` via im2col and the unfolded
/// kernel matrix.
pub fn conv_as_matmul(
    x: &SignalTensor,
    t: &KernelTensor,
    stride: usize,
    pad: usize,
) -> Result<SignalTensor> {
    check_conv_args(stride)?;
    check_channels(x, t)?;
    let h_out = output_extent(x.height, t.k_h, stride, pad)?;
    let w_out = output_extent(x.width, t.k_w, stride, pad)?;
    let z = im2col(x, t.k_h, t.k_w, stride, pad)?;
    let a = unfold_kernel(t);
    let y = z.transpose().matmul(&a)?; // (H_out*W_out) x O
    let mut out = vec![0.0; t.out_channels * h_out * w_out];
    for p in 0..h_out * w_out {
        for o in 0..t.out_channels {
            out[o * h_out * w_out + p] = y.get(p, o);
        }
    }
    SignalTensor::from_vec(t.out_channels, h_out, w_out, out)
}

/// Largest absolute difference between two signals of equal shape.
pub fn max_abs_deviation(a: &SignalTensor, b: &SignalTensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "max_abs_deviation",
            left: format!("{:?}", a.shape()),
            right: format!("{:?}", b.shape()),
        });
    }
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// One score per output channel, sorted by ascending l1 mass (ties by index).
pub fn channel_scores(t: &KernelTensor) -> Vec<ChannelScore> {
    let per_channel = t.in_channels * t.k_h * t.k_w;
    let mut scores: Vec<ChannelScore> = (0..t.out_channels)
        .map(|o| {
            let slice = &t.data[o * per_channel..(o + 1) * per_channel];
            ChannelScore {
                channel_index: o,
                l1_mass: slice.iter().map(|v| v.abs()).sum(),
                l2_mass: slice.iter().map(|v| v * v).sum::<f64>().sqrt(),
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        a.l1_mass
            .partial_cmp(&b.l1_mass)
            .unwrap()
            .then(a.channel_index.cmp(&b.channel_index))
    });
    scores
}

/// Zero out the `n_remove` channels with the smallest l1 mass. Channels are
/// zeroed rather than deleted so downstream layer shapes stay valid. Returns
/// the modified tensor and the removed channel indices in removal order.
pub fn prune_channels(t: &KernelTensor, n_remove: usize) -> Result<(KernelTensor, Vec<usize>)> {
    if n_remove >= t.out_channels {
        return Err(Error::InvalidParameter(format!(
            "cannot remove {n_remove} of {} channels",
            t.out_channels
        )));
    }
    let mut pruned = t.clone();
    let per_channel = t.in_channels * t.k_h * t.k_w;
    let removed: Vec<usize> = channel_scores(t)
        .into_iter()
        .take(n_remove)
        .map(|s| s.channel_index)
        .collect();
    for &o in &removed {
        pruned.data[o * per_channel..(o + 1) * per_channel].fill(0.0);
    }
    Ok((pruned, removed))
}
