use super::Matrix;
use crate::error::{invalid, Result};

/// Shape of a strided, unpadded 2-D cross-correlation layer.
///
/// Feature maps are flattened column-major with the channel slowest:
/// pixel `(row, col)` of channel `c` lives at `row + height·(col + width·c)`.
/// The kernel is a `(channels_out·kernel_height) × (channels_in·kernel_width)`
/// block matrix whose `(o, c)` block maps input channel `c` to output channel `o`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_height: usize,
    pub in_width: usize,
    pub channels_in: usize,
    pub channels_out: usize,
    pub kernel_height: usize,
    pub kernel_width: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(invalid!("convolution stride must be at least 1"));
        }
        if self.channels_in == 0 || self.channels_out == 0 {
            return Err(invalid!("convolution needs at least one channel each way"));
        }
        if self.kernel_height == 0 || self.kernel_width == 0 {
            return Err(invalid!("empty convolution kernel"));
        }
        if self.kernel_height > self.in_height || self.kernel_width > self.in_width {
            return Err(invalid!(
                "{}x{} kernel does not fit a {}x{} input",
                self.kernel_height,
                self.kernel_width,
                self.in_height,
                self.in_width
            ));
        }
        Ok(())
    }

    pub fn out_height(&self) -> usize {
        (self.in_height - self.kernel_height) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.in_width - self.kernel_width) / self.stride + 1
    }

    pub fn input_dim(&self) -> usize {
        self.in_height * self.in_width * self.channels_in
    }

    pub fn output_dim(&self) -> usize {
        self.out_height() * self.out_width() * self.channels_out
    }

    pub fn kernel_shape(&self) -> (usize, usize) {
        (
            self.channels_out * self.kernel_height,
            self.channels_in * self.kernel_width,
        )
    }

    /// Calls `f(row, col, kernel_row, kernel_col)` for every nonzero slot of
    /// the materialised matrix.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let (oh, ow) = (self.out_height(), self.out_width());
        for o in 0..self.channels_out {
            for oc in 0..ow {
                for or in 0..oh {
                    let row = or + oh * (oc + ow * o);
                    for c in 0..self.channels_in {
                        for q in 0..self.kernel_width {
                            for p in 0..self.kernel_height {
                                let ir = or * self.stride + p;
                                let ic = oc * self.stride + q;
                                let col = ir + self.in_height * (ic + self.in_width * c);
                                f(
                                    row,
                                    col,
                                    o * self.kernel_height + p,
                                    c * self.kernel_width + q,
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    /// Banded strided Toeplitz matrix of `kernel`.
    pub fn toeplitz(&self, kernel: &Matrix) -> Result<Matrix> {
        self.validate()?;
        self.check_kernel(kernel)?;
        let mut w = Matrix::zeros(self.output_dim(), self.input_dim());
        self.for_each_tap(|row, col, kr, kc| w[(row, col)] = kernel[(kr, kc)]);
        Ok(w)
    }

    /// Folds a gradient with respect to the materialised matrix back onto the
    /// shared kernel entries.
    pub fn kernel_gradient(&self, dense: &Matrix) -> Result<Matrix> {
        crate::error::ensure_dim("kernel_gradient rows", self.output_dim(), dense.rows())?;
        crate::error::ensure_dim("kernel_gradient cols", self.input_dim(), dense.cols())?;
        let (kr, kc) = self.kernel_shape();
        let mut g = Matrix::zeros(kr, kc);
        self.for_each_tap(|row, col, r, c| g[(r, c)] += dense[(row, col)]);
        Ok(g)
    }

    fn check_kernel(&self, kernel: &Matrix) -> Result<()> {
        let (kr, kc) = self.kernel_shape();
        if kernel.rows() != kr || kernel.cols() != kc {
            return Err(invalid!(
                "kernel is {}x{}, geometry expects {}x{}",
                kernel.rows(),
                kernel.cols(),
                kr,
                kc
            ));
        }
        Ok(())
    }
}

/// Materialises a valid-padding strided convolution as a dense matrix `W`
/// with `W·vec(input) = vec(conv(input))`.
///
/// The kernel height and width are inferred from `kernel`'s shape divided by
/// the channel counts.
pub fn conv_as_toeplitz(
    kernel: &Matrix,
    input_height: usize,
    input_width: usize,
    channels_in: usize,
    channels_out: usize,
    stride: usize,
) -> Result<Matrix> {
    if channels_in == 0
        || channels_out == 0
        || kernel.rows() % channels_out != 0
        || kernel.cols() % channels_in != 0
    {
        return Err(invalid!(
            "{}x{} kernel cannot be split into {}x{} channel blocks",
            kernel.rows(),
            kernel.cols(),
            channels_out,
            channels_in
        ));
    }
    let geometry = ConvGeometry {
        in_height: input_height,
        in_width: input_width,
        channels_in,
        channels_out,
        kernel_height: kernel.rows() / channels_out,
        kernel_width: kernel.cols() / channels_in,
        stride,
    };
    geometry.toeplitz(kernel)
}
