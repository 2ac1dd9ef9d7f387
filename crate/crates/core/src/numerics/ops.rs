//! Forward kernels.
//!
//! Dense products go through [`gemm`], whose per-row arithmetic does not
//! depend on how many rows are evaluated together. The single-row kernels
//! used by streaming inference therefore reproduce whole-sequence results
//! bit for bit.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Strided matrix operand: `data[r * row_stride + c * col_stride]`.
#[derive(Clone, Copy)]
pub(crate) struct Strided<'a> {
    pub data: &'a [f64],
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> Strided<'a> {
    pub fn rows(data: &'a [f64], cols: usize) -> Self {
        Strided {
            data,
            row_stride: cols,
            col_stride: 1,
        }
    }

    /// Transposed view of a row-major `rows × cols` matrix.
    pub fn transposed(data: &'a [f64], cols: usize) -> Self {
        Strided {
            data,
            row_stride: 1,
            col_stride: cols,
        }
    }

    fn fits(&self, rows: usize, cols: usize) -> bool {
        rows == 0 || cols == 0 || (rows - 1) * self.row_stride + (cols - 1) * self.col_stride < self.data.len()
    }
}

/// `c = beta·c + a·b` with `a: m × k`, `b: k × n` and row-major `c: m × n`.
///
/// Each output row depends only on its own row of `a`, so evaluating one
/// row at a time reproduces the batched result exactly.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: Strided<'_>, b: Strided<'_>, beta: f64, c: &mut [f64]) {
    assert!(a.fits(m, k) && b.fits(k, n) && c.len() >= m * n, "gemm operand out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // SAFETY: the assert above keeps every strided access inside its slice,
    // and `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out = x · w` for one row `x` and `w` of shape `x.len() × out.len()`.
pub fn matmul_row(x: &[f64], w: &[f64], out: &mut [f64]) {
    let n = out.len();
    gemm(1, x.len(), n, Strided::rows(x, x.len()), Strided::rows(w, n), 0.0, out);
}

pub fn add_bias_row(out: &mut [f64], bias: &[f64]) {
    for (o, b) in out.iter_mut().zip(bias) {
        *o += b;
    }
}

/// One output row of a causal convolution. `taps[k]` is the input row paired
/// with kernel slice `k`, or `None` where it falls in the zero padding.
pub fn conv_row(taps: &[Option<&[f64]>], w: &[f64], bias: &[f64], out: &mut [f64]) {
    let cout = out.len();
    let cin = w.len() / (taps.len() * cout);
    out.iter_mut().for_each(|o| *o = 0.0);
    for (k, tap) in taps.iter().enumerate() {
        let Some(x) = tap else { continue };
        let wk = &w[k * cin * cout..(k + 1) * cin * cout];
        gemm(1, cin, cout, Strided::rows(x, cin), Strided::rows(wk, cout), 1.0, out);
    }
    add_bias_row(out, bias);
}

/// Mixes node rows of one frame: `out[i] = Σ_j adj[i][j] · x[j]`, with `x`
/// laid out as `nodes × channels`.
pub fn node_mix_frame(adj: &[f64], x: &[f64], out: &mut [f64]) {
    let n = (adj.len() as f64).sqrt() as usize;
    let c = x.len() / n;
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..n {
        let dst = &mut out[i * c..(i + 1) * c];
        for j in 0..n {
            let a = adj[i * n + j];
            if a == 0.0 {
                continue;
            }
            for (o, v) in dst.iter_mut().zip(&x[j * c..(j + 1) * c]) {
                *o += a * v;
            }
        }
    }
}

pub fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul inner dimensions disagree: {:?} × {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(&[m, n]);
    gemm(m, k, n, Strided::rows(a.data(), k), Strided::rows(b.data(), n), 0.0, out.data_mut());
    Ok(out)
}

/// Checks shapes for a causal convolution and returns `(t, k, cin, cout)`.
pub(crate) fn conv_dims(x: &Tensor, w: &Tensor, bias: &Tensor, dilation: usize) -> Result<(usize, usize, usize, usize)> {
    let (t, cin) = x.dims2()?;
    let [k, wcin, cout] = w.shape()[..] else {
        return Err(Error::dim(format!("conv kernel must be K×Cin×Cout, got {:?}", w.shape())));
    };
    if wcin != cin {
        return Err(Error::dim(format!("conv input has {cin} channels, kernel expects {wcin}")));
    }
    if bias.shape() != [cout] {
        return Err(Error::dim(format!("conv bias shape {:?}, expected [{cout}]", bias.shape())));
    }
    if t == 0 || k == 0 || dilation == 0 {
        return Err(Error::dim("conv needs T ≥ 1, K ≥ 1 and dilation ≥ 1"));
    }
    Ok((t, k, cin, cout))
}

/// Causal dilated 1-D convolution with left zero padding:
/// `y[t] = b + Σ_k x[t − d·(K−1−k)] · w[k]`.
pub fn conv1d_causal(x: &Tensor, w: &Tensor, bias: &Tensor, dilation: usize) -> Result<Tensor> {
    let (t, k, cin, cout) = conv_dims(x, w, bias, dilation)?;
    x.ensure_finite("conv1d input")?;
    let mut out = Tensor::zeros(&[t, cout]);
    // Same accumulation order as `conv_row`: taps in kernel order, then bias.
    for kk in 0..k {
        let back = dilation * (k - 1 - kk);
        if back >= t {
            continue;
        }
        let wk = &w.data()[kk * cin * cout..(kk + 1) * cin * cout];
        gemm(
            t - back,
            cin,
            cout,
            Strided::rows(x.data(), cin),
            Strided::rows(wk, cout),
            1.0,
            &mut out.data_mut()[back * cout..],
        );
    }
    for row in out.data_mut().chunks_exact_mut(cout) {
        add_bias_row(row, bias.data());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap()
    }

    fn kernel(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len(), 1, 1], v.to_vec()).unwrap()
    }

    /// Sliding-window oracle written directly from the definition.
    fn brute_conv(x: &[f64], w: &[f64], d: usize) -> Vec<f64> {
        let k = w.len();
        (0..x.len())
            .map(|t| {
                (0..k)
                    .map(|j| {
                        let back = d * (k - 1 - j);
                        if t >= back {
                            w[j] * x[t - back]
                        } else {
                            0.0
                        }
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matmul_identity_and_dot() {
        let a = Tensor::from_rows(&[vec![2.0, 3.0], vec![4.0, 5.0]]).unwrap();
        assert_eq!(matmul(&Tensor::identity(2), &a).unwrap(), a);

        let r = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let c = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(matmul(&r, &c).unwrap().data(), &[11.0]);

        let z = matmul(&Tensor::zeros(&[2, 2]), &a).unwrap();
        assert_eq!(z, Tensor::zeros(&[2, 2]));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Tensor::zeros(&[2, 3]);
        assert!(matches!(matmul(&a, &a), Err(Error::Dimension(_))));
    }

    #[test]
    fn causal_conv_examples() {
        let x = col(&[1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::zeros(&[1]);
        let y = conv1d_causal(&x, &kernel(&[0.0, 1.0]), &b, 1).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
        let y = conv1d_causal(&x, &kernel(&[1.0, 0.0]), &b, 1).unwrap();
        assert_eq!(y.data(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(brute_conv(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0], 1), vec![0.0, 1.0, 2.0, 3.0]);
        let y = conv1d_causal(&x, &kernel(&[1.0, 1.0]), &b, 2).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 4.0, 6.0]);
        assert_eq!(brute_conv(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn causal_conv_matches_brute_force_k3() {
        let x: Vec<f64> = (0..17).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let w = [0.5, -1.0, 2.0];
        for d in 1..5 {
            let y = conv1d_causal(&col(&x), &kernel(&w), &Tensor::zeros(&[1]), d).unwrap();
            assert_eq!(y.data(), &brute_conv(&x, &w, d)[..]);
        }
    }

    #[test]
    fn causal_conv_rejects_non_finite() {
        let x = col(&[1.0, f64::NAN]);
        let r = conv1d_causal(&x, &kernel(&[1.0]), &Tensor::zeros(&[1]), 1);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
