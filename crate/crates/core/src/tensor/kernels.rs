// Raw f32 kernels shared by the forward and backward passes.

/// `out[m×n] = a[m×k] · b[k×n]`
pub(crate) fn matmul(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

/// `out[k×n] += aᵀ · g` with `a[m×k]`, `g[m×n]`.
pub(crate) fn matmul_at_b_acc(a: &[f32], g: &[f32], m: usize, k: usize, n: usize, out: &mut [f32]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += aip * gv;
            }
        }
    }
}

/// `out[m×k] += g · bᵀ` with `g[m×n]`, `b[k×n]`.
pub(crate) fn matmul_a_bt_acc(g: &[f32], b: &[f32], m: usize, k: usize, n: usize, out: &mut [f32]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let dot: f32 = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
            out[i * k + p] += dot;
        }
    }
}

pub(crate) fn transpose(x: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}

/// Splits a shape around `axis` into `(outer, len, inner)`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let len = shape[axis];
    let inner = shape[axis + 1..].iter().product();
    (outer, len, inner)
}

/// Numerically stable softmax along `axis`. With `causal`, the tensor must
/// be 2-D with `axis == 1`, and entry `(i, j)` is masked out for `j > i`.
pub(crate) fn softmax(x: &[f32], shape: &[usize], axis: usize, causal: bool) -> Vec<f32> {
    let (outer, len, inner) = axis_split(shape, axis);
    let mut out = vec![0.0f32; x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + i;
            // Row `o` of a 2-D tensor may only see keys `0..=o`.
            let visible = if causal { (o + 1).min(len) } else { len };
            let mut max = f32::NEG_INFINITY;
            for k in 0..visible {
                max = max.max(x[idx(k)]);
            }
            let mut sum = 0.0f32;
            for k in 0..visible {
                let e = (x[idx(k)] - max).exp();
                out[idx(k)] = e;
                sum += e;
            }
            for k in 0..visible {
                out[idx(k)] /= sum;
            }
        }
    }
    out
}

pub(crate) fn softmax_backward(
    y: &[f32],
    dy: &[f32],
    shape: &[usize],
    axis: usize,
    dx: &mut [f32],
) {
    let (outer, len, inner) = axis_split(shape, axis);
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + i;
            let dot: f32 = (0..len).map(|k| y[idx(k)] * dy[idx(k)]).sum();
            for k in 0..len {
                dx[idx(k)] += y[idx(k)] * (dy[idx(k)] - dot);
            }
        }
    }
}

/// Per-row statistics used by layer norm: returns `(xhat, rstd)`.
pub(crate) fn normalize_rows(x: &[f32], width: usize, eps: f32) -> (Vec<f32>, Vec<f32>) {
    let rows = x.len() / width.max(1);
    let mut xhat = vec![0.0f32; x.len()];
    let mut rstd = vec![0.0f32; rows];
    for r in 0..rows {
        let row = &x[r * width..(r + 1) * width];
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / width as f64;
        let var = row
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / width as f64;
        let rs = 1.0 / (var + eps as f64).sqrt();
        rstd[r] = rs as f32;
        for (h, &v) in xhat[r * width..(r + 1) * width].iter_mut().zip(row) {
            *h = ((v as f64 - mean) * rs) as f32;
        }
    }
    (xhat, rstd)
}
