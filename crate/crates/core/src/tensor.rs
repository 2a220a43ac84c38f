//! Dense tensors stored flat with axis 0 varying fastest, and mode products.

/// Multi-index to flat offset, axis 0 fastest.
pub fn flat_index(idx: &[usize], shape: &[usize]) -> usize {
    let mut off = 0;
    let mut stride = 1;
    for (i, n) in idx.iter().zip(shape) {
        off += i * stride;
        stride *= n;
    }
    off
}

/// Flat offset to multi-index, axis 0 fastest.
pub fn unflatten(mut off: usize, shape: &[usize]) -> Vec<usize> {
    shape
        .iter()
        .map(|&n| {
            let i = off % n;
            off /= n;
            i
        })
        .collect()
}

/// `out[.., r, ..] = Σ_c mat[r][c] · data[.., c, ..]` along `axis`.
///
/// `mat` is row-major with `rows` rows and `shape[axis]` columns.
pub fn apply_along_axis(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    mat: &[f64],
    rows: usize,
) -> (Vec<f64>, Vec<usize>) {
    let cols = shape[axis];
    debug_assert_eq!(mat.len(), rows * cols);
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    let inner: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; inner * rows * outer];
    for o in 0..outer {
        let src = &data[o * cols * inner..(o + 1) * cols * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let d = &mut dst[r * inner..(r + 1) * inner];
            for c in 0..cols {
                let a = mat[r * cols + c];
                if a == 0.0 {
                    continue;
                }
                let s = &src[c * inner..(c + 1) * inner];
                for (x, y) in d.iter_mut().zip(s) {
                    *x += a * y;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// Evaluates `Σ coeffs[i] Π_k f_k[i_k]`, i.e. contracts every axis with a vector.
pub fn contract_all(data: &[f64], shape: &[usize], vecs: &[&[f64]]) -> f64 {
    let mut cur = data.to_vec();
    let mut sh = shape.to_vec();
    for (axis, v) in vecs.iter().enumerate() {
        let (next, ns) = apply_along_axis(&cur, &sh, axis, v, 1);
        cur = next;
        sh = ns;
    }
    cur[0]
}
