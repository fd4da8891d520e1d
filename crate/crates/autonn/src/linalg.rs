//! Thin strided wrapper over `matrixmultiply::dgemm`.

/// A strided view of an `rows x cols` matrix inside a slice.
#[derive(Debug, Clone, Copy)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl Mat {
    pub fn rowmajor(rows: usize, cols: usize) -> Self {
        Self { rows, cols, rs: cols as isize, cs: 1 }
    }

    /// Transposed view of a row-major `cols x rows` buffer.
    pub fn transposed(rows: usize, cols: usize) -> Self {
        Self { rows, cols, rs: 1, cs: rows as isize }
    }

    pub fn strided(rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        Self { rows, cols, rs: rs as isize, cs: cs as isize }
    }

    fn max_index(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        (self.rows - 1) * self.rs as usize + (self.cols - 1) * self.cs as usize
    }
}

/// `c = alpha * a * b + beta * c`.
pub fn gemm(alpha: f64, a: &[f64], am: Mat, b: &[f64], bm: Mat, beta: f64, c: &mut [f64], cm: Mat) {
    assert_eq!(am.cols, bm.rows, "inner dimensions");
    assert_eq!((am.rows, bm.cols), (cm.rows, cm.cols), "output dimensions");
    if cm.rows == 0 || cm.cols == 0 {
        return;
    }
    if am.cols == 0 {
        scale_view(c, cm, beta);
        return;
    }
    assert!(am.max_index() < a.len() && bm.max_index() < b.len() && cm.max_index() < c.len());
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            am.rows,
            am.cols,
            bm.cols,
            alpha,
            a.as_ptr(),
            am.rs,
            am.cs,
            b.as_ptr(),
            bm.rs,
            bm.cs,
            beta,
            c.as_mut_ptr(),
            cm.rs,
            cm.cs,
        );
    }
}

/// `out += sum_j w_j x_j x_j^*` for complex rows `x [rows, d]` stored as
/// interleaved (re, im) pairs; `out` is a `[d, d]` interleaved matrix.
pub fn complex_gram(x: &[f64], rows: usize, d: usize, weights: Option<&[f64]>, out: &mut [f64]) {
    assert_eq!(x.len(), 2 * rows * d);
    assert_eq!(out.len(), 2 * d * d);
    let scaled;
    let wx: &[f64] = match weights {
        Some(w) => {
            scaled = x.iter().enumerate().map(|(i, v)| v * w[i / (2 * d)]).collect::<Vec<f64>>();
            &scaled
        }
        None => x,
    };
    let part = Mat::strided(rows, d, 2 * d, 2);
    let part_t = Mat::strided(d, rows, 2, 2 * d);
    let o = Mat::strided(d, d, 2 * d, 2);
    gemm(1.0, x, part_t, wx, part, 1.0, out, o);
    gemm(1.0, &x[1..], part_t, &wx[1..], part, 1.0, out, o);
    gemm(1.0, &x[1..], part_t, wx, part, 1.0, &mut out[1..], o);
    gemm(-1.0, x, part_t, &wx[1..], part, 1.0, &mut out[1..], o);
}

fn scale_view(c: &mut [f64], cm: Mat, beta: f64) {
    for i in 0..cm.rows {
        for j in 0..cm.cols {
            let idx = i * cm.rs as usize + j * cm.cs as usize;
            c[idx] = if beta == 0.0 { 0.0 } else { beta * c[idx] };
        }
    }
}
