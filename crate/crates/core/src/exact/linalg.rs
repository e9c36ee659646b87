/// Solves `a x = b` for row-major `len x len` `a` by Gaussian elimination
/// with partial pivoting. `None` if the matrix is numerically singular.
pub(crate) fn solve(mut a: Vec<f64>, mut b: Vec<f64>, len: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), len * len);
    let scale = a.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(1.0);
    for col in 0..len {
        let pivot = (col..len)
            .max_by(|&i, &j| a[i * len + col].abs().total_cmp(&a[j * len + col].abs()))
            .expect("non-empty range");
        if a[pivot * len + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..len {
                a.swap(pivot * len + k, col * len + k);
            }
            b.swap(pivot, col);
        }
        let (top, rest) = a.split_at_mut((col + 1) * len);
        let prow = &top[col * len..];
        let d = prow[col];
        for (r, row) in rest.chunks_exact_mut(len).enumerate() {
            let factor = row[col] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..len {
                row[k] -= factor * prow[k];
            }
            b[col + 1 + r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; len];
    for i in (0..len).rev() {
        let mut acc = b[i];
        for k in i + 1..len {
            acc -= a[i * len + k] * x[k];
        }
        x[i] = acc / a[i * len + i];
    }
    Some(x)
}
