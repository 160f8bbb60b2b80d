//! Envelope (skyline) LDL' factorisation for symmetric quasi-definite
//! matrices.
//!
//! Row `i` stores the entries from its first structural non-zero column up
//! to the diagonal. Fill-in never leaves the envelope, so the pattern is
//! computed once per problem and reused across interior-point iterations.

const HUGE_PIVOT: f64 = 1e128;

#[derive(Debug, Clone)]
pub(crate) struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl Envelope {
    /// `first[i] <= i` is the first column held for row `i`.
    pub(crate) fn new(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut off = 0;
        for (i, &f) in first.iter().enumerate() {
            debug_assert!(f <= i);
            start.push(off);
            off += i - f + 1;
        }
        start.push(off);
        Self { diag: vec![0.0; first.len()], vals: vec![0.0; off], first, start }
    }

    pub(crate) fn order(&self) -> usize {
        self.first.len()
    }

    pub(crate) fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Accumulates `v` into entry `(i, j)`; `(i, j)` and `(j, i)` are the same entry.
    #[inline]
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(c >= self.first[r], "entry ({r}, {c}) outside envelope");
        self.vals[self.start[r] + c - self.first[r]] += v;
    }

    /// In-place factorisation. A pivot that loses all but a `rel_tol` fraction
    /// of its original diagonal to cancellation, or comes out with the wrong
    /// sign, is replaced by a huge value of the expected sign; the matching
    /// solution component is then effectively zero. Returns the number of
    /// replaced pivots.
    pub(crate) fn factor(&mut self, signs: &[f64], rel_tol: f64) -> usize {
        let mut replaced = 0;
        let n = self.order();
        let mut work = vec![0.0; n];
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            // work[j] = L_ij * d_j, computed left to right
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut acc = self.vals[si + j - fi];
                let li = &work[k0..j];
                let lj = &self.vals[sj + k0 - fj..sj + j - fj];
                for (a, b) in li.iter().zip(lj) {
                    acc -= a * b;
                }
                work[j] = acc;
            }
            let orig = self.vals[si + i - fi];
            let mut d = orig;
            for j in fi..i {
                let l = work[j] / self.diag[j];
                self.vals[si + j - fi] = l;
                d -= l * work[j];
            }
            if !(d * signs[i] > rel_tol * orig.abs()) {
                d = signs[i] * HUGE_PIVOT;
                replaced += 1;
            }
            self.diag[i] = d;
            self.vals[si + i - fi] = 1.0;
        }
        replaced
    }

    /// Solves `L D L' x = b` in place.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.order();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.vals[si..si + i - fi];
            let mut acc = b[i];
            for (l, x) in row.iter().zip(&b[fi..i]) {
                acc -= l * x;
            }
            b[i] = acc;
        }
        for i in 0..n {
            b[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let xi = b[i];
            let row = &self.vals[si..si + i - fi];
            for (l, x) in row.iter().zip(&mut b[fi..i]) {
                *x -= l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn solves_quasi_definite_system() {
        // [K A'; A -r] with K positive definite
        let a = vec![
            vec![4.0, 1.0, 0.0, 1.0],
            vec![1.0, 3.0, 0.5, 0.0],
            vec![0.0, 0.5, 2.0, 1.0],
            vec![1.0, 0.0, 1.0, -1e-8],
        ];
        let first = vec![0, 0, 1, 0];
        let mut env = Envelope::new(first);
        for i in 0..4 {
            for j in 0..=i {
                if a[i][j] != 0.0 {
                    env.add(i, j, a[i][j]);
                }
            }
        }
        env.factor(&[1.0, 1.0, 1.0, -1.0], 1e-14);
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut b = dense_mul(&a, &x_true);
        env.solve(&mut b);
        for (x, t) in b.iter().zip(x_true) {
            assert!((x - t).abs() < 1e-6, "{x} vs {t}");
        }
    }

    #[test]
    fn banded_matches_dense_solution() {
        let n = 30;
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = 4.0 + i as f64 * 0.1;
            for k in 1..=3 {
                if i >= k {
                    let v = 1.0 / (k as f64 + i as f64 * 0.01);
                    a[i][i - k] = v;
                    a[i - k][i] = v;
                }
            }
        }
        let first: Vec<usize> = (0..n).map(|i| i.saturating_sub(3)).collect();
        let mut env = Envelope::new(first);
        for i in 0..n {
            for j in i.saturating_sub(3)..=i {
                env.add(i, j, a[i][j]);
            }
        }
        env.factor(&vec![1.0; n], 1e-14);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut b = dense_mul(&a, &x_true);
        env.solve(&mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12);
        }
    }
}
