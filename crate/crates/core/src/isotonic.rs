/// Weighted least-squares projection onto non-increasing sequences
/// (pool adjacent violators).
pub(crate) fn project_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let w = w.max(1e-300);
        blocks.push((v, w, 1));
        while blocks.len() >= 2 {
            let n = blocks.len();
            let (m1, w1, l1) = blocks[n - 2];
            let (m2, w2, l2) = blocks[n - 1];
            if m1 >= m2 {
                break;
            }
            let wt = w1 + w2;
            blocks.truncate(n - 2);
            blocks.push(((m1 * w1 + m2 * w2) / wt, wt, l1 + l2));
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, l) in blocks {
        out.extend(std::iter::repeat(m).take(l));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_input_is_fixed() {
        let v = [3.0, 2.0, 2.0, -1.0];
        assert_eq!(project_nonincreasing(&v, &[1.0; 4]), v.to_vec());
    }

    #[test]
    fn violators_are_pooled() {
        let out = project_nonincreasing(&[1.0, 2.0, 0.0], &[1.0; 3]);
        assert_eq!(out, vec![1.5, 1.5, 0.0]);
    }
}
