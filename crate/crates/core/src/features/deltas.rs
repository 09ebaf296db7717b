use super::EnergyMatrix;

/// Half-width of the regression window.
pub const DELTA_WINDOW: usize = 2;

/// Regression delta of one sequence with edge replication:
/// `d_t = Σ n (x_{t+n} - x_{t-n}) / (2 Σ n²)`.
pub fn delta_filter(x: &[f64], window: usize) -> Vec<f64> {
    let len = x.len();
    if len == 0 {
        return Vec::new();
    }
    let denom: f64 = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    let at = |i: isize| x[i.clamp(0, len as isize - 1) as usize];
    (0..len as isize)
        .map(|t| {
            let mut acc = 0.0;
            for n in 1..=window as isize {
                acc += n as f64 * (at(t + n) - at(t - n));
            }
            acc / denom
        })
        .collect()
}

/// Applies the delta filter `order` times along time, band by band.
pub fn compute_deltas(m: &EnergyMatrix, order: usize) -> EnergyMatrix {
    let mut out = m.clone();
    for _ in 0..order {
        let mut next = Vec::with_capacity(out.values.len());
        for b in 0..out.bands {
            next.extend(delta_filter(out.band(b), DELTA_WINDOW));
        }
        out.values = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_deltas() {
        let m = EnergyMatrix::new(2, 9, vec![-4.0; 18]).unwrap();
        for k in 1..=3 {
            assert!(compute_deltas(&m, k).values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ramp_slope_recovered() {
        let m = EnergyMatrix::from_fn(1, 12, |_, t| 0.75 * t as f64).unwrap();
        let d1 = compute_deltas(&m, 1);
        let d2 = compute_deltas(&m, 2);
        for t in 2..10 {
            assert!((d1.get(0, t) - 0.75).abs() < 1e-12);
        }
        for t in 4..8 {
            assert!(d2.get(0, t).abs() < 1e-12);
        }
    }

    #[test]
    fn single_frame() {
        assert_eq!(delta_filter(&[3.0], 2), vec![0.0]);
    }
}
