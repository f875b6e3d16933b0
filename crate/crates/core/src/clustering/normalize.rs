use nalgebra::DMatrix;

use crate::kmd::ModeSet;

/// Default additive smoothing of mode magnitudes.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Row-stochastic `p x n_modes` matrix: one probability vector per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedModeMatrix {
    pub rows: DMatrix<f64>,
    pub epsilon: f64,
}

impl NormalizedModeMatrix {
    pub fn n_sensors(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.rows.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_sensors()).map(|i| self.row(i)).collect()
    }

    /// Column-wise mean of all sensor rows.
    pub fn mean_row(&self) -> Vec<f64> {
        let p = self.n_sensors() as f64;
        self.rows.row_sum().iter().map(|s| s / p).collect()
    }
}

/// Stacks `|v_j|` column by column, smooths by `epsilon`, gives every mode
/// unit column mass and then every sensor unit row mass.
pub fn normalize_modes(modes: &ModeSet, epsilon: f64) -> NormalizedModeMatrix {
    let magnitudes = modes.modes.map(|z| z.norm());
    normalize_magnitudes(&magnitudes, epsilon)
}

/// The same two-stage normalization on an explicit magnitude matrix.
pub fn normalize_magnitudes(magnitudes: &DMatrix<f64>, epsilon: f64) -> NormalizedModeMatrix {
    let (p, cols) = magnitudes.shape();
    let mut m = magnitudes.map(|v| v.abs() + epsilon);
    for j in 0..cols {
        let sum: f64 = m.column(j).iter().sum();
        if sum > 0.0 {
            m.column_mut(j).iter_mut().for_each(|v| *v /= sum);
        } else {
            m.column_mut(j).fill(1.0 / p as f64);
        }
    }
    for i in 0..p {
        let sum: f64 = m.row(i).iter().sum();
        if sum > 0.0 {
            m.row_mut(i).iter_mut().for_each(|v| *v /= sum);
        } else {
            m.row_mut(i).fill(1.0 / cols as f64);
        }
    }
    NormalizedModeMatrix { rows: m, epsilon }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_example() {
        let n = normalize_magnitudes(&dmatrix![1.0, 3.0; 1.0, 1.0], 0.0);
        // columns -> [[0.5, 0.75], [0.5, 0.25]]; rows -> [[0.4, 0.6], [2/3, 1/3]]
        let expected = dmatrix![0.4, 0.6; 2.0 / 3.0, 1.0 / 3.0];
        assert!((n.rows - expected).abs().max() < 1e-15);
    }

    #[test]
    fn equal_entries_give_uniform_rows() {
        let n = normalize_magnitudes(&DMatrix::from_element(4, 5, 2.5), DEFAULT_EPSILON);
        for v in n.rows.iter() {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn single_column_is_unity() {
        let n = normalize_magnitudes(&dmatrix![0.1; 7.0; 0.0], DEFAULT_EPSILON);
        for v in n.rows.iter() {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn zero_modes_with_no_smoothing_stay_finite() {
        let n = normalize_magnitudes(&DMatrix::zeros(3, 2), 0.0);
        assert!(n.rows.iter().all(|v| (*v - 0.5).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn rows_are_probability_vectors(
            vals in proptest::collection::vec(0.0f64..10.0, 12),
            eps in prop_oneof![Just(0.0), Just(DEFAULT_EPSILON), Just(1e-3)],
        ) {
            let n = normalize_magnitudes(&DMatrix::from_vec(4, 3, vals), eps);
            for i in 0..4 {
                let s: f64 = n.rows.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
            if eps > 0.0 {
                prop_assert!(n.rows.iter().all(|&v| v > 0.0));
            }
        }

        #[test]
        fn column_scaling_is_absorbed(
            vals in proptest::collection::vec(0.01f64..10.0, 15),
            scales in proptest::collection::vec(0.01f64..100.0, 5),
        ) {
            let base = DMatrix::from_vec(3, 5, vals);
            let mut scaled = base.clone();
            for (j, s) in scales.iter().enumerate() {
                scaled.column_mut(j).iter_mut().for_each(|v| *v *= s);
            }
            let a = normalize_magnitudes(&base, 0.0);
            let b = normalize_magnitudes(&scaled, 0.0);
            prop_assert!((a.rows - b.rows).abs().max() <= 1e-12);
        }
    }
}
