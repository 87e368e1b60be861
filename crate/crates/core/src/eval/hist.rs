use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dtw::dtw;

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_THRESHOLD: f64 = 0.6;

/// Normalized histogram over explicit bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub samples: usize,
}

/// Equal-width edges over `[0, max]`. A zero maximum gets the unit interval.
pub fn equal_width_edges(max: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs at least one bin".into(),
        ));
    }
    if !(max.is_finite() && max >= 0.0) {
        return Err(Error::NonFinite(format!("histogram range {max}")));
    }
    let top = if max > 0.0 { max } else { 1.0 };
    Ok((0..=bins)
        .map(|k| {
            if k == bins {
                top
            } else {
                top * k as f64 / bins as f64
            }
        })
        .collect())
}

impl Histogram {
    /// Bins `values` (all ≥ 0); values at or past the last edge land in the
    /// last bin.
    pub fn from_values(values: &[f64], edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidArgument(
                "histogram needs at least two edges".into(),
            ));
        }
        if values.is_empty() {
            return Err(Error::Empty("histogram values"));
        }
        let bins = edges.len() - 1;
        let mut counts = vec![0usize; bins];
        for &v in values {
            if !v.is_finite() || v < edges[0] {
                return Err(Error::InvalidArgument(format!(
                    "value {v} outside histogram range"
                )));
            }
            // first edge strictly greater than v, minus one
            let k = edges[1..bins].partition_point(|&e| e <= v);
            counts[k] += 1;
        }
        let n = values.len() as f64;
        Ok(Histogram {
            edges: edges.to_vec(),
            density: counts.iter().map(|&c| c as f64 / n).collect(),
            samples: values.len(),
        })
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum()
    }

    /// `bin_left,bin_right,density` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,density\n");
        for (k, d) in self.density.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[k], self.edges[k + 1], d));
        }
        out
    }
}

/// Distances `dtw(x_i, x_j)` over ordered pairs `i != j`.
pub fn pairwise_distances(tests: &[Vec<f64>]) -> Result<Vec<f64>> {
    if tests.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pairwise histogram needs at least 2 sequences, got {}",
            tests.len()
        )));
    }
    let m = tests.len();
    let mut upper = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let d = dtw(&tests[i], &tests[j])?;
            upper[i * m + j] = d;
            upper[j * m + i] = d;
        }
    }
    Ok((0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| upper[i * m + j])
        .collect())
}

/// Distances `dtw(x'_i, x_j)` over every generated/test pair.
pub fn cross_distances(generated: &[Vec<f64>], tests: &[Vec<f64>]) -> Result<Vec<f64>> {
    if generated.is_empty() || tests.is_empty() {
        return Err(Error::Empty("generated or test set"));
    }
    let mut out = Vec::with_capacity(generated.len() * tests.len());
    for g in generated {
        for t in tests {
            out.push(dtw(g, t)?);
        }
    }
    Ok(out)
}

pub fn pairwise_hist(tests: &[Vec<f64>], edges: &[f64]) -> Result<Histogram> {
    Histogram::from_values(&pairwise_distances(tests)?, edges)
}

pub fn generated_hist(
    generated: &[Vec<f64>],
    tests: &[Vec<f64>],
    edges: &[f64],
) -> Result<Histogram> {
    Histogram::from_values(&cross_distances(generated, tests)?, edges)
}

/// Demo-vs-demo (h1) and generated-vs-demo (h2) histograms on shared bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    pub h1: Histogram,
    pub h2: Histogram,
}

impl HistogramPair {
    /// Bins both distance sets over `[0, max of either]`.
    pub fn build(generated: &[Vec<f64>], tests: &[Vec<f64>], bins: usize) -> Result<Self> {
        let d1 = pairwise_distances(tests)?;
        let d2 = cross_distances(generated, tests)?;
        let max = d1.iter().chain(&d2).copied().fold(0.0, f64::max);
        let edges = equal_width_edges(max, bins)?;
        Ok(HistogramPair {
            h1: Histogram::from_values(&d1, &edges)?,
            h2: Histogram::from_values(&d2, &edges)?,
        })
    }

    pub fn similarity(&self) -> Result<f64> {
        similarity(&self.h1, &self.h2)
    }
}

/// Histogram intersection `sum_k min(h1_k, h2_k)`.
pub fn similarity(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if h1.edges != h2.edges {
        return Err(Error::InvalidArgument(
            "histograms use different bins".into(),
        ));
    }
    Ok(h1
        .density
        .iter()
        .zip(&h2.density)
        .map(|(a, b)| a.min(*b))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hist(density: &[f64]) -> Histogram {
        Histogram {
            edges: (0..=density.len()).map(|k| k as f64).collect(),
            density: density.to_vec(),
            samples: 4,
        }
    }

    #[test]
    fn intersection_values() {
        assert_eq!(
            similarity(&hist(&[0.5, 0.5, 0.0]), &hist(&[0.25, 0.5, 0.25])).unwrap(),
            0.75
        );
        assert_eq!(
            similarity(&hist(&[0.2, 0.8]), &hist(&[0.2, 0.8])).unwrap(),
            1.0
        );
        assert_eq!(
            similarity(&hist(&[1.0, 0.0]), &hist(&[0.0, 1.0])).unwrap(),
            0.0
        );
        assert!(similarity(&hist(&[1.0]), &hist(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn identical_tests_fill_zero_bin() {
        let x = vec![0.0, 5.0, 10.0];
        let h = pairwise_hist(&[x.clone(), x], &equal_width_edges(0.0, 30).unwrap()).unwrap();
        assert_eq!(h.density[0], 1.0);
        assert_eq!(h.samples, 2);
    }

    #[test]
    fn three_sequence_bins() {
        // dtw([0],[2]) = 1, dtw([0],[6]) = 3, dtw([2],[6]) = 2
        let tests = vec![vec![0.0], vec![2.0], vec![6.0]];
        let d = pairwise_distances(&tests).unwrap();
        assert_eq!(d, vec![1.0, 3.0, 1.0, 2.0, 3.0, 2.0]);
        let h = pairwise_hist(&tests, &[0.0, 1.5, 2.5, 3.0]).unwrap();
        assert_eq!(h.density, vec![2.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0]);
    }

    #[test]
    fn single_pair_cross_histogram() {
        let h = generated_hist(
            &[vec![1.0, 2.0]],
            &[vec![1.0, 4.0]],
            &equal_width_edges(1.0, 4).unwrap(),
        )
        .unwrap();
        assert_eq!(h.samples, 1);
        assert_eq!(h.density.iter().filter(|&&d| d == 1.0).count(), 1);
    }

    #[test]
    fn copy_case_has_zero_mass_on_diagonal() {
        let tests = vec![vec![0.0, 1.0], vec![0.0, 3.0, 4.0], vec![2.0]];
        let pair = HistogramPair::build(&tests, &tests, 30).unwrap();
        assert!((pair.h2.density[0] - 3.0 / 9.0).abs() < 1e-15);
        assert_eq!(pair.h1.edges, pair.h2.edges);
    }

    #[test]
    fn cross_distances_match_recomputation() {
        let g = vec![vec![0.0, 1.0, 2.0], vec![5.0]];
        let t = vec![vec![1.0], vec![0.0, 0.0, 4.0], vec![3.0, 3.0]];
        let d = cross_distances(&g, &t).unwrap();
        let mut k = 0;
        for gi in &g {
            for tj in &t {
                assert_eq!(d[k], dtw(gi, tj).unwrap());
                k += 1;
            }
        }
    }

    #[test]
    fn guards() {
        assert!(pairwise_distances(&[vec![1.0]]).is_err());
        assert!(cross_distances(&[], &[vec![1.0]]).is_err());
        assert!(equal_width_edges(1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn histograms_are_normalized(
            seqs in prop::collection::vec(prop::collection::vec(0.0f64..90.0, 1..12), 2..7),
            gen in prop::collection::vec(prop::collection::vec(0.0f64..90.0, 1..12), 1..5),
        ) {
            let pair = HistogramPair::build(&gen, &seqs, DEFAULT_BINS).unwrap();
            prop_assert!((pair.h1.mass() - 1.0).abs() <= 1e-12);
            prop_assert!((pair.h2.mass() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(pair.h1.samples, seqs.len() * (seqs.len() - 1));
            prop_assert_eq!(pair.h2.samples, gen.len() * seqs.len());
            let s = pair.similarity().unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
        }
    }
}
