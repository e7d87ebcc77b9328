// SPDX-License-Identifier: MIT OR Apache-2.0

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::stats::DimensionSet;

/// Number of dimensions selected by both sets.
pub fn overlap_count(a: &DimensionSet, b: &DimensionSet) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    let (x, y) = (&a.indices, &b.indices);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Pairwise overlap counts between dimension sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl OverlapMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.counts[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("set");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(label);
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Overlap counts between every pair of `sets`. All sets must share `K`
/// and hidden size.
pub fn overlap_matrix(sets: &[DimensionSet]) -> Result<OverlapMatrix> {
    if let Some(first) = sets.first() {
        for s in sets {
            if s.k() != first.k() {
                return Err(Error::config(format!(
                    "overlap needs a common K, got {} and {}",
                    first.k(),
                    s.k()
                )));
            }
            if s.hidden_size != first.hidden_size {
                return Err(Error::config(format!(
                    "overlap needs a common hidden size, got {} and {}",
                    first.hidden_size, s.hidden_size
                )));
            }
        }
    }
    let n = sets.len();
    let mut counts = vec![vec![0; n]; n];
    for i in 0..n {
        counts[i][i] = sets[i].k();
        for j in i + 1..n {
            let c = overlap_count(&sets[i], &sets[j]);
            counts[i][j] = c;
            counts[j][i] = c;
        }
    }
    Ok(OverlapMatrix {
        labels: sets.iter().map(DimensionSet::label).collect(),
        counts,
    })
}

/// Fraction of the monolingual selection also found in the parallel one.
pub fn agreement_rate(mono: &DimensionSet, para: &DimensionSet) -> Result<f64> {
    if mono.lang != para.lang {
        return Err(Error::config(format!(
            "agreement compares one language, got {} and {}",
            mono.lang, para.lang
        )));
    }
    if mono.k() != para.k() {
        return Err(Error::config(format!(
            "agreement needs a common K, got {} and {}",
            mono.k(),
            para.k()
        )));
    }
    Ok(overlap_count(mono, para) as f64 / mono.k() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Setting;
    use crate::store::LangCode;

    fn set(lang: &str, setting: Setting, idx: &[usize]) -> DimensionSet {
        DimensionSet::from_indices(LangCode::new(lang).unwrap(), setting, 16, idx.to_vec(), None).unwrap()
    }

    #[test]
    fn count_example() {
        let a = set("zh", Setting::Parallel, &[1, 2, 3]);
        let b = set("ja", Setting::Parallel, &[2, 3, 4]);
        assert_eq!(overlap_count(&a, &b), 2);
        assert_eq!(overlap_count(&a, &a), 3);
    }

    #[test]
    fn matrix_disjoint_and_diagonal() {
        let sets = [
            set("zh", Setting::Parallel, &[0, 1]),
            set("ja", Setting::Parallel, &[2, 3]),
        ];
        let m = overlap_matrix(&sets).unwrap();
        assert_eq!(m.counts, vec![vec![2, 0], vec![0, 2]]);
        assert_eq!(
            m.to_csv(),
            "set,zh/parallel,ja/parallel\nzh/parallel,2,0\nja/parallel,0,2\n"
        );
    }

    #[test]
    fn matrix_mixed_k() {
        let sets = [
            set("zh", Setting::Parallel, &[0, 1]),
            set("ja", Setting::Parallel, &[2]),
        ];
        assert!(matches!(overlap_matrix(&sets), Err(Error::Config(_))));
    }

    #[test]
    fn agreement() {
        let mono = set("ja", Setting::Monolingual, &[0, 1, 2, 3]);
        let para = set("ja", Setting::Parallel, &[2, 3, 4, 5]);
        assert_eq!(agreement_rate(&mono, &para).unwrap(), 0.5);
        assert_eq!(agreement_rate(&mono, &mono).unwrap(), 1.0);
        let short = set("ja", Setting::Parallel, &[2, 3]);
        assert!(matches!(agreement_rate(&mono, &short), Err(Error::Config(_))));
    }
}
