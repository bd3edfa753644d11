use crate::dataset::{LabeledDataset, Split};

/// Shannon entropy in bits of a count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

/// `H(labels) - sum_v |S_v|/n * H(labels | feature = v)` over `indices`.
pub fn information_gain(ds: &LabeledDataset, indices: &[usize], feature: usize) -> f64 {
    let c = ds.n_classes();
    let mut all = vec![0usize; c];
    let mut ones = vec![0usize; c];
    for &i in indices {
        let l = ds.label(i);
        all[l] += 1;
        if ds.sample(i).get(feature) == 1 {
            ones[l] += 1;
        }
    }
    let zeros: Vec<usize> = all.iter().zip(&ones).map(|(a, o)| a - o).collect();
    let n = indices.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let n1: usize = ones.iter().sum();
    let n0: usize = zeros.iter().sum();
    entropy(&all) - (n1 as f64 / n) * entropy(&ones) - (n0 as f64 / n) * entropy(&zeros)
}

/// Features ranked by information gain on the training side, descending;
/// ties keep feature order.
pub fn information_gain_ranking(ds: &LabeledDataset, split: &Split, top_n: usize) -> Vec<(String, f64)> {
    let mut gains: Vec<(usize, f64)> = (0..ds.n_features())
        .map(|f| (f, information_gain(ds, split.train(), f)))
        .collect();
    gains.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    gains
        .into_iter()
        .take(top_n)
        .map(|(f, g)| (ds.dictionary().name(f).to_string(), g))
        .collect()
}
