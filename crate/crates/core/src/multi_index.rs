use serde::{Deserialize, Serialize};

/// Exponent tuple β of a partial derivative D^β.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = vec![0; dim];
        v[axis] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&b| b as usize).sum()
    }

    /// β! = Π β_k!
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&b| (1..=b).map(f64::from).product::<f64>())
            .product()
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// All multi-indices of exact order `k` in graded-lexicographic order: (2,0), (1,1), (0,2).
pub fn of_order(dim: usize, k: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; dim];
    fill(&mut out, &mut cur, 0, k as u32);
    out
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut [u32], axis: usize, left: u32) {
    if axis + 1 == cur.len() {
        cur[axis] = left;
        out.push(MultiIndex(cur.to_vec()));
        return;
    }
    for e in (0..=left).rev() {
        cur[axis] = e;
        fill(out, cur, axis + 1, left - e);
    }
}

/// All multi-indices with `lo ≤ |β| ≤ hi`, graded-lexicographic.
pub fn up_to(dim: usize, lo: usize, hi: usize) -> Vec<MultiIndex> {
    (lo..=hi).flat_map(|k| of_order(dim, k)).collect()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// η = number of partial derivatives with 1 ≤ |β| ≤ m in `dim` variables.
pub fn eta(dim: usize, m: usize) -> usize {
    (1..=m).map(|k| binomial(dim + k - 1, k)).sum()
}
