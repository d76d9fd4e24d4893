//! Brute-force reference computations over full `d^r` arrays.
#![allow(dead_code)]

use pica_core::{seed, SampleMatrix, SquareMatrix, SymmetricTensor};
use rand::Rng;
use rand_distr::StandardNormal;

/// Every tuple in `[0, d)^r`, last index fastest.
pub fn tuples(d: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..r {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..d).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn naive_transform(a: &SquareMatrix, t: &SymmetricTensor) -> SymmetricTensor {
    let (d, r) = (t.dim(), t.order());
    let all = tuples(d, r);
    SymmetricTensor::from_fn(r, d, |out| {
        all.iter()
            .map(|inp| {
                let coeff: f64 = out.iter().zip(inp).map(|(&i, &j)| a[(i, j)]).product();
                coeff * t.get(inp)
            })
            .sum()
    })
    .unwrap()
}

pub fn gaussian_matrix(d: usize, rng: &mut impl Rng) -> SquareMatrix {
    let v: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
    SquareMatrix::from_row_slice(d, &v).unwrap()
}

pub fn random_tensor(r: usize, d: usize, rng: &mut impl Rng) -> SymmetricTensor {
    SymmetricTensor::from_fn(r, d, |_| rng.random_range(-1.0..1.0)).unwrap()
}

pub fn gaussian_data(n: usize, d: usize, seed_value: u64) -> SampleMatrix {
    let mut rng = seed::rng(seed_value);
    let v: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    SampleMatrix::new(n, d, v).unwrap()
}

/// Sample cumulants of order 2 to 4 from centered products, written out
/// entry by entry.
pub fn textbook_cumulant(x: &SampleMatrix, r: usize) -> SymmetricTensor {
    let (n, d) = (x.n() as f64, x.d());
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / n).collect();
    let c: Vec<Vec<f64>> = x.rows().map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect();
    let m = |idx: &[usize]| c.iter().map(|row| idx.iter().map(|&i| row[i]).product::<f64>()).sum::<f64>() / n;
    SymmetricTensor::from_fn(r, d, |idx| match r {
        2 | 3 => m(idx),
        4 => {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            m(idx) - m(&[i, j]) * m(&[k, l]) - m(&[i, k]) * m(&[j, l]) - m(&[i, l]) * m(&[j, k])
        }
        _ => unimplemented!("oracle covers orders 2 to 4"),
    })
    .unwrap()
}

/// Bell numbers from the recurrence `B(n+1) = Σ C(n,k) B(k)`.
pub fn bell(n: usize) -> usize {
    let mut b = vec![1usize];
    for m in 0..n {
        let mut next = 0;
        let mut binom = 1usize;
        for (k, bk) in b.iter().enumerate() {
            next += binom * bk;
            binom = binom * (m - k) / (k + 1);
        }
        b.push(next);
    }
    b[n]
}
