#![allow(dead_code)]

use gradcorr::cumulant::CumulantBundle;
use ndarray::{Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1.0)
}

fn perms3() -> [[usize; 3]; 6] {
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
}

fn sym3(x: &Array3<f64>) -> Array3<f64> {
    let p = x.shape()[0];
    Array3::from_shape_fn((p, p, p), |(a, b, c)| {
        let i = [a, b, c];
        perms3().iter().map(|q| x[[i[q[0]], i[q[1]], i[q[2]]]]).sum::<f64>() / 6.0
    })
}

fn sym4(x: &Array4<f64>) -> Array4<f64> {
    let p = x.shape()[0];
    Array4::from_shape_fn((p, p, p, p), |(a, b, c, d)| {
        let i = [a, b, c, d];
        let mut s = 0.0;
        for first in 0..4 {
            let rest: Vec<usize> = (0..4).filter(|&k| k != first).collect();
            for q in perms3() {
                s += x[[i[first], i[rest[q[0]]], i[rest[q[1]]], i[rest[q[2]]]]];
            }
        }
        s / 24.0
    })
}

/// A bundle with random entries carrying the required symmetries and a
/// negative definite `κ2`.
pub fn random_bundle(p: usize, seed: u64) -> CumulantBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = || rng.random_range(-1.0..1.0);
    let g = Array2::from_shape_fn((p, p), |_| u());
    let kappa2 = -(g.t().dot(&g) + Array2::<f64>::eye(p) * 0.5);
    let kappa3 = sym3(&Array3::from_shape_fn((p, p, p), |_| u()));
    let kappa4 = sym4(&Array4::from_shape_fn((p, p, p, p), |_| u()));
    let raw2 = Array3::from_shape_fn((p, p, p), |_| u());
    let d_kappa2 = Array3::from_shape_fn((p, p, p), |(j, r, s)| raw2[[j, r, s]] + raw2[[r, j, s]]);
    let raw3 = Array4::from_shape_fn((p, p, p, p), |_| u());
    let d_kappa3 = Array4::from_shape_fn((p, p, p, p), |(j, r, s, t)| {
        let i = [r, s, t];
        perms3().iter().map(|q| raw3[[j, i[q[0]], i[q[1]], i[q[2]]]]).sum::<f64>() / 6.0
    });
    let rawd = Array4::from_shape_fn((p, p, p, p), |_| u());
    let dd_kappa2 = Array4::from_shape_fn((p, p, p, p), |(j, r, s, t)| {
        rawd[[j, r, s, t]] + rawd[[r, j, s, t]] + rawd[[j, r, t, s]] + rawd[[r, j, t, s]]
    });
    CumulantBundle { kappa2, kappa3, kappa4, d_kappa2, d_kappa3, dd_kappa2 }
}

/// Random `p = 2` bundle whose `κ_φβ` vanishes identically.
pub fn random_orthogonal_bundle(seed: u64) -> CumulantBundle {
    let mut b = random_bundle(2, seed);
    b.kappa2[[0, 1]] = 0.0;
    b.kappa2[[1, 0]] = 0.0;
    for s in 0..2 {
        b.d_kappa2[[0, 1, s]] = 0.0;
        b.d_kappa2[[1, 0, s]] = 0.0;
        for j in 0..2 {
            b.dd_kappa2[[j, s, 0, 1]] = 0.0;
            b.dd_kappa2[[j, s, 1, 0]] = 0.0;
        }
    }
    b
}

/// The bundle seen in coordinates `ψ = L θ`: every array is a covariant
/// tensor under a linear change of parameters.
pub fn transform(b: &CumulantBundle, l: &Array2<f64>) -> CumulantBundle {
    let p = b.dim();
    let w = gradcorr::cumulant::invert(l).unwrap(); // ∂θ/∂ψ
    let t2 = |x: &Array2<f64>| {
        Array2::from_shape_fn((p, p), |(a, c)| {
            let mut s = 0.0;
            for i in 0..p {
                for j in 0..p {
                    s += w[[i, a]] * w[[j, c]] * x[[i, j]];
                }
            }
            s
        })
    };
    let t3 = |x: &Array3<f64>| {
        let mut out = x.clone();
        for axis in 0..3 {
            out = Array3::from_shape_fn((p, p, p), |idx| {
                let mut i = [idx.0, idx.1, idx.2];
                let a = i[axis];
                (0..p)
                    .map(|k| {
                        i[axis] = k;
                        w[[k, a]] * out[[i[0], i[1], i[2]]]
                    })
                    .sum()
            });
        }
        out
    };
    let t4 = |x: &Array4<f64>| {
        let mut out = x.clone();
        for axis in 0..4 {
            out = Array4::from_shape_fn((p, p, p, p), |idx| {
                let mut i = [idx.0, idx.1, idx.2, idx.3];
                let a = i[axis];
                (0..p)
                    .map(|k| {
                        i[axis] = k;
                        w[[k, a]] * out[[i[0], i[1], i[2], i[3]]]
                    })
                    .sum()
            });
        }
        out
    };
    CumulantBundle {
        kappa2: t2(&b.kappa2),
        kappa3: t3(&b.kappa3),
        kappa4: t4(&b.kappa4),
        d_kappa2: t3(&b.d_kappa2),
        d_kappa3: t4(&b.d_kappa3),
        dd_kappa2: t4(&b.dd_kappa2),
    }
}
