use ndarray::{Array2, Array3, Array4};

use crate::cumulant::CumulantBundle;

/// Fills a bundle from closures over index lists:
///
/// * `k(&[j, r, ..])` is the cumulant `κ_{jr..}` (orders 2 to 4);
/// * `dk(&[j, r, ..], s)` is `D_s κ_{jr..}` (orders 2 and 3);
/// * `ddk(&[s, u], j, r)` is `D_j D_r κ_su`.
///
/// The closures are trusted to be symmetric in the cumulant indices.
pub fn bundle_from_fn(
    p: usize,
    k: impl Fn(&[usize]) -> f64,
    dk: impl Fn(&[usize], usize) -> f64,
    ddk: impl Fn(&[usize], usize, usize) -> f64,
) -> CumulantBundle {
    let kappa2 = Array2::from_shape_fn((p, p), |(j, r)| k(&[j, r]));
    let kappa3 = Array3::from_shape_fn((p, p, p), |(j, r, s)| k(&[j, r, s]));
    let kappa4 = Array4::from_shape_fn((p, p, p, p), |(j, r, s, u)| k(&[j, r, s, u]));
    let d_kappa2 = Array3::from_shape_fn((p, p, p), |(j, r, s)| dk(&[j, r], s));
    let d_kappa3 = Array4::from_shape_fn((p, p, p, p), |(j, r, s, u)| dk(&[r, s, u], j));
    let dd_kappa2 = Array4::from_shape_fn((p, p, p, p), |(j, r, s, u)| ddk(&[s, u], j, r));
    CumulantBundle { kappa2, kappa3, kappa4, d_kappa2, d_kappa3, dd_kappa2 }
}

/// Number of entries equal to `1` (the nuisance index in two-parameter
/// models).
pub(crate) fn count_nuisance(idx: &[usize]) -> i32 {
    idx.iter().filter(|&&i| i == 1).count() as i32
}

/// Two-parameter cumulants of the form `c φ^(-a) β^(-b)`, looked up by
/// `(order, number of β indices)`. Used for models whose cumulants are all
/// monomials in the parameters.
pub(crate) struct MonomialTable {
    /// `[order - 2][nb] = (c, a, b)`
    pub rows: [[(f64, i32, i32); 5]; 3],
}

impl MonomialTable {
    fn term(&self, idx: &[usize]) -> (f64, i32, i32) {
        self.rows[idx.len() - 2][count_nuisance(idx) as usize]
    }

    pub fn bundle(&self, phi: f64, beta: f64) -> CumulantBundle {
        // derivative of c φ^-a β^-b along the listed directions
        let eval = |(c, a, b): (f64, i32, i32), dirs: &[usize]| -> f64 {
            let (mut c, mut a, mut b) = (c, a, b);
            for &d in dirs {
                if d == 0 {
                    c *= -(a as f64);
                    a += 1;
                } else {
                    c *= -(b as f64);
                    b += 1;
                }
            }
            if c == 0.0 {
                0.0
            } else {
                c * phi.powi(-a) * beta.powi(-b)
            }
        };
        bundle_from_fn(
            2,
            |idx| eval(self.term(idx), &[]),
            |idx, s| eval(self.term(idx), &[s]),
            |idx, j, r| eval(self.term(idx), &[j, r]),
        )
    }
}
