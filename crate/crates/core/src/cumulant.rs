//! Cumulant arrays of log-likelihood derivatives and the Fisher block
//! geometry induced by a hypothesis partition.
//!
//! Everything is on the per-observation scale. Index conventions:
//!
//! | array        | entry `[j,r,s,..]`  |
//! |--------------|---------------------|
//! | `kappa2`     | `κ_jr`              |
//! | `kappa3`     | `κ_jrs`             |
//! | `kappa4`     | `κ_jrsu`            |
//! | `d_kappa2`   | `D_s κ_jr`          |
//! | `d_kappa3`   | `D_j κ_rsu`         |
//! | `dd_kappa2`  | `D_j D_r κ_su`      |

use ndarray::{Array2, Array3, Array4};

use crate::error::{Error, Result};

const SYM_TOL: f64 = 1e-8;
const COND_LIMIT: f64 = 1e12;

/// `H0: θ_1 = θ10` where `θ_1` is the first `q` of `p` components.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSpec {
    pub p: usize,
    pub q: usize,
    pub theta10: Vec<f64>,
}

impl HypothesisSpec {
    pub fn new(p: usize, q: usize, theta10: Vec<f64>) -> Result<Self> {
        if q < 1 || q > p {
            return Err(Error::InvalidArgument(format!("need 1 <= q <= p, got q={q}, p={p}")));
        }
        if theta10.len() != q {
            return Err(Error::Dimension(format!(
                "theta10 has {} entries, expected q = {q}",
                theta10.len()
            )));
        }
        Ok(HypothesisSpec { p, q, theta10 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantBundle {
    pub kappa2: Array2<f64>,
    pub kappa3: Array3<f64>,
    pub kappa4: Array4<f64>,
    pub d_kappa2: Array3<f64>,
    pub d_kappa3: Array4<f64>,
    pub dd_kappa2: Array4<f64>,
}

impl CumulantBundle {
    pub fn zeros(p: usize) -> Self {
        CumulantBundle {
            kappa2: Array2::zeros((p, p)),
            kappa3: Array3::zeros((p, p, p)),
            kappa4: Array4::zeros((p, p, p, p)),
            d_kappa2: Array3::zeros((p, p, p)),
            d_kappa3: Array4::zeros((p, p, p, p)),
            dd_kappa2: Array4::zeros((p, p, p, p)),
        }
    }

    /// Bundle for a scalar parameter from its six scalar cumulants.
    pub fn scalar(k: &ScalarCumulants) -> Self {
        let mut b = CumulantBundle::zeros(1);
        b.kappa2[[0, 0]] = k.k2;
        b.kappa3[[0, 0, 0]] = k.k3;
        b.kappa4[[0, 0, 0, 0]] = k.k4;
        b.d_kappa2[[0, 0, 0]] = k.d_k2;
        b.d_kappa3[[0, 0, 0, 0]] = k.d_k3;
        b.dd_kappa2[[0, 0, 0, 0]] = k.dd_k2;
        b
    }

    pub fn dim(&self) -> usize {
        self.kappa2.nrows()
    }

    /// Shape checks plus the symmetries each array must carry.
    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        let ok = self.kappa2.dim() == (p, p)
            && self.kappa3.dim() == (p, p, p)
            && self.d_kappa2.dim() == (p, p, p)
            && self.kappa4.dim() == (p, p, p, p)
            && self.d_kappa3.dim() == (p, p, p, p)
            && self.dd_kappa2.dim() == (p, p, p, p);
        if !ok || p == 0 {
            return Err(Error::Dimension("cumulant arrays disagree on p".into()));
        }
        let scale = |x: f64| SYM_TOL * (1.0 + x.abs());
        for j in 0..p {
            for r in 0..p {
                let v = self.kappa2[[j, r]];
                if (v - self.kappa2[[r, j]]).abs() > scale(v) {
                    return Err(Error::InvalidArgument("kappa2 is not symmetric".into()));
                }
                for s in 0..p {
                    let v = self.kappa3[[j, r, s]];
                    for w in [self.kappa3[[r, j, s]], self.kappa3[[j, s, r]]] {
                        if (v - w).abs() > scale(v) {
                            return Err(Error::InvalidArgument("kappa3 is not symmetric".into()));
                        }
                    }
                    let v = self.d_kappa2[[j, r, s]];
                    if (v - self.d_kappa2[[r, j, s]]).abs() > scale(v) {
                        return Err(Error::InvalidArgument(
                            "d_kappa2 is not symmetric in its first two indices".into(),
                        ));
                    }
                    for u in 0..p {
                        let v = self.kappa4[[j, r, s, u]];
                        for w in [
                            self.kappa4[[r, j, s, u]],
                            self.kappa4[[j, s, r, u]],
                            self.kappa4[[j, r, u, s]],
                        ] {
                            if (v - w).abs() > scale(v) {
                                return Err(Error::InvalidArgument("kappa4 is not symmetric".into()));
                            }
                        }
                        let v = self.d_kappa3[[j, r, s, u]];
                        for w in [self.d_kappa3[[j, s, r, u]], self.d_kappa3[[j, r, u, s]]] {
                            if (v - w).abs() > scale(v) {
                                return Err(Error::InvalidArgument(
                                    "d_kappa3 is not symmetric in its last three indices".into(),
                                ));
                            }
                        }
                        let v = self.dd_kappa2[[j, r, s, u]];
                        for w in [self.dd_kappa2[[r, j, s, u]], self.dd_kappa2[[j, r, u, s]]] {
                            if (v - w).abs() > scale(v) {
                                return Err(Error::InvalidArgument(
                                    "dd_kappa2 is not symmetric in its index pairs".into(),
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// The six scalar cumulants of a one-parameter model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarCumulants {
    /// κ_φφ
    pub k2: f64,
    /// κ_φφφ
    pub k3: f64,
    /// κ_φφφφ
    pub k4: f64,
    /// κ_φφ^(φ)
    pub d_k2: f64,
    /// κ_φφφ^(φ)
    pub d_k3: f64,
    /// κ_φφ^(φφ)
    pub dd_k2: f64,
}

/// Mixed cumulants recovered from the bundle through the Bartlett identities.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCumulants {
    /// `κ_{jr,s}`
    pub k_jr_s: Array3<f64>,
    /// `κ_{jrs,u}`
    pub k_jrs_u: Array4<f64>,
    /// `κ_{j,rsu}`
    pub k_j_rsu: Array4<f64>,
    /// `T_jrsu = κ_{ju,rs} + κ_{j,u,rs}`
    pub t: Array4<f64>,
}

/// Mixed cumulants via
///
/// ```text
/// κ_{jr,s}  = D_s κ_jr  - κ_jrs
/// κ_{jrs,u} = D_u κ_jrs - κ_jrsu
/// κ_{j,rsu} = D_j κ_rsu - κ_jrsu
/// ```
///
/// and the combination `T_jrsu = κ_{ju,rs} + κ_{j,u,rs}`. The covariance
/// `κ_{ju,rs}` never has to be supplied because it cancels in `T`.
/// Differentiating `κ_{j,rs} = D_j κ_rs - κ_jrs` in `θ_u` gives
///
/// ```text
/// D_u κ_{j,rs} = κ_{ju,rs} + κ_{j,urs} + κ_{j,u,rs}
/// ```
///
/// so, using the third identity above for `κ_{j,urs}`,
///
/// ```text
/// κ_{j,u,rs} = D_j D_u κ_rs - D_u κ_jrs - D_j κ_urs + κ_jurs - κ_{ju,rs}
/// T_jrsu     = κ_jrsu - D_u κ_jrs - D_j κ_urs + D_j D_u κ_rs
/// ```
///
/// Dropping the `D_j κ_urs` term breaks the exponential-model check in the
/// tests below.
pub fn derive_mixed_cumulants(b: &CumulantBundle) -> Result<DerivedCumulants> {
    b.validate()?;
    let p = b.dim();
    let mut k_jr_s = Array3::zeros((p, p, p));
    let mut k_jrs_u = Array4::zeros((p, p, p, p));
    let mut k_j_rsu = Array4::zeros((p, p, p, p));
    let mut t = Array4::zeros((p, p, p, p));
    for j in 0..p {
        for r in 0..p {
            for s in 0..p {
                k_jr_s[[j, r, s]] = b.d_kappa2[[j, r, s]] - b.kappa3[[j, r, s]];
                for u in 0..p {
                    let k4 = b.kappa4[[j, r, s, u]];
                    k_jrs_u[[j, r, s, u]] = b.d_kappa3[[u, j, r, s]] - k4;
                    k_j_rsu[[j, r, s, u]] = b.d_kappa3[[j, r, s, u]] - k4;
                    t[[j, r, s, u]] = k4 - b.d_kappa3[[u, j, r, s]] - b.d_kappa3[[j, u, r, s]]
                        + b.dd_kappa2[[j, u, r, s]];
                }
            }
        }
    }
    Ok(DerivedCumulants { k_jr_s, k_jrs_u, k_j_rsu, t })
}

/// `K = -κ`, its inverse, the nuisance block matrix `A` and `M = K⁻¹ - A`.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherGeometry {
    pub k: Array2<f64>,
    pub kinv: Array2<f64>,
    pub a: Array2<f64>,
    pub m: Array2<f64>,
    pub q: usize,
}

pub fn build_geometry(b: &CumulantBundle, h: &HypothesisSpec) -> Result<FisherGeometry> {
    let p = b.dim();
    if h.p != p {
        return Err(Error::Dimension(format!("bundle has p = {p}, hypothesis has p = {}", h.p)));
    }
    let k = b.kappa2.mapv(|v| -v);
    let kinv = invert(&k)?;
    let q = h.q;
    let mut a = Array2::zeros((p, p));
    if q < p {
        let k22 = k.slice(ndarray::s![q.., q..]).to_owned();
        let k22inv = invert(&k22)?;
        a.slice_mut(ndarray::s![q.., q..]).assign(&k22inv);
    }
    let m = &kinv - &a;
    Ok(FisherGeometry { k, kinv, a, m, q })
}

/// Gauss–Jordan inverse with partial pivoting. Fails when the 1-norm
/// condition number exceeds 1e12.
pub fn invert(m: &Array2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension("matrix to invert is not square".into()));
    }
    let mut w = m.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| w[[x, col]].abs().total_cmp(&w[[y, col]].abs()))
            .unwrap();
        if w[[piv, col]] == 0.0 || !w[[piv, col]].is_finite() {
            return Err(Error::Singular(f64::INFINITY));
        }
        if piv != col {
            for c in 0..n {
                w.swap([piv, c], [col, c]);
                inv.swap([piv, c], [col, c]);
            }
        }
        let d = w[[col, col]];
        for c in 0..n {
            w[[col, c]] /= d;
            inv[[col, c]] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = w[[row, col]];
            if f != 0.0 {
                for c in 0..n {
                    w[[row, c]] -= f * w[[col, c]];
                    inv[[row, c]] -= f * inv[[col, c]];
                }
            }
        }
    }
    let cond = norm1(m) * norm1(&inv);
    if !(cond < COND_LIMIT) {
        return Err(Error::Singular(cond));
    }
    Ok(inv)
}

fn norm1(m: &Array2<f64>) -> f64 {
    m.columns().into_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn exponential_bundle(phi: f64) -> CumulantBundle {
        CumulantBundle::scalar(&ScalarCumulants {
            k2: -phi.powi(-2),
            k3: 4.0 * phi.powi(-3),
            k4: -18.0 * phi.powi(-4),
            d_k2: 2.0 * phi.powi(-3),
            d_k3: -12.0 * phi.powi(-4),
            dd_k2: -6.0 * phi.powi(-4),
        })
    }

    #[test]
    fn exponential_mixed_cumulant_by_hand() {
        let d = derive_mixed_cumulants(&exponential_bundle(1.0)).unwrap();
        assert_eq!(d.k_jr_s[[0, 0, 0]], -2.0);
        // κ_{φφφ,φ} = -12 + 18, κ_{φ,φφφ} the same for p = 1
        assert_eq!(d.k_jrs_u[[0, 0, 0, 0]], 6.0);
        assert_eq!(d.k_j_rsu[[0, 0, 0, 0]], 6.0);
    }

    #[test]
    fn exponential_t_from_direct_moments() {
        // U_φ = (x-φ)/φ², U_φφ = 1/φ² - 2x/φ³ for x ~ Exp(φ) at φ = 1:
        // κ_{φφ,φφ} = var(2x) = 4 and κ_{φ,φ,φφ} = E[(x-1)²·(-2)(x-1)] = -4
        let d = derive_mixed_cumulants(&exponential_bundle(1.0)).unwrap();
        assert!((d.t[[0, 0, 0, 0]] - (4.0 - 4.0)).abs() < 1e-14);
        // a nonzero case, φ = 2: scale each term by φ^-4
        let d = derive_mixed_cumulants(&exponential_bundle(2.0)).unwrap();
        assert!(d.t[[0, 0, 0, 0]].abs() < 1e-15);
    }

    #[test]
    fn mixed_cumulant_vanishes_when_identity_forces_it() {
        let mut b = CumulantBundle::zeros(2);
        b.kappa2 = array![[-1.0, 0.0], [0.0, -2.0]];
        for (i, v) in b.kappa3.iter_mut().enumerate() {
            *v = 0.0 * i as f64 + 0.7;
        }
        b.d_kappa2 = b.kappa3.clone();
        let d = derive_mixed_cumulants(&b).unwrap();
        assert!(d.k_jr_s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_arrays_give_zero_outputs() {
        let mut b = CumulantBundle::zeros(3);
        b.kappa2 = -Array2::eye(3);
        let d = derive_mixed_cumulants(&b).unwrap();
        assert!(d.k_jr_s.iter().chain(d.k_jrs_u.iter()).chain(d.k_j_rsu.iter()).chain(d.t.iter())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_asymmetric_kappa3() {
        let mut b = CumulantBundle::zeros(2);
        b.kappa2 = -Array2::eye(2);
        b.kappa3[[0, 0, 1]] = 1.0;
        assert!(derive_mixed_cumulants(&b).is_err());
    }

    #[test]
    fn simple_null_geometry() {
        let mut b = CumulantBundle::zeros(2);
        b.kappa2 = array![[-2.0, -1.0], [-1.0, -1.0]];
        let g = build_geometry(&b, &HypothesisSpec::new(2, 2, vec![0.0, 0.0]).unwrap()).unwrap();
        assert!(g.a.iter().all(|&v| v == 0.0));
        assert_eq!(g.m, g.kinv);
    }

    #[test]
    fn diagonal_geometry() {
        let mut b = CumulantBundle::zeros(2);
        b.kappa2 = array![[-4.0, 0.0], [0.0, -5.0]];
        let g = build_geometry(&b, &HypothesisSpec::new(2, 1, vec![1.0]).unwrap()).unwrap();
        assert_eq!(g.a, array![[0.0, 0.0], [0.0, 0.2]]);
        assert_eq!(g.m, array![[0.25, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn two_by_two_hand_inverse() {
        let mut b = CumulantBundle::zeros(2);
        b.kappa2 = array![[-2.0, -1.0], [-1.0, -1.0]];
        let g = build_geometry(&b, &HypothesisSpec::new(2, 1, vec![0.0]).unwrap()).unwrap();
        let close = |x: &Array2<f64>, y: Array2<f64>| x.iter().zip(y.iter()).all(|(a, b)| (a - b).abs() < 1e-14);
        assert!(close(&g.kinv, array![[1.0, -1.0], [-1.0, 2.0]]));
        assert!(close(&g.a, array![[0.0, 0.0], [0.0, 1.0]]));
        assert!(close(&g.m, array![[1.0, -1.0], [-1.0, 1.0]]));
    }

    #[test]
    fn singular_information_is_reported() {
        let mut b = CumulantBundle::zeros(2);
        b.kappa2 = array![[-1.0, -1.0], [-1.0, -1.0]];
        let h = HypothesisSpec::new(2, 1, vec![0.0]).unwrap();
        assert!(matches!(build_geometry(&b, &h), Err(Error::Singular(_))));
        b.kappa2 = array![[-1.0, -1.0], [-1.0, -1.0 - 1e-14]];
        assert!(matches!(build_geometry(&b, &h), Err(Error::Singular(_))));
    }

    #[test]
    fn hypothesis_validation() {
        assert!(HypothesisSpec::new(2, 0, vec![]).is_err());
        assert!(HypothesisSpec::new(2, 3, vec![0.0; 3]).is_err());
        assert!(HypothesisSpec::new(2, 1, vec![0.0, 1.0]).is_err());
    }
}
