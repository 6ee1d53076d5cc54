//! Order-1/n coefficients `A1, A2, A3` of the null distribution of the
//! gradient statistic, by three routes:
//!
//! * [`coefficients_general`]: tensor contraction over all index tuples,
//!   valid for any `p` and `q`;
//! * [`coefficients_one_param`] and [`coefficients_expfam`]: scalar closed
//!   forms when `p = q = 1`;
//! * [`coefficients_orthogonal`]: closed forms for `p = 2, q = 1` with a
//!   globally orthogonal nuisance parameter.

use serde::Serialize;

use crate::cumulant::{
    build_geometry, derive_mixed_cumulants, CumulantBundle, HypothesisSpec, ScalarCumulants,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// `[R0, R1, R2, R3]`, weights of `G_q, G_{q+2}, G_{q+4}, G_{q+6}`.
    pub r: [f64; 4],
}

impl ExpansionCoefficients {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Self {
        // adding zero turns -0.0 into 0.0
        let (a1, a2, a3) = (a1 + 0.0, a2 + 0.0, a3 + 0.0);
        let r1 = 3.0 * a3 - 2.0 * a2 + a1;
        let r2 = a2 - 3.0 * a3;
        let r3 = a3;
        ExpansionCoefficients { a1, a2, a3, r: [-(r1 + r2 + r3), r1, r2, r3] }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a1, self.a2, self.a3]
    }

    /// Largest relative difference in `(A1, A2, A3)`, with unit floor on
    /// the denominator so that zero coefficients compare absolutely.
    pub fn max_rel_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
            .fold(0.0, f64::max)
    }
}

fn finite(c: ExpansionCoefficients) -> Result<ExpansionCoefficients> {
    if c.as_array().iter().all(|v| v.is_finite()) {
        Ok(c)
    } else {
        Err(Error::Degenerate("non-finite expansion coefficient".into()))
    }
}

/// Scalar route for `p = q = 1`.
pub fn coefficients_one_param(k: &ScalarCumulants) -> Result<ExpansionCoefficients> {
    if !(k.k2 < 0.0) {
        return Err(Error::InvalidArgument(format!("kappa_phiphi must be negative, got {}", k.k2)));
    }
    finite(ExpansionCoefficients::new(one_param_a1(k), one_param_a2(k), one_param_a3(k)))
}

fn one_param_a1(k: &ScalarCumulants) -> f64 {
    (6.0 * k.k2 * (2.0 * k.dd_k2 - k.d_k3) + 12.0 * k.d_k2 * (k.k3 - 2.0 * k.d_k2)) / k.k2.powi(3)
}

// The fourth cumulant enters with weight one; this is the p = 1 value of
// the simple-null contraction.
fn one_param_a2(k: &ScalarCumulants) -> f64 {
    (12.0 * k.k2 * (2.0 * k.d_k3 - k.k4) + 3.0 * k.k3 * (5.0 * k.k3 - 16.0 * k.d_k2))
        / (4.0 * k.k2.powi(3))
}

fn one_param_a3(k: &ScalarCumulants) -> f64 {
    -5.0 * k.k3 * k.k3 / (4.0 * k.k2.powi(3))
}

/// `α', α'', α''', β', β'', β'''` at the null value, for densities
/// `exp{-α(φ) d(x) + v(x)} / ξ(φ)` with `β = ξ'/(ξ α')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFamDerivs {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

impl ExpFamDerivs {
    /// The scalar cumulants implied by `α` and `β`.
    pub fn cumulants(&self) -> ScalarCumulants {
        let [a1, a2, a3] = self.alpha;
        let [b1, b2, b3] = self.beta;
        ScalarCumulants {
            k2: -a1 * b1,
            k3: -(2.0 * a2 * b1 + a1 * b2),
            k4: -(3.0 * a2 * b2 + 3.0 * a3 * b1 + a1 * b3),
            d_k2: -(a2 * b1 + a1 * b2),
            d_k3: -(2.0 * a3 * b1 + 3.0 * a2 * b2 + a1 * b3),
            dd_k2: -(a3 * b1 + 2.0 * a2 * b2 + a1 * b3),
        }
    }
}

/// Exponential-family route, written in `α` and `β` derivatives.
pub fn coefficients_expfam(d: &ExpFamDerivs) -> Result<ExpansionCoefficients> {
    let [a1, a2, a3] = d.alpha;
    let [b1, b2, b3] = d.beta;
    if a1 == 0.0 || b1 == 0.0 {
        return Err(Error::InvalidArgument("alpha' and beta' must be nonzero".into()));
    }
    let ab = a1 * b1;
    let (ra2, ra3) = (a2 / a1, a3 / a1);
    let (rb2, rb3) = (b2 / b1, b3 / b1);
    let c1 = 6.0 / ab * (2.0 * rb2 * rb2 + ra2 * rb2 - rb3);
    let c2 = 3.0 / ab
        * (rb2 * (4.0 * ra2 - rb2 / 4.0) + 3.0 * (ra2 * ra2 + rb2 * rb2) - (ra3 + rb3));
    let c3 = 5.0 / ab * (ra2 + rb2 / 2.0).powi(2);
    finite(ExpansionCoefficients::new(c1, c2, c3))
}

/// Cumulants of an orthogonal `(φ, β)` model; `phi` holds the pure-`φ`
/// quantities, the rest are mixed. Superscripts are parameter derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthogonalCumulants {
    pub phi: ScalarCumulants,
    pub k_bb: f64,
    pub k_bbb: f64,
    pub k_fbb: f64,
    pub k_ffb: f64,
    pub k_ffbb: f64,
    /// `D_β κ_φφ`
    pub d_ff_b: f64,
    /// `D_β κ_φφβ`
    pub d_ffb_b: f64,
    /// `D_φ κ_φββ`
    pub d_fbb_f: f64,
    /// `D_β κ_ββ`
    pub d_bb_b: f64,
    /// `D_φ κ_ββ`
    pub d_bb_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrthogonalSplit {
    pub a1_phi: f64,
    pub a1_phibeta: f64,
    pub a2_phi: f64,
    pub a2_phibeta: f64,
    pub coefficients: ExpansionCoefficients,
}

/// Orthogonal two-parameter route. Orthogonality (`κ_φβ = 0` for all
/// parameter values) is the caller's responsibility.
pub fn coefficients_orthogonal(k: &OrthogonalCumulants) -> Result<OrthogonalSplit> {
    let f = &k.phi;
    if !(f.k2 < 0.0) || !(k.k_bb < 0.0) {
        return Err(Error::Degenerate("information components must be positive".into()));
    }
    let (kff, kbb) = (f.k2, k.k_bb);
    let a1_phi = one_param_a1(f);
    let a2_phi = one_param_a2(f);
    let a1_phibeta = orthogonal_a1_nuisance(k);
    let a2_phibeta =
        3.0 * (f.k3 * k.k_fbb + 3.0 * k.k_ffb * k.k_ffb) / (kff * kff * kbb);
    let coefficients = finite(ExpansionCoefficients::new(
        a1_phi + a1_phibeta,
        a2_phi + a2_phibeta,
        one_param_a3(f),
    ))?;
    Ok(OrthogonalSplit { a1_phi, a1_phibeta, a2_phi, a2_phibeta, coefficients })
}

fn orthogonal_a1_nuisance(k: &OrthogonalCumulants) -> f64 {
    let f = &k.phi;
    let (kff, kbb) = (f.k2, k.k_bb);
    3.0 * (4.0 * k.k_ffb * k.d_ff_b + k.k_fbb * (4.0 * f.d_k2 - f.k3)) / (kff * kff * kbb)
        + 6.0 * (k.k_ffbb - 2.0 * k.d_ffb_b - 2.0 * k.d_fbb_f) / (kff * kbb)
        + 3.0 * (2.0 * k.k_ffb * (2.0 * k.d_bb_b - k.k_bbb) + k.k_fbb * (4.0 * k.d_bb_f - 3.0 * k.k_fbb))
            / (kff * kbb * kbb)
}

impl OrthogonalCumulants {
    /// Reads the orthogonal quantities off a `p = 2` bundle, index 0 being
    /// `φ` and index 1 `β`. Fails unless `κ_φβ` and its derivatives vanish.
    pub fn from_bundle(b: &CumulantBundle) -> Result<Self> {
        b.validate()?;
        if b.dim() != 2 {
            return Err(Error::Dimension(format!("orthogonal route needs p = 2, got {}", b.dim())));
        }
        let scale = b.kappa2[[0, 0]].abs().max(b.kappa2[[1, 1]].abs());
        let off = [
            b.kappa2[[0, 1]],
            b.d_kappa2[[0, 1, 0]],
            b.d_kappa2[[0, 1, 1]],
            b.dd_kappa2[[0, 0, 0, 1]],
            b.dd_kappa2[[0, 1, 0, 1]],
            b.dd_kappa2[[1, 1, 0, 1]],
        ];
        if off.iter().any(|v| v.abs() > 1e-10 * scale.max(1.0)) {
            return Err(Error::InvalidArgument("parameters are not orthogonal".into()));
        }
        Ok(OrthogonalCumulants {
            phi: ScalarCumulants {
                k2: b.kappa2[[0, 0]],
                k3: b.kappa3[[0, 0, 0]],
                k4: b.kappa4[[0, 0, 0, 0]],
                d_k2: b.d_kappa2[[0, 0, 0]],
                d_k3: b.d_kappa3[[0, 0, 0, 0]],
                dd_k2: b.dd_kappa2[[0, 0, 0, 0]],
            },
            k_bb: b.kappa2[[1, 1]],
            k_bbb: b.kappa3[[1, 1, 1]],
            k_fbb: b.kappa3[[0, 1, 1]],
            k_ffb: b.kappa3[[0, 0, 1]],
            k_ffbb: b.kappa4[[0, 0, 1, 1]],
            d_ff_b: b.d_kappa2[[0, 0, 1]],
            d_ffb_b: b.d_kappa3[[1, 0, 0, 1]],
            d_fbb_f: b.d_kappa3[[0, 0, 1, 1]],
            d_bb_b: b.d_kappa2[[1, 1, 1]],
            d_bb_f: b.d_kappa2[[1, 1, 0]],
        })
    }
}

/// Full contraction of the listed operands over every index letter, each
/// letter running over `0..p`. Operands are row-major slices.
fn contract(p: usize, ops: &[(&str, &[f64])]) -> f64 {
    let mut letters: Vec<u8> = Vec::new();
    for (spec, _) in ops {
        for c in spec.bytes() {
            if !letters.contains(&c) {
                letters.push(c);
            }
        }
    }
    let slots: Vec<Vec<usize>> = ops
        .iter()
        .map(|(spec, data)| {
            debug_assert_eq!(data.len(), p.pow(spec.len() as u32));
            spec.bytes().map(|c| letters.iter().position(|&l| l == c).unwrap()).collect()
        })
        .collect();
    let mut idx = vec![0usize; letters.len()];
    let mut total = 0.0;
    'outer: loop {
        let mut prod = 1.0;
        for ((_, data), slot) in ops.iter().zip(&slots) {
            let off = slot.iter().fold(0, |acc, &l| acc * p + idx[l]);
            prod *= data[off];
            if prod == 0.0 {
                break;
            }
        }
        total += prod;
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < p {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    total
}

/// General route: the contraction over all index tuples in `0..p`.
pub fn coefficients_general(b: &CumulantBundle, h: &HypothesisSpec) -> Result<ExpansionCoefficients> {
    let geo = build_geometry(b, h)?;
    let mixed = derive_mixed_cumulants(b)?;
    let p = b.dim();

    let k3 = b.kappa3.as_standard_layout();
    let k4 = b.kappa4.as_standard_layout();
    let dk3 = b.d_kappa3.as_standard_layout();
    let kk = geo.kinv.as_standard_layout();
    let a = geo.a.as_standard_layout();
    let m = geo.m.as_standard_layout();
    // κ_jrs + κ_{jr,s}
    let c3 = (&b.kappa3 + &mixed.k_jr_s).as_standard_layout().into_owned();
    // κ_jrsu + κ_{jrs,u}
    let k4_31 = (&b.kappa4 + &mixed.k_jrs_u).as_standard_layout().into_owned();
    let k4_2_31 = (&b.kappa4 + &(2.0 * &mixed.k_jrs_u)).as_standard_layout().into_owned();
    let k31 = mixed.k_jrs_u.as_standard_layout();
    let k13 = mixed.k_j_rsu.as_standard_layout();
    let t = mixed.t.as_standard_layout();

    let [k3, k4, dk3, kk, a, m, c3, k4_31, k4_2_31, k31, k13, t] = [
        k3.as_slice(),
        k4.as_slice(),
        dk3.as_slice(),
        kk.as_slice(),
        a.as_slice(),
        m.as_slice(),
        c3.as_slice(),
        k4_31.as_slice(),
        k4_2_31.as_slice(),
        k31.as_slice(),
        k13.as_slice(),
        t.as_slice(),
    ]
    .map(|v| v.expect("standard layout"));
    let c = |ops: &[(&str, &[f64])]| contract(p, ops);

    // pairs of third-order cumulants
    let mut a1 = 9.0 * c(&[("jrs", k3), ("klu", k3), ("jk", m), ("rs", a), ("lu", a)])
        + 3.0 * c(&[("jrs", k3), ("klu", k3), ("jr", m), ("sk", kk), ("lu", a)])
        + 3.0 * c(&[("jrs", k3), ("klu", k3), ("jr", m), ("sk", a), ("lu", a)])
        - 6.0 * c(&[("jrs", k3), ("klu", k3), ("jr", a), ("sk", m), ("lu", a)])
        + 6.0 * c(&[("jrs", k3), ("klu", k3), ("jk", m), ("rl", a), ("su", a)]);
    let mut t6 = 0.0;
    for (x, y, z) in [("sj", "rk", "lu"), ("sk", "lj", "ru")] {
        t6 += 2.0 * c(&[("klu", c3), ("jrs", c3), (x, kk), (y, kk), (z, kk)]);
        t6 -= 2.0 * c(&[("klu", c3), ("jrs", c3), (x, a), (y, a), (z, a)]);
    }
    let ck = |x: &str, y: &str, z: &str, mx: &[f64], my: &[f64], mz: &[f64]| {
        c(&[("klu", c3), ("jrs", k3), (x, mx), (y, my), (z, mz)])
    };
    t6 -= ck("su", "jk", "lr", kk, kk, kk) + ck("su", "jk", "lr", a, kk, kk);
    t6 += ck("su", "jk", "lr", kk, a, a) + ck("su", "jk", "lr", a, a, a);
    t6 -= ck("jr", "sk", "lu", m, a, a) + ck("jr", "sk", "lu", m, kk, kk);
    t6 -= 2.0 * (ck("rs", "jk", "lu", a, kk, kk) - ck("rs", "jk", "lu", a, a, a));
    t6 -= 2.0 * ck("rk", "ls", "ju", a, a, m);
    a1 += 6.0 * t6;

    // fourth-order terms
    a1 += 6.0 * c(&[("jrsu", k31), ("jr", m), ("su", a)]);
    a1 -= 6.0 * c(&[("jrsu", k4_31), ("jr", m), ("su", kk)]);
    a1 -= 12.0 * c(&[("jrsu", k4_31), ("ju", m), ("rs", a)]);
    a1 += 12.0 * c(&[("jrsu", k4), ("jr", m), ("su", a)]);
    a1 -= 12.0 * c(&[("jrsu", dk3), ("jr", a), ("su", m)]);
    for (spec, x) in [("jrsu", k4), ("jrsu", k13), ("jsur", k31), ("jrsu", t)] {
        a1 += 12.0 * (c(&[(spec, x), ("js", kk), ("ur", kk)]) - c(&[(spec, x), ("js", a), ("ur", a)]));
    }

    let mut inner = c(&[("jrs", k3), ("klu", k3), ("jr", m), ("sk", m), ("lu", a)])
        + 0.75 * c(&[("jrs", k3), ("klu", k3), ("jr", m), ("sk", m), ("lu", m)])
        + c(&[("jrs", k3), ("klu", k3), ("jr", m), ("kl", m), ("su", a)])
        + 2.0 * c(&[("jrs", k3), ("klu", k3), ("jk", m), ("rl", m), ("su", a)])
        + 0.5 * c(&[("jrs", k3), ("klu", k3), ("jk", m), ("rl", m), ("su", m)]);
    for (x, y, z) in [("su", "jk", "lr"), ("jr", "sk", "lu")] {
        inner -= 2.0
            * (c(&[("jrs", k3), ("klu", c3), (x, m), (y, kk), (z, kk)])
                - c(&[("jrs", k3), ("klu", c3), (x, m), (y, a), (z, a)]));
    }
    let a2 = -3.0 * inner + 3.0 * c(&[("jrsu", k4_2_31), ("jr", m), ("su", m)]);

    let a3 = (9.0 * c(&[("jrs", k3), ("klu", k3), ("jr", m), ("sk", m), ("lu", m)])
        + 6.0 * c(&[("jrs", k3), ("klu", k3), ("jk", m), ("rl", m), ("su", m)]))
        / 12.0;
    finite(ExpansionCoefficients::new(a1, a2, a3))
}
