//! Differential structure over the pointwise Type IIA algebra.
//!
//! Two backends feed the same operator set: a flat Darboux chart whose
//! fields carry [`Jet2`](crate::jets::Jet2) components (exercises every
//! term that needs a non-constant `|phi|^2`), and a nilpotent Lie
//! algebra with left-invariant fields (enables time integration). Both
//! expose partial derivatives, Levi-Civita data, and an exterior
//! derivative through the [`Backend`] trait; everything else (covariant
//! and projected derivatives, curvature, Nijenhuis tensor, the
//! codifferential, the dilaton 1-form) is generic.

mod jet_chart;
mod lie;

pub use jet_chart::{sample_typeiia_jet, JetChartBackend, JetCoefficients, PAIRS, TRIPLES};
pub use lie::{
    admits_symplectic_form, builtin_catalog, ce_differential, parse_catalog, pfaffian,
    sample_typeiia_invariant, three_form_coords, three_form_from_coords, LieAlgebraBackend,
    LieAlgebraSkeleton,
};

use crate::error::{Error, Result};
use crate::jets::Scalar;
use crate::multilinear::{digits, mul_contract, strides, Co, Con, Tensor, DIM};
use crate::typeiia::TypeIiaStructure;

/// A geometric backend: a Type IIA structure together with enough
/// differential data to take two derivatives of it.
pub trait Backend: Send + Sync {
    type S: Scalar;

    fn structure(&self) -> &TypeIiaStructure<Self::S>;

    /// Levi-Civita connection coefficients `Gamma^k_{m l}` (upper slot
    /// first, then derivative direction, then argument).
    fn gamma(&self) -> &Tensor<Self::S>;

    /// Componentwise partial derivative, prepended as a covariant slot:
    /// `(partial t)[m, I] = d_m t[I]`. Identically zero on invariant
    /// backends.
    fn partial(&self, t: &Tensor<Self::S>) -> Tensor<Self::S>;

    /// Exterior derivative of an alternating form, backend-native
    /// (antisymmetrized partials on the chart, the Chevalley-Eilenberg
    /// differential on a Lie algebra).
    fn exterior_d(&self, f: &Tensor<Self::S>) -> Result<Tensor<Self::S>>;

    /// Frame bracket constants `c^k_{ij}`, when the frame is
    /// anholonomic.
    fn bracket_constants(&self) -> Option<&Tensor<Self::S>>;
}

/// Covariant derivative with the convention
/// `nabla_m V^k = d_m V^k + Gamma^k_{m l} V^l`; the derivative slot is
/// prepended.
pub fn covariant_derivative<B: Backend>(bk: &B, t: &Tensor<B::S>) -> Tensor<B::S> {
    let gamma = bk.gamma();
    let rank = t.rank();
    let mut out = bk.partial(t);
    let tst = strides(rank);
    let gst = strides(3);
    let tc = t.comps();
    let gc = gamma.comps();
    let oc = out.comps_mut();
    let mut idx = [0usize; 7];
    for (of, o) in oc.iter_mut().enumerate() {
        digits(of, rank + 1, &mut idx);
        let dir = idx[0];
        // flat index of I inside t
        let tflat: usize = (0..rank).map(|k| tst[k] * idx[k + 1]).sum();
        for s in 0..rank {
            let is = idx[s + 1];
            let base = tflat - tst[s] * is;
            match t.sig()[s] {
                Con => {
                    // + Gamma^{i_s}_{dir, mu} T^{.. mu ..}
                    let gbase = gst[0] * is + gst[1] * dir;
                    for mu in 0..DIM {
                        B::S::mul_acc(o, &gc[gbase + mu], &tc[base + tst[s] * mu]);
                    }
                }
                Co => {
                    // - Gamma^{mu}_{dir, i_s} T_{.. mu ..}
                    let gbase = gst[1] * dir + gst[2] * is;
                    let mut acc = B::S::zero();
                    for mu in 0..DIM {
                        B::S::mul_acc(&mut acc, &gc[gbase + gst[0] * mu], &tc[base + tst[s] * mu]);
                    }
                    *o -= acc;
                }
            }
        }
    }
    out
}

/// Projected Levi-Civita derivative `frak D = nabla - N` with the
/// slotwise correction `frakD_i X^m = nabla_i X^m - N_{ip}{}^m X^p`.
/// `n_lu` is the Nijenhuis tensor in the `N_{ij}{}^k` layout.
pub fn projected_derivative<B: Backend>(
    bk: &B,
    n_lu: &Tensor<B::S>,
    t: &Tensor<B::S>,
) -> Tensor<B::S> {
    debug_assert_eq!(n_lu.sig(), [Co, Co, Con]);
    let rank = t.rank();
    let mut out = covariant_derivative(bk, t);
    let tst = strides(rank);
    let nst = strides(3);
    let tc = t.comps();
    let nc = n_lu.comps();
    let oc = out.comps_mut();
    let mut idx = [0usize; 7];
    for (of, o) in oc.iter_mut().enumerate() {
        digits(of, rank + 1, &mut idx);
        let dir = idx[0];
        let tflat: usize = (0..rank).map(|k| tst[k] * idx[k + 1]).sum();
        for s in 0..rank {
            let is = idx[s + 1];
            let base = tflat - tst[s] * is;
            match t.sig()[s] {
                Con => {
                    // - N_{dir, p}{}^{i_s} T^{.. p ..}
                    let nbase = nst[0] * dir + nst[2] * is;
                    let mut acc = B::S::zero();
                    for p in 0..DIM {
                        B::S::mul_acc(&mut acc, &nc[nbase + nst[1] * p], &tc[base + tst[s] * p]);
                    }
                    *o -= acc;
                }
                Co => {
                    // + N_{dir, i_s}{}^{lam} T_{.. lam ..}
                    let nbase = nst[0] * dir + nst[1] * is;
                    for lam in 0..DIM {
                        B::S::mul_acc(o, &nc[nbase + lam], &tc[base + tst[s] * lam]);
                    }
                }
            }
        }
    }
    out
}

/// Riemann tensor `R_{ij}{}^k{}_l` in the commutator convention
/// `[nabla_i, nabla_j] V^k = R_{ij}{}^k{}_l V^l`; on an anholonomic
/// frame the bracket term `-c^mu_{ij} Gamma^k_{mu l}` enters.
pub fn riemann_mixed<B: Backend>(bk: &B) -> Tensor<B::S> {
    let gamma = bk.gamma();
    let pgamma = bk.partial(gamma); // [m, k, i, j] = d_m Gamma^k_{ij}
    let c = bk.bracket_constants();
    Tensor::from_fn(&[Co, Co, Con, Co], |x| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        let mut acc = pgamma.get(&[i, k, j, l]) - pgamma.get(&[j, k, i, l]);
        for mu in 0..DIM {
            B::S::mul_acc(&mut acc, &gamma.get(&[k, i, mu]), &gamma.get(&[mu, j, l]));
            let mut neg = B::S::zero();
            B::S::mul_acc(&mut neg, &gamma.get(&[k, j, mu]), &gamma.get(&[mu, i, l]));
            if let Some(c) = c {
                B::S::mul_acc(&mut neg, &c.get(&[mu, i, j]), &gamma.get(&[k, mu, l]));
            }
            acc -= neg;
        }
        acc
    })
}

/// Ricci curvature `R_{ij} = R_{ipj}{}^p` from the fully lowered
/// Riemann tensor.
pub fn ricci_from_lowered<S: Scalar>(riem_low: &Tensor<S>, g_inv: &Tensor<S>) -> Tensor<S> {
    // R_{ij} = g^{p lam} R_{i p j lam}
    mul_contract(riem_low, g_inv, &[(1, 0), (3, 1)])
}

/// Nijenhuis tensor
/// `N^k_{ij} = (1/4)(J^r_i nabla_r J^k_j + J^k_r nabla_j J^r_i - (i<->j))`.
pub fn nijenhuis<B: Backend>(bk: &B) -> Tensor<B::S> {
    let j = &bk.structure().j;
    let dj = covariant_derivative(bk, j); // dj[m, k, l] = nabla_m J^k_l
    Tensor::from_fn(&[Con, Co, Co], |x| {
        let (k, i, jj) = (x[0], x[1], x[2]);
        let mut acc = B::S::zero();
        for r in 0..DIM {
            B::S::mul_acc(&mut acc, &j.get(&[r, i]), &dj.get(&[r, k, jj]));
            B::S::mul_acc(&mut acc, &j.get(&[k, r]), &dj.get(&[jj, r, i]));
            let mut neg = B::S::zero();
            B::S::mul_acc(&mut neg, &j.get(&[r, jj]), &dj.get(&[r, k, i]));
            B::S::mul_acc(&mut neg, &j.get(&[k, r]), &dj.get(&[i, r, jj]));
            acc -= neg;
        }
        acc.scale(0.25)
    })
}

/// Codifferential `(ddag f)_{I'} = -g^{lm} nabla_m f_{l I'}`.
pub fn codifferential<B: Backend>(bk: &B, f: &Tensor<B::S>) -> Result<Tensor<B::S>> {
    if f.rank() == 0 {
        return Err(Error::Rank("codifferential of a 0-form".into()));
    }
    let cov = covariant_derivative(bk, f); // [m, l, I']
    Ok(-&mul_contract(&bk.structure().g_inv, &cov, &[(0, 0), (1, 1)]))
}

/// Exterior derivative through the Levi-Civita connection,
/// `(df)_{i0..ip} = sum_q (-1)^q nabla_{i_q} f_{.. without i_q ..}`;
/// agrees with the backend-native `exterior_d` because the connection
/// is torsion-free.
pub fn d_via_nabla<B: Backend>(bk: &B, f: &Tensor<B::S>) -> Result<Tensor<B::S>> {
    let cov = covariant_derivative(bk, f);
    antisymmetrize_derivative(&cov, f.rank())
}

/// Assemble `(df)_{i0..ip} = sum_q (-1)^q D[i_q, I \ q]` from a
/// derivative tensor `D[m, I]`.
pub(crate) fn antisymmetrize_derivative<S: Scalar>(
    deriv: &Tensor<S>,
    form_rank: usize,
) -> Result<Tensor<S>> {
    if form_rank + 1 > 6 {
        return Err(Error::Rank("exterior derivative exceeds rank 6".into()));
    }
    let out_rank = form_rank + 1;
    let mut out = Tensor::zeros(&vec![Co; out_rank]);
    let mut idx = [0usize; 7];
    let dst = strides(form_rank + 1);
    let dc = deriv.comps();
    let oc = out.comps_mut();
    for (of, o) in oc.iter_mut().enumerate() {
        digits(of, out_rank, &mut idx);
        let mut acc = S::zero();
        for q in 0..out_rank {
            // D[i_q, I without position q]
            let mut flat = dst[0] * idx[q];
            let mut pos = 1;
            for (k, &i) in idx[..out_rank].iter().enumerate() {
                if k != q {
                    flat += dst[pos] * i;
                    pos += 1;
                }
            }
            if q % 2 == 0 {
                acc += dc[flat];
            } else {
                acc -= dc[flat];
            }
        }
        *o = acc;
    }
    Ok(out)
}

/// The dilaton 1-form `alpha = -d log |phi|^2`; identically zero on
/// invariant backends.
pub fn alpha_form<B: Backend>(bk: &B) -> Result<Tensor<B::S>> {
    let log = bk.structure().norm_phi_sq.try_ln()?;
    Ok(-&bk.partial(&Tensor::scalar(log)))
}
