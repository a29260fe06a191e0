//! Per-sample cache of every derived tensor the identity catalog and
//! the flow cross-checks keep reusing: Nijenhuis variants, curvature,
//! the dilaton 1-form and its derivative, the recurring
//! `phi omega omega` pairing kernel.

use crate::geometry::{
    alpha_form, codifferential, covariant_derivative, nijenhuis, projected_derivative,
    ricci_from_lowered, riemann_mixed, Backend,
};
use crate::jets::Scalar;
use crate::multilinear::{mul_contract, Tensor};
use crate::typeiia::{ndagger, pairing_kernel, TypeIiaStructure};

pub struct SampleCtx<'a, B: Backend> {
    pub bk: &'a B,
    /// `psi_i^{kp} = phi_{iab} omega^{ka} omega^{pb}`.
    pub psi: Tensor<B::S>,
    /// `N^k_{ij}`.
    pub n: Tensor<B::S>,
    /// Fully lowered `N_{kij}`.
    pub n_low: Tensor<B::S>,
    /// `N_{ij}{}^k`.
    pub n_lu: Tensor<B::S>,
    /// `nabla_m J^k_l`.
    pub dj: Tensor<B::S>,
    /// Projected derivative `frakD_m phi_{jkp}`.
    pub dphi: Tensor<B::S>,
    /// `frakD_m phihat_{jkp}`.
    pub dphi_hat: Tensor<B::S>,
    /// `frakD_m N_{ijk}` (fully lowered N).
    pub dn_low: Tensor<B::S>,
    /// Fully lowered Riemann tensor `R_{ijkl}`.
    pub riem_low: Tensor<B::S>,
    /// Ricci `R_{ij}`.
    pub ricci: Tensor<B::S>,
    /// Scalar curvature.
    pub scal: B::S,
    /// `alpha = -d log |phi|^2`.
    pub alpha: Tensor<B::S>,
    /// `alpha^mu` (index raised).
    pub alpha_up: Tensor<B::S>,
    /// `nabla_p alpha_q`.
    pub nabla_alpha: Tensor<B::S>,
    /// `(ddag phi)_{kp}`.
    pub ddag_phi: Tensor<B::S>,
    /// `(Ndag . phi)_{kj}`.
    pub ndag_phi: Tensor<B::S>,
    /// `(N+^2)_{ij}` and `(N-^2)_{ij}`.
    pub n2_plus: Tensor<B::S>,
    pub n2_minus: Tensor<B::S>,
    /// `|N|^2 = N^{mkp} N_{mkp}`.
    pub n_norm_sq: B::S,
}

impl<'a, B: Backend> SampleCtx<'a, B> {
    pub fn new(bk: &'a B) -> crate::Result<Self> {
        let st = bk.structure();
        let psi = pairing_kernel(&st.phi, &st.omega_inv);
        let n = nijenhuis(bk);
        let n_low = n.raise_lower(0, &st.g)?;
        let n_lu = n_low.raise_lower(2, &st.g_inv)?;
        let dj = covariant_derivative(bk, &st.j);
        let dphi = projected_derivative(bk, &n_lu, &st.phi);
        let dphi_hat = projected_derivative(bk, &n_lu, &st.phi_hat);
        let dn_low = projected_derivative(bk, &n_lu, &n_low);
        let riem = riemann_mixed(bk);
        let riem_low = riem.raise_lower(2, &st.g)?;
        let ricci = ricci_from_lowered(&riem_low, &st.g_inv);
        let scal = mul_contract(&st.g_inv, &ricci, &[(0, 0), (1, 1)]).as_scalar();
        let alpha = alpha_form(bk)?;
        let alpha_up = alpha.raise_lower(0, &st.g_inv)?;
        let nabla_alpha = covariant_derivative(bk, &alpha);
        let ddag_phi = codifferential(bk, &st.phi)?;
        let ndag_phi = ndagger(&n, &st.phi, &st.g_inv)?;

        // N^{pq}_i against N_{pqj} (plus) and N_{qpj} (minus)
        let n_uul = n_low
            .raise_lower(0, &st.g_inv)?
            .raise_lower(1, &st.g_inv)?;
        let n2_plus = mul_contract(&n_uul, &n_low, &[(0, 0), (1, 1)]);
        let n2_minus = mul_contract(&n_uul, &n_low, &[(0, 1), (1, 0)]);
        let n_norm_sq = mul_contract(
            &n_uul.raise_lower(2, &st.g_inv)?,
            &n_low,
            &[(0, 0), (1, 1), (2, 2)],
        )
        .as_scalar();

        Ok(SampleCtx {
            bk,
            psi,
            n,
            n_low,
            n_lu,
            dj,
            dphi,
            dphi_hat,
            dn_low,
            riem_low,
            ricci,
            scal,
            alpha,
            alpha_up,
            nabla_alpha,
            ddag_phi,
            ndag_phi,
            n2_plus,
            n2_minus,
            n_norm_sq,
        })
    }

    pub fn st(&self) -> &TypeIiaStructure<B::S> {
        self.bk.structure()
    }

    /// The recurring bilinear `X_{jkp} phi_{iab} omega^{ka} omega^{pb}`
    /// as a rank-2 tensor indexed `[i, j]`.
    pub fn pair(&self, x: &Tensor<B::S>) -> Tensor<B::S> {
        debug_assert_eq!(x.rank(), 3);
        mul_contract(&self.psi, x, &[(1, 1), (2, 2)])
    }

    /// `pair(x) + (i <-> j)`.
    pub fn pair_sym(&self, x: &Tensor<B::S>) -> Tensor<B::S> {
        self.pair(x).sym_pair(0, 1)
    }

    /// J action on one slot (structure J).
    pub fn j_slot(&self, t: &Tensor<B::S>, slot: usize) -> Tensor<B::S> {
        crate::multilinear::apply_j(t, slot, &self.st().j).expect("validated J slot action")
    }

    pub fn raise(&self, t: &Tensor<B::S>, slot: usize) -> Tensor<B::S> {
        t.raise_lower(slot, &self.st().g_inv).expect("raise")
    }

    pub fn lower(&self, t: &Tensor<B::S>, slot: usize) -> Tensor<B::S> {
        t.raise_lower(slot, &self.st().g).expect("lower")
    }

    /// `div alpha = nabla_mu alpha^mu`.
    pub fn div_alpha(&self) -> B::S {
        mul_contract(&self.st().g_inv, &self.nabla_alpha, &[(0, 0), (1, 1)]).as_scalar()
    }

    /// `|alpha|^2`.
    pub fn alpha_sq(&self) -> B::S {
        mul_contract(&self.alpha_up, &self.alpha, &[(0, 0)]).as_scalar()
    }

    /// `S[a,b] = alpha_p N_a{}^p{}_b`.
    pub fn alpha_n(&self) -> Tensor<B::S> {
        mul_contract(&self.alpha_up, &self.n_low, &[(0, 1)])
    }
}

/// Relative residual in the max norm of base-point values: the
/// difference scaled by the largest participating term (floored at 1).
pub fn residual<S: Scalar>(diff: &Tensor<S>, terms: &[&Tensor<S>]) -> f64 {
    let scale = terms
        .iter()
        .map(|t| t.max_abs_value())
        .fold(1.0f64, f64::max);
    diff.max_abs_value() / scale
}

pub fn residual_scalar(diff: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().map(|t| t.abs()).fold(1.0f64, f64::max);
    diff.abs() / scale
}
