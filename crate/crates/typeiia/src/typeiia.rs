//! Pointwise Type IIA structure: the Hitchin almost-complex structure of
//! a nondegenerate 3-form, the induced metric, primitivity and
//! positivity validation, the norm, the dual 3-form, the conformal
//! metric, the Hodge contraction operator, and the N-dagger operator.

use crate::error::{Error, Result};
use crate::jets::Scalar;
use crate::multilinear::{
    self, basis_vector, invert_rank2, mul_contract, Co, Con, Tensor, DIM,
};

/// Degeneracy threshold: reject samples with `-lambda < EPS * |phi|^4`
/// so the square root in the Hitchin normalization stays
/// well-conditioned under jet division.
pub const DEGENERACY_EPS: f64 = 1e-6;

/// Primitivity tolerance for validation, relative to `|phi|`. Inputs are
/// constructed to satisfy the constraint exactly; this covers rounding.
pub const PRIMITIVITY_TOL: f64 = 1e-10;

/// Tolerance for the structural self-checks run at build time
/// (conformal-metric consistency, volume identity).
pub const STRUCTURE_TOL: f64 = 1e-9;

/// Tolerance for `J^2 = -1` at build time.
pub const J_SQUARED_TOL: f64 = 1e-10;

/// Everything derived from a validated pair (omega, phi) at one point
/// (or one 2-jet of a point).
#[derive(Clone, Debug)]
pub struct TypeIiaStructure<S> {
    /// Symplectic form, rank (0,2) alternating.
    pub omega: Tensor<S>,
    /// Inverse: `omega_inv[a,k] omega[k,p] = delta^a_p`.
    pub omega_inv: Tensor<S>,
    /// The 3-form.
    pub phi: Tensor<S>,
    /// Hitchin almost-complex structure, rank (1,1).
    pub j: Tensor<S>,
    /// Metric `g(X,Y) = omega(X, JY)`.
    pub g: Tensor<S>,
    pub g_inv: Tensor<S>,
    /// `|phi|^2 = (1/3!) phi_{ijk} phi^{ijk}` in g.
    pub norm_phi_sq: S,
    /// Dual 3-form `phi_hat[l,k,p] = -phi[Jl,k,p]`.
    pub phi_hat: Tensor<S>,
    /// Conformal metric `|phi|^2 g`.
    pub g_tilde: Tensor<S>,
}

/// Hitchin kernel: `K^i_j = eps-pairing(iota_{e_j} phi ^ phi)^i`,
/// quadratic in phi. Only defined up to a constant times orientation;
/// the normalization cancels in `J = K / sqrt(-lambda)` up to the sign
/// fixed downstream by positive definiteness.
pub fn hitchin_k<S: Scalar>(phi: &Tensor<S>) -> Result<Tensor<S>> {
    if phi.rank() != 3 || phi.sig().iter().any(|&v| v != Co) {
        return Err(Error::Rank("hitchin_k expects a covariant 3-form".into()));
    }
    let mut k = Tensor::zeros(&[Con, Co]);
    for j in 0..DIM {
        let iota = multilinear::interior(&basis_vector::<S>(j), phi)?;
        let five = multilinear::wedge(&iota, phi)?;
        let col = multilinear::levi_civita_pairing(&five)?;
        for i in 0..DIM {
            k.set(&[i, j], col.get(&[i]));
        }
    }
    Ok(k)
}

/// Hitchin invariant `lambda = (1/6) tr(K^2)`; the form is nondegenerate
/// iff lambda != 0 and of positive type iff lambda < 0.
pub fn hitchin_lambda<S: Scalar>(phi: &Tensor<S>) -> Result<S> {
    let k = hitchin_k(phi)?;
    Ok(lambda_from_k(&k))
}

fn lambda_from_k<S: Scalar>(k: &Tensor<S>) -> S {
    let k2 = mul_contract(k, k, &[(1, 0)]);
    k2.contract(0, 1).unwrap().as_scalar().scale(1.0 / 6.0)
}

/// Hitchin almost-complex structure `J = s K / sqrt(-lambda)` with the
/// sign `s` chosen so that `g = omega(., J.)` is positive definite.
///
/// Returns `(J, g)`; fails with `DegenerateForm` when `-lambda` is below
/// the threshold and `NotPositive` when neither sign works.
pub fn hitchin_j<S: Scalar>(phi: &Tensor<S>, omega: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)> {
    let k = hitchin_k(phi)?;
    let lambda = lambda_from_k(&k);
    let phi_scale = phi.max_abs_value().max(1e-300);
    let threshold = DEGENERACY_EPS * phi_scale.powi(4);
    if -lambda.value() < threshold {
        return Err(Error::DegenerateForm {
            lambda: lambda.value(),
            threshold,
        });
    }
    let inv_root = (-lambda).try_sqrt()?.try_recip()?;
    let j_plus = k.scale_s(&inv_root);

    for sign in [1.0, -1.0] {
        let j = j_plus.scale_f(sign);
        // g_{ij} = omega_{ik} J^k_j
        let g = mul_contract(omega, &j, &[(1, 0)]);
        if definiteness(&g) == Definiteness::Positive {
            return Ok((j, g));
        }
    }
    Err(Error::NotPositive)
}

#[derive(PartialEq)]
enum Definiteness {
    Positive,
    Other,
}

/// Check symmetry and positive definiteness of the base-point value of a
/// rank-2 tensor.
fn definiteness<S: Scalar>(g: &Tensor<S>) -> Definiteness {
    let m = to_matrix(g);
    let scale = m.amax().max(1e-300);
    if (&m - m.transpose()).amax() > 1e-8 * scale {
        return Definiteness::Other;
    }
    match nalgebra::Cholesky::new(m) {
        Some(_) => Definiteness::Positive,
        None => Definiteness::Other,
    }
}

pub fn to_matrix<S: Scalar>(t: &Tensor<S>) -> nalgebra::DMatrix<f64> {
    assert_eq!(t.rank(), 2);
    nalgebra::DMatrix::from_fn(DIM, DIM, |i, j| t.get(&[i, j]).value())
}

/// Condition number of the base-point metric (symmetric eigenvalues).
pub fn condition_number<S: Scalar>(g: &Tensor<S>) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(to_matrix(g));
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e.abs());
        hi = hi.max(e.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Hodge contraction against omega, normalized so that
/// `Lambda omega = 3` in dimension 6:
/// `(Lambda f)_I = (1/2) omega^{ab} f_{ba I}`.
pub fn lambda_contraction<S: Scalar>(f: &Tensor<S>, omega_inv: &Tensor<S>) -> Result<Tensor<S>> {
    if f.rank() < 2 {
        return Err(Error::Rank(format!(
            "lambda_contraction needs a form of rank >= 2, got {}",
            f.rank()
        )));
    }
    // omega^{ab} f_{b a I}: contract slot0 of omega_inv with slot1 of f
    // and slot1 of omega_inv with slot0 of f.
    Ok(mul_contract(omega_inv, f, &[(0, 1), (1, 0)]).scale_f(0.5))
}

/// Dual 3-form `phi_hat[l,k,p] = -phi[Jl,k,p]`; for a form of type
/// (3,0)+(0,3) the slot choice does not matter.
pub fn hat_dual<S: Scalar>(phi: &Tensor<S>, j: &Tensor<S>) -> Result<Tensor<S>> {
    Ok(-&multilinear::apply_j(phi, 0, j)?)
}

/// The N-dagger operator taking 3-forms to 2-forms:
/// `(Ndag . phi)_{kj} = N^mu_j^lam phi_{mu k lam} - N^mu_k^lam phi_{mu j lam}`.
pub fn ndagger<S: Scalar>(n: &Tensor<S>, phi: &Tensor<S>, g_inv: &Tensor<S>) -> Result<Tensor<S>> {
    if n.rank() != 3 || n.sig() != [Con, Co, Co] {
        return Err(Error::Slot("ndagger expects N^k_ij".into()));
    }
    // N^mu_j^lam = g^{lam b} N^mu_{j b}
    let n_up = n.raise_lower(2, g_inv)?;
    // T_{jk} = N^mu_j^lam phi_{mu k lam}
    let t = mul_contract(&n_up, phi, &[(0, 0), (2, 2)]);
    // output slots (k, j)
    let tkj = t.swap_slots(0, 1);
    Ok(&tkj - &t)
}

/// `|phi|^2 = (1/3!) phi_{ijk} phi_{lmn} g^{il} g^{jm} g^{kn}`.
pub fn norm_phi_sq<S: Scalar>(phi: &Tensor<S>, g_inv: &Tensor<S>) -> S {
    let up1 = phi.raise_lower(0, g_inv).unwrap();
    let up2 = up1.raise_lower(1, g_inv).unwrap();
    let up3 = up2.raise_lower(2, g_inv).unwrap();
    mul_contract(phi, &up3, &[(0, 0), (1, 1), (2, 2)])
        .as_scalar()
        .scale(1.0 / 6.0)
}

/// The conformal metric by its quadratic formula
/// `gt_{ij} = -phi_{iab} phi_{jkp} omega^{ak} omega^{bp}`.
pub fn g_tilde_quadratic<S: Scalar>(phi: &Tensor<S>, omega_inv: &Tensor<S>) -> Tensor<S> {
    let psi = pairing_kernel(phi, omega_inv);
    -&mul_contract(&psi, phi, &[(1, 1), (2, 2)])
}

/// The recurring bilinear kernel `psi_i^{kp} = phi_{iab} omega^{ka} omega^{pb}`.
pub fn pairing_kernel<S: Scalar>(phi: &Tensor<S>, omega_inv: &Tensor<S>) -> Tensor<S> {
    // t1[i,b,k] = phi_{iab} omega^{ka}
    let t1 = mul_contract(phi, omega_inv, &[(1, 1)]);
    // psi[i,k,p] = t1[i,b,k] omega^{pb}
    let t2 = mul_contract(&t1, omega_inv, &[(1, 1)]);
    debug_assert_eq!(t2.sig(), [Co, Con, Con]);
    t2
}

/// Determinant of the base-point value of a rank-2 tensor.
pub fn det_value<S: Scalar>(t: &Tensor<S>) -> f64 {
    to_matrix(t).determinant()
}

/// Build and validate the full structure from a symplectic form and a
/// closed primitive positive 3-form.
pub fn build_structure<S: Scalar>(
    omega: &Tensor<S>,
    phi: &Tensor<S>,
) -> Result<TypeIiaStructure<S>> {
    if omega.rank() != 2 || phi.rank() != 3 {
        return Err(Error::Rank("build_structure expects a 2-form and a 3-form".into()));
    }
    let phi_scale = phi.max_abs_value();
    let omega_inv = invert_rank2(omega)?;

    // primitivity (validated at the base point; the samplers enforce it
    // on the whole truncation)
    let lam_phi = lambda_contraction(phi, &omega_inv)?;
    let prim = lam_phi.max_abs_value();
    if prim > PRIMITIVITY_TOL * phi_scale.max(1e-300) {
        return Err(Error::NotPrimitive {
            residual: prim / phi_scale.max(1e-300),
        });
    }

    let (j, g) = hitchin_j(phi, omega)?;

    // J^2 = -1
    let j2 = mul_contract(&j, &j, &[(1, 0)]);
    let j2_res = (&j2 + &multilinear::kronecker()).max_abs_value();
    if j2_res > J_SQUARED_TOL {
        return Err(Error::NotPositive);
    }

    let g_inv = invert_rank2(&g)?;
    let nsq = norm_phi_sq(phi, &g_inv);
    if nsq.value() <= 0.0 {
        return Err(Error::NotPositive);
    }
    let phi_hat = hat_dual(phi, &j)?;
    let g_tilde = g.scale_s(&nsq);

    // conformal metric two ways; a constant-factor residual here would
    // mean the norm convention is off
    let gt2 = g_tilde_quadratic(phi, &omega_inv);
    let gt_scale = g_tilde.max_abs_value().max(1.0);
    if (&g_tilde - &gt2).max_abs_value() > STRUCTURE_TOL * gt_scale {
        return Err(Error::InvalidState(
            "conformal metric mismatch between |phi|^2 g and the quadratic formula".into(),
        ));
    }

    // omega(JX, JY) = omega(X, Y)
    let oj = multilinear::apply_j(&multilinear::apply_j(omega, 0, &j)?, 1, &j)?;
    if (&oj - omega).max_abs_value() > STRUCTURE_TOL * omega.max_abs_value().max(1.0) {
        return Err(Error::InvalidState("omega is not J-invariant".into()));
    }

    // volume: (omega^3/3!)_{123456}^2 = det g
    let om3 = multilinear::wedge(&multilinear::wedge(omega, omega)?, omega)?;
    let pf = om3.get(&[0, 1, 2, 3, 4, 5]).value() / 6.0;
    let detg = det_value(&g);
    if (pf * pf - detg).abs() > STRUCTURE_TOL * detg.abs().max(1.0) {
        return Err(Error::InvalidState(
            "volume of g does not match omega^3/3!".into(),
        ));
    }

    Ok(TypeIiaStructure {
        omega: omega.clone(),
        omega_inv,
        phi: phi.clone(),
        j,
        g,
        g_inv,
        norm_phi_sq: nsq,
        phi_hat,
        g_tilde,
    })
}

/// The standard constant model: omega0 = e12 + e34 + e56 and
/// phi0 = e135 - e146 - e236 - e245 (the real part of the standard
/// complex volume form). Generic in the scalar so both backends can
/// embed it.
pub fn standard_omega<S: Scalar>() -> Tensor<S> {
    let mut om = Tensor::zeros(&[Co, Co]);
    for a in 0..3 {
        om.set(&[2 * a, 2 * a + 1], S::one());
        om.set(&[2 * a + 1, 2 * a], -S::one());
    }
    om
}

pub fn standard_phi<S: Scalar>() -> Tensor<S> {
    let mut phi = Tensor::zeros(&[Co, Co, Co]);
    let terms: [([usize; 3], f64); 4] = [
        ([0, 2, 4], 1.0),  // e135
        ([0, 3, 5], -1.0), // -e146
        ([1, 2, 5], -1.0), // -e236
        ([1, 3, 4], -1.0), // -e245
    ];
    for (idx, sign) in terms {
        for (perm, psign) in multilinear::permutations_with_sign(3) {
            let p = [idx[perm[0]], idx[perm[1]], idx[perm[2]]];
            phi.set(&p, S::from_f64(sign * psign));
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilinear::{basis_covector, permutations_with_sign, wedge};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle for the Hitchin kernel: raw permutation loops,
    /// no shared code with `hitchin_k`.
    fn hitchin_k_oracle(phi: &Tensor<f64>) -> Tensor<f64> {
        let mut k = Tensor::zeros(&[Con, Co]);
        for j in 0..DIM {
            // (iota_{e_j} phi)_{ab} = phi_{jab}
            // (iota ^ phi)_{c1..c5} = sum over 2+3 shuffles
            // v^i = (1/5!) eps^{i c1..c5} (iota ^ phi)_{c1..c5}
            for (perm, _) in permutations_with_sign(6) {
                let i = perm[0];
                let c = &perm[1..];
                let eps = crate::multilinear::perm_sign(&perm);
                // five-form component at c: sum over choosing 2 of 5 slots for iota
                let mut five = 0.0;
                for a in 0..5 {
                    for b in 0..5 {
                        if a == b {
                            continue;
                        }
                        // shuffle sign: order (a,b,rest in order)
                        let mut order = vec![a, b];
                        order.extend((0..5).filter(|x| *x != a && *x != b));
                        let sign = crate::multilinear::perm_sign(&order);
                        let rest: Vec<usize> =
                            (0..5).filter(|x| *x != a && *x != b).map(|x| c[x]).collect();
                        five += sign / 2.0
                            * phi.get(&[j, c[a], c[b]])
                            * phi.get(&[rest[0], rest[1], rest[2]]);
                    }
                }
                k.add_at(&[i, j], eps * five / 120.0);
            }
        }
        k
    }

    #[test]
    fn hitchin_k_zero_form() {
        let z: Tensor<f64> = Tensor::zeros(&[Co, Co, Co]);
        let k = hitchin_k(&z).unwrap();
        assert_eq!(k.max_abs_value(), 0.0);
        assert_eq!(hitchin_lambda(&z).unwrap(), 0.0);
    }

    #[test]
    fn hitchin_k_matches_oracle_on_standard_model() {
        let phi = standard_phi::<f64>();
        let k = hitchin_k(&phi).unwrap();
        let oracle = hitchin_k_oracle(&phi);
        let d = (&k - &oracle).max_abs_value();
        assert!(d < 1e-12, "residual {d}");
        // K is proportional to the standard complex structure pattern
        // (e1 -> +-e2 etc.), so K^2 = lambda I with lambda < 0.
        let lam = hitchin_lambda(&phi).unwrap();
        assert!(lam < 0.0, "lambda = {lam}");
        let k2 = mul_contract(&k, &k, &[(1, 0)]);
        let expect = crate::multilinear::kronecker::<f64>().scale_f(lam);
        assert!((&k2 - &expect).max_abs_value() < 1e-12);
        // pattern: K^2_1 nonzero, diagonal zero
        assert!(k.get(&[1, 0]).abs() > 0.1);
        assert!(k.get(&[0, 0]).abs() < 1e-13);
    }

    #[test]
    fn hitchin_k_matches_oracle_on_random_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let raw = Tensor::from_fn(&[Co, Co, Co], |_| rng.gen_range(-1.0..1.0));
        let phi = raw.alternate().unwrap();
        let k = hitchin_k(&phi).unwrap();
        let oracle = hitchin_k_oracle(&phi);
        assert!((&k - &oracle).max_abs_value() < 1e-12 * phi.max_abs_value().powi(2).max(1.0));
    }

    #[test]
    fn hitchin_homogeneity() {
        let phi = standard_phi::<f64>();
        let c = 1.7;
        let k1 = hitchin_k(&phi).unwrap();
        let kc = hitchin_k(&phi.scale_f(c)).unwrap();
        assert!((&kc - &k1.scale_f(c * c)).max_abs_value() < 1e-12);
        let l1 = hitchin_lambda(&phi).unwrap();
        let lc = hitchin_lambda(&phi.scale_f(c)).unwrap();
        assert!((lc - c.powi(4) * l1).abs() < 1e-10);
    }

    #[test]
    fn standard_model_structure() {
        let st = build_structure(&standard_omega::<f64>(), &standard_phi::<f64>()).unwrap();
        // g is the identity
        for i in 0..DIM {
            for j in 0..DIM {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((st.g.get(&[i, j]) - expect).abs() < 1e-12);
            }
        }
        // norm convention regression: |phi0|^2 = 4
        assert!((st.norm_phi_sq - 4.0).abs() < 1e-12);
        // J is the standard complex structure: J e1 = e2
        assert!((st.j.get(&[1, 0]) - 1.0).abs() < 1e-12);
        assert!((st.j.get(&[0, 1]) + 1.0).abs() < 1e-12);
        // phi_hat is the standard imaginary part: e136 + e145 + e235 - e246
        assert!((st.phi_hat.get(&[0, 2, 5]) - 1.0).abs() < 1e-12);
        assert!((st.phi_hat.get(&[0, 3, 4]) - 1.0).abs() < 1e-12);
        assert!((st.phi_hat.get(&[1, 2, 4]) - 1.0).abs() < 1e-12);
        assert!((st.phi_hat.get(&[1, 3, 5]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_flip_gives_valid_structure() {
        // The Hitchin kernel is quadratic in phi, so -phi0 produces the
        // same J and the same metric; only phi_hat flips sign.
        let st0 = build_structure(&standard_omega::<f64>(), &standard_phi::<f64>()).unwrap();
        let st = build_structure(&standard_omega::<f64>(), &standard_phi::<f64>().scale_f(-1.0))
            .unwrap();
        assert!((&st.j - &st0.j).max_abs_value() < 1e-12);
        assert!((st.g.get(&[0, 0]) - 1.0).abs() < 1e-12);
        assert!((&st.phi_hat + &st0.phi_hat).max_abs_value() < 1e-12);
    }

    #[test]
    fn scale_invariance_of_j() {
        let om = standard_omega::<f64>();
        let phi = standard_phi::<f64>();
        let (j1, _) = hitchin_j(&phi, &om).unwrap();
        let (jc, _) = hitchin_j(&phi.scale_f(3.0), &om).unwrap();
        assert!((&j1 - &jc).max_abs_value() < 1e-12);
    }

    #[test]
    fn non_primitive_form_rejected() {
        let om = standard_omega::<f64>();
        let e123 = wedge(
            &wedge(&basis_covector::<f64>(0), &basis_covector(1)).unwrap(),
            &basis_covector(2),
        )
        .unwrap();
        match build_structure(&om, &e123) {
            Err(Error::NotPrimitive { .. }) | Err(Error::DegenerateForm { .. }) => {}
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_form_rejected() {
        let om = standard_omega::<f64>();
        // e135 alone is primitive for omega0 but Hitchin-degenerate
        let mut phi: Tensor<f64> = Tensor::zeros(&[Co, Co, Co]);
        for (p, s) in permutations_with_sign(3) {
            let idx = [[0, 2, 4][p[0]], [0, 2, 4][p[1]], [0, 2, 4][p[2]]];
            phi.set(&idx, s);
        }
        match build_structure(&om, &phi) {
            Err(Error::DegenerateForm { .. }) => {}
            other => panic!("expected DegenerateForm, got {other:?}"),
        }
    }

    #[test]
    fn lambda_contraction_convention() {
        let om = standard_omega::<f64>();
        let om_inv = invert_rank2(&om).unwrap();
        // Lambda omega = 3
        let lam_om = lambda_contraction(&om, &om_inv).unwrap().as_scalar();
        assert!((lam_om - 3.0).abs() < 1e-14);
        // Lambda phi0 = 0
        let lam_phi = lambda_contraction(&standard_phi::<f64>(), &om_inv).unwrap();
        assert!(lam_phi.max_abs_value() < 1e-14);
        // Lambda(e123) = e3 (direct contraction oracle)
        let e123 = wedge(
            &wedge(&basis_covector::<f64>(0), &basis_covector(1)).unwrap(),
            &basis_covector(2),
        )
        .unwrap();
        let lam = lambda_contraction(&e123, &om_inv).unwrap();
        assert!((lam.get(&[2]) - 1.0).abs() < 1e-14);
        for i in [0, 1, 3, 4, 5] {
            assert!(lam.get(&[i]).abs() < 1e-14);
        }
        // rank error
        let one_form = basis_covector::<f64>(0);
        assert!(matches!(
            lambda_contraction(&one_form, &om_inv),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn hat_dual_involution_and_bilinear() {
        let st = build_structure(&standard_omega::<f64>(), &standard_phi::<f64>()).unwrap();
        let hathat = hat_dual(&st.phi_hat, &st.j).unwrap();
        assert!((&hathat + &st.phi).max_abs_value() < 1e-12);
        // phi_hat_{l k p} phi_{i a b} omega^{ka} omega^{pb} = |phi|^2 omega_{l i}
        let psi = pairing_kernel(&st.phi, &st.omega_inv);
        let lhs = mul_contract(&st.phi_hat, &psi, &[(1, 1), (2, 2)]);
        let rhs = st.omega.scale_s(&st.norm_phi_sq);
        assert!((&lhs - &rhs).max_abs_value() < 1e-12);
    }

    #[test]
    fn bilinear_contraction_identities_standard_model() {
        // the two single-contraction identities, on the standard model
        let st = build_structure(&standard_omega::<f64>(), &standard_phi::<f64>()).unwrap();
        let q = st.norm_phi_sq / 4.0;
        // omega^{ij} phi_{iab} phi_{jcd}: omega_inv's first slot pairs
        // with the first phi (index order matters, omega^{ij} = -omega^{ji})
        let phi_up = st.phi.contract_slot_with(0, &st.omega_inv, 0).unwrap();
        let lhs_o = mul_contract(&phi_up, &st.phi, &[(0, 0)]);
        let rhs_o = Tensor::from_fn(&[Co, Co, Co, Co], |x| {
            let (a, b, c, d) = (x[0], x[1], x[2], x[3]);
            q * (st.omega.get(&[a, c]) * st.g.get(&[b, d])
                + st.omega.get(&[b, d]) * st.g.get(&[a, c])
                - st.omega.get(&[b, c]) * st.g.get(&[a, d])
                - st.omega.get(&[a, d]) * st.g.get(&[b, c]))
        });
        assert!((&lhs_o - &rhs_o).max_abs_value() < 1e-12);

        // g^{ij} phi_{iab} phi_{jcd}
        let phi_up_g = st.phi.raise_lower(0, &st.g_inv).unwrap();
        let lhs_g = mul_contract(&phi_up_g, &st.phi, &[(0, 0)]);
        let rhs_g = Tensor::from_fn(&[Co, Co, Co, Co], |x| {
            let (a, b, c, d) = (x[0], x[1], x[2], x[3]);
            q * (st.g.get(&[a, c]) * st.g.get(&[b, d])
                + st.omega.get(&[c, a]) * st.omega.get(&[b, d])
                - st.omega.get(&[a, d]) * st.omega.get(&[c, b])
                - st.g.get(&[b, c]) * st.g.get(&[a, d]))
        });
        assert!((&lhs_g - &rhs_g).max_abs_value() < 1e-12);
    }

    #[test]
    fn ndagger_basics() {
        let st = build_structure(&standard_omega::<f64>(), &standard_phi::<f64>()).unwrap();
        let zero_n: Tensor<f64> = Tensor::zeros(&[Con, Co, Co]);
        let nd = ndagger(&zero_n, &st.phi, &st.g_inv).unwrap();
        assert_eq!(nd.max_abs_value(), 0.0);

        // antisymmetry on a random (1,2) tensor antisymmetric in its two
        // lower slots
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let raw = Tensor::from_fn(&[Con, Co, Co], |_| rng.gen_range(-1.0..1.0));
        let n = {
            let swapped = raw.swap_slots(1, 2);
            (&raw - &swapped).scale_f(0.5)
        };
        let nd = ndagger(&n, &st.phi, &st.g_inv).unwrap();
        assert!((&nd + &nd.swap_slots(0, 1)).max_abs_value() < 1e-13);
    }
}
