//! Flat Darboux chart backend: a constant symplectic form and a 3-form
//! field given by an explicit degree-2 polynomial, carried as `Jet2`
//! components at the origin.
//!
//! The sampler draws the 560 polynomial coefficients from the null space
//! of the linear system {d phi = 0 on the whole truncation, Lambda phi
//! = 0 on the whole truncation}, so every identity that depends on at
//! most a 2-jet of phi holds exactly modulo rounding.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{antisymmetrize_derivative, Backend};
use crate::error::{Error, Result};
use crate::jets::{Jet2, Scalar};
use crate::multilinear::{permutations_with_sign, Co, Tensor, DIM};
use crate::typeiia::{
    build_structure, condition_number, standard_omega, standard_phi, TypeIiaStructure,
};

/// Increasing index triples (i<j<k), the independent components of a
/// 3-form. Lexicographic order fixes the coefficient layout everywhere
/// (sampler, serialization, flow state).
pub const TRIPLES: [[usize; 3]; 20] = [
    [0, 1, 2],
    [0, 1, 3],
    [0, 1, 4],
    [0, 1, 5],
    [0, 2, 3],
    [0, 2, 4],
    [0, 2, 5],
    [0, 3, 4],
    [0, 3, 5],
    [0, 4, 5],
    [1, 2, 3],
    [1, 2, 4],
    [1, 2, 5],
    [1, 3, 4],
    [1, 3, 5],
    [1, 4, 5],
    [2, 3, 4],
    [2, 3, 5],
    [2, 4, 5],
    [3, 4, 5],
];

/// Unordered coordinate pairs (a<=b): the 21 independent quadratic
/// monomials x_a x_b.
pub const PAIRS: [[usize; 2]; 21] = [
    [0, 0],
    [0, 1],
    [0, 2],
    [0, 3],
    [0, 4],
    [0, 5],
    [1, 1],
    [1, 2],
    [1, 3],
    [1, 4],
    [1, 5],
    [2, 2],
    [2, 3],
    [2, 4],
    [2, 5],
    [3, 3],
    [3, 4],
    [3, 5],
    [4, 4],
    [4, 5],
    [5, 5],
];

const N_COEFFS: usize = 20 + 120 + 420;

/// Polynomial data of the 3-form field:
/// `phi(x)_T = phi0[T] + phi1[T][a] x_a + (1/2) phi2[T][(a,b)] x_a x_b`
/// per increasing triple T.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JetCoefficients {
    pub phi0: Vec<f64>,      // 20
    pub phi1: Vec<[f64; 6]>, // 20 x 6
    pub phi2: Vec<Vec<f64>>, // 20 x 21, symmetric entries once
}

impl JetCoefficients {
    pub fn zeros() -> Self {
        JetCoefficients {
            phi0: vec![0.0; 20],
            phi1: vec![[0.0; 6]; 20],
            phi2: vec![vec![0.0; 21]; 20],
        }
    }

    fn from_flat(u: &[f64]) -> Self {
        assert_eq!(u.len(), N_COEFFS);
        let mut c = Self::zeros();
        for t in 0..20 {
            c.phi0[t] = u[t];
            for a in 0..6 {
                c.phi1[t][a] = u[20 + t * 6 + a];
            }
            for p in 0..21 {
                c.phi2[t][p] = u[140 + t * 21 + p];
            }
        }
        c
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(N_COEFFS);
        u.extend_from_slice(&self.phi0);
        for t in 0..20 {
            u.extend_from_slice(&self.phi1[t]);
        }
        for t in 0..20 {
            u.extend_from_slice(&self.phi2[t]);
        }
        u
    }

    fn validate(&self) -> Result<()> {
        if self.phi0.len() != 20
            || self.phi1.len() != 20
            || self.phi2.len() != 20
            || self.phi2.iter().any(|r| r.len() != 21)
        {
            return Err(Error::Config("jet coefficient blocks have wrong shape".into()));
        }
        Ok(())
    }

    /// The 3-form field as a tensor of 2-jets at the origin.
    pub fn phi_jet(&self) -> Tensor<Jet2> {
        let pair_pos = pair_positions();
        let mut phi = Tensor::zeros(&[Co, Co, Co]);
        for (t, triple) in TRIPLES.iter().enumerate() {
            let mut hess = [[0.0; DIM]; DIM];
            for a in 0..DIM {
                for b in 0..DIM {
                    hess[a][b] = self.phi2[t][pair_pos[a][b]];
                }
            }
            let jet = Jet2::from_taylor(self.phi0[t], self.phi1[t], hess);
            for (perm, sign) in permutations_with_sign(3) {
                let idx = [triple[perm[0]], triple[perm[1]], triple[perm[2]]];
                phi.set(&idx, jet.scale(sign));
            }
        }
        phi
    }

    /// Evaluate the polynomial 3-form at a chart point, as plain reals.
    /// Lets tests finite-difference the field without touching jets.
    pub fn phi_at(&self, x: &[f64; 6]) -> Tensor<f64> {
        let pair_pos = pair_positions();
        let mut phi = Tensor::zeros(&[Co, Co, Co]);
        for (t, triple) in TRIPLES.iter().enumerate() {
            let mut v = self.phi0[t];
            for a in 0..DIM {
                v += self.phi1[t][a] * x[a];
                for b in 0..DIM {
                    v += 0.5 * self.phi2[t][pair_pos[a][b]] * x[a] * x[b];
                }
            }
            for (perm, sign) in permutations_with_sign(3) {
                let idx = [triple[perm[0]], triple[perm[1]], triple[perm[2]]];
                phi.set(&idx, sign * v);
            }
        }
        phi
    }
}

fn triple_position() -> &'static [[[usize; 6]; 6]; 6] {
    static POS: OnceLock<[[[usize; 6]; 6]; 6]> = OnceLock::new();
    POS.get_or_init(|| {
        let mut p = [[[usize::MAX; 6]; 6]; 6];
        for (t, tr) in TRIPLES.iter().enumerate() {
            p[tr[0]][tr[1]][tr[2]] = t;
        }
        p
    })
}

fn pair_positions() -> &'static [[usize; 6]; 6] {
    static POS: OnceLock<[[usize; 6]; 6]> = OnceLock::new();
    POS.get_or_init(|| {
        let mut p = [[usize::MAX; 6]; 6];
        for (k, pr) in PAIRS.iter().enumerate() {
            p[pr[0]][pr[1]] = k;
            p[pr[1]][pr[0]] = k;
        }
        p
    })
}

/// Signed position of (i,j,k) among increasing triples: Some((t, sign)).
fn signed_triple(i: usize, j: usize, k: usize) -> Option<(usize, f64)> {
    if i == j || j == k || i == k {
        return None;
    }
    let mut v = [i, j, k];
    let sign = crate::multilinear::perm_sign(&v);
    v.sort_unstable();
    Some((triple_position()[v[0]][v[1]][v[2]], sign))
}

/// The flat Darboux chart: constant omega0 plus the jet-valued 3-form
/// field, with its derived structure and connection at the origin.
pub struct JetChartBackend {
    coeffs: JetCoefficients,
    structure: TypeIiaStructure<Jet2>,
    gamma: Tensor<Jet2>,
}

impl JetChartBackend {
    pub fn new(coeffs: JetCoefficients) -> Result<Self> {
        coeffs.validate()?;
        let omega = standard_omega::<Jet2>();
        let phi = coeffs.phi_jet();
        let structure = build_structure(&omega, &phi)?;
        let mut backend = JetChartBackend {
            coeffs,
            structure,
            gamma: Tensor::zeros(&[crate::multilinear::Con, Co, Co]),
        };
        backend.gamma = backend.compute_gamma();
        Ok(backend)
    }

    /// The flat standard structure: constant part phi0, derivatives
    /// zeroed. Every curvature, Nijenhuis, and alpha quantity vanishes.
    pub fn flat_standard() -> Self {
        let phi0 = standard_phi::<f64>();
        let mut coeffs = JetCoefficients::zeros();
        for (t, tr) in TRIPLES.iter().enumerate() {
            coeffs.phi0[t] = phi0.get(tr);
        }
        Self::new(coeffs).expect("standard structure is valid")
    }

    pub fn coeffs(&self) -> &JetCoefficients {
        &self.coeffs
    }

    /// Residuals of the closedness and primitivity constraints over the
    /// whole degree-2 truncation (max over all Taylor coefficients).
    pub fn constraint_residuals(&self) -> (f64, f64) {
        let phi = self.coeffs.phi_jet();
        let scale = phi.max_abs_all().max(1e-300);
        let dphi = self.exterior_d(&phi).expect("rank 3 < 6");
        let lam = crate::typeiia::lambda_contraction(&phi, &self.structure.omega_inv)
            .expect("rank 3 >= 2");
        // d of a degree-2 field is exact to degree 1; the Hessian row of
        // its jets is truncation garbage, so measure value+gradient only.
        let mut closed = 0.0f64;
        for c in dphi.comps() {
            closed = closed.max(c.val.abs());
            for a in 0..DIM {
                closed = closed.max(c.grad[a].abs());
            }
        }
        (closed / scale, lam.max_abs_all() / scale)
    }

    /// Perturb the quadratic coefficient block without re-projecting
    /// onto the constraints; breaks d phi = 0 at first order. Negative
    /// control for the verification suite.
    pub fn perturb_quadratic(&self, eps: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = self.coeffs.clone();
        let scale = coeffs
            .phi0
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        for t in 0..20 {
            for p in 0..21 {
                coeffs.phi2[t][p] += eps * scale * standard_normal(&mut rng);
            }
        }
        Self::new(coeffs)
    }

    fn compute_gamma(&self) -> Tensor<Jet2> {
        // Gamma^k_{ij} = (1/2) g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij})
        let g = &self.structure.g;
        let ginv = &self.structure.g_inv;
        let dg = self.partial(g); // [m, i, j]
        Tensor::from_fn(&[crate::multilinear::Con, Co, Co], |x| {
            let (k, i, j) = (x[0], x[1], x[2]);
            let mut acc = Jet2::ZERO;
            for l in 0..DIM {
                let sum = dg.get(&[i, j, l]) + dg.get(&[j, i, l]) - dg.get(&[l, i, j]);
                Jet2::mul_acc(&mut acc, &ginv.get(&[k, l]), &sum);
            }
            acc.scale(0.5)
        })
    }
}

/// Standard normal draw (Box-Muller; keeps the ChaCha stream portable).
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl Backend for JetChartBackend {
    type S = Jet2;

    fn structure(&self) -> &TypeIiaStructure<Jet2> {
        &self.structure
    }

    fn gamma(&self) -> &Tensor<Jet2> {
        &self.gamma
    }

    fn partial(&self, t: &Tensor<Jet2>) -> Tensor<Jet2> {
        let mut sig = vec![Co];
        sig.extend_from_slice(t.sig());
        let size = t.comps().len();
        let mut out = Tensor::zeros(&sig);
        for m in 0..DIM {
            for flat in 0..size {
                out.comps_mut()[m * size + flat] = t.comps()[flat].partial(m);
            }
        }
        out
    }

    fn exterior_d(&self, f: &Tensor<Jet2>) -> Result<Tensor<Jet2>> {
        antisymmetrize_derivative(&self.partial(f), f.rank())
    }

    fn bracket_constants(&self) -> Option<&Tensor<Jet2>> {
        None
    }
}

/// Rows of the linear constraint system on the 560 coefficients:
/// d phi = 0 (degree 0 and 1 of the truncation) and Lambda phi = 0
/// (degrees 0, 1, 2). The system is independent of the sample, so it is
/// assembled and factorized once.
fn constraint_matrix() -> &'static DMatrix<f64> {
    static M: OnceLock<DMatrix<f64>> = OnceLock::new();
    M.get_or_init(|| {
        let quads: Vec<[usize; 4]> = {
            let mut v = Vec::new();
            for a in 0..6 {
                for b in (a + 1)..6 {
                    for c in (b + 1)..6 {
                        for d in (c + 1)..6 {
                            v.push([a, b, c, d]);
                        }
                    }
                }
            }
            v
        };
        let pair_pos = pair_positions();
        // column layout matches JetCoefficients::to_flat
        let col1 = |t: usize, a: usize| 20 + t * 6 + a;
        let col2 = |t: usize, a: usize, b: usize| 140 + t * 21 + pair_pos[a][b];

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut push_row = |r: Vec<f64>| rows.push(r);

        // (d phi)_Q = sum_q (-1)^q d_{Q_q} phi_{Q \ q}
        for quad in &quads {
            // degree 0: from phi1
            let mut r = vec![0.0; N_COEFFS];
            for q in 0..4 {
                let rest: Vec<usize> = (0..4).filter(|&k| k != q).map(|k| quad[k]).collect();
                if let Some((t, s)) = signed_triple(rest[0], rest[1], rest[2]) {
                    let sgn = if q % 2 == 0 { 1.0 } else { -1.0 };
                    r[col1(t, quad[q])] += sgn * s;
                }
            }
            push_row(r);
            // degree 1 (coefficient of x_e): from phi2
            for e in 0..6 {
                let mut r = vec![0.0; N_COEFFS];
                for q in 0..4 {
                    let rest: Vec<usize> = (0..4).filter(|&k| k != q).map(|k| quad[k]).collect();
                    if let Some((t, s)) = signed_triple(rest[0], rest[1], rest[2]) {
                        let sgn = if q % 2 == 0 { 1.0 } else { -1.0 };
                        // d_a of (1/2) phi2_{(a,b)} x_a x_b contributes
                        // phi2_{(d_dir, e)} x_e
                        r[col2(t, quad[q], e)] += sgn * s;
                    }
                }
                push_row(r);
            }
        }

        // (Lambda phi)_c = (1/2) omega^{ab} phi_{b a c}; with omega0 the
        // inverse pairs (2k, 2k+1) with weight +-1.
        // omega_inv[a][k]: omega^{ak}; Lambda f = (1/2) omega^{ab} f_{ba c}
        let om = standard_omega::<f64>();
        let om_inv = crate::multilinear::invert_rank2(&om).unwrap();
        let lambda_row = |c: usize, weight: &mut dyn FnMut(usize, f64)| {
            for a in 0..6 {
                for b in 0..6 {
                    let w = 0.5 * om_inv.get(&[a, b]);
                    if w == 0.0 {
                        continue;
                    }
                    if let Some((t, s)) = signed_triple(b, a, c) {
                        weight(t, w * s);
                    }
                }
            }
        };
        for c in 0..6 {
            // degree 0
            let mut r = vec![0.0; N_COEFFS];
            lambda_row(c, &mut |t, w| r[t] += w);
            push_row(r);
            // degree 1
            for e in 0..6 {
                let mut r = vec![0.0; N_COEFFS];
                lambda_row(c, &mut |t, w| r[col1(t, e)] += w);
                push_row(r);
            }
            // degree 2
            for (pidx, pr) in PAIRS.iter().enumerate() {
                let mut r = vec![0.0; N_COEFFS];
                lambda_row(c, &mut |t, w| r[140 + t * 21 + pidx] += w);
                push_row(r);
                let _ = pr;
            }
        }

        let nrows = rows.len();
        DMatrix::from_fn(nrows, N_COEFFS, |i, j| rows[i][j])
    })
}

/// Orthonormal null-space basis of the constraint matrix (columns),
/// via SVD with the cutoff `1e-10 * sigma_max`.
fn null_basis() -> &'static DMatrix<f64> {
    static B: OnceLock<DMatrix<f64>> = OnceLock::new();
    B.get_or_init(|| {
        let m = constraint_matrix().clone();
        null_space(&m, 1e-10)
    })
}

/// Orthonormal null-space basis of `m` (columns), via a rank-revealing
/// factorization with singular-value cutoff `cutoff * sigma_max`: thin
/// SVD identifies the row space, and a column-pivoted QR of the
/// complementary projector spans what is left (thin SVD alone drops the
/// trailing right-singular directions of a wide matrix).
pub(crate) fn null_space(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    let svd = nalgebra::SVD::new(m.clone(), false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = cutoff * smax.max(1e-300);
    let mut proj = DMatrix::<f64>::identity(cols, cols);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            rank += 1;
            let v = vt.row(k).transpose();
            proj -= &v * v.transpose();
        }
    }
    let nullity = cols - rank;
    let q = proj.col_piv_qr().q();
    q.columns(0, nullity).into_owned()
}

/// Maximum rejection-sampling attempts before giving up. Acceptance of
/// an isotropic null-space draw is a couple of percent, and a rejected
/// attempt only costs a pointwise f64 structure build.
const MAX_ATTEMPTS: usize = 8192;

/// Condition-number cap on the sampled metric.
const COND_CAP: f64 = 1e4;

/// Draw a valid jet-chart sample: a degree-2 polynomial 3-form in the
/// constraint null space with lambda bounded away from zero and a
/// positive definite, well-conditioned metric. Deterministic in `seed`.
pub fn sample_typeiia_jet(seed: u64, scale: f64) -> Result<JetChartBackend> {
    if !(scale > 0.0) {
        return Err(Error::Config("scale must be positive".into()));
    }
    let basis = null_basis();
    let nullity = basis.ncols();
    let omega0 = standard_omega::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..MAX_ATTEMPTS {
        let z = DMatrix::from_fn(nullity, 1, |_, _| standard_normal(&mut rng));
        let u = basis * z;
        let mut flat: Vec<f64> = u.column(0).iter().cloned().collect();
        let norm0: f64 = flat[..20].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 < 1e-8 {
            continue;
        }
        let factor = scale / norm0;
        for v in &mut flat {
            *v *= factor;
        }
        let coeffs = JetCoefficients::from_flat(&flat);
        // the acceptance criteria only see the base-point values, so
        // screen with a cheap pointwise build before lifting to jets
        let phi0 = coeffs.phi_at(&[0.0; 6]);
        match build_structure(&omega0, &phi0) {
            Ok(st) => {
                if condition_number(&st.g) > COND_CAP {
                    continue;
                }
            }
            Err(Error::DegenerateForm { .. })
            | Err(Error::NotPositive)
            | Err(Error::NotPrimitive { .. })
            | Err(Error::SingularMetric) => continue,
            Err(e) => return Err(e),
        }
        return JetChartBackend::new(coeffs);
    }
    Err(Error::SamplingExhausted {
        attempts: MAX_ATTEMPTS,
    })
}

