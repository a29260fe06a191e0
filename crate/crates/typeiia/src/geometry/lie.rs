//! Left-invariant backend: a nilpotent Lie algebra with structure
//! constants, invariant symplectic and 3-forms, the Koszul connection,
//! and the Chevalley-Eilenberg differential.
//!
//! Nilpotency implies unimodularity, so the pointwise codifferential
//! formula agrees with the global adjoint on the compact quotient and
//! flow runs stay geometrically meaningful.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::jet_chart::{null_space, standard_normal};
use super::Backend;
use crate::error::{Error, Result};
use crate::multilinear::{digits, Co, Con, Tensor, DIM};
use crate::typeiia::{build_structure, condition_number, lambda_contraction, TypeIiaStructure};

/// Structure constants `c^k_{ij}` plus a name; the raw material for a
/// backend before forms are chosen.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LieAlgebraSkeleton {
    pub name: String,
    /// `c[k][i][j]` = coefficient of `e_k` in `[e_i, e_j]`.
    pub c: Vec<Vec<Vec<f64>>>,
}

impl LieAlgebraSkeleton {
    /// Build from a sparse bracket list `[e_i, e_j] = sum coeff * e_k`.
    pub fn from_brackets(name: &str, brackets: &[(usize, usize, usize, f64)]) -> Self {
        let mut c = vec![vec![vec![0.0; DIM]; DIM]; DIM];
        for &(i, j, k, v) in brackets {
            c[k][i][j] += v;
            c[k][j][i] -= v;
        }
        LieAlgebraSkeleton {
            name: name.to_string(),
            c,
        }
    }

    pub fn tensor(&self) -> Result<Tensor<f64>> {
        if self.c.len() != DIM
            || self.c.iter().any(|a| a.len() != DIM)
            || self.c.iter().flatten().any(|a| a.len() != DIM)
        {
            return Err(Error::Config(format!(
                "algebra {}: structure constants must be 6x6x6",
                self.name
            )));
        }
        Ok(Tensor::from_fn(&[Con, Co, Co], |x| {
            self.c[x[0]][x[1]][x[2]]
        }))
    }

    /// Antisymmetry, Jacobi, and nilpotency checks.
    pub fn validate(&self) -> Result<Tensor<f64>> {
        let c = self.tensor()?;
        for k in 0..DIM {
            for i in 0..DIM {
                for j in 0..DIM {
                    if (c.get(&[k, i, j]) + c.get(&[k, j, i])).abs() > 1e-12 {
                        return Err(Error::InvalidAlgebra(format!(
                            "{}: c^{k}_({i}{j}) not antisymmetric",
                            self.name
                        )));
                    }
                }
            }
        }
        // Jacobi: sum_m c^m_{ij} c^l_{mk} + cyclic(i,j,k) = 0
        for i in 0..DIM {
            for j in 0..DIM {
                for k in 0..DIM {
                    for l in 0..DIM {
                        let mut acc = 0.0;
                        for m in 0..DIM {
                            acc += c.get(&[m, i, j]) * c.get(&[l, m, k])
                                + c.get(&[m, j, k]) * c.get(&[l, m, i])
                                + c.get(&[m, k, i]) * c.get(&[l, m, j]);
                        }
                        if acc.abs() > 1e-10 {
                            return Err(Error::InvalidAlgebra(format!(
                                "{}: Jacobi identity fails",
                                self.name
                            )));
                        }
                    }
                }
            }
        }
        if !is_nilpotent(&c) {
            return Err(Error::InvalidAlgebra(format!(
                "{}: not nilpotent",
                self.name
            )));
        }
        Ok(c)
    }
}

/// Lower central series by numerical rank: g_{k+1} = [g, g_k]. The
/// rank cutoff is absolute in the structure-constant scale; span
/// columns are unit singular vectors, so bracket columns stay O(|c|).
fn is_nilpotent(c: &Tensor<f64>) -> bool {
    let tol = 1e-8 * c.max_abs_value().max(1.0);
    let mut span = DMatrix::<f64>::identity(DIM, DIM);
    for _ in 0..DIM + 1 {
        if span.ncols() == 0 {
            return true;
        }
        // brackets of basis vectors with the current span
        let mut cols: Vec<f64> = Vec::new();
        let mut ncols = 0;
        for i in 0..DIM {
            for v in 0..span.ncols() {
                let mut w = [0.0; DIM];
                for k in 0..DIM {
                    for j in 0..DIM {
                        w[k] += c.get(&[k, i, j]) * span[(j, v)];
                    }
                }
                cols.extend_from_slice(&w);
                ncols += 1;
            }
        }
        let m = DMatrix::from_vec(DIM, ncols, cols);
        let svd = nalgebra::SVD::new(m.clone(), true, false);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank == 0 {
            return true;
        }
        let u = svd.u.expect("requested U");
        span = u.columns(0, rank).into_owned();
    }
    false
}

/// The Chevalley-Eilenberg differential on invariant forms:
/// `(d f)_{i0..ip} = sum_{a<b} (-1)^{a+b} c^m_{i_a i_b} f[m, rest]`.
pub fn ce_differential(c: &Tensor<f64>, f: &Tensor<f64>) -> Result<Tensor<f64>> {
    let p = f.rank();
    if p + 1 > 6 {
        return Err(Error::Rank("exterior derivative exceeds rank 6".into()));
    }
    let out_rank = p + 1;
    let mut out = Tensor::zeros(&vec![Co; out_rank]);
    let mut idx = [0usize; 7];
    let mut sub = [0usize; 7];
    for of in 0..out.comps().len() {
        digits(of, out_rank, &mut idx);
        let mut acc = 0.0;
        for a in 0..out_rank {
            for b in (a + 1)..out_rank {
                let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                let mut pos = 1;
                for (k, &i) in idx[..out_rank].iter().enumerate() {
                    if k != a && k != b {
                        sub[pos] = i;
                        pos += 1;
                    }
                }
                for m in 0..DIM {
                    sub[0] = m;
                    acc += sign * c.get(&[m, idx[a], idx[b]]) * f.get(&sub[..p]);
                }
            }
        }
        out.comps_mut()[of] = acc;
    }
    Ok(out)
}

/// Pfaffian of the antisymmetric matrix behind a 2-form (expansion
/// along the first row, recursive).
pub fn pfaffian(omega: &Tensor<f64>) -> f64 {
    fn pf(rows: &[usize], omega: &Tensor<f64>) -> f64 {
        if rows.is_empty() {
            return 1.0;
        }
        let i = rows[0];
        let mut acc = 0.0;
        for (pos, &j) in rows.iter().enumerate().skip(1) {
            let rest: Vec<usize> = rows[1..]
                .iter()
                .cloned()
                .filter(|&r| r != j)
                .collect();
            let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * omega.get(&[i, j]) * pf(&rest, omega);
        }
        acc
    }
    pf(&[0, 1, 2, 3, 4, 5], omega)
}

/// 2-form from its 15 upper-triangle coefficients (lexicographic pairs
/// i<j).
fn two_form_from_coords(x: &[f64]) -> Tensor<f64> {
    let mut om = Tensor::zeros(&[Co, Co]);
    let mut pos = 0;
    for i in 0..DIM {
        for j in (i + 1)..DIM {
            om.set(&[i, j], x[pos]);
            om.set(&[j, i], -x[pos]);
            pos += 1;
        }
    }
    om
}


/// 3-form from its 20 increasing-triple coefficients.
pub fn three_form_from_coords(x: &[f64]) -> Tensor<f64> {
    let mut phi = Tensor::zeros(&[Co, Co, Co]);
    for (t, tr) in super::jet_chart::TRIPLES.iter().enumerate() {
        for (perm, sign) in crate::multilinear::permutations_with_sign(3) {
            let idx = [tr[perm[0]], tr[perm[1]], tr[perm[2]]];
            phi.set(&idx, sign * x[t]);
        }
    }
    phi
}

pub fn three_form_coords(phi: &Tensor<f64>) -> [f64; 20] {
    let mut x = [0.0; 20];
    for (t, tr) in super::jet_chart::TRIPLES.iter().enumerate() {
        x[t] = phi.get(tr);
    }
    x
}

/// Closed 2-forms of the algebra, as a null-space basis (15 x r).
fn closed_two_form_basis(c: &Tensor<f64>) -> DMatrix<f64> {
    // rows: the 20 components of d omega over the 15 coefficients
    let mut m = DMatrix::zeros(20, 15);
    for col in 0..15 {
        let mut x = vec![0.0; 15];
        x[col] = 1.0;
        let dom = ce_differential(c, &two_form_from_coords(&x)).unwrap();
        for (row, tr) in super::jet_chart::TRIPLES.iter().enumerate() {
            m[(row, col)] = dom.get(tr);
        }
    }
    null_space(&m, 1e-10)
}

/// CE-closed 3-forms of the algebra (20 x r basis).
fn closed_three_form_basis(c: &Tensor<f64>) -> DMatrix<f64> {
    let quads: Vec<[usize; 4]> = {
        let mut v = Vec::new();
        for a in 0..DIM {
            for b in (a + 1)..DIM {
                for e in (b + 1)..DIM {
                    for d in (e + 1)..DIM {
                        v.push([a, b, e, d]);
                    }
                }
            }
        }
        v
    };
    let mut m = DMatrix::zeros(15, 20);
    for col in 0..20 {
        let mut x = [0.0; 20];
        x[col] = 1.0;
        let phi = three_form_from_coords(&x);
        let dphi = ce_differential(c, &phi).unwrap();
        for (row, q) in quads.iter().enumerate() {
            m[(row, col)] = dphi.get(q);
        }
    }
    null_space(&m, 1e-10)
}

/// Does the closed-2-form space contain any nondegenerate element?
/// The Pfaffian is a cubic form on that space; it vanishes identically
/// iff all its polarization coefficients vanish.
pub fn admits_symplectic_form(skeleton: &LieAlgebraSkeleton) -> Result<bool> {
    let c = skeleton.validate()?;
    let basis = closed_two_form_basis(&c);
    let r = basis.ncols();
    if r == 0 {
        return Ok(false);
    }
    let form_at = |coords: &[f64]| {
        let x: Vec<f64> = (0..15)
            .map(|row| {
                (0..r)
                    .map(|col| basis[(row, col)] * coords[col])
                    .sum::<f64>()
            })
            .collect();
        pfaffian(&two_form_from_coords(&x))
    };
    let unit = |k: usize| {
        let mut u = vec![0.0; r];
        u[k] = 1.0;
        u
    };
    let mut max_coeff = 0.0f64;
    for a in 0..r {
        for b in a..r {
            for e in b..r {
                // symmetric trilinear polarization of the cubic
                let (ua, ub, ue) = (unit(a), unit(b), unit(e));
                let add = |x: &[f64], y: &[f64]| -> Vec<f64> {
                    x.iter().zip(y).map(|(p, q)| p + q).collect()
                };
                let f = |v: &[f64]| form_at(v);
                let pol = f(&add(&add(&ua, &ub), &ue)) - f(&add(&ua, &ub)) - f(&add(&ua, &ue))
                    - f(&add(&ub, &ue))
                    + f(&ua)
                    + f(&ub)
                    + f(&ue);
                max_coeff = max_coeff.max(pol.abs() / 6.0);
            }
        }
    }
    Ok(max_coeff > 1e-10)
}

/// Left-invariant Type IIA data over a nilpotent Lie algebra.
pub struct LieAlgebraBackend {
    pub name: String,
    c: Tensor<f64>,
    structure: TypeIiaStructure<f64>,
    gamma: Tensor<f64>,
}

impl LieAlgebraBackend {
    /// Assemble a backend from explicitly chosen invariant forms,
    /// validating closedness under the CE differential.
    pub fn with_forms(
        skeleton: &LieAlgebraSkeleton,
        omega: &Tensor<f64>,
        phi: &Tensor<f64>,
    ) -> Result<Self> {
        let c = skeleton.validate()?;
        let scale_o = omega.max_abs_value().max(1e-300);
        if ce_differential(&c, omega)?.max_abs_value() > 1e-10 * scale_o {
            return Err(Error::InvalidState("omega is not CE-closed".into()));
        }
        let scale_p = phi.max_abs_value().max(1e-300);
        if ce_differential(&c, phi)?.max_abs_value() > 1e-10 * scale_p {
            return Err(Error::InvalidState("phi is not CE-closed".into()));
        }
        let structure = build_structure(omega, phi)?;
        let gamma = koszul_gamma(&c, &structure.g, &structure.g_inv);
        Ok(LieAlgebraBackend {
            name: skeleton.name.clone(),
            c,
            structure,
            gamma,
        })
    }

    /// Rebuild with a new 3-form, reusing the algebra and omega (the
    /// flow integrator's inner step).
    pub fn with_phi(&self, phi: &Tensor<f64>) -> Result<Self> {
        let structure = build_structure(&self.structure.omega, phi)?;
        let gamma = koszul_gamma(&self.c, &structure.g, &structure.g_inv);
        Ok(LieAlgebraBackend {
            name: self.name.clone(),
            c: self.c.clone(),
            structure,
            gamma,
        })
    }

    pub fn constants(&self) -> &Tensor<f64> {
        &self.c
    }

    /// Bracket of invariant vectors: `[X,Y]^k = c^k_{ij} X^i Y^j`.
    pub fn bracket(&self, x: &Tensor<f64>, y: &Tensor<f64>) -> Tensor<f64> {
        let t = crate::multilinear::mul_contract(&self.c, x, &[(1, 0)]);
        crate::multilinear::mul_contract(&t, y, &[(1, 0)])
    }

    pub fn constraint_residuals(&self) -> (f64, f64) {
        let phi = &self.structure.phi;
        let scale = phi.max_abs_value().max(1e-300);
        let closed = ce_differential(&self.c, phi)
            .map(|d| d.max_abs_value())
            .unwrap_or(f64::INFINITY);
        let prim = lambda_contraction(phi, &self.structure.omega_inv)
            .map(|l| l.max_abs_value())
            .unwrap_or(f64::INFINITY);
        (closed / scale, prim / scale)
    }
}

/// Koszul formula on invariant fields:
/// `2 g(nabla_i e_j, e_k) = c_{ij,k} - c_{jk,i} + c_{ki,j}` with
/// `c_{ij,k} = c^m_{ij} g_{mk}`.
fn koszul_gamma(c: &Tensor<f64>, g: &Tensor<f64>, g_inv: &Tensor<f64>) -> Tensor<f64> {
    let low = Tensor::from_fn(&[Co, Co, Co], |x| {
        let (i, j, k) = (x[0], x[1], x[2]);
        let mut acc = 0.0;
        for m in 0..DIM {
            acc += c.get(&[m, i, j]) * g.get(&[m, k]) - c.get(&[m, j, k]) * g.get(&[m, i])
                + c.get(&[m, k, i]) * g.get(&[m, j]);
        }
        0.5 * acc
    });
    // Gamma^n_{ij} = g^{nk} low_{ijk}
    Tensor::from_fn(&[Con, Co, Co], |x| {
        let (n, i, j) = (x[0], x[1], x[2]);
        let mut acc = 0.0;
        for k in 0..DIM {
            acc += g_inv.get(&[n, k]) * low.get(&[i, j, k]);
        }
        acc
    })
}

impl Backend for LieAlgebraBackend {
    type S = f64;

    fn structure(&self) -> &TypeIiaStructure<f64> {
        &self.structure
    }

    fn gamma(&self) -> &Tensor<f64> {
        &self.gamma
    }

    fn partial(&self, t: &Tensor<f64>) -> Tensor<f64> {
        let mut sig = vec![Co];
        sig.extend_from_slice(t.sig());
        Tensor::zeros(&sig)
    }

    fn exterior_d(&self, f: &Tensor<f64>) -> Result<Tensor<f64>> {
        ce_differential(&self.c, f)
    }

    fn bracket_constants(&self) -> Option<&Tensor<f64>> {
        Some(&self.c)
    }
}

// Isotropic draws land in the positive cone only a fraction of a
// percent of the time on the non-abelian catalog algebras, so the
// attempt budget is generous; a rejection costs microseconds.
const MAX_ATTEMPTS: usize = 16384;
const COND_CAP: f64 = 1e4;

/// Sample invariant admissible data on a nilpotent algebra: a closed
/// nondegenerate omega and a closed primitive positive phi.
/// Deterministic in `seed`.
pub fn sample_typeiia_invariant(
    skeleton: &LieAlgebraSkeleton,
    seed: u64,
) -> Result<LieAlgebraBackend> {
    let c = skeleton.validate()?;
    if !admits_symplectic_form(skeleton)? {
        return Err(Error::NoSolution);
    }
    let omega_basis = closed_two_form_basis(&c);
    let r_o = omega_basis.ncols();
    let closed3 = closed_three_form_basis(&c);
    let r_c3 = closed3.ncols();
    let closed3_forms: Vec<Tensor<f64>> = (0..r_c3)
        .map(|k| {
            let coords: Vec<f64> = (0..20).map(|row| closed3[(row, k)]).collect();
            three_form_from_coords(&coords)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _attempt in 0..MAX_ATTEMPTS {
        // draw omega in the closed cone, normalized to unit sup norm
        let zo: Vec<f64> = (0..r_o).map(|_| standard_normal(&mut rng)).collect();
        let coords: Vec<f64> = (0..15)
            .map(|row| (0..r_o).map(|col| omega_basis[(row, col)] * zo[col]).sum())
            .collect();
        let mut omega = two_form_from_coords(&coords);
        let sup = omega.max_abs_value();
        if sup < 1e-8 {
            continue;
        }
        omega = omega.scale_f(1.0 / sup);
        // nondegeneracy with margin, so g stays well-conditioned
        if pfaffian(&omega).abs() < 1e-3 {
            continue;
        }
        let omega_inv = match crate::multilinear::invert_rank2(&omega) {
            Ok(oi) => oi,
            Err(_) => continue,
        };

        // primitivity rows restricted to the closed 3-form basis
        let mut prim = DMatrix::zeros(DIM, r_c3);
        for (k, f) in closed3_forms.iter().enumerate() {
            let lam = lambda_contraction(f, &omega_inv).unwrap();
            for i in 0..DIM {
                prim[(i, k)] = lam.get(&[i]);
            }
        }
        let phi_basis = null_space(&prim, 1e-10);
        let r_p = phi_basis.ncols();
        if r_p == 0 {
            continue;
        }
        let zp: Vec<f64> = (0..r_p).map(|_| standard_normal(&mut rng)).collect();
        let in_closed: Vec<f64> = (0..r_c3)
            .map(|row| (0..r_p).map(|col| phi_basis[(row, col)] * zp[col]).sum())
            .collect();
        let coords: Vec<f64> = (0..20)
            .map(|row| (0..r_c3).map(|k| closed3[(row, k)] * in_closed[k]).sum())
            .collect();
        let phi = three_form_from_coords(&coords);
        let sup = phi.max_abs_value();
        if sup < 1e-8 {
            continue;
        }
        let phi = phi.scale_f(1.0 / sup);

        match LieAlgebraBackend::with_forms(skeleton, &omega, &phi) {
            Ok(backend) => {
                if condition_number(&backend.structure.g) <= COND_CAP {
                    return Ok(backend);
                }
            }
            Err(Error::DegenerateForm { .. })
            | Err(Error::NotPositive)
            | Err(Error::NotPrimitive { .. })
            | Err(Error::SingularMetric) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SamplingExhausted {
        attempts: MAX_ATTEMPTS,
    })
}

/// Parse a JSON algebra catalog: a list of `{name, c[k][i][j]}`.
pub fn parse_catalog(json: &str) -> Result<Vec<LieAlgebraSkeleton>> {
    serde_json::from_str(json).map_err(|e| Error::Config(format!("bad algebra catalog: {e}")))
}

/// The built-in nilpotent catalog.
pub fn builtin_catalog() -> Vec<LieAlgebraSkeleton> {
    parse_catalog(include_str!("../../data/algebras.json")).expect("embedded catalog is valid")
}
