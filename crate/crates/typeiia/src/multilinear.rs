//! Dense tensor algebra over a 6-dimensional fiber, generic in the
//! scalar type.
//!
//! Tensors are stored as full `6^rank` component arrays with an explicit
//! covariant/contravariant slot signature. Alternating forms keep their
//! fully antisymmetric coefficients directly (so a p-form evaluates on
//! basis vectors as `f(e_{i1},..,e_{ip}) = f[i1,..,ip]`, no hidden
//! factorials). At rank <= 6 the dense layout tops out at 6^6 = 46656
//! scalars, and antisymmetry stays a checkable property instead of a
//! storage constraint.

use crate::error::{Error, Result};
use crate::jets::Scalar;

/// Fiber dimension. Everything in this crate is 6-dimensional.
pub const DIM: usize = 6;

/// Slot variance: covariant (lower index) or contravariant (upper index).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Co,
    Con,
}

pub use Variance::{Co, Con};

/// Dense tensor of rank <= 6 over the 6-dimensional fiber.
#[derive(Clone, Debug)]
pub struct Tensor<S> {
    sig: Vec<Variance>,
    comps: Vec<S>,
}

/// `DIM^rank`.
pub fn size_of_rank(rank: usize) -> usize {
    DIM.pow(rank as u32)
}

/// Row-major strides: the first slot varies slowest.
pub fn strides(rank: usize) -> [usize; 7] {
    let mut s = [0usize; 7];
    for k in 0..rank {
        s[k] = DIM.pow((rank - 1 - k) as u32);
    }
    s
}

/// Decode `flat` into `rank` digits base DIM (first slot first).
pub fn digits(flat: usize, rank: usize, out: &mut [usize; 7]) {
    let mut rest = flat;
    for k in (0..rank).rev() {
        out[k] = rest % DIM;
        rest /= DIM;
    }
}

/// Sign of the permutation `perm` (of distinct entries), +1.0 or -1.0.
pub fn perm_sign(perm: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// All permutations of `0..n` with their signs (Heap's algorithm).
pub fn permutations_with_sign(n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut result = Vec::new();
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    result.push((a.clone(), 1.0));
    let mut sign = 1.0;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            sign = -sign;
            result.push((a.clone(), sign));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    result
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(sig: &[Variance]) -> Self {
        assert!(sig.len() <= 6, "tensor rank above 6");
        Tensor {
            sig: sig.to_vec(),
            comps: vec![S::zero(); size_of_rank(sig.len())],
        }
    }

    /// Rank-0 tensor holding one scalar.
    pub fn scalar(s: S) -> Self {
        Tensor {
            sig: Vec::new(),
            comps: vec![s],
        }
    }

    pub fn from_fn(sig: &[Variance], mut f: impl FnMut(&[usize]) -> S) -> Self {
        let rank = sig.len();
        let mut t = Tensor::zeros(sig);
        let mut idx = [0usize; 7];
        for flat in 0..t.comps.len() {
            digits(flat, rank, &mut idx);
            t.comps[flat] = f(&idx[..rank]);
        }
        t
    }

    pub fn rank(&self) -> usize {
        self.sig.len()
    }

    pub fn sig(&self) -> &[Variance] {
        &self.sig
    }

    pub fn comps(&self) -> &[S] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [S] {
        &mut self.comps
    }

    pub fn get(&self, idx: &[usize]) -> S {
        self.comps[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: S) {
        let f = self.flat(idx);
        self.comps[f] = v;
    }

    pub fn add_at(&mut self, idx: &[usize], v: S) {
        let f = self.flat(idx);
        self.comps[f] += v;
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let mut f = 0;
        for &i in idx {
            debug_assert!(i < DIM);
            f = f * DIM + i;
        }
        f
    }

    /// The scalar held by a rank-0 tensor.
    pub fn as_scalar(&self) -> S {
        assert_eq!(self.rank(), 0, "as_scalar on tensor of positive rank");
        self.comps[0]
    }

    pub fn scale_s(&self, c: &S) -> Self {
        let mut out = self.clone();
        for v in &mut out.comps {
            let mut acc = S::zero();
            S::mul_acc(&mut acc, v, c);
            *v = acc;
        }
        out
    }

    pub fn scale_f(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.comps {
            *v = v.scale(c);
        }
        out
    }

    /// Max absolute base-point value over all components.
    pub fn max_abs_value(&self) -> f64 {
        self.comps
            .iter()
            .map(|s| s.value().abs())
            .fold(0.0, f64::max)
    }

    /// Max absolute entry over all components and all Taylor coefficients.
    pub fn max_abs_all(&self) -> f64 {
        self.comps.iter().map(Scalar::max_abs).fold(0.0, f64::max)
    }

    /// Base-point values as a plain real tensor.
    pub fn values(&self) -> Tensor<f64> {
        Tensor {
            sig: self.sig.clone(),
            comps: self.comps.iter().map(Scalar::value).collect(),
        }
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot >= self.rank() {
            return Err(Error::Slot(format!(
                "slot {slot} out of range for rank {}",
                self.rank()
            )));
        }
        Ok(())
    }

    /// Trace over a covariant/contravariant slot pair; rank drops by two.
    pub fn contract(&self, slot_a: usize, slot_b: usize) -> Result<Tensor<S>> {
        self.check_slot(slot_a)?;
        self.check_slot(slot_b)?;
        if slot_a == slot_b {
            return Err(Error::Slot("contract requires distinct slots".into()));
        }
        if self.sig[slot_a] == self.sig[slot_b] {
            return Err(Error::Slot(
                "contract requires one covariant and one contravariant slot".into(),
            ));
        }
        let rank = self.rank();
        let mut out_sig = Vec::with_capacity(rank - 2);
        for (k, &v) in self.sig.iter().enumerate() {
            if k != slot_a && k != slot_b {
                out_sig.push(v);
            }
        }
        let st = strides(rank);
        let mut out = Tensor::zeros(&out_sig);
        let out_rank = rank - 2;
        let mut idx = [0usize; 7];
        for of in 0..out.comps.len() {
            digits(of, out_rank, &mut idx);
            let mut base = 0usize;
            let mut pos = 0usize;
            for k in 0..rank {
                if k != slot_a && k != slot_b {
                    base += st[k] * idx[pos];
                    pos += 1;
                }
            }
            let mut acc = S::zero();
            for m in 0..DIM {
                acc += self.comps[base + st[slot_a] * m + st[slot_b] * m];
            }
            out.comps[of] = acc;
        }
        Ok(out)
    }

    /// Contract `slot` (position preserved) against slot `m_slot` of the
    /// rank-2 tensor `m`; the slot takes the variance of `m`'s other slot.
    pub fn contract_slot_with(&self, slot: usize, m: &Tensor<S>, m_slot: usize) -> Result<Tensor<S>> {
        self.check_slot(slot)?;
        if m.rank() != 2 || m_slot > 1 {
            return Err(Error::Slot("contract_slot_with requires a rank-2 kernel".into()));
        }
        if m.sig[m_slot] == self.sig[slot] {
            return Err(Error::Slot(
                "contract_slot_with requires opposite variances on the contracted pair".into(),
            ));
        }
        let rank = self.rank();
        let st = strides(rank);
        let m_st = strides(2);
        let mut out_sig = self.sig.clone();
        out_sig[slot] = m.sig[1 - m_slot];
        let mut out = Tensor::zeros(&out_sig);
        let mut idx = [0usize; 7];
        for of in 0..out.comps.len() {
            digits(of, rank, &mut idx);
            let new_index = idx[slot];
            let base = of - st[slot] * new_index;
            let m_base = m_st[1 - m_slot] * new_index;
            let mut acc = S::zero();
            for mu in 0..DIM {
                S::mul_acc(
                    &mut acc,
                    &m.comps[m_base + m_st[m_slot] * mu],
                    &self.comps[base + st[slot] * mu],
                );
            }
            out.comps[of] = acc;
        }
        Ok(out)
    }

    /// Lower (with the metric) or raise (with its inverse) one slot in
    /// place. The kernel's first slot carries the new index.
    pub fn raise_lower(&self, slot: usize, metric: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_slot(slot)?;
        if metric.rank() != 2 {
            return Err(Error::Slot("raise_lower kernel must be rank 2".into()));
        }
        if metric.sig[1] == self.sig[slot] {
            return Err(Error::Slot(format!(
                "raise_lower variance mismatch at slot {slot}"
            )));
        }
        self.contract_slot_with(slot, metric, 1)
    }

    /// Full antisymmetrization with the 1/p! convention (a projection).
    pub fn alternate(&self) -> Result<Tensor<S>> {
        let rank = self.rank();
        if rank > 1 && self.sig.iter().any(|&v| v != self.sig[0]) {
            return Err(Error::Slot("alternate requires slots of one variance".into()));
        }
        if rank <= 1 {
            return Ok(self.clone());
        }
        let perms = permutations_with_sign(rank);
        let st = strides(rank);
        let inv_fact = 1.0 / perms.len() as f64;
        let mut out = Tensor::zeros(&self.sig);
        let mut idx = [0usize; 7];
        for of in 0..out.comps.len() {
            digits(of, rank, &mut idx);
            let mut acc = S::zero();
            for (perm, sign) in &perms {
                let mut sf = 0usize;
                for (k, &p) in perm.iter().enumerate() {
                    sf += st[k] * idx[p];
                }
                acc += self.comps[sf].scale(*sign);
            }
            out.comps[of] = acc.scale(inv_fact);
        }
        Ok(out)
    }

    /// Exhaustive antisymmetry check: max deviation under any slot
    /// transposition, over all stored Taylor coefficients.
    pub fn alternating_residual(&self) -> f64 {
        let rank = self.rank();
        if rank <= 1 {
            return 0.0;
        }
        let st = strides(rank);
        let mut worst = 0.0f64;
        let mut idx = [0usize; 7];
        for flat in 0..self.comps.len() {
            digits(flat, rank, &mut idx);
            for a in 0..rank {
                for b in (a + 1)..rank {
                    let swapped =
                        flat + st[a] * idx[b] + st[b] * idx[a] - st[a] * idx[a] - st[b] * idx[b];
                    let d = self.comps[flat] + self.comps[swapped];
                    worst = worst.max(d.max_abs());
                }
            }
        }
        worst
    }

    /// Swap two slots.
    pub fn swap_slots(&self, a: usize, b: usize) -> Tensor<S> {
        assert!(a < self.rank() && b < self.rank());
        if a == b {
            return self.clone();
        }
        let rank = self.rank();
        let st = strides(rank);
        let mut sig = self.sig.clone();
        sig.swap(a, b);
        let mut out = Tensor::zeros(&sig);
        let mut idx = [0usize; 7];
        for of in 0..out.comps.len() {
            digits(of, rank, &mut idx);
            let sf = of - st[a] * idx[a] - st[b] * idx[b] + st[a] * idx[b] + st[b] * idx[a];
            out.comps[of] = self.comps[sf];
        }
        out
    }

    /// Symmetric part in two slots: `T + T.swap(a,b)`, NOT halved (the
    /// `(i <-> j)` pattern used throughout the identity catalog).
    pub fn sym_pair(&self, a: usize, b: usize) -> Tensor<S> {
        let mut out = self.swap_slots(a, b);
        for (o, s) in out.comps.iter_mut().zip(self.comps.iter()) {
            *o += *s;
        }
        out
    }
}

impl<S: Scalar> std::ops::Add for &Tensor<S> {
    type Output = Tensor<S>;
    fn add(self, o: &Tensor<S>) -> Tensor<S> {
        assert_eq!(self.sig, o.sig, "tensor signature mismatch in add");
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(o.comps.iter()) {
            *a += *b;
        }
        out
    }
}

impl<S: Scalar> std::ops::Sub for &Tensor<S> {
    type Output = Tensor<S>;
    fn sub(self, o: &Tensor<S>) -> Tensor<S> {
        assert_eq!(self.sig, o.sig, "tensor signature mismatch in sub");
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(o.comps.iter()) {
            *a -= *b;
        }
        out
    }
}

impl<S: Scalar> std::ops::Neg for &Tensor<S> {
    type Output = Tensor<S>;
    fn neg(self) -> Tensor<S> {
        self.scale_f(-1.0)
    }
}

/// Einsum-style product contraction: contract the listed `(slot_a, slot_b)`
/// pairs of `a` and `b` without materializing the tensor product. Output
/// slots are the free slots of `a` followed by the free slots of `b`.
pub fn mul_contract<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    pairs: &[(usize, usize)],
) -> Tensor<S> {
    let (ra, rb, np) = (a.rank(), b.rank(), pairs.len());
    let mut a_used = [false; 7];
    let mut b_used = [false; 7];
    for &(sa, sb) in pairs {
        assert!(sa < ra && sb < rb, "contraction slot out of range");
        assert!(!a_used[sa] && !b_used[sb], "slot used twice in contraction");
        assert!(
            a.sig[sa] != b.sig[sb],
            "contraction requires opposite variances"
        );
        a_used[sa] = true;
        b_used[sb] = true;
    }
    let out_rank = ra + rb - 2 * np;
    assert!(out_rank <= 6, "contraction output rank above 6");

    let mut out_sig = Vec::with_capacity(out_rank);
    // stride contribution of each output digit / contraction digit
    let mut out_a = Vec::new();
    let mut out_b = Vec::new();
    let sa = strides(ra);
    let sb = strides(rb);
    for k in 0..ra {
        if !a_used[k] {
            out_sig.push(a.sig[k]);
            out_a.push(sa[k]);
            out_b.push(0usize);
        }
    }
    for k in 0..rb {
        if !b_used[k] {
            out_sig.push(b.sig[k]);
            out_a.push(0usize);
            out_b.push(sb[k]);
        }
    }
    let pair_strides: Vec<(usize, usize)> =
        pairs.iter().map(|&(x, y)| (sa[x], sb[y])).collect();

    let mut out = Tensor::zeros(&out_sig);
    let csize = size_of_rank(np);
    let mut idx = [0usize; 7];
    let mut cdx = [0usize; 7];
    for of in 0..out.comps.len() {
        digits(of, out_rank, &mut idx);
        let mut af0 = 0usize;
        let mut bf0 = 0usize;
        for k in 0..out_rank {
            af0 += out_a[k] * idx[k];
            bf0 += out_b[k] * idx[k];
        }
        let mut acc = S::zero();
        for cf in 0..csize {
            digits(cf, np, &mut cdx);
            let mut af = af0;
            let mut bf = bf0;
            for (k, &(pa, pb)) in pair_strides.iter().enumerate() {
                af += pa * cdx[k];
                bf += pb * cdx[k];
            }
            S::mul_acc(&mut acc, &a.comps[af], &b.comps[bf]);
        }
        out.comps[of] = acc;
    }
    out
}

/// Wedge product of alternating forms, in the antisymmetric-coefficient
/// convention: for a 1-form a and 2-form b,
/// `(a ^ b)_{jkp} = a_j b_{kp} + a_p b_{jk} + a_k b_{pj}`.
pub fn wedge<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (p, q) = (a.rank(), b.rank());
    if p + q > 6 {
        return Err(Error::Rank(format!("wedge of ranks {p} + {q} exceeds 6")));
    }
    if a.sig().iter().any(|&v| v != Co) || b.sig().iter().any(|&v| v != Co) {
        return Err(Error::Slot("wedge expects covariant forms".into()));
    }
    if p == 0 {
        return Ok(b.scale_s(&a.as_scalar()));
    }
    if q == 0 {
        return Ok(a.scale_s(&b.as_scalar()));
    }
    let rank = p + q;
    // (p,q)-shuffles: which output positions feed `a`, with the shuffle sign.
    let mut shuffles: Vec<(Vec<usize>, Vec<usize>, f64)> = Vec::new();
    for mask in 0u32..(1 << rank) {
        if mask.count_ones() as usize != p {
            continue;
        }
        let into_a: Vec<usize> = (0..rank).filter(|k| mask & (1 << k) != 0).collect();
        let into_b: Vec<usize> = (0..rank).filter(|k| mask & (1 << k) == 0).collect();
        let perm: Vec<usize> = into_a.iter().chain(into_b.iter()).copied().collect();
        shuffles.push((into_a, into_b, perm_sign(&perm)));
    }

    let sa = strides(p);
    let sb = strides(q);
    let mut out = Tensor::zeros(&vec![Co; rank]);
    let mut idx = [0usize; 7];
    for of in 0..out.comps().len() {
        digits(of, rank, &mut idx);
        let mut acc = S::zero();
        for (into_a, into_b, sign) in &shuffles {
            let mut af = 0usize;
            for (k, &pos) in into_a.iter().enumerate() {
                af += sa[k] * idx[pos];
            }
            let mut bf = 0usize;
            for (k, &pos) in into_b.iter().enumerate() {
                bf += sb[k] * idx[pos];
            }
            S::mul_acc(&mut acc, &a.comps()[af].scale(*sign), &b.comps()[bf]);
        }
        out.comps_mut()[of] = acc;
    }
    Ok(out)
}

/// Interior product: contract the vector into the first slot of a k-form.
pub fn interior<S: Scalar>(v: &Tensor<S>, f: &Tensor<S>) -> Result<Tensor<S>> {
    if f.rank() == 0 {
        return Err(Error::Rank("interior product of a 0-form".into()));
    }
    if v.rank() != 1 || v.sig()[0] != Con {
        return Err(Error::Slot("interior product expects a vector".into()));
    }
    Ok(mul_contract(v, f, &[(0, 0)]))
}

/// J-slot action following the index conventions
/// `(JV)^k = J^k_p V^p` and `(JW)_k = J^p_k W_p`.
pub fn apply_j<S: Scalar>(t: &Tensor<S>, slot: usize, j: &Tensor<S>) -> Result<Tensor<S>> {
    if j.rank() != 2 || j.sig() != [Con, Co] {
        return Err(Error::Slot("apply_j expects a (1,1) tensor".into()));
    }
    if slot >= t.rank() {
        return Err(Error::Slot(format!(
            "apply_j slot {slot} out of range for rank {}",
            t.rank()
        )));
    }
    match t.sig()[slot] {
        // T^{..Jk..} = J^k_p T^{..p..}: contract with J's lower slot.
        Con => t.contract_slot_with(slot, j, 1),
        // T_{..Jk..} = J^p_k T_{..p..}: contract with J's upper slot.
        Co => t.contract_slot_with(slot, j, 0),
    }
}

/// Pair a 5-form with the Levi-Civita symbol (eps^{123456} = +1):
/// `v^i = (1/5!) eps^{i a1..a5} f_{a1..a5}`. The result is a vector
/// density; the weight cancels inside the Hitchin normalization.
pub fn levi_civita_pairing<S: Scalar>(f5: &Tensor<S>) -> Result<Tensor<S>> {
    if f5.rank() != 5 || f5.sig().iter().any(|&v| v != Co) {
        return Err(Error::Rank("levi_civita_pairing expects a covariant 5-form".into()));
    }
    let mut out = Tensor::zeros(&[Con]);
    let inv = 1.0 / 120.0;
    for (perm, sign) in permutations_with_sign(6) {
        let val = f5.get(&perm[1..]);
        out.add_at(&perm[..1], val.scale(sign * inv));
    }
    Ok(out)
}

/// Basis vector e_i.
pub fn basis_vector<S: Scalar>(i: usize) -> Tensor<S> {
    let mut v = Tensor::zeros(&[Con]);
    v.set(&[i], S::one());
    v
}

/// Basis covector e^i.
pub fn basis_covector<S: Scalar>(i: usize) -> Tensor<S> {
    let mut v = Tensor::zeros(&[Co]);
    v.set(&[i], S::one());
    v
}

/// Kronecker delta as a (1,1) tensor.
pub fn kronecker<S: Scalar>() -> Tensor<S> {
    Tensor::from_fn(&[Con, Co], |idx| {
        if idx[0] == idx[1] {
            S::one()
        } else {
            S::zero()
        }
    })
}

/// Invert a rank-2 tensor by Gauss-Jordan elimination with value-based
/// pivoting; works for jet-valued matrices. The output signature has
/// both variances flipped and satisfies `out[i,k] t[k,j] = delta^i_j`.
pub fn invert_rank2<S: Scalar>(t: &Tensor<S>) -> Result<Tensor<S>> {
    if t.rank() != 2 {
        return Err(Error::Rank("invert_rank2 expects rank 2".into()));
    }
    let flip = |v: Variance| match v {
        Co => Con,
        Con => Co,
    };
    let out_sig = [flip(t.sig()[0]), flip(t.sig()[1])];

    let mut a: Vec<Vec<S>> = (0..DIM)
        .map(|i| (0..DIM).map(|j| t.get(&[i, j])).collect())
        .collect();
    let mut inv: Vec<Vec<S>> = (0..DIM)
        .map(|i| {
            (0..DIM)
                .map(|j| if i == j { S::one() } else { S::zero() })
                .collect()
        })
        .collect();

    for col in 0..DIM {
        let pivot_row = (col..DIM)
            .max_by(|&r1, &r2| {
                a[r1][col]
                    .value()
                    .abs()
                    .partial_cmp(&a[r2][col].value().abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot_row][col].value().abs() < 1e-300 {
            return Err(Error::SingularMetric);
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pinv = a[col][col].try_recip().map_err(|_| Error::SingularMetric)?;
        for j in 0..DIM {
            let mut acc = S::zero();
            S::mul_acc(&mut acc, &a[col][j], &pinv);
            a[col][j] = acc;
            let mut acc = S::zero();
            S::mul_acc(&mut acc, &inv[col][j], &pinv);
            inv[col][j] = acc;
        }
        for r in 0..DIM {
            if r == col {
                continue;
            }
            let factor = a[r][col];
            for j in 0..DIM {
                let mut acc = S::zero();
                S::mul_acc(&mut acc, &factor, &a[col][j]);
                a[r][j] -= acc;
                let mut acc = S::zero();
                S::mul_acc(&mut acc, &factor, &inv[col][j]);
                inv[r][j] -= acc;
            }
        }
    }

    let mut out = Tensor::zeros(&out_sig);
    for i in 0..DIM {
        for j in 0..DIM {
            out.set(&[i, j], inv[i][j]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Jet2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_tensor(sig: &[Variance], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(sig, |_| rng.gen_range(-1.0..1.0))
    }

    fn random_form(rank: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        random_tensor(&vec![Co; rank], rng).alternate().unwrap()
    }

    /// Euclidean metric for round-trip tests.
    fn euclid() -> (Tensor<f64>, Tensor<f64>) {
        let g = Tensor::from_fn(&[Co, Co], |i| if i[0] == i[1] { 1.0 } else { 0.0 });
        let ginv = Tensor::from_fn(&[Con, Con], |i| if i[0] == i[1] { 1.0 } else { 0.0 });
        (g, ginv)
    }

    fn assert_close(a: &Tensor<f64>, b: &Tensor<f64>, tol: f64) {
        assert_eq!(a.sig(), b.sig());
        let scale = 1.0f64.max(a.max_abs_value()).max(b.max_abs_value());
        let d = (a - b).max_abs_value();
        assert!(d <= tol * scale, "residual {d} above {tol}");
    }

    #[test]
    fn contract_inverse_pair_gives_kronecker() {
        let mut r = rng(1);
        // random symmetric positive-definite-ish g
        let a = random_tensor(&[Co, Co], &mut r);
        let mut g = Tensor::zeros(&[Co, Co]);
        for i in 0..DIM {
            for j in 0..DIM {
                let mut v = 0.5 * (a.get(&[i, j]) + a.get(&[j, i]));
                if i == j {
                    v += 4.0;
                }
                g.set(&[i, j], v);
            }
        }
        let ginv = invert_rank2(&g).unwrap();
        let delta = mul_contract(&ginv, &g, &[(1, 0)]);
        assert_close(&delta, &kronecker(), 1e-12);
        // full trace of the pair = dimension
        let tr = delta.contract(0, 1).unwrap().as_scalar();
        assert!((tr - 6.0).abs() < 1e-12);
    }

    #[test]
    fn contract_slot_errors() {
        let t: Tensor<f64> = Tensor::zeros(&[Co, Co, Con]);
        assert!(matches!(t.contract(0, 1), Err(Error::Slot(_))));
        assert!(matches!(t.contract(0, 7), Err(Error::Slot(_))));
        assert!(matches!(t.contract(1, 1), Err(Error::Slot(_))));
    }

    #[test]
    fn trace_against_brute_force_loop() {
        let mut r = rng(2);
        let t = random_tensor(&[Con, Co, Co], &mut r);
        let traced = t.contract(0, 2).unwrap();
        // independent 6^3 loop oracle
        for j in 0..DIM {
            let mut acc = 0.0;
            for m in 0..DIM {
                acc += t.get(&[m, j, m]);
            }
            assert!((traced.get(&[j]) - acc).abs() <= 1e-12);
        }
    }

    #[test]
    fn raise_lower_round_trip() {
        let mut r = rng(3);
        let (g, ginv) = euclid();
        // non-trivial metric: euclid + perturbation, still invertible
        let mut gp = g.clone();
        for i in 0..DIM {
            for j in 0..DIM {
                let v = gp.get(&[i, j]) + 0.1 * ((i * 7 + j * 3) as f64).sin();
                gp.set(&[i, j], 0.5 * (v + gp.get(&[j, i])));
            }
        }
        let gp = {
            let mut s = gp.clone();
            for i in 0..DIM {
                for j in 0..DIM {
                    s.set(&[i, j], 0.5 * (gp.get(&[i, j]) + gp.get(&[j, i])));
                }
            }
            s
        };
        let gpinv = invert_rank2(&gp).unwrap();
        let t = random_tensor(&[Con, Co, Co], &mut r);
        for slot in 0..3 {
            let (down, up) = if t.sig()[slot] == Con {
                (&gp, &gpinv)
            } else {
                (&gpinv, &gp)
            };
            let lowered = t.raise_lower(slot, down).unwrap();
            let back = lowered.raise_lower(slot, up).unwrap();
            assert_close(&back, &t, 1e-12);
        }
        let _ = (g, ginv);
    }

    #[test]
    fn raise_lower_variance_mismatch() {
        let (g, _) = euclid();
        let t: Tensor<f64> = Tensor::zeros(&[Co, Co]);
        assert!(matches!(t.raise_lower(0, &g), Err(Error::Slot(_))));
    }

    #[test]
    fn alternate_is_projection() {
        let mut r = rng(4);
        let t = random_tensor(&[Co, Co, Co], &mut r);
        let a1 = t.alternate().unwrap();
        let a2 = a1.alternate().unwrap();
        assert_close(&a2, &a1, 1e-14);
        assert!(a1.alternating_residual() < 1e-13);
    }

    #[test]
    fn alternate_kills_symmetric() {
        let mut r = rng(5);
        let raw = random_tensor(&[Co, Co], &mut r);
        let sym = Tensor::from_fn(&[Co, Co], |i| {
            0.5 * (raw.get(&[i[0], i[1]]) + raw.get(&[i[1], i[0]]))
        });
        assert!(sym.alternate().unwrap().max_abs_value() < 1e-15);
    }

    #[test]
    fn alternate_matches_permutation_oracle() {
        let mut r = rng(6);
        let t = random_tensor(&[Co, Co, Co], &mut r);
        let alt = t.alternate().unwrap();
        let oracle = Tensor::from_fn(&[Co, Co, Co], |i| {
            let mut acc = 0.0;
            for (p, sign) in permutations_with_sign(3) {
                acc += sign * t.get(&[i[p[0]], i[p[1]], i[p[2]]]);
            }
            acc / 6.0
        });
        assert_close(&alt, &oracle, 1e-14);
    }

    #[test]
    fn alternate_mixed_variance_rejected() {
        let t: Tensor<f64> = Tensor::zeros(&[Co, Con]);
        assert!(matches!(t.alternate(), Err(Error::Slot(_))));
    }

    #[test]
    fn wedge_basis_covectors() {
        let e1: Tensor<f64> = basis_covector(0);
        let e2: Tensor<f64> = basis_covector(1);
        let w = wedge(&e1, &e2).unwrap();
        assert_eq!(w.get(&[0, 1]), 1.0);
        assert_eq!(w.get(&[1, 0]), -1.0);
        assert_eq!(w.get(&[0, 0]), 0.0);
    }

    #[test]
    fn wedge_graded_symmetry() {
        let mut r = rng(7);
        for (p, q) in [(1, 1), (1, 2), (2, 2), (2, 3), (1, 4)] {
            let a = random_form(p, &mut r);
            let b = random_form(q, &mut r);
            let ab = wedge(&a, &b).unwrap();
            let ba = wedge(&b, &a).unwrap();
            let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
            assert_close(&ab, &ba.scale_f(sign), 1e-13);
        }
    }

    #[test]
    fn wedge_one_two_matches_cyclic_expansion() {
        let mut r = rng(8);
        let a = random_form(1, &mut r);
        let b = random_form(2, &mut r);
        let w = wedge(&a, &b).unwrap();
        let oracle = Tensor::from_fn(&[Co, Co, Co], |i| {
            let (j, k, p) = (i[0], i[1], i[2]);
            a.get(&[j]) * b.get(&[k, p])
                + a.get(&[p]) * b.get(&[j, k])
                + a.get(&[k]) * b.get(&[p, j])
        });
        assert_close(&w, &oracle, 1e-14);
    }

    #[test]
    fn wedge_output_is_alternating() {
        let mut r = rng(9);
        let a = random_form(2, &mut r);
        let b = random_form(3, &mut r);
        let w = wedge(&a, &b).unwrap();
        assert_close(&w.alternate().unwrap(), &w, 1e-13);
    }

    #[test]
    fn wedge_rank_overflow() {
        let a: Tensor<f64> = Tensor::zeros(&[Co, Co, Co]);
        let b: Tensor<f64> = Tensor::zeros(&[Co, Co, Co, Co]);
        assert!(matches!(wedge(&a, &b), Err(Error::Rank(_))));
    }

    #[test]
    fn interior_basis() {
        let e1v: Tensor<f64> = basis_vector(0);
        let w = wedge(&basis_covector(0), &basis_covector(1)).unwrap();
        let res = interior(&e1v, &w).unwrap();
        assert_close(&res, &basis_covector(1), 1e-15);
    }

    #[test]
    fn interior_twice_vanishes() {
        let mut r = rng(10);
        let f = random_form(3, &mut r);
        let v = Tensor::from_fn(&[Con], |_| r.gen_range(-1.0..1.0));
        let once = interior(&v, &f).unwrap();
        let twice = interior(&v, &once).unwrap();
        assert!(twice.max_abs_value() < 1e-13);
    }

    #[test]
    fn interior_rank_zero_rejected() {
        let v: Tensor<f64> = basis_vector(0);
        let s = Tensor::scalar(1.0);
        assert!(matches!(interior(&v, &s), Err(Error::Rank(_))));
    }

    /// Standard almost-complex structure J0: e1 -> e2, e2 -> -e1, ...
    fn standard_j() -> Tensor<f64> {
        let mut j = Tensor::zeros(&[Con, Co]);
        for a in 0..3 {
            j.set(&[2 * a + 1, 2 * a], 1.0);
            j.set(&[2 * a, 2 * a + 1], -1.0);
        }
        j
    }

    #[test]
    fn apply_j_twice_is_minus_one() {
        let mut r = rng(11);
        let j = standard_j();
        let t = random_tensor(&[Co, Con, Co], &mut r);
        for slot in 0..3 {
            let once = apply_j(&t, slot, &j).unwrap();
            let twice = apply_j(&once, slot, &j).unwrap();
            assert_close(&twice, &t.scale_f(-1.0), 1e-14);
        }
    }

    #[test]
    fn apply_j_covariant_convention() {
        // W_{Jk} = J^p_k W_p: for k = 0, picks J^1_0 = ... standard: (JW)_0 = J^p_0 W_p = J^1_0? No:
        // standard_j has J^1_0 = 0, J^2_1? Check numerically against the definition instead.
        let j = standard_j();
        let mut r = rng(12);
        let w = random_tensor(&[Co], &mut r);
        let jw = apply_j(&w, 0, &j).unwrap();
        for k in 0..DIM {
            let mut acc = 0.0;
            for p in 0..DIM {
                acc += j.get(&[p, k]) * w.get(&[p]);
            }
            assert!((jw.get(&[k]) - acc).abs() < 1e-15);
        }
        let v = random_tensor(&[Con], &mut r);
        let jv = apply_j(&v, 0, &j).unwrap();
        for k in 0..DIM {
            let mut acc = 0.0;
            for p in 0..DIM {
                acc += j.get(&[k, p]) * v.get(&[p]);
            }
            assert!((jv.get(&[k]) - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn apply_j_commutes_with_alternation_on_two_forms() {
        let mut r = rng(13);
        let j = standard_j();
        let t = random_tensor(&[Co, Co], &mut r);
        // Alt(J t) where J hits both slots == J Alt(t) on both slots
        let both = |x: &Tensor<f64>| {
            let a = apply_j(x, 0, &j).unwrap();
            apply_j(&a, 1, &j).unwrap()
        };
        let lhs = both(&t).alternate().unwrap();
        let rhs = both(&t.alternate().unwrap());
        assert_close(&lhs, &rhs, 1e-14);
    }

    #[test]
    fn levi_civita_convention() {
        // e^2^e^3^e^4^e^5^e^6 pairs to +e_1.
        let mut f: Tensor<f64> = Tensor::zeros(&[Co; 5]);
        for (p, sign) in permutations_with_sign(5) {
            let idx: Vec<usize> = p.iter().map(|&k| k + 1).collect();
            f.set(&idx, sign);
        }
        let v = levi_civita_pairing(&f).unwrap();
        assert!((v.get(&[0]) - 1.0).abs() < 1e-14);
        for i in 1..DIM {
            assert!(v.get(&[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn levi_civita_repeated_covector_vanishes() {
        let e1: Tensor<f64> = basis_covector(0);
        let e2 = basis_covector(1);
        let e3 = basis_covector(2);
        let w = wedge(
            &wedge(&wedge(&wedge(&e1, &e2).unwrap(), &e3).unwrap(), &e1).unwrap(),
            &basis_covector(4),
        )
        .unwrap();
        assert!(w.max_abs_value() < 1e-15);
        let v = levi_civita_pairing(&w).unwrap();
        assert!(v.max_abs_value() < 1e-15);
    }

    #[test]
    fn levi_civita_matches_permutation_oracle() {
        let mut r = rng(14);
        let f = random_form(5, &mut r);
        let v = levi_civita_pairing(&f).unwrap();
        for i in 0..DIM {
            let mut acc = 0.0;
            for (p, _) in permutations_with_sign(5) {
                // enumerate all (a1..a5); eps sign computed from [i, a..]
                let others: Vec<usize> = (0..DIM).filter(|&k| k != i).collect();
                let a: Vec<usize> = p.iter().map(|&k| others[k]).collect();
                let mut full = vec![i];
                full.extend(&a);
                acc += perm_sign(&full) * f.get(&a) / 120.0;
            }
            assert!((v.get(&[i]) - acc).abs() < 1e-12 * 720.0);
        }
    }

    #[test]
    fn real_embeds_in_jets() {
        // identical results whether scalars are f64 or constant jets
        let mut r = rng(15);
        let a = random_form(2, &mut r);
        let b = random_form(3, &mut r);
        let real = wedge(&a, &b).unwrap();
        let lift = |t: &Tensor<f64>| {
            Tensor::<Jet2>::from_fn(t.sig(), |idx| Jet2::constant(t.get(idx)))
        };
        let jw = wedge(&lift(&a), &lift(&b)).unwrap();
        assert_close(&jw.values(), &real, 0.0);
        assert!(jw.max_abs_all() == jw.max_abs_value());
    }

    #[test]
    fn mul_contract_linear_in_argument() {
        let mut r = rng(16);
        let a = random_tensor(&[Con, Co], &mut r);
        let b = random_tensor(&[Con, Co, Co], &mut r);
        let c = random_tensor(&[Con, Co, Co], &mut r);
        let lhs = mul_contract(&a, &(&b + &c), &[(0, 1)]);
        let rhs = &mul_contract(&a, &b, &[(0, 1)]) + &mul_contract(&a, &c, &[(0, 1)]);
        assert_close(&lhs, &rhs, 1e-14);
        let scaled = mul_contract(&a.scale_f(2.5), &b, &[(0, 1)]);
        assert_close(&scaled, &mul_contract(&a, &b, &[(0, 1)]).scale_f(2.5), 1e-14);
    }
}
