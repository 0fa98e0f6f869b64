//! Index arithmetic for tensor products of factors with arbitrary dimensions.
//!
//! The first factor is the most significant digit of the flat index.

use faer::{c64, Mat};

pub fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Flat offsets of every multi-index over the given factor positions.
fn offsets(dims: &[usize], strides: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &o in &out {
            for i in 0..dims[p] {
                next.push(o + i * strides[p]);
            }
        }
        out = next;
    }
    out
}

/// Decomposition of a flat index into a selected part and its complement, so
/// that every flat index is `sel[a] + rest[r]` for a unique pair.
pub struct Split {
    pub sel: Vec<usize>,
    pub rest: Vec<usize>,
}

impl Split {
    pub fn new(dims: &[usize], positions: &[usize]) -> Self {
        let st = strides(dims);
        let complement: Vec<usize> = (0..dims.len()).filter(|k| !positions.contains(k)).collect();
        Split { sel: offsets(dims, &st, positions), rest: offsets(dims, &st, &complement) }
    }
}

/// `op` acting on the factors at `positions`, tensored with identities elsewhere.
pub fn embed_factors(op: &Mat<c64>, dims: &[usize], positions: &[usize]) -> Mat<c64> {
    let n = total_dim(dims);
    let mut out = Mat::<c64>::zeros(n, n);
    embed_add_into(&mut out, dims, positions, op, c64::new(1.0, 0.0));
    out
}

/// Adds `coeff * (op ⊗ 1)` into `target`.
pub fn embed_add_into(target: &mut Mat<c64>, dims: &[usize], positions: &[usize], op: &Mat<c64>, coeff: c64) {
    let split = Split::new(dims, positions);
    debug_assert_eq!(split.sel.len(), op.nrows());
    for (a, &sa) in split.sel.iter().enumerate() {
        for (b, &sb) in split.sel.iter().enumerate() {
            let v = op[(a, b)] * coeff;
            if v == c64::new(0.0, 0.0) {
                continue;
            }
            for &r in &split.rest {
                target[(sa + r, sb + r)] += v;
            }
        }
    }
}

/// Traces out the factors at `positions`, keeping the others in order.
pub fn partial_trace_factors(m: &Mat<c64>, dims: &[usize], positions: &[usize]) -> Mat<c64> {
    let keep: Vec<usize> = (0..dims.len()).filter(|k| !positions.contains(k)).collect();
    let split = Split::new(dims, &keep);
    let k = split.sel.len();
    Mat::from_fn(k, k, |a, b| {
        let (sa, sb) = (split.sel[a], split.sel[b]);
        split.rest.iter().map(|&r| m[(sa + r, sb + r)]).sum()
    })
}

/// Reorders factors so that new factor `k` is old factor `perm[k]`.
pub fn permute_factors(m: &Mat<c64>, dims: &[usize], perm: &[usize]) -> Mat<c64> {
    let map = permutation_index_map(dims, perm);
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(map[i], map[j])])
}

/// For every new flat index, the old flat index it reads from.
pub fn permutation_index_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let n = total_dim(dims);
    let mut map = vec![0usize; n];
    let mut digits = vec![0usize; dims.len()];
    for slot in map.iter_mut() {
        *slot = digits.iter().zip(perm).map(|(&dg, &p)| dg * old_strides[p]).sum();
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < new_dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    map
}
