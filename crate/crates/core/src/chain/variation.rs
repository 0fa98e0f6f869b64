use crate::error::{domain, Result};
use crate::kernel::dense::re;
use crate::kernel::operator::{check_cap, op_norm};
use crate::kernel::tensor::embed_add_into;
use crate::kernel::LocalOperator;
use faer::{c64, Mat};

/// `var_j(Q) = ‖Θ_j(Q ⊗ 1) - Q ⊗ 1‖` in the doubled algebra, where `Θ_j`
/// exchanges the two copies at every site `≥ j`.
///
/// `Q` must be supported in `[0, ∞)`. Copy-two sites below `j` carry only
/// identities and are dropped.
pub fn variation_seminorm(q: &LocalOperator, j: i64) -> Result<f64> {
    if j < 1 {
        return Err(domain(format!("variation index must be positive, got {j}")));
    }
    let s = q.support();
    if s.is_empty() || s.hi < j {
        return Ok(0.0);
    }
    if s.lo < 0 {
        return Err(domain(format!("support {s} is not inside [0, ∞)")));
    }
    let d = q.site_dim();
    let a = (j - s.lo).max(0) as usize;
    let c = (s.hi - j.max(s.lo) + 1) as usize;
    check_cap("doubled algebra", d, a + 2 * c, 1)?;
    let dims = vec![d; a + 2 * c];
    let n = dims.iter().product();
    let mut diff = Mat::<c64>::zeros(n, n);
    let orig: Vec<usize> = (0..a + c).collect();
    let swapped: Vec<usize> = (0..a).chain(a + c..a + 2 * c).collect();
    embed_add_into(&mut diff, &dims, &swapped, q.matrix(), re(1.0));
    embed_add_into(&mut diff, &dims, &orig, q.matrix(), re(-1.0));
    Ok(op_norm(&diff))
}

/// `‖Q‖_θ = max_{1 ≤ j ≤ m+1} var_j(Q) / θ^j` for `Q` on `[0, m]`.
pub fn theta_norm(q: &LocalOperator, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(domain(format!("theta must lie in (0, 1), got {theta}")));
    }
    let m = q.support().hi.max(0);
    let mut best = 0.0f64;
    for j in 1..=m + 1 {
        best = best.max(variation_seminorm(q, j)? / theta.powi(j as i32));
    }
    Ok(best)
}
