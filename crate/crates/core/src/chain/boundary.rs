use super::interaction::Interaction;
use crate::error::{domain, Result};
use crate::kernel::{Interval, LocalOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Half-chain `[1, ∞)`.
    Right,
    /// Half-chain `(-∞, -1]`.
    Left,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Terms of the half-chain meeting the first `n` sites.
    Surface,
    /// Terms of the half-chain neither left nor right of site `n`.
    Straddle,
}

/// Surface sums on a half-chain, evaluated on `window`.
///
/// Right side, with `I ⊂ [1, ∞)`:
/// * `Surface`: `Σ Φ(I)` over `I ∩ [1, n] ≠ ∅`;
/// * `Straddle`: `Σ Φ(I)` over `I ⊄ [1, n-1]` and `I ⊄ [n+1, ∞)`.
///
/// The left side is the mirror image under `x -> -x`. Terms are summed only if
/// they fit in `window`, which must cover every contributing term.
pub fn boundary_terms(
    phi: &Interaction,
    n: i64,
    side: Side,
    kind: BoundaryKind,
    window: Interval,
) -> Result<LocalOperator> {
    if n < 1 {
        return Err(domain(format!("boundary site must be at least 1, got {n}")));
    }
    match side {
        Side::Right => right_terms(phi, n, kind, window),
        Side::Left => Ok(right_terms(&phi.reflected(), n, kind, window.reflected())?.reflected()),
    }
}

fn right_terms(phi: &Interaction, n: i64, kind: BoundaryKind, window: Interval) -> Result<LocalOperator> {
    let reach = phi.range() as i64 - 1;
    let needed = match kind {
        BoundaryKind::Surface => Interval::new(1, n + reach),
        BoundaryKind::Straddle => Interval::new((n - reach).max(1), n + reach),
    };
    if !window.contains_interval(&needed) {
        return Err(domain(format!(
            "window {window} is too small: terms reach {needed}, a margin of {reach} sites beyond site {n} is required"
        )));
    }
    let half = Interval::new(1, window.hi.max(1));
    match kind {
        BoundaryKind::Surface => phi.sum_translates(window, |s| s[0] >= half.lo && s.iter().any(|&x| x <= n)),
        BoundaryKind::Straddle => straddle_in(phi, n, window, half.lo),
    }
}

/// `Σ Φ(I)` over `I` in `window` with `min I ≥ floor`, `I ⊄ (-∞, n-1]` and
/// `I ⊄ [n+1, ∞)`.
pub fn straddle_in(phi: &Interaction, n: i64, window: Interval, floor: i64) -> Result<LocalOperator> {
    phi.sum_translates(window, |s| {
        let lo = s[0];
        let hi = *s.last().unwrap();
        let inside_left = hi < n;
        let inside_right = lo > n;
        lo >= floor && !inside_left && !inside_right
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::dense::scaled;
    use crate::models::pauli;

    fn zz_plus_x() -> Interaction {
        Interaction::new(2, vec![(vec![0, 1], pauli::z().kron(&pauli::z())), (vec![0], scaled(&pauli::x(), 0.5))])
            .unwrap()
    }

    #[test]
    fn one_site_straddle_is_singleton() {
        let phi = Interaction::one_site(pauli::z()).unwrap();
        let w = boundary_terms(&phi, 3, Side::Right, BoundaryKind::Straddle, Interval::new(1, 5)).unwrap();
        let expect = LocalOperator::at_site(pauli::z(), 3).unwrap().embed(Interval::new(1, 5)).unwrap();
        assert!((w.matrix() - expect.matrix()).norm_l2() < 1e-14);
    }

    #[test]
    fn nearest_neighbour_straddle() {
        let zz = pauli::z().kron(&pauli::z());
        let phi = Interaction::new(2, vec![(vec![0, 1], zz.clone())]).unwrap();
        let win = Interval::new(1, 5);
        let w = boundary_terms(&phi, 3, Side::Right, BoundaryKind::Straddle, win).unwrap();
        let a = LocalOperator::new(zz.clone(), Interval::new(2, 3), 2).unwrap().embed(win).unwrap();
        let b = LocalOperator::new(zz, Interval::new(3, 4), 2).unwrap().embed(win).unwrap();
        assert!((w.matrix() - a.add(&b).unwrap().matrix()).norm_l2() < 1e-14);
    }

    #[test]
    fn surface_at_first_site() {
        let zz = pauli::z().kron(&pauli::z());
        let phi = Interaction::new(2, vec![(vec![0, 1], zz.clone())]).unwrap();
        let win = Interval::new(1, 6);
        let h = boundary_terms(&phi, 1, Side::Right, BoundaryKind::Surface, win).unwrap();
        let expect = LocalOperator::new(zz, Interval::new(1, 2), 2).unwrap().embed(win).unwrap();
        assert!((h.matrix() - expect.matrix()).norm_l2() < 1e-14);
    }

    #[test]
    fn window_too_small_names_margin() {
        let phi = zz_plus_x();
        match boundary_terms(&phi, 4, Side::Right, BoundaryKind::Straddle, Interval::new(1, 4)) {
            Err(crate::Error::Domain(msg)) => assert!(msg.contains("margin of 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn left_side_mirrors_right() {
        let phi = Interaction::new(2, vec![(vec![0, 1], pauli::x().kron(&pauli::z()))]).unwrap();
        let win = Interval::new(-5, -1);
        let w = boundary_terms(&phi, 2, Side::Left, BoundaryKind::Straddle, win).unwrap();
        // Terms {-3,-2} and {-2,-1}.
        let xz = pauli::x().kron(&pauli::z());
        let a = LocalOperator::new(xz.clone(), Interval::new(-3, -2), 2).unwrap().embed(win).unwrap();
        let b = LocalOperator::new(xz, Interval::new(-2, -1), 2).unwrap().embed(win).unwrap();
        assert!((w.matrix() - a.add(&b).unwrap().matrix()).norm_l2() < 1e-14);
        let s = boundary_terms(&phi, 1, Side::Left, BoundaryKind::Surface, win).unwrap();
        let c = LocalOperator::new(pauli::x().kron(&pauli::z()), Interval::new(-2, -1), 2).unwrap().embed(win).unwrap();
        assert!((s.matrix() - c.matrix()).norm_l2() < 1e-14);
    }

    #[test]
    fn hamiltonian_splits_into_left_straddle_right() {
        let phi = zz_plus_x();
        let win = Interval::new(1, 6);
        let n = 3;
        let h = phi.hamiltonian(win).unwrap();
        let left = phi.hamiltonian(Interval::new(1, n - 1)).unwrap().embed(win).unwrap();
        let right = phi.hamiltonian(Interval::new(n + 1, 6)).unwrap().embed(win).unwrap();
        let w = boundary_terms(&phi, n, Side::Right, BoundaryKind::Straddle, win).unwrap();
        let sum = left.add(&right).unwrap().add(&w).unwrap();
        assert!((h.matrix() - sum.matrix()).norm_l2() < 1e-13);
    }
}
