//! Real Schur form with eigenvalue reordering.
//!
//! `nalgebra` produces an unordered quasi-triangular form; invariant-subspace
//! extraction needs the selected eigenvalues in the leading block. Adjacent
//! diagonal blocks are exchanged with the direct swapping method: solve the
//! small Sylvester equation `A₁₁X − XA₂₂ = A₁₂`, then rotate onto the
//! invariant subspace spanned by `[−X; I]`.

use nalgebra::Schur;

use super::{solve_general_sylvester, Complex64, LinalgError, Mat};

const OP: &str = "ordered_schur";

pub(crate) struct OrderedSchur {
    /// Orthogonal factor, `m = q · t · qᵀ`.
    pub q: Mat,
    /// Quasi upper-triangular factor.
    #[allow(dead_code)]
    pub t: Mat,
    /// Dimension of the leading invariant subspace holding the selected eigenvalues.
    pub selected: usize,
}

#[derive(Clone, Copy)]
struct Block {
    start: usize,
    size: usize,
}

fn block_eigs(t: &Mat, b: Block) -> Vec<Complex64> {
    if b.size == 1 {
        return vec![Complex64::new(t[(b.start, b.start)], 0.0)];
    }
    let i = b.start;
    let (a, bb, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
    let mean = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + bb * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        vec![Complex64::new(mean + r, 0.0), Complex64::new(mean - r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        vec![Complex64::new(mean, r), Complex64::new(mean, -r)]
    }
}

/// Applies the orthogonal similarity `g` acting on rows/columns
/// `start..start+g.nrows()` to both factors.
fn apply_local(t: &mut Mat, q: &mut Mat, start: usize, g: &Mat) {
    let n = t.nrows();
    let k = g.nrows();
    let mut full = Mat::identity(n, n);
    full.view_mut((start, start), (k, k)).copy_from(g);
    *t = full.transpose() * &*t * &full;
    *q = &*q * &full;
}

/// Triangularizes a 2×2 diagonal block whose eigenvalues are real.
fn split_real_block(t: &mut Mat, q: &mut Mat, i: usize, lambda: f64) {
    let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
    // Two candidate eigenvectors for `lambda`; keep the better scaled one.
    let v1 = (b, lambda - a);
    let v2 = (lambda - d, c);
    let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
    let r = x.hypot(y);
    if r == 0.0 {
        t[(i + 1, i)] = 0.0;
        return;
    }
    let (cs, sn) = (x / r, y / r);
    let g = Mat::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
    apply_local(t, q, i, &g);
    t[(i + 1, i)] = 0.0;
}

fn swap_blocks(t: &mut Mat, q: &mut Mat, first: Block, second: Block) -> Result<(), LinalgError> {
    let (p, r) = (first.size, second.size);
    let s = first.start;
    let a11 = t.view((s, s), (p, p)).clone_owned();
    let a12 = t.view((s, s + p), (p, r)).clone_owned();
    let a22 = t.view((s + p, s + p), (r, r)).clone_owned();
    let eye_p = Mat::identity(p, p);
    let eye_r = Mat::identity(r, r);
    let neg_eye_p = -&eye_p;
    let x = solve_general_sylvester(&[(&a11, &eye_r), (&neg_eye_p, &a22)], &a12)?;

    // Square, invertible basis whose first r columns span [−X; I_r].
    let mut basis = Mat::zeros(p + r, p + r);
    basis.view_mut((0, 0), (p, r)).copy_from(&(-x));
    basis.view_mut((p, 0), (r, r)).copy_from(&eye_r);
    basis.view_mut((0, r), (p, p)).copy_from(&eye_p);
    let g = basis.qr().q();
    apply_local(t, q, s, &g);

    let scale = t.norm().max(f64::MIN_POSITIVE);
    let leak = t.view((s + r, s), (p, r)).norm();
    if leak > 1e-8 * scale {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: format!("block exchange lost triangularity (leak {leak:.3e})"),
        });
    }
    t.view_mut((s + r, s), (p, r)).fill(0.0);
    Ok(())
}

/// Real Schur decomposition with every eigenvalue satisfying `select` moved
/// to the leading diagonal blocks.
pub(crate) fn ordered_real_schur(
    m: &Mat,
    select: impl Fn(Complex64) -> bool,
) -> Result<OrderedSchur, LinalgError> {
    super::ensure_square(OP, m)?;
    super::ensure_finite(OP, m)?;
    let n = m.nrows();
    let (mut q, mut t) = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| LinalgError::Numerical {
            op: OP,
            reason: "Schur iteration did not converge".into(),
        })?
        .unpack();

    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let coupled = i + 1 < n
            && t[(i + 1, i)].abs()
                > f64::EPSILON * (t[(i, i)].abs() + t[(i + 1, i + 1)].abs()).max(f64::MIN_POSITIVE);
        if coupled {
            let b = Block { start: i, size: 2 };
            let eig = block_eigs(&t, b);
            if eig[0].im == 0.0 {
                split_real_block(&mut t, &mut q, i, eig[0].re);
                blocks.push(Block { start: i, size: 1 });
                blocks.push(Block { start: i + 1, size: 1 });
            } else {
                blocks.push(b);
            }
            i += 2;
        } else {
            if i + 1 < n {
                t[(i + 1, i)] = 0.0;
            }
            blocks.push(Block { start: i, size: 1 });
            i += 1;
        }
    }
    for j in 0..n {
        for i in (j + 2)..n {
            t[(i, j)] = 0.0;
        }
    }

    let mut chosen: Vec<bool> = blocks
        .iter()
        .map(|&b| block_eigs(&t, b).into_iter().all(&select))
        .collect();
    loop {
        let mut swapped = false;
        for k in 0..blocks.len().saturating_sub(1) {
            if !chosen[k] && chosen[k + 1] {
                let (a, b) = (blocks[k], blocks[k + 1]);
                swap_blocks(&mut t, &mut q, a, b)?;
                blocks[k] = Block { start: a.start, size: b.size };
                blocks[k + 1] = Block { start: a.start + b.size, size: a.size };
                chosen.swap(k, k + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let selected = blocks
        .iter()
        .zip(&chosen)
        .filter(|(_, &c)| c)
        .map(|(b, _)| b.size)
        .sum();
    Ok(OrderedSchur { q, t, selected })
}
