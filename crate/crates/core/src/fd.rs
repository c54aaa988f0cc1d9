//! Quadratic forms of second-order finite differences on the interior nodes
//! `y_1 … y_{N-1}` of a uniform grid with `φ_0 = φ_N = 0`.

use crate::banded::SymBanded;

/// `Σ_j w_j φ_j² Δy` over interior nodes; `w` holds one value per interior node.
pub fn node_mass(w: &[f64], dy: f64) -> SymBanded {
    SymBanded::diagonal(&w.iter().map(|v| v * dy).collect::<Vec<_>>())
}

/// `Σ_c w_c ((φ_{c+1} − φ_c)/Δy)² Δy` over the `N` cell centres.
pub fn centre_stiffness(w: &[f64], dy: f64) -> SymBanded {
    let n = w.len();
    let mut a = SymBanded::zeros(n - 1, 1);
    let s = 1.0 / dy;
    for (c, &wc) in w.iter().enumerate() {
        let v = wc * s;
        // nodes c and c+1, interior index = node - 1
        let left = c.checked_sub(1);
        let right = if c < n - 1 { Some(c) } else { None };
        if let Some(i) = left {
            a.add(i, i, v);
        }
        if let Some(j) = right {
            a.add(j, j, v);
        }
        if let (Some(i), Some(j)) = (left, right) {
            a.add(j, i, -v);
        }
    }
    a
}

/// `Σ_j w_j ((φ_{j+1} − 2φ_j + φ_{j−1})/Δy²)² Δy` over interior nodes. Omitting the
/// wall nodes is the odd ghost closure `φ_{−1} = −φ_1`, i.e. `φ″ = 0` at the walls.
pub fn curvature(w: &[f64], dy: f64) -> SymBanded {
    let m = w.len();
    let mut a = SymBanded::zeros(m, 2);
    let s = 1.0 / (dy * dy * dy);
    for (i, &wi) in w.iter().enumerate() {
        let v = wi * s;
        let stencil = [(i as isize - 1, 1.0), (i as isize, -2.0), (i as isize + 1, 1.0)];
        for &(p, cp) in &stencil {
            for &(q, cq) in &stencil {
                if p >= 0 && q >= 0 && (p as usize) < m && (q as usize) < m && p >= q {
                    a.add(p as usize, q as usize, v * cp * cq);
                }
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stiffness_matches_direct_sum() {
        let n = 6;
        let dy = 0.2;
        let w: Vec<f64> = (0..n).map(|c| 1.0 + c as f64).collect();
        let a = centre_stiffness(&w, dy);
        let phi: Vec<f64> = (1..n).map(|j| (j as f64 * 0.7).sin()).collect();
        let full: Vec<f64> = std::iter::once(0.0).chain(phi.iter().copied()).chain(std::iter::once(0.0)).collect();
        let direct: f64 = (0..n).map(|c| w[c] * ((full[c + 1] - full[c]) / dy).powi(2) * dy).sum();
        assert!((a.quad(&phi) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn curvature_matches_direct_sum() {
        let m = 7;
        let dy = 0.125;
        let w: Vec<f64> = (0..m).map(|i| 0.5 + i as f64 * 0.1).collect();
        let a = curvature(&w, dy);
        let phi: Vec<f64> = (0..m).map(|i| (i as f64 * 1.3).cos()).collect();
        let at = |k: isize| if k < 0 || k >= m as isize { 0.0 } else { phi[k as usize] };
        let direct: f64 = (0..m as isize)
            .map(|i| w[i as usize] * ((at(i + 1) - 2.0 * at(i) + at(i - 1)) / (dy * dy)).powi(2) * dy)
            .sum();
        assert!((a.quad(&phi) - direct).abs() < 1e-10 * direct);
    }
}
