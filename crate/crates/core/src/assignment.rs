//! Optimal rectangular assignment (Hungarian method with potentials).

use nalgebra::DMatrix;

/// Assignment of rows to distinct columns minimizing total cost. Every row
/// is assigned when `rows <= cols`; otherwise every column is, and the
/// surplus rows get `None`.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<Option<usize>> {
    let (n, m) = cost.shape();
    if n == 0 || m == 0 {
        return vec![None; n];
    }
    if n > m {
        let cols = min_cost_assignment(&cost.transpose());
        let mut rows = vec![None; n];
        for (c, r) in cols.into_iter().enumerate() {
            if let Some(r) = r {
                rows[r] = Some(c);
            }
        }
        return rows;
    }
    // 1-based potentials; p[j] is the row (1-based) holding column j
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            rows[p[j] - 1] = Some(j - 1);
        }
    }
    rows
}

/// Assignment maximizing total affinity.
pub fn max_affinity_assignment(affinity: &DMatrix<f64>) -> Vec<Option<usize>> {
    min_cost_assignment(&-affinity)
}

/// Sum of `matrix[(r, c)]` over assigned pairs.
pub fn assignment_value(matrix: &DMatrix<f64>, assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| matrix[(r, c)]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn square_textbook_case() {
        let c = dmatrix![4.0, 1.0, 3.0; 2.0, 0.0, 5.0; 3.0, 2.0, 2.0];
        let a = min_cost_assignment(&c);
        assert_eq!(a, vec![Some(1), Some(0), Some(2)]);
        assert_eq!(assignment_value(&c, &a), 5.0);
    }

    #[test]
    fn greedy_trap() {
        // greedy takes (0,0)=0.9 and is left with 0.1
        let aff = dmatrix![0.9, 0.8; 0.85, 0.1];
        assert_eq!(max_affinity_assignment(&aff), vec![Some(1), Some(0)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = dmatrix![1.0, 0.0, 5.0; 0.0, 3.0, 1.0];
        assert_eq!(min_cost_assignment(&wide), vec![Some(1), Some(0)]);
        let tall = wide.transpose();
        let a = min_cost_assignment(&tall);
        assert_eq!(a.iter().filter(|x| x.is_some()).count(), 2);
        assert_eq!(assignment_value(&tall, &a), 0.0);
    }

    #[test]
    fn empty() {
        assert!(min_cost_assignment(&DMatrix::zeros(0, 3)).is_empty());
        assert_eq!(min_cost_assignment(&DMatrix::zeros(2, 0)), vec![None, None]);
    }
}
