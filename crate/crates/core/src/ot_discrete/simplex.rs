//! Dense transportation simplex (MODI method) on a spanning-tree basis.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// After this many consecutive degenerate pivots pricing switches from
/// Dantzig's rule to Bland's rule until a pivot makes progress.
const DEGENERATE_STREAK: usize = 50;

pub(crate) struct SimplexOutput {
    pub plan: Matrix,
    /// Row duals `u` and column duals `v` with `u_i + v_j <= c_ij`, gauged so
    /// that `u_0 = 0`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub(crate) fn transportation_simplex(cost: &Matrix, supply: &[f64], demand: &[f64]) -> Result<SimplexOutput> {
    let (rows, cols) = (supply.len(), demand.len());
    let mut flow = Matrix::zeros(rows, cols);
    let mut basis = northwest_corner(supply, demand, &mut flow);

    let scale = cost.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let max_iter = 50 * rows * cols + 1000;
    let mut degenerate_run = 0usize;
    let mut u = vec![0.0; rows];
    let mut v = vec![0.0; cols];

    for _ in 0..max_iter {
        let tree = Tree::new(rows, cols, &basis);
        tree.duals(cost, &basis, &mut u, &mut v);

        let bland = degenerate_run >= DEGENERATE_STREAK;
        let Some((ei, ej)) = entering_cell(cost, &u, &v, tol, bland) else {
            return Ok(SimplexOutput { plan: flow.map(|x| x.max(0.0)), u, v });
        };

        // the cycle closes the tree path from row ei to column ej
        let path = tree.path(ei, rows + ej);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        // path edges alternate -, +, -, ... walking back from column ej
        for &edge in path.iter().rev().step_by(2) {
            let (i, j) = basis[edge];
            if flow[(i, j)] < theta || (flow[(i, j)] == theta && edge < leaving) {
                theta = flow[(i, j)];
                leaving = edge;
            }
        }
        for (k, &edge) in path.iter().rev().enumerate() {
            let (i, j) = basis[edge];
            if k % 2 == 0 {
                flow[(i, j)] -= theta;
            } else {
                flow[(i, j)] += theta;
            }
        }
        flow[(ei, ej)] += theta;
        let (li, lj) = basis[leaving];
        flow[(li, lj)] = 0.0;
        basis[leaving] = (ei, ej);

        if theta <= 0.0 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
    Err(Error::Solver(format!(
        "transportation simplex did not converge in {max_iter} pivots"
    )))
}

fn northwest_corner(supply: &[f64], demand: &[f64], flow: &mut Matrix) -> Vec<(usize, usize)> {
    let (rows, cols) = (supply.len(), demand.len());
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut basis = Vec::with_capacity(rows + cols - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]).max(0.0);
        flow[(i, j)] = x;
        basis.push((i, j));
        s[i] -= x;
        d[j] -= x;
        if i == rows - 1 && j == cols - 1 {
            break;
        }
        if j == cols - 1 || (i < rows - 1 && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    // the last cell absorbs rounding left over from the running balances
    let (li, lj) = *basis.last().expect("basis is never empty");
    flow[(li, lj)] = (flow[(li, lj)] + s[li].min(d[lj]).max(0.0)).max(0.0);
    basis
}

fn entering_cell(cost: &Matrix, u: &[f64], v: &[f64], tol: f64, bland: bool) -> Option<(usize, usize)> {
    let mut best = None;
    let mut best_val = -tol;
    for i in 0..u.len() {
        for j in 0..v.len() {
            let r = cost[(i, j)] - u[i] - v[j];
            if r < best_val {
                if bland {
                    return Some((i, j));
                }
                best_val = r;
                best = Some((i, j));
            }
        }
    }
    best
}

/// Adjacency of the basis tree. Nodes `0..rows` are rows, `rows..rows+cols`
/// are columns; each basic cell is an edge.
struct Tree {
    rows: usize,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Tree {
    fn new(rows: usize, cols: usize, basis: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); rows + cols];
        for (edge, &(i, j)) in basis.iter().enumerate() {
            adjacency[i].push((rows + j, edge));
            adjacency[rows + j].push((i, edge));
        }
        Tree { rows, adjacency }
    }

    fn duals(&self, cost: &Matrix, basis: &[(usize, usize)], u: &mut [f64], v: &mut [f64]) {
        let rows = self.rows;
        let mut seen = vec![false; self.adjacency.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &(next, edge) in &self.adjacency[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j) = basis[edge];
                if next >= rows {
                    v[j] = cost[(i, j)] - u[i];
                } else {
                    u[i] = cost[(i, j)] - v[j];
                }
                queue.push_back(next);
            }
        }
    }

    /// Edges on the tree path from `from` to `to`, in order from `from`.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.adjacency.len()];
        let mut seen = vec![false; self.adjacency.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &(next, edge) in &self.adjacency[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, edge));
                    queue.push_back(next);
                }
            }
        }
        let mut edges = Vec::new();
        let mut node = to;
        while node != from {
            let (prev, edge) = parent[node].expect("basis is a spanning tree");
            edges.push(edge);
            node = prev;
        }
        edges.reverse();
        edges
    }
}
