use std::collections::VecDeque;

use crate::matrix::SparseMatrix;

const NONE: usize = usize::MAX;

/// Maximum cardinality matching on the stored pattern of `f` (Hopcroft–Karp).
///
/// Returns `row -> column`, `None` for unmatched rows.
pub fn maximum_matching(f: &SparseMatrix) -> Vec<Option<usize>> {
    let (n, m) = (f.rows(), f.cols());
    let mut row_mate = vec![NONE; n];
    let mut col_mate = vec![NONE; m];
    let mut dist = vec![0usize; n];
    let mut queue = VecDeque::new();
    // per-row scan position for the iterative DFS
    let mut next = vec![0usize; n];
    let mut stack: Vec<usize> = Vec::new();

    loop {
        // BFS layers from free rows
        queue.clear();
        for r in 0..n {
            if row_mate[r] == NONE {
                dist[r] = 0;
                queue.push_back(r);
            } else {
                dist[r] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(r) = queue.pop_front() {
            for &c in f.row(r).0 {
                let r2 = col_mate[c];
                if r2 == NONE {
                    found = true;
                } else if dist[r2] == usize::MAX {
                    dist[r2] = dist[r] + 1;
                    queue.push_back(r2);
                }
            }
        }
        if !found {
            break;
        }
        // layered DFS augmentations
        for r in 0..n {
            next[r] = f.row_start()[r];
        }
        for root in 0..n {
            if row_mate[root] != NONE {
                continue;
            }
            stack.clear();
            stack.push(root);
            while let Some(&r) = stack.last() {
                if next[r] == f.row_start()[r + 1] {
                    dist[r] = usize::MAX;
                    stack.pop();
                    if let Some(&parent) = stack.last() {
                        next[parent] += 1;
                    }
                    continue;
                }
                let c = f.col_idx()[next[r]];
                let r2 = col_mate[c];
                if r2 == NONE {
                    for &rr in &stack {
                        let cc = f.col_idx()[next[rr]];
                        row_mate[rr] = cc;
                        col_mate[cc] = rr;
                    }
                    stack.clear();
                } else if dist[r2] == dist[r].wrapping_add(1) {
                    stack.push(r2);
                } else {
                    next[r] += 1;
                }
            }
        }
    }
    row_mate.into_iter().map(|c| (c != NONE).then_some(c)).collect()
}

/// A row set `R` with `|N(R)| < |R|`, derived from a maximum matching.
///
/// Returns `(rows, columns)` with `columns = N(rows)`, both ascending, or
/// `None` if the matching is perfect on rows.
pub fn hall_violator(f: &SparseMatrix, matching: &[Option<usize>]) -> Option<(Vec<usize>, Vec<usize>)> {
    let free = matching.iter().position(|m| m.is_none())?;
    let mut col_mate = vec![NONE; f.cols()];
    for (r, m) in matching.iter().enumerate() {
        if let Some(c) = m {
            col_mate[*c] = r;
        }
    }
    let mut row_seen = vec![false; f.rows()];
    let mut col_seen = vec![false; f.cols()];
    let mut queue = VecDeque::from([free]);
    row_seen[free] = true;
    while let Some(r) = queue.pop_front() {
        for &c in f.row(r).0 {
            if col_seen[c] {
                continue;
            }
            col_seen[c] = true;
            let r2 = col_mate[c];
            // a maximum matching has no augmenting path, so r2 exists
            if r2 != NONE && !row_seen[r2] {
                row_seen[r2] = true;
                queue.push_back(r2);
            }
        }
    }
    let rows = (0..f.rows()).filter(|&r| row_seen[r]).collect();
    let cols = (0..f.cols()).filter(|&c| col_seen[c]).collect();
    Some((rows, cols))
}
