//! Z/2 boundary-matrix column reduction of the Vietoris–Rips filtration.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::{BirthDeathDiagram, DistanceMatrix};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Simplex {
    filt: f64,
    verts: [u32; 3], // unused slots hold u32::MAX so the array compares lexicographically
    dim: u8,
}

/// Enumerate simplices of dimension `0..=max_dim + 1` with filtration value
/// at most `max_radius`, reduce the boundary matrix, and read off the
/// persistence pairs per homology dimension.
pub(super) fn reduce(
    dist: &DistanceMatrix,
    max_dim: usize,
    max_radius: f64,
) -> Result<Vec<BirthDeathDiagram>> {
    if dist.lower.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("non-finite pairwise distance"));
    }
    let n = dist.n();
    // Enumerating past the enclosing radius cannot change the diagrams: at
    // that scale the complex is a cone over its most central vertex, so every
    // 1-cycle is dead and all components have merged. Truncating there keeps
    // the reduction output identical while skipping the bulk of the columns.
    let enclosing = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| dist.get(i, j))
                .fold(0.0f64, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    let cutoff = max_radius.min(enclosing);
    let mut simplices: Vec<Simplex> = Vec::new();
    for v in 0..n as u32 {
        simplices.push(Simplex {
            filt: 0.0,
            verts: [v, NONE, NONE],
            dim: 0,
        });
    }
    for j in 1..n {
        for i in 0..j {
            let d = dist.get(i, j);
            if d <= cutoff {
                simplices.push(Simplex {
                    filt: d,
                    verts: [i as u32, j as u32, NONE],
                    dim: 1,
                });
            }
        }
    }
    if max_dim >= 1 {
        for k in 2..n {
            for j in 1..k {
                let djk = dist.get(j, k);
                if djk > cutoff {
                    continue;
                }
                for i in 0..j {
                    let f = dist.get(i, j).max(dist.get(i, k)).max(djk);
                    if f <= cutoff {
                        simplices.push(Simplex {
                            filt: f,
                            verts: [i as u32, j as u32, k as u32],
                            dim: 2,
                        });
                    }
                }
            }
        }
    }

    simplices.sort_unstable_by(|a, b| {
        a.filt
            .total_cmp(&b.filt)
            .then(a.dim.cmp(&b.dim))
            .then(a.verts.cmp(&b.verts))
    });

    let ncols = simplices.len();
    // Vertices occupy the first n sorted positions in id order; edges need a
    // lookup table so triangle boundaries can reference them.
    let mut edge_index: HashMap<u64, u32> = HashMap::new();
    for (idx, s) in simplices.iter().enumerate() {
        if s.dim == 1 {
            edge_index.insert(edge_key(n, s.verts[0], s.verts[1]), idx as u32);
        }
    }

    let mut cols: Vec<Vec<u32>> = Vec::with_capacity(ncols);
    for s in &simplices {
        let col = match s.dim {
            0 => Vec::new(),
            1 => vec![s.verts[0], s.verts[1]],
            _ => {
                let [i, j, k] = s.verts;
                let mut c = vec![
                    edge_index[&edge_key(n, i, j)],
                    edge_index[&edge_key(n, i, k)],
                    edge_index[&edge_key(n, j, k)],
                ];
                c.sort_unstable();
                c
            }
        };
        cols.push(col);
    }
    drop(edge_index);

    // Standard left-to-right reduction with a pivot cache: low_inv[r] is the
    // reduced column whose lowest one sits in row r.
    let mut low_inv: Vec<u32> = vec![NONE; ncols];
    let mut scratch: Vec<u32> = Vec::new();
    for j in 0..ncols {
        loop {
            let Some(&low) = cols[j].last() else {
                cols[j] = Vec::new(); // release capacity of zeroed columns
                break;
            };
            let k = low_inv[low as usize];
            if k == NONE {
                low_inv[low as usize] = j as u32;
                break;
            }
            let (head, tail) = cols.split_at_mut(j);
            add_into(&mut tail[0], &head[k as usize], &mut scratch);
        }
    }

    let mut diagrams: Vec<BirthDeathDiagram> = (0..=max_dim)
        .map(|dim| BirthDeathDiagram {
            dim,
            pairs: Vec::new(),
            essential: Vec::new(),
            max_radius,
        })
        .collect();

    for j in 0..ncols {
        if let Some(&low) = cols[j].last() {
            let creator = &simplices[low as usize];
            let dim = creator.dim as usize;
            if dim <= max_dim && creator.filt < simplices[j].filt {
                diagrams[dim].pairs.push((creator.filt, simplices[j].filt));
            }
        } else if low_inv[j] == NONE {
            let dim = simplices[j].dim as usize;
            if dim <= max_dim {
                diagrams[dim].essential.push(simplices[j].filt);
            }
        }
    }
    Ok(diagrams)
}

fn edge_key(n: usize, i: u32, j: u32) -> u64 {
    i as u64 * n as u64 + j as u64
}

/// target ^= other over Z/2, both kept sorted.
fn add_into(target: &mut Vec<u32>, other: &[u32], scratch: &mut Vec<u32>) {
    scratch.clear();
    scratch.reserve(target.len() + other.len());
    let mut a = target.iter().copied().peekable();
    let mut b = other.iter().copied().peekable();
    loop {
        match (a.peek(), b.peek()) {
            (Some(&x), Some(&y)) => {
                if x < y {
                    scratch.push(x);
                    a.next();
                } else if y < x {
                    scratch.push(y);
                    b.next();
                } else {
                    a.next();
                    b.next();
                }
            }
            (Some(&x), None) => {
                scratch.push(x);
                a.next();
            }
            (None, Some(&y)) => {
                scratch.push(y);
                b.next();
            }
            (None, None) => break,
        }
    }
    std::mem::swap(target, scratch);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_into_is_symmetric_difference() {
        let mut t = vec![1, 3, 5, 7];
        let mut scratch = Vec::new();
        add_into(&mut t, &[3, 4, 7, 9], &mut scratch);
        assert_eq!(t, vec![1, 4, 5, 9]);
        add_into(&mut t, &[1, 4, 5, 9], &mut scratch);
        assert!(t.is_empty());
    }
}
