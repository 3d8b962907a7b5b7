//! Multi-start ascent with deduplication of the limits up to Hadamard
//! equivalence (row and column permutations and phases).

use ahm_core::hessian::{multi_start, AscentOptions};
use ahm_core::matrix::{dephase, max_abs_diff, one_norm};
use ahm_core::{ComplexMatrix, Tolerances};

/// Largest size for which equivalence tries every pair of permutations.
pub const PERMUTATION_LIMIT: usize = 5;

#[derive(Debug, Clone)]
pub struct Limit {
    pub start: usize,
    pub one_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub stalled: bool,
    /// Equivalence class of the rescaled limit, for converged starts.
    pub class: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Class {
    /// Dephased representative `√N·U`.
    pub representative: ComplexMatrix,
    pub count: usize,
}

pub struct Outcome {
    pub limits: Vec<Limit>,
    pub classes: Vec<Class>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Whether dephased `a` and `b` are Hadamard equivalent to within `tol`.
/// Above [`PERMUTATION_LIMIT`] only the dephased forms are compared.
pub fn equivalent(a: &ComplexMatrix, b: &ComplexMatrix, perms: &[Vec<usize>], tol: f64) -> bool {
    if max_abs_diff(a, b) <= tol {
        return true;
    }
    let n = a.nrows();
    for rows in perms {
        for cols in perms {
            let m = ComplexMatrix::from_fn(n, n, |i, j| a[(rows[i], cols[j])]);
            if let Ok(d) = dephase(&m, 1e-12) {
                if max_abs_diff(&d, b) <= tol {
                    return true;
                }
            }
        }
    }
    false
}

pub fn run(n: usize, starts: usize, seed: u64, max_iters: usize, dedup_tol: f64, tol: &Tolerances) -> Outcome {
    let opts = AscentOptions { max_iters, ..AscentOptions::default() };
    let traces = multi_start(n, starts, seed, &opts, tol);
    let perms = if n <= PERMUTATION_LIMIT { permutations(n) } else { Vec::new() };
    let scale = (n as f64).sqrt();
    let mut classes: Vec<Class> = Vec::new();
    let mut limits = Vec::with_capacity(traces.len());
    for (start, t) in traces.iter().enumerate() {
        let m = t.final_matrix.matrix();
        let mut class = None;
        if t.converged_to_chm {
            if let Ok(d) = dephase(&m.scale(scale), 1e-12) {
                let found = classes.iter().position(|c| equivalent(&d, &c.representative, &perms, dedup_tol));
                class = Some(match found {
                    Some(k) => {
                        classes[k].count += 1;
                        k
                    }
                    None => {
                        classes.push(Class { representative: d, count: 1 });
                        classes.len() - 1
                    }
                });
            }
        }
        limits.push(Limit {
            start,
            one_norm: one_norm(m),
            converged: t.converged_to_chm,
            iterations: t.iterates,
            stalled: t.stalled,
            class,
        });
    }
    Outcome { limits, classes }
}
