//! Levenberg-Marquardt solver over the factor graph with on-manifold
//! updates.
//!
//! The normal equations are solved by eliminating landmark variables first
//! through their block-diagonal Schur complement (landmarks are only coupled
//! to poses by projection factors and to planes by regularity factors), then
//! factorizing the remaining dense block with planes ordered before the
//! chronological states.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::factors::Factor;
use crate::smoother::{Symbol, SymbolKind, Values};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("normal equations stayed singular up to the damping limit")]
    SingularNormalEquations,
    #[error("factor references unknown variable: {0}")]
    UnknownVariable(String),
}

/// Levenberg-Marquardt settings.
#[derive(Debug, Clone, Copy)]
pub struct OptimizeConfig {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step falls below
    /// this.
    pub rel_cost_tol: f64,
    /// Stop when the update norm falls below this.
    pub update_norm_tol: f64,
    pub initial_lambda: f64,
    pub lambda_factor: f64,
    pub max_lambda: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            max_iterations: 15,
            rel_cost_tol: 1e-6,
            update_norm_tol: 1e-8,
            initial_lambda: 1e-4,
            lambda_factor: 10.0,
            max_lambda: 1e10,
        }
    }
}

/// Outcome of one optimize call.
#[derive(Debug, Clone, Copy)]
pub struct OptStats {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub converged: bool,
}

// Which variables can be Schur-eliminated: landmarks touched exclusively by
// projection and regularity factors (those couple one landmark to one dense
// variable each, keeping the landmark block of the Hessian block-diagonal).
fn classify(factors: &[Factor], values: &Values) -> (Vec<Symbol>, BTreeSet<Symbol>) {
    let mut eliminable: BTreeSet<Symbol> = values
        .keys()
        .filter(|s| s.kind == SymbolKind::Landmark)
        .copied()
        .collect();
    for f in factors {
        if matches!(f, Factor::Projection(_) | Factor::Regularity(_)) {
            continue;
        }
        for k in f.keys() {
            eliminable.remove(k);
        }
    }
    // Dense ordering: planes first, then states chronologically.
    let mut dense: Vec<Symbol> = values
        .keys()
        .filter(|s| !eliminable.contains(s))
        .copied()
        .collect();
    dense.sort_by_key(|s| match s.kind {
        SymbolKind::Plane => (0u8, s.index, 0u8),
        SymbolKind::Pose => (1, s.index, 0),
        SymbolKind::VelBias => (1, s.index, 1),
        SymbolKind::Landmark => (2, s.index, 0),
    });
    (dense, eliminable)
}

struct LandmarkBlock {
    h: Matrix3<f64>,
    g: Vector3<f64>,
    /// Couplings H_{landmark,dense} keyed by the dense variable.
    coupling: BTreeMap<Symbol, DMatrix<f64>>,
}

struct Assembly {
    dense_order: Vec<Symbol>,
    offsets: BTreeMap<Symbol, usize>,
    dense_dim: usize,
    h: DMatrix<f64>,
    g: DVector<f64>,
    landmarks: BTreeMap<Symbol, LandmarkBlock>,
    /// Indices of factors that linearized successfully.
    active: Vec<usize>,
    cost: f64,
}

fn assemble(factors: &[Factor], values: &Values) -> Result<Assembly, OptimizerError> {
    let (dense_order, eliminable) = classify(factors, values);
    let mut offsets = BTreeMap::new();
    let mut at = 0;
    for s in &dense_order {
        offsets.insert(*s, at);
        at += s.dim();
    }
    let dense_dim = at;
    let mut asm = Assembly {
        dense_order,
        offsets,
        dense_dim,
        h: DMatrix::zeros(dense_dim, dense_dim),
        g: DVector::zeros(dense_dim),
        landmarks: BTreeMap::new(),
        active: Vec::new(),
        cost: 0.0,
    };

    for (idx, factor) in factors.iter().enumerate() {
        match factor {
            Factor::Structureless(f) => {
                let Ok(lin) = f.linearize_full(values) else {
                    continue;
                };
                for key in f.keys() {
                    if !asm.offsets.contains_key(key) {
                        return Err(OptimizerError::UnknownVariable(key.to_string()));
                    }
                }
                // Landmark-eliminated normal equations of the stacked
                // whitened blocks; identical to the null-space-projected
                // factor up to rounding. M must be invertible before
                // anything is accumulated.
                let mut m = Matrix3::<f64>::zeros();
                let mut c_rho = Vector3::<f64>::zeros();
                for (r, _, j_rho) in &lin.blocks {
                    m += j_rho.transpose() * j_rho;
                    c_rho += j_rho.transpose() * r;
                }
                let Some(m_chol) = Cholesky::new(m) else {
                    continue; // degenerate geometry, deactivate
                };
                let mut cost = 0.0;
                let mut couplings: BTreeMap<Symbol, DMatrix<f64>> = BTreeMap::new();
                for ((r, j_pose, j_rho), key) in lin.blocks.iter().zip(f.keys()) {
                    let off = asm.offsets[key];
                    cost += r.norm_squared();
                    let hpp = j_pose.transpose() * j_pose;
                    let mut view = asm.h.view_mut((off, off), (6, 6));
                    view += &hpp;
                    let gi = j_pose.transpose() * r;
                    for d in 0..6 {
                        asm.g[off + d] -= gi[d];
                    }
                    let entry = couplings
                        .entry(*key)
                        .or_insert_with(|| DMatrix::zeros(6, 3));
                    *entry += j_pose.transpose() * j_rho;
                }
                let m_inv_c = m_chol.solve(&c_rho);
                cost -= c_rho.dot(&m_inv_c);
                asm.cost += cost.max(0.0);
                let keys: Vec<Symbol> = couplings.keys().copied().collect();
                for a in &keys {
                    let ca = &couplings[a];
                    let off_a = asm.offsets[a];
                    let minv_cat = m_chol.solve(&Matrix3::identity()) * ca.transpose();
                    for b in &keys {
                        let cb = &couplings[b];
                        let off_b = asm.offsets[b];
                        let corr = cb * &minv_cat;
                        let mut view = asm.h.view_mut((off_b, off_a), (6, 6));
                        view -= &corr;
                    }
                    let gcorr = ca * &m_inv_c;
                    for d in 0..6 {
                        asm.g[off_a + d] += gcorr[d];
                    }
                }
                asm.active.push(idx);
            }
            Factor::Projection(f) if eliminable.contains(&f.keys()[1]) => {
                let Ok(ev) = f.eval_whitened(values) else {
                    continue;
                };
                let pose_key = f.keys()[0];
                let lm_key = f.keys()[1];
                let Some(&off) = asm.offsets.get(&pose_key) else {
                    return Err(OptimizerError::UnknownVariable(pose_key.to_string()));
                };
                asm.cost += ev.residual.norm_squared();
                let hpp = ev.j_pose.transpose() * &ev.j_pose;
                let mut view = asm.h.view_mut((off, off), (6, 6));
                view += &hpp;
                let gp = ev.j_pose.transpose() * &ev.residual;
                for d in 0..6 {
                    asm.g[off + d] -= gp[d];
                }
                let block = asm.landmarks.entry(lm_key).or_insert_with(|| LandmarkBlock {
                    h: Matrix3::zeros(),
                    g: Vector3::zeros(),
                    coupling: BTreeMap::new(),
                });
                let jl = &ev.j_landmark;
                let hll = jl.transpose() * jl;
                for r in 0..3 {
                    for c in 0..3 {
                        block.h[(r, c)] += hll[(r, c)];
                    }
                }
                let gl = jl.transpose() * &ev.residual;
                block.g -= Vector3::new(gl[0], gl[1], gl[2]);
                let entry = block
                    .coupling
                    .entry(pose_key)
                    .or_insert_with(|| DMatrix::zeros(3, 6));
                *entry += jl.transpose() * &ev.j_pose;
                asm.active.push(idx);
            }
            Factor::Regularity(f) if eliminable.contains(&f.keys()[0]) => {
                let Ok(lin) = f.linearize(values) else {
                    continue;
                };
                let lm_key = f.keys()[0];
                let plane_key = f.keys()[1];
                let Some(&off) = asm.offsets.get(&plane_key) else {
                    return Err(OptimizerError::UnknownVariable(plane_key.to_string()));
                };
                asm.cost += lin.residual.norm_squared();
                let jl = &lin.jacobians[0];
                let jp = &lin.jacobians[1];
                let hpp = jp.transpose() * jp;
                let mut view = asm.h.view_mut((off, off), (3, 3));
                view += &hpp;
                let gp = jp.transpose() * &lin.residual;
                for d in 0..3 {
                    asm.g[off + d] -= gp[d];
                }
                let block = asm.landmarks.entry(lm_key).or_insert_with(|| LandmarkBlock {
                    h: Matrix3::zeros(),
                    g: Vector3::zeros(),
                    coupling: BTreeMap::new(),
                });
                let hll = jl.transpose() * jl;
                for r in 0..3 {
                    for c in 0..3 {
                        block.h[(r, c)] += hll[(r, c)];
                    }
                }
                let gl = jl.transpose() * &lin.residual;
                block.g -= Vector3::new(gl[0], gl[1], gl[2]);
                let entry = block
                    .coupling
                    .entry(plane_key)
                    .or_insert_with(|| DMatrix::zeros(3, 3));
                *entry += jl.transpose() * jp;
                asm.active.push(idx);
            }
            _ => {
                let Ok(lin) = factor.linearize(values) else {
                    continue;
                };
                asm.cost += lin.residual.norm_squared();
                let keys = factor.keys();
                for (a, ja) in keys.iter().zip(&lin.jacobians) {
                    let Some(&off_a) = asm.offsets.get(a) else {
                        return Err(OptimizerError::UnknownVariable(a.to_string()));
                    };
                    let ga = ja.transpose() * &lin.residual;
                    for d in 0..a.dim() {
                        asm.g[off_a + d] -= ga[d];
                    }
                    for (b, jb) in keys.iter().zip(&lin.jacobians) {
                        let off_b = asm.offsets[b];
                        let habb = ja.transpose() * jb;
                        let mut view = asm.h.view_mut((off_a, off_b), (a.dim(), b.dim()));
                        view += &habb;
                    }
                }
                asm.active.push(idx);
            }
        }
    }
    Ok(asm)
}

/// Solves the damped normal equations of an assembly; returns the dense
/// update and per-landmark updates.
fn solve_damped(
    asm: &Assembly,
    lambda: f64,
) -> Option<(DVector<f64>, BTreeMap<Symbol, Vector3<f64>>)> {
    let mut h = asm.h.clone();
    let mut g = asm.g.clone();
    for i in 0..asm.dense_dim {
        h[(i, i)] += lambda * h[(i, i)].max(1e-9);
    }

    struct Elim {
        chol: Cholesky<f64, nalgebra::Const<3>>,
        g: Vector3<f64>,
        coupling: Vec<(Symbol, DMatrix<f64>)>,
    }
    let mut elims: BTreeMap<Symbol, Elim> = BTreeMap::new();
    for (sym, block) in &asm.landmarks {
        let mut hd = block.h;
        for i in 0..3 {
            hd[(i, i)] += lambda * hd[(i, i)].max(1e-9);
        }
        let chol = Cholesky::new(hd)?;
        let coupling: Vec<(Symbol, DMatrix<f64>)> = block
            .coupling
            .iter()
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        // H_ab -= H_al H_ll^-1 H_lb; g_a -= H_al H_ll^-1 g_l.
        let m_inv_g = chol.solve(&block.g);
        for (a, ca) in &coupling {
            let off_a = asm.offsets[a];
            let h_al = ca.transpose(); // dim_a x 3
            let corr_g = &h_al * m_inv_g;
            for d in 0..a.dim() {
                g[off_a + d] -= corr_g[d];
            }
            for (b, cb) in &coupling {
                let off_b = asm.offsets[b];
                let mut x = cb.clone(); // 3 x dim_b
                for c in 0..x.ncols() {
                    let col = Vector3::new(x[(0, c)], x[(1, c)], x[(2, c)]);
                    let sol = chol.solve(&col);
                    for rix in 0..3 {
                        x[(rix, c)] = sol[rix];
                    }
                }
                let corr = &h_al * x;
                let mut view = h.view_mut((off_a, off_b), (a.dim(), b.dim()));
                view -= &corr;
            }
        }
        elims.insert(
            *sym,
            Elim {
                chol,
                g: block.g,
                coupling,
            },
        );
    }

    let chol = Cholesky::new(h)?;
    let delta_dense = chol.solve(&g);

    // Back-substitute landmark updates.
    let mut lm_updates = BTreeMap::new();
    for (sym, elim) in &elims {
        let mut rhs = elim.g;
        for (a, ca) in &elim.coupling {
            let off_a = asm.offsets[a];
            let da = asm_rows(&delta_dense, off_a, a.dim());
            let contrib = ca * da;
            rhs -= Vector3::new(contrib[0], contrib[1], contrib[2]);
        }
        lm_updates.insert(*sym, elim.chol.solve(&rhs));
    }
    Some((delta_dense, lm_updates))
}

fn asm_rows(v: &DVector<f64>, off: usize, dim: usize) -> DVector<f64> {
    v.rows(off, dim).into_owned()
}

fn retract_all(
    values: &Values,
    asm: &Assembly,
    delta_dense: &DVector<f64>,
    lm_updates: &BTreeMap<Symbol, Vector3<f64>>,
) -> Values {
    let mut out = values.clone();
    for sym in &asm.dense_order {
        let off = asm.offsets[sym];
        let d: Vec<f64> = (0..sym.dim()).map(|i| delta_dense[off + i]).collect();
        out.retract_symbol(sym, &d);
    }
    for (sym, d) in lm_updates {
        out.retract_symbol(sym, &[d.x, d.y, d.z]);
    }
    out
}

fn update_norm(delta_dense: &DVector<f64>, lm_updates: &BTreeMap<Symbol, Vector3<f64>>) -> f64 {
    let mut n = delta_dense.norm_squared();
    for d in lm_updates.values() {
        n += d.norm_squared();
    }
    n.sqrt()
}

fn cost_over(factors: &[Factor], active: &[usize], values: &Values) -> Option<f64> {
    let mut total = 0.0;
    for &i in active {
        match factors[i].cost(values) {
            Ok(c) => total += c,
            Err(_) => return None,
        }
    }
    Some(total)
}

/// Minimizes the graph's nonlinear least-squares cost by damped Gauss-Newton
/// steps with on-manifold retractions. The returned cost never exceeds the
/// initial cost; factors that fail to linearize (cheirality, degenerate
/// triangulation) are deactivated for the call.
pub fn optimize(
    factors: &[Factor],
    values: &Values,
    config: &OptimizeConfig,
) -> Result<(Values, OptStats), OptimizerError> {
    let mut current = values.clone();
    let mut lambda = config.initial_lambda;
    let mut iterations = 0;
    let mut initial_cost = None;
    let mut cost = 0.0;
    let mut converged = false;

    while iterations < config.max_iterations {
        let asm = assemble(factors, &current)?;
        iterations += 1;
        cost = asm.cost;
        if initial_cost.is_none() {
            initial_cost = Some(asm.cost);
        }
        if asm.dense_dim == 0 && asm.landmarks.is_empty() {
            converged = true;
            break;
        }

        let mut accepted = false;
        loop {
            let Some((delta, lm_delta)) = solve_damped(&asm, lambda) else {
                lambda *= config.lambda_factor;
                if lambda > config.max_lambda {
                    return Err(OptimizerError::SingularNormalEquations);
                }
                continue;
            };
            let candidate = retract_all(&current, &asm, &delta, &lm_delta);
            match cost_over(factors, &asm.active, &candidate) {
                Some(c_new) if c_new < cost => {
                    let rel = (cost - c_new) / cost.max(1e-300);
                    let small_step = update_norm(&delta, &lm_delta) < config.update_norm_tol;
                    current = candidate;
                    cost = c_new;
                    lambda = (lambda / config.lambda_factor).max(1e-12);
                    accepted = true;
                    if rel < config.rel_cost_tol || small_step {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    lambda *= config.lambda_factor;
                    if lambda > config.max_lambda {
                        // No improving step at this linearization: settled.
                        converged = true;
                        break;
                    }
                }
            }
        }
        if converged || !accepted {
            break;
        }
    }

    Ok((
        current,
        OptStats {
            iterations,
            initial_cost: initial_cost.unwrap_or(cost),
            final_cost: cost,
            converged,
        },
    ))
}

/// Assembles the undamped information (H, g) of a set of factors over the
/// given variable ordering, treating every variable densely. Used by
/// marginalization.
pub(crate) fn information_of(
    factors: &[&Factor],
    values: &Values,
    order: &[Symbol],
) -> (DMatrix<f64>, DVector<f64>) {
    let mut offsets = BTreeMap::new();
    let mut at = 0;
    for s in order {
        offsets.insert(*s, at);
        at += s.dim();
    }
    let mut h = DMatrix::zeros(at, at);
    let mut g = DVector::zeros(at);
    for factor in factors {
        let Ok(lin) = factor.linearize(values) else {
            continue;
        };
        let keys = factor.keys();
        for (a, ja) in keys.iter().zip(&lin.jacobians) {
            let off_a = offsets[a];
            let ga = ja.transpose() * &lin.residual;
            for d in 0..a.dim() {
                g[off_a + d] -= ga[d];
            }
            for (b, jb) in keys.iter().zip(&lin.jacobians) {
                let off_b = offsets[b];
                let block = ja.transpose() * jb;
                let mut view = h.view_mut((off_a, off_b), (a.dim(), b.dim()));
                view += &block;
            }
        }
    }
    (h, g)
}
