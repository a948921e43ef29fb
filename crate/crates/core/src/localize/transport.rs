//! L¹ optimal transport between the positive and negative parts of a
//! zero-mean function, and the associated 1-Lipschitz Kantorovich potential.

use super::space::DiscreteSpace;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest tolerated `|Σ f·w|` relative to `Σ |f|·w`.
pub const ZERO_MEAN_TOL: f64 = 1e-9;

/// `f = χ_E / v − χ_{E^c} / (1 − v)` with `v = 𝔪(E)`.
pub fn localization_function(space: &DiscreteSpace, mask: &[bool]) -> Result<Vec<f64>> {
    if mask.len() != space.len() {
        return Err(Error::InvalidParameter(
            "mask length differs from space size".into(),
        ));
    }
    let v = space.mass(mask);
    if !mask.iter().any(|m| *m) || mask.iter().all(|m| *m) {
        return Err(Error::Degenerate(format!(
            "set must be neither empty nor full (mass {v})"
        )));
    }
    Ok(mask
        .iter()
        .map(|&m| if m { 1.0 / v } else { -1.0 / (1.0 - v) })
        .collect())
}

/// One arc of the optimal plan, carrying `amount` of `f·𝔪`-mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub from: usize,
    pub to: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    /// Normalized so that `min φ = 0`.
    pub phi: Vec<f64>,
    /// `max (|φ(x) − φ(y)| − d(x,y))` over all pairs.
    pub lipschitz_slack: f64,
    /// `Σ φ f w`.
    pub dual_value: f64,
    /// `Σ d · flow` of the optimal plan.
    pub primal_value: f64,
    pub duality_gap: f64,
    pub flows: Vec<Flow>,
}

/// Maximizes `Σ φ f w` over 1-Lipschitz `φ`.
///
/// The primal transport problem between `f⁺w` and `f⁻w` is solved exactly by
/// network simplex on the complete bipartite graph; `φ` is then the
/// `d`-transform of the sink potentials, which is 1-Lipschitz on the whole space.
pub fn kantorovich_potential(space: &DiscreteSpace, f: &[f64]) -> Result<Potential> {
    if f.len() != space.len() {
        return Err(Error::InvalidParameter(
            "function length differs from space size".into(),
        ));
    }
    let w = space.weights();
    let total: f64 = f.iter().zip(w).map(|(f, w)| f * w).sum();
    let scale: f64 = f.iter().zip(w).map(|(f, w)| f.abs() * w).sum();
    if total.abs() > ZERO_MEAN_TOL * scale.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "function must have zero mean, got {total}"
        )));
    }
    let sources: Vec<usize> = (0..f.len()).filter(|&i| f[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..f.len()).filter(|&i| f[i] < 0.0).collect();
    if sources.is_empty() || sinks.is_empty() {
        let n = space.len();
        return Ok(Potential {
            phi: vec![0.0; n],
            lipschitz_slack: -space.diameter().min(0.0),
            dual_value: 0.0,
            primal_value: 0.0,
            duality_gap: 0.0,
            flows: Vec::new(),
        });
    }
    let supply: Vec<f64> = sources.iter().map(|&i| f[i] * w[i]).collect();
    let demand: Vec<f64> = sinks.iter().map(|&j| -f[j] * w[j]).collect();
    let plan = network_simplex(space, &sources, &sinks, &supply, &demand);

    // d-transform of the sink potentials.
    let v_sink: Vec<f64> = plan.sink_potential;
    let mut phi: Vec<f64> = (0..space.len())
        .map(|x| {
            let row = space.row(x);
            sinks
                .iter()
                .zip(&v_sink)
                .map(|(&j, vj)| vj + row[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let lo = phi.iter().copied().fold(f64::INFINITY, f64::min);
    phi.iter_mut().for_each(|p| *p -= lo);

    let n = space.len();
    let mut slack = f64::NEG_INFINITY;
    for i in 0..n {
        let row = space.row(i);
        for j in 0..i {
            slack = slack.max((phi[i] - phi[j]).abs() - row[j]);
        }
    }
    let dual_value: f64 = phi
        .iter()
        .zip(f.iter().zip(w))
        .map(|(p, (f, w))| p * f * w)
        .sum();
    let primal_value: f64 = plan
        .flows
        .iter()
        .map(|fl| fl.amount * space.d(fl.from, fl.to))
        .sum();
    Ok(Potential {
        phi,
        lipschitz_slack: slack,
        dual_value,
        primal_value,
        duality_gap: (primal_value - dual_value).abs(),
        flows: plan.flows,
    })
}

struct Plan {
    flows: Vec<Flow>,
    /// Dual variables `v_j` with `u_i − v_j ≤ d(i,j)` and equality on the support.
    sink_potential: Vec<f64>,
}

/// Fixed-point resolution of the integer supplies.
const FLOW_UNITS: f64 = (1u64 << 50) as f64;

/// Primal network simplex on the complete bipartite graph. Supplies are
/// rounded to integers so that pivots are exact; an artificial root with
/// expensive arcs gives the starting basis, the leaving arc follows the
/// strongly feasible rule, and the entering arc is found by block pricing.
fn network_simplex(
    space: &DiscreteSpace,
    sources: &[usize],
    sinks: &[usize],
    excess: &[f64],
    deficit: &[f64],
) -> Plan {
    let (ns, nt) = (sources.len(), sinks.len());
    let nodes = ns + nt;
    let root = nodes;
    let real = ns * nt;
    let cost: Vec<f64> = sources
        .iter()
        .flat_map(|&i| sinks.iter().map(move |&j| space.d(i, j)))
        .collect();
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let art_cost = (nodes as f64 + 1.0) * (max_cost + 1.0);
    let eps = 1e-11 * (1.0 + max_cost);

    let total_s: f64 = excess.iter().sum();
    let total_t: f64 = deficit.iter().sum();
    let unit = total_s / FLOW_UNITS;
    let mut supply: Vec<i64> = excess
        .iter()
        .map(|e| (e / total_s * FLOW_UNITS).round() as i64)
        .collect();
    let mut demand: Vec<i64> = deficit
        .iter()
        .map(|d| (d / total_t * FLOW_UNITS).round() as i64)
        .collect();
    let diff = supply.iter().sum::<i64>() - demand.iter().sum::<i64>();
    if let Some(j) = (0..nt).max_by_key(|&j| demand[j]) {
        demand[j] += diff;
    }
    supply.iter_mut().for_each(|s| *s = (*s).max(0));
    demand.iter_mut().for_each(|d| *d = (*d).max(0));

    // Arc `e < real` joins source `e / nt` to sink `ns + e % nt`; arc
    // `real + u` joins node `u` and the root.
    let ends = |e: usize| -> (usize, usize) {
        if e < real {
            (e / nt, ns + e % nt)
        } else if e - real < ns {
            (e - real, root)
        } else {
            (root, e - real)
        }
    };
    let arc_cost = |e: usize| -> f64 {
        if e < real {
            cost[e]
        } else if e - real < ns {
            0.0
        } else {
            art_cost
        }
    };

    let mut basis: Vec<usize> = (0..nodes).map(|u| real + u).collect();
    let mut bflow: Vec<i64> = supply.iter().chain(&demand).copied().collect();

    let mut parent = vec![usize::MAX; nodes + 1];
    let mut pred_slot = vec![usize::MAX; nodes + 1];
    let mut up = vec![false; nodes + 1];
    let mut depth = vec![0usize; nodes + 1];
    let mut pi = vec![0.0; nodes + 1];
    let mut deg = vec![0usize; nodes + 2];
    let mut adj = vec![(0usize, 0usize); 2 * nodes];
    let mut stack = Vec::with_capacity(nodes + 1);

    let total_arcs = real + nodes;
    let block = ((total_arcs as f64).sqrt() as usize).max(10);
    let mut next_arc = 0usize;

    loop {
        // Rebuild parent pointers, depths and potentials from the basis.
        deg.fill(0);
        for &e in &basis {
            let (a, b) = ends(e);
            deg[a + 1] += 1;
            deg[b + 1] += 1;
        }
        for u in 0..=nodes {
            deg[u + 1] += deg[u];
        }
        let mut fill = deg.clone();
        for (k, &e) in basis.iter().enumerate() {
            let (a, b) = ends(e);
            adj[fill[a]] = (b, k);
            fill[a] += 1;
            adj[fill[b]] = (a, k);
            fill[b] += 1;
        }
        parent[root] = usize::MAX;
        pred_slot[root] = usize::MAX;
        depth[root] = 0;
        pi[root] = 0.0;
        stack.clear();
        stack.push(root);
        while let Some(x) = stack.pop() {
            for &(y, k) in &adj[deg[x]..deg[x + 1]] {
                if k == pred_slot[x] {
                    continue;
                }
                parent[y] = x;
                pred_slot[y] = k;
                depth[y] = depth[x] + 1;
                let e = basis[k];
                let c = arc_cost(e);
                if ends(e).0 == y {
                    up[y] = true;
                    pi[y] = pi[x] - c;
                } else {
                    up[y] = false;
                    pi[y] = pi[x] + c;
                }
                stack.push(y);
            }
        }

        // Block pricing.
        let mut entering = None;
        let (mut best, mut seen) = (-eps, 0usize);
        let mut e = next_arc;
        for _ in 0..total_arcs {
            let (a, b) = ends(e);
            let rc = arc_cost(e) + pi[a] - pi[b];
            if rc < best {
                best = rc;
                entering = Some(e);
            }
            seen += 1;
            e += 1;
            if e == total_arcs {
                e = 0;
            }
            if seen >= block && entering.is_some() {
                break;
            }
        }
        let Some(ent) = entering else { break };
        next_arc = e;

        let (u, v) = ends(ent);
        let (mut a, mut b) = (u, v);
        while a != b {
            if depth[a] >= depth[b] {
                a = parent[a];
            } else {
                b = parent[b];
            }
        }
        let join = a;
        let mut delta = i64::MAX;
        let mut leaving = usize::MAX;
        let mut w = u;
        while w != join {
            if up[w] && bflow[pred_slot[w]] < delta {
                delta = bflow[pred_slot[w]];
                leaving = w;
            }
            w = parent[w];
        }
        let mut w = v;
        while w != join {
            if !up[w] && bflow[pred_slot[w]] <= delta {
                delta = bflow[pred_slot[w]];
                leaving = w;
            }
            w = parent[w];
        }
        debug_assert!(leaving != usize::MAX, "transport problem is bounded");
        if delta > 0 {
            let mut w = u;
            while w != join {
                bflow[pred_slot[w]] += if up[w] { -delta } else { delta };
                w = parent[w];
            }
            let mut w = v;
            while w != join {
                bflow[pred_slot[w]] += if up[w] { delta } else { -delta };
                w = parent[w];
            }
        }
        let k = pred_slot[leaving];
        basis[k] = ent;
        bflow[k] = delta;
    }

    let mut flows = Vec::new();
    for (k, &e) in basis.iter().enumerate() {
        if e < real && bflow[k] > 0 {
            flows.push(Flow {
                from: sources[e / nt],
                to: sinks[e % nt],
                amount: bflow[k] as f64 * unit,
            });
        }
    }
    flows.sort_by(|x, y| x.from.cmp(&y.from).then(x.to.cmp(&y.to)));
    Plan {
        flows,
        sink_potential: (0..nt).map(|j| -pi[ns + j]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localize::space::Geometry;

    fn line(ts: &[f64], ws: &[f64]) -> DiscreteSpace {
        let coords: Vec<[f64; 3]> = ts.iter().map(|t| [*t, 0.0, 0.0]).collect();
        let ts = ts.to_vec();
        DiscreteSpace::from_metric(Some(coords), ws.to_vec(), Geometry::Line, |i, j| {
            (ts[i] - ts[j]).abs()
        })
        .unwrap()
    }

    #[test]
    fn localization_function_values() {
        let s = line(&(0..10).map(f64::from).collect::<Vec<_>>(), &[1.0; 10]);
        let mask: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let f = localization_function(&s, &mask).unwrap();
        assert!((f[0] - 10.0 / 3.0).abs() < 1e-14 && (f[9] + 10.0 / 7.0).abs() < 1e-14);
        let mean: f64 = f.iter().zip(s.weights()).map(|(a, b)| a * b).sum();
        assert!(mean.abs() < 1e-15);
        assert!(localization_function(&s, &[false; 10]).is_err());
        assert!(localization_function(&s, &[true; 10]).is_err());
    }

    #[test]
    fn two_point_space() {
        let s = line(&[0.0, 1.7], &[0.3, 0.7]);
        let f = localization_function(&s, &[true, false]).unwrap();
        let p = kantorovich_potential(&s, &f).unwrap();
        assert!((p.phi[0] - p.phi[1] - 1.7).abs() < 1e-12);
        assert!(p.duality_gap < 1e-12);
        assert!((p.primal_value - 1.7).abs() < 1e-12);
    }

    #[test]
    fn line_potential_is_minus_t() {
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.08).collect();
        let ws: Vec<f64> = ts.iter().map(|t| t.sin() + 0.1).collect();
        let s = line(&ts, &ws);
        let mask: Vec<bool> = (0..40).map(|i| i < 15).collect();
        let f = localization_function(&s, &mask).unwrap();
        let p = kantorovich_potential(&s, &f).unwrap();
        let c = p.phi[0];
        for (t, phi) in ts.iter().zip(&p.phi) {
            assert!((phi - (c - t)).abs() < 1e-9, "{t} {phi}");
        }
        assert!(p.lipschitz_slack <= 1e-12);
        assert!(p.duality_gap <= 1e-12);
    }
}
