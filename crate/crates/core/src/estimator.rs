//! Residual-based a posteriori indicators for the forward solution.
//!
//! On element `K` at step `n` the indicator of field `i` is
//!
//! ```text
//! η_{K,i}² = h² ‖R_i‖²_{L²(K)} + h Σ_{interior nodes x_j of K} [flux_i]²(x_j)
//! ```
//!
//! with `R_i` the strong residual of the implicit Euler step, evaluated at the Gauss
//! points, and `[flux_i]` the jump of the diffusive flux across a node. The global value of
//! a field is the largest root-sum-square over elements among all steps.

use std::io::Write;

use rayon::prelude::*;

use crate::error::Result;
use crate::fem::{Mesh1D, GAUSS3};
use crate::forward::{StateTrajectory, TimeGrid};
use crate::model::{reaction, NondimParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    /// Global estimator per field.
    pub eta: [f64; 3],
    /// `indicators[n - 1][i][e]` for step `n`, field `i`, element `e`.
    pub indicators: Vec<[Vec<f64>; 3]>,
}

impl ErrorEstimate {
    /// Root-sum-square over elements for step `n >= 1`.
    pub fn step_value(&self, field: usize, n: usize) -> f64 {
        self.indicators[n - 1][field].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Step attaining the global value of `field`.
    pub fn argmax_step(&self, field: usize) -> usize {
        (1..=self.indicators.len())
            .max_by(|&a, &b| self.step_value(field, a).total_cmp(&self.step_value(field, b)))
            .unwrap_or(0)
    }

    /// CSV `field,step,element,indicator`, followed by one `field,max,all,eta` row per field.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["field", "step", "element", "indicator"])?;
        for i in 0..3 {
            for (k, step) in self.indicators.iter().enumerate() {
                for (e, v) in step[i].iter().enumerate() {
                    w.write_record([(i + 1).to_string(), (k + 1).to_string(), e.to_string(), v.to_string()])?;
                }
            }
        }
        for i in 0..3 {
            w.write_record([(i + 1).to_string(), "max".into(), "all".into(), self.eta[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `sqrt(h² ‖R‖²_{L²(K)} + h Σ jump²)` from residual samples at the Gauss points of `K`.
pub fn element_indicator(h: f64, residual: [f64; 3], jumps: &[f64]) -> f64 {
    let r2: f64 = GAUSS3.iter().zip(residual).map(|(&(_, w), r)| w * h * r * r).sum();
    let j2: f64 = jumps.iter().map(|j| j * j).sum();
    (h * h * r2 + h * j2).sqrt()
}

pub fn estimate_aposteriori(
    traj: &StateTrajectory,
    p: &NondimParams,
    mesh: &Mesh1D,
    time: &TimeGrid,
) -> Result<ErrorEstimate> {
    traj.check_grid(mesh, time)?;
    let indicators: Vec<[Vec<f64>; 3]> = (1..=time.nt())
        .into_par_iter()
        .map(|n| step_indicators(traj, p, mesh, time.tau(), n))
        .collect();
    let mut eta = [0.0f64; 3];
    for step in &indicators {
        for i in 0..3 {
            let v = step[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            eta[i] = eta[i].max(v);
        }
    }
    Ok(ErrorEstimate { eta, indicators })
}

fn step_indicators(traj: &StateTrajectory, p: &NondimParams, mesh: &Mesh1D, tau: f64, n: usize) -> [Vec<f64>; 3] {
    let h = mesh.h();
    let cur = traj.level(n);
    let prev = traj.level(n - 1);
    let [u1, u2, u3] = cur;
    let ne = mesh.elements();
    let interior = |j: usize| j > 0 && j < mesh.nod() - 1;

    // Flux jumps at nodes; fields 2 and 3 diffuse.
    let mut jump2 = vec![0.0; mesh.nod()];
    let mut jump3 = vec![0.0; mesh.nod()];
    for j in 1..mesh.nod() - 1 {
        jump2[j] = p.d2 * (1.0 - u1[j]) * (u2.slope(j, h) - u2.slope(j - 1, h));
        jump3[j] = u3.slope(j, h) - u3.slope(j - 1, h);
    }

    let mut out = [vec![0.0; ne], vec![0.0; ne], vec![0.0; ne]];
    for e in 0..ne {
        // Divergence of the u2 flux inside the element; linear u3 has no curvature.
        let div2 = -p.d2 * u1.slope(e, h) * u2.slope(e, h);
        let mut res = [[0.0; 3]; 3];
        for (q, &(xi, _)) in GAUSS3.iter().enumerate() {
            let v = [u1.at(e, xi), u2.at(e, xi), u3.at(e, xi)];
            let f = reaction(v[0], v[1], v[2], p).as_array();
            for i in 0..3 {
                let dt = (cur[i].at(e, xi) - prev[i].at(e, xi)) / tau;
                res[i][q] = f[i] - dt + if i == 1 { div2 } else { 0.0 };
            }
        }
        let nodes = [e, e + 1];
        let pick = |jumps: &[f64]| -> Vec<f64> { nodes.iter().filter(|&&j| interior(j)).map(|&j| jumps[j]).collect() };
        out[0][e] = element_indicator(h, res[0], &[]);
        out[1][e] = element_indicator(h, res[1], &pick(&jump2));
        out[2][e] = element_indicator(h, res[2], &pick(&jump3));
    }
    out
}
