//! Model parameters and pointwise reaction kinetics.
//!
//! The dimensionless system is
//!
//! ```text
//! u1_t = u1 (1 - u1) - delta1 u1 u3
//! u2_t = rho2 u2 (1 - u2) + (D2 (1 - u1) u2_x)_x
//! u3_t = delta3 (u2 - u3) + u3_xx
//! ```
//!
//! with `u1` healthy tissue, `u2` tumor tissue and `u3` excess H+ concentration.

use crate::error::{Error, Result};

/// Dimensional model parameters (cgs units, molarity for acid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalParams {
    /// Healthy tissue carrying capacity (cells/cm^3).
    pub k1: f64,
    /// Tumor carrying capacity (cells/cm^3).
    pub k2: f64,
    /// Healthy growth rate (1/s).
    pub r1: f64,
    /// Tumor growth rate (1/s).
    pub r2: f64,
    /// Tumor diffusion constant (cm^2/s).
    pub d_n2: f64,
    /// H+ diffusion constant (cm^2/s).
    pub d_n3: f64,
    /// Acid production rate (M cm^3 / (cell s)).
    pub r3: f64,
    /// Acid reabsorption rate (1/s).
    pub d3: f64,
    /// Acid-induced death rate of healthy tissue (1/(M s)).
    pub d1: f64,
}

impl DimensionalParams {
    /// The literature values for every rate except `d1`, which is the unknown.
    pub fn literature(d1: f64) -> Self {
        Self {
            k1: 5e7,
            k2: 5e7,
            r1: 1e-6,
            r2: 1e-6,
            d_n2: 2e-10,
            d_n3: 5e-6,
            r3: 2.2e-17,
            d3: 1.1e-4,
            d1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("K1", self.k1),
            ("K2", self.k2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("D_N2", self.d_n2),
            ("D_N3", self.d_n3),
            ("r3", self.r3),
            ("d3", self.d3),
            ("d1", self.d1),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Acid concentration scale `L0 = r3 K2 / d3` (molar).
    pub fn acid_scale(&self) -> f64 {
        self.r3 * self.k2 / self.d3
    }

    /// Length scale `sqrt(D_N3 / r1)` (cm) mapping the unit interval to tissue.
    pub fn length_scale(&self) -> f64 {
        (self.d_n3 / self.r1).sqrt()
    }
}

/// The four dimensionless groups of the scaled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondimParams {
    pub delta1: f64,
    pub rho2: f64,
    pub d2: f64,
    pub delta3: f64,
}

impl NondimParams {
    /// Parameter regime used for the synthetic inversion experiments.
    pub fn experiment(delta1: f64) -> Self {
        Self {
            delta1,
            rho2: 1.0,
            d2: 4e-5,
            delta3: 1.0,
        }
    }

    pub fn with_delta1(self, delta1: f64) -> Self {
        Self { delta1, ..self }
    }

    /// Checks positivity of `rho2`, `d2`, `delta3` and finiteness of all groups.
    ///
    /// `delta1` is allowed to be zero because the lower end of the default admissible
    /// interval is zero.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho2", self.rho2), ("D2", self.d2), ("delta3", self.delta3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta1.is_finite() && self.delta1 >= 0.0) {
            return Err(Error::invalid(format!(
                "delta1 must be nonnegative, got {}",
                self.delta1
            )));
        }
        Ok(())
    }

    pub fn validate_in(&self, bounds: Bounds) -> Result<()> {
        self.validate()?;
        if !bounds.contains(self.delta1) {
            return Err(Error::invalid(format!(
                "delta1 = {} outside admissible interval [{}, {}]",
                self.delta1, bounds.lo, bounds.hi
            )));
        }
        Ok(())
    }
}

/// Result of [`nondimensionalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub params: NondimParams,
    /// Acid concentration scale `L0` (molar).
    pub acid_scale: f64,
}

pub fn nondimensionalize(p: &DimensionalParams) -> Result<Scaling> {
    p.validate()?;
    let params = NondimParams {
        delta1: p.d1 * p.r3 * p.k2 / (p.d3 * p.r1),
        rho2: p.r2 / p.r1,
        d2: p.d_n2 / p.d_n3,
        delta3: p.d3 / p.r1,
    };
    Ok(Scaling {
        params,
        acid_scale: p.acid_scale(),
    })
}

/// Admissible interval for `delta1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { lo: 0.0, hi: 20.0 }
    }
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("bounds require lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionValue {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl ReactionValue {
    pub fn as_array(&self) -> [f64; 3] {
        [self.f1, self.f2, self.f3]
    }
}

/// `entries[i][j] = d f_i / d u_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionJacobian {
    pub entries: [[f64; 3]; 3],
}

pub fn reaction(u1: f64, u2: f64, u3: f64, p: &NondimParams) -> ReactionValue {
    ReactionValue {
        f1: u1 * (1.0 - u1) - p.delta1 * u1 * u3,
        f2: p.rho2 * u2 * (1.0 - u2),
        f3: p.delta3 * (u2 - u3),
    }
}

pub fn reaction_jacobian(u1: f64, u2: f64, u3: f64, p: &NondimParams) -> ReactionJacobian {
    ReactionJacobian {
        entries: [
            [1.0 - 2.0 * u1 - p.delta1 * u3, 0.0, -p.delta1 * u1],
            [0.0, p.rho2 * (1.0 - 2.0 * u2), 0.0],
            [0.0, p.delta3, -p.delta3],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn literature_values_scale_to_known_groups() {
        let s = nondimensionalize(&DimensionalParams::literature(0.05)).unwrap();
        assert!(close(s.params.rho2, 1.0, 1e-14));
        assert!(close(s.params.d2, 4e-5, 1e-14));
        assert!(close(s.params.delta3, 110.0, 1e-12));
        assert!(close(s.acid_scale, 1e-5, 1e-12));
        assert!(close(s.params.delta1, 0.5, 1e-12));
    }

    #[test]
    fn nonpositive_field_is_rejected() {
        let mut p = DimensionalParams::literature(0.05);
        p.d3 = 0.0;
        assert!(matches!(nondimensionalize(&p), Err(Error::InvalidParameter(_))));
        p = DimensionalParams::literature(-1.0);
        assert!(nondimensionalize(&p).is_err());
    }

    #[test]
    fn common_time_rescaling_leaves_groups_unchanged() {
        let base = DimensionalParams::literature(0.05);
        let a = nondimensionalize(&base).unwrap().params;
        for c in [0.1, 3.0, 1e4] {
            let mut q = base;
            q.r1 *= c;
            q.r2 *= c;
            q.d3 *= c;
            q.d1 *= c;
            q.r3 *= c;
            q.d_n2 *= c;
            q.d_n3 *= c;
            let b = nondimensionalize(&q).unwrap().params;
            assert!(close(b.rho2, a.rho2, 1e-14));
            assert!(close(b.delta1, a.delta1, 1e-14));
            assert!(close(b.delta3, a.delta3, 1e-14));
            assert!(close(b.d2, a.d2, 1e-14));
        }
    }

    #[test]
    fn equilibria_have_zero_reaction() {
        for p in [NondimParams::experiment(0.5), NondimParams::experiment(16.0)] {
            assert_eq!(reaction(1.0, 0.0, 0.0, &p).as_array(), [0.0; 3]);
            assert_eq!(reaction(0.0, 1.0, 1.0, &p).as_array(), [0.0; 3]);
        }
    }

    #[test]
    fn reaction_at_midpoint() {
        let p = NondimParams::experiment(0.5);
        let f = reaction(0.5, 0.5, 0.5, &p);
        assert!((f.f1 - 0.125).abs() < 1e-15);
        assert!((f.f2 - 0.25).abs() < 1e-15);
        assert_eq!(f.f3, 0.0);
    }

    #[test]
    fn jacobian_hand_values() {
        let p = NondimParams::experiment(0.5);
        let j = reaction_jacobian(1.0, 0.0, 0.0, &p).entries;
        assert_eq!([j[0][0], j[1][1], j[2][2]], [-1.0, 1.0, -1.0]);
        assert_eq!(j[0][2], -0.5);
        assert_eq!(j[2][1], 1.0);
        let j0 = reaction_jacobian(0.0, 0.0, 0.0, &p).entries;
        assert_eq!(j0[0][0], 1.0);
        assert_eq!(j0[0][2], 0.0);
    }

    fn fd_jacobian(u: [f64; 3], p: &NondimParams) -> [[f64; 3]; 3] {
        let step = 1e-6;
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            let mut up = u;
            let mut dn = u;
            up[k] += step;
            dn[k] -= step;
            let fp = reaction(up[0], up[1], up[2], p).as_array();
            let fm = reaction(dn[0], dn[1], dn[2], p).as_array();
            for i in 0..3 {
                out[i][k] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn jacobian_matches_central_differences(
            u1 in 0.0f64..1.5, u2 in 0.0f64..1.5, u3 in 0.0f64..1.5,
            delta1 in 0.0f64..20.0, rho2 in 0.1f64..3.0, delta3 in 0.1f64..110.0,
        ) {
            let p = NondimParams { delta1, rho2, d2: 4e-5, delta3 };
            let exact = reaction_jacobian(u1, u2, u3, &p).entries;
            let fd = fd_jacobian([u1, u2, u3], &p);
            let scale = exact.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                for k in 0..3 {
                    prop_assert!((exact[i][k] - fd[i][k]).abs() <= 1e-5 * scale,
                        "entry ({i},{k}): {} vs {}", exact[i][k], fd[i][k]);
                }
            }
            prop_assert_eq!(exact[0][1], 0.0);
            prop_assert_eq!(exact[1][0], 0.0);
            prop_assert_eq!(exact[1][2], 0.0);
            prop_assert_eq!(exact[2][0], 0.0);
        }
    }
}
