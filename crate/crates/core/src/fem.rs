//! Piecewise-linear finite elements on a uniform mesh of `[0, 1]`.
//!
//! Node `nod - 1` (x = 1) carries the Dirichlet conditions of every field; x = 0 is a
//! natural (zero-flux) boundary.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// 3-point Gauss rule on the reference element `[0, 1]`: (abscissa, weight).
pub const GAUSS3: [(f64, f64); 3] = [
    (0.5 - 0.387_298_334_620_741_7, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.5 + 0.387_298_334_620_741_7, 5.0 / 18.0),
];

/// Values of the two local hat functions at reference coordinate `xi`.
#[inline]
pub fn shape(xi: f64) -> [f64; 2] {
    [1.0 - xi, xi]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    nod: usize,
    h: f64,
}

impl Mesh1D {
    pub fn uniform(nod: usize) -> Result<Self> {
        if nod < 3 {
            return Err(Error::invalid(format!("mesh needs at least 3 nodes, got {nod}")));
        }
        Ok(Self {
            nod,
            h: 1.0 / (nod - 1) as f64,
        })
    }

    pub fn nod(&self) -> usize {
        self.nod
    }

    pub fn elements(&self) -> usize {
        self.nod - 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Index of the Dirichlet node (x = 1).
    pub fn dirichlet(&self) -> usize {
        self.nod - 1
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.nod - 1 {
            1.0
        } else {
            j as f64 * self.h
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nod).map(|j| self.x(j))
    }

    pub fn check(&self, v: &GridFunction) -> Result<()> {
        if v.len() != self.nod {
            return Err(Error::DimensionMismatch(format!(
                "grid function has {} values, mesh has {} nodes",
                v.len(),
                self.nod
            )));
        }
        Ok(())
    }
}

/// Nodal coefficients of a piecewise-linear function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridFunction(pub Vec<f64>);

impl GridFunction {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, v: f64) -> Self {
        Self(vec![v; n])
    }

    pub fn from_fn(mesh: &Mesh1D, f: impl Fn(f64) -> f64) -> Self {
        Self(mesh.nodes().map(f).collect())
    }

    /// Value of the interpolant at reference coordinate `xi` of element `e`.
    #[inline]
    pub fn at(&self, e: usize, xi: f64) -> f64 {
        self.0[e] * (1.0 - xi) + self.0[e + 1] * xi
    }

    #[inline]
    pub fn slope(&self, e: usize, h: f64) -> f64 {
        (self.0[e + 1] - self.0[e]) / h
    }
}

impl Deref for GridFunction {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for GridFunction {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Scalar tridiagonal matrix. `lower[0]` and `upper[n - 1]` are unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub main: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            main: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.main.len()
    }

    fn add_element(&mut self, e: usize, local: [[f64; 2]; 2]) {
        self.main[e] += local[0][0];
        self.upper[e] += local[0][1];
        self.lower[e + 1] += local[1][0];
        self.main[e + 1] += local[1][1];
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.main[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (1..self.dim()).all(|i| self.lower[i] == self.upper[i - 1])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.dim()])
    }
}

/// Consistent mass matrix `M_jk = ∫ φ_j φ_k`.
pub fn assemble_mass(mesh: &Mesh1D) -> Tridiagonal {
    let h = mesh.h();
    let local = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
    let mut m = Tridiagonal::zeros(mesh.nod());
    for e in 0..mesh.elements() {
        m.add_element(e, local);
    }
    m
}

/// `K_jk = ∫ w φ_j' φ_k'` for the piecewise-linear weight `w`.
///
/// The gradients are element-constant, so the element-midpoint value of `w` integrates
/// the product exactly.
pub fn assemble_weighted_stiffness(mesh: &Mesh1D, w: &GridFunction) -> Result<Tridiagonal> {
    mesh.check(w)?;
    let h = mesh.h();
    let mut k = Tridiagonal::zeros(mesh.nod());
    for e in 0..mesh.elements() {
        let c = 0.5 * (w[e] + w[e + 1]) / h;
        k.add_element(e, [[c, -c], [-c, c]]);
    }
    Ok(k)
}

pub fn assemble_stiffness(mesh: &Mesh1D) -> Tridiagonal {
    assemble_weighted_stiffness(mesh, &GridFunction::constant(mesh.nod(), 1.0))
        .expect("constant weight matches mesh")
}

pub type Block = [[f64; 3]; 3];

pub const ZERO_BLOCK: Block = [[0.0; 3]; 3];
pub const IDENTITY_BLOCK: Block = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Tridiagonal matrix of 3×3 blocks acting on node-major vectors `[v1_0, v2_0, v3_0, v1_1, …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    pub lower: Vec<Block>,
    pub diag: Vec<Block>,
    pub upper: Vec<Block>,
}

impl BlockTridiagonal {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            lower: vec![ZERO_BLOCK; nodes],
            diag: vec![ZERO_BLOCK; nodes],
            upper: vec![ZERO_BLOCK; nodes],
        }
    }

    pub fn identity(nodes: usize) -> Self {
        Self {
            diag: vec![IDENTITY_BLOCK; nodes],
            ..Self::zeros(nodes)
        }
    }

    pub fn nodes(&self) -> usize {
        self.diag.len()
    }

    /// Mutable access to the block coupling node `row` to node `col` (|row - col| ≤ 1).
    pub fn block_mut(&mut self, row: usize, col: usize) -> &mut Block {
        if col == row {
            &mut self.diag[row]
        } else if col + 1 == row {
            &mut self.lower[row]
        } else if col == row + 1 {
            &mut self.upper[row]
        } else {
            panic!("block ({row}, {col}) outside the tridiagonal band")
        }
    }

    /// Replaces the rows of `node` with identity rows.
    pub fn set_identity_rows(&mut self, node: usize) {
        self.lower[node] = ZERO_BLOCK;
        self.diag[node] = IDENTITY_BLOCK;
        self.upper[node] = ZERO_BLOCK;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.nodes();
        assert_eq!(x.len(), 3 * n);
        let mut y = vec![0.0; 3 * n];
        for i in 0..n {
            let yi = &mut y[3 * i..3 * i + 3];
            add_block_mul(yi, &self.diag[i], &x[3 * i..3 * i + 3]);
            if i > 0 {
                add_block_mul(yi, &self.lower[i], &x[3 * i - 3..3 * i]);
            }
            if i + 1 < n {
                add_block_mul(yi, &self.upper[i], &x[3 * i + 3..3 * i + 6]);
            }
        }
        y
    }

    /// Transposed product `A^T x`.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        let n = self.nodes();
        assert_eq!(x.len(), 3 * n);
        let mut y = vec![0.0; 3 * n];
        for i in 0..n {
            let xi = &x[3 * i..3 * i + 3];
            add_block_tmul(&mut y[3 * i..3 * i + 3], &self.diag[i], xi);
            if i > 0 {
                add_block_tmul(&mut y[3 * i - 3..3 * i], &self.lower[i], xi);
            }
            if i + 1 < n {
                add_block_tmul(&mut y[3 * i + 3..3 * i + 6], &self.upper[i], xi);
            }
        }
        y
    }

    /// Max-row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        let n = self.nodes();
        let mut best = 0.0f64;
        for i in 0..n {
            for r in 0..3 {
                let mut s: f64 = self.diag[i][r].iter().map(|v| v.abs()).sum();
                if i > 0 {
                    s += self.lower[i][r].iter().map(|v| v.abs()).sum::<f64>();
                }
                if i + 1 < n {
                    s += self.upper[i][r].iter().map(|v| v.abs()).sum::<f64>();
                }
                best = best.max(s);
            }
        }
        best
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        solve_block_tridiagonal(self, b)
    }
}

fn add_block_mul(y: &mut [f64], a: &Block, x: &[f64]) {
    for r in 0..3 {
        y[r] += a[r][0] * x[0] + a[r][1] * x[1] + a[r][2] * x[2];
    }
}

fn add_block_tmul(y: &mut [f64], a: &Block, x: &[f64]) {
    for c in 0..3 {
        y[c] += a[0][c] * x[0] + a[1][c] * x[1] + a[2][c] * x[2];
    }
}

fn block_mul(a: &Block, b: &Block) -> Block {
    let mut c = ZERO_BLOCK;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

/// LU factors of a 3×3 block with partial pivoting.
struct BlockLu {
    lu: Block,
    perm: [usize; 3],
}

const PIVOT_RTOL: f64 = 1e-14;

impl BlockLu {
    /// On failure returns the local row (0..3) whose pivot vanished.
    fn factor(a: &Block) -> std::result::Result<Self, usize> {
        let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return Err(0);
        }
        let mut lu = *a;
        let mut perm = [0, 1, 2];
        for k in 0..3 {
            let p = (k..3)
                .max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))
                .unwrap();
            if lu[p][k].abs() <= PIVOT_RTOL * scale {
                return Err(k);
            }
            lu.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..3 {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                for j in k + 1..3 {
                    lu[i][j] -= f * lu[k][j];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, b: [f64; 3]) -> [f64; 3] {
        let lu = &self.lu;
        let mut y = [b[self.perm[0]], b[self.perm[1]], b[self.perm[2]]];
        for i in 1..3 {
            for k in 0..i {
                y[i] -= lu[i][k] * y[k];
            }
        }
        for i in (0..3).rev() {
            for k in i + 1..3 {
                y[i] -= lu[i][k] * y[k];
            }
            y[i] /= lu[i][i];
        }
        y
    }

    fn solve_block(&self, b: &Block) -> Block {
        let mut out = ZERO_BLOCK;
        for c in 0..3 {
            let col = self.solve([b[0][c], b[1][c], b[2][c]]);
            for r in 0..3 {
                out[r][c] = col[r];
            }
        }
        out
    }
}

/// Block Thomas elimination. A vanishing pivot yields [`Error::SingularSystem`] with the
/// global row index at which elimination broke down.
pub fn solve_block_tridiagonal(a: &BlockTridiagonal, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nodes();
    if b.len() != 3 * n {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            3 * n
        )));
    }
    let mut c_prime: Vec<Block> = Vec::with_capacity(n);
    let mut d_prime: Vec<[f64; 3]> = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = a.diag[i];
        let mut rhs = [b[3 * i], b[3 * i + 1], b[3 * i + 2]];
        if i > 0 {
            let l = &a.lower[i];
            let lc = block_mul(l, &c_prime[i - 1]);
            let dp = d_prime[i - 1];
            for r in 0..3 {
                for c in 0..3 {
                    s[r][c] -= lc[r][c];
                }
                rhs[r] -= l[r][0] * dp[0] + l[r][1] * dp[1] + l[r][2] * dp[2];
            }
        }
        let lu = BlockLu::factor(&s).map_err(|k| Error::SingularSystem { pivot: 3 * i + k })?;
        c_prime.push(if i + 1 < n {
            lu.solve_block(&a.upper[i])
        } else {
            ZERO_BLOCK
        });
        d_prime.push(lu.solve(rhs));
    }
    let mut x = vec![0.0; 3 * n];
    for i in (0..n).rev() {
        let mut xi = d_prime[i];
        if i + 1 < n {
            let c = &c_prime[i];
            let next = [x[3 * i + 3], x[3 * i + 4], x[3 * i + 5]];
            for r in 0..3 {
                xi[r] -= c[r][0] * next[0] + c[r][1] * next[1] + c[r][2] * next[2];
            }
        }
        x[3 * i..3 * i + 3].copy_from_slice(&xi);
    }
    Ok(x)
}
