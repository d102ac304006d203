//! Direct solvers for the constant-coefficient operators of the Brinkman
//! solve and preconditioners for the cell-centered elliptic solves, by
//! separable fast sine/cosine transforms.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, Dst1, TransformType2And3};

use crate::grid::GridSpec;

#[derive(Clone)]
enum Kind {
    /// Interior faces between Dirichlet walls (DST-I).
    DirichletFaces(Arc<dyn Dst1<f64>>),
    /// Cell centers with the no-slip ghost `v_{-1} = -v_0` (DST-II/III).
    NoslipCells(Arc<dyn TransformType2And3<f64>>),
    /// Cell centers with homogeneous Neumann conditions (DCT-II/III).
    NeumannCells(Arc<dyn TransformType2And3<f64>>),
    /// A single unknown with no coupling (the missing direction in 1D).
    Trivial,
}

/// One direction of a separable eigenbasis of the 3-point `-Δ`.
#[derive(Clone)]
struct Basis {
    n: usize,
    kind: Kind,
    /// Eigenvalues, already divided by `h²`.
    eig: Vec<f64>,
    /// Factor turning the inverse transform into the exact inverse.
    inv_scale: f64,
}

impl std::fmt::Debug for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Basis").field("n", &self.n).finish_non_exhaustive()
    }
}

fn eigenvalues(n: usize, n_cells: usize, h: f64, first: usize) -> Vec<f64> {
    (0..n)
        .map(|m| (2.0 - 2.0 * (PI * (m + first) as f64 / n_cells as f64).cos()) / (h * h))
        .collect()
}

impl Basis {
    fn dirichlet_faces(planner: &mut DctPlanner<f64>, n_cells: usize, h: f64) -> Self {
        let n = n_cells - 1;
        Self {
            n,
            kind: Kind::DirichletFaces(planner.plan_dst1(n)),
            eig: eigenvalues(n, n_cells, h, 1),
            inv_scale: 2.0 / n_cells as f64,
        }
    }

    fn noslip_cells(planner: &mut DctPlanner<f64>, n: usize, h: f64) -> Self {
        Self {
            n,
            kind: Kind::NoslipCells(planner.plan_dst2(n)),
            eig: eigenvalues(n, n, h, 1),
            inv_scale: 2.0 / n as f64,
        }
    }

    fn neumann_cells(planner: &mut DctPlanner<f64>, n: usize, h: f64) -> Self {
        Self {
            n,
            kind: Kind::NeumannCells(planner.plan_dct2(n)),
            eig: eigenvalues(n, n, h, 0),
            inv_scale: 2.0 / n as f64,
        }
    }

    fn trivial() -> Self {
        Self {
            n: 1,
            kind: Kind::Trivial,
            eig: vec![0.0],
            inv_scale: 1.0,
        }
    }

    fn forward(&self, line: &mut [f64]) {
        match &self.kind {
            Kind::DirichletFaces(t) => t.process_dst1(line),
            Kind::NoslipCells(t) => t.process_dst2(line),
            Kind::NeumannCells(t) => t.process_dct2(line),
            Kind::Trivial => {}
        }
    }

    fn inverse(&self, line: &mut [f64]) {
        match &self.kind {
            Kind::DirichletFaces(t) => t.process_dst1(line),
            Kind::NoslipCells(t) => t.process_dst3(line),
            Kind::NeumannCells(t) => t.process_dct3(line),
            Kind::Trivial => {}
        }
        for v in line {
            *v *= self.inv_scale;
        }
    }
}

fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

/// Applies `f` to every row (length `nx`) and then to every column.
fn separable(a: &mut Vec<f64>, bx: &Basis, by: &Basis, f: fn(&Basis, &mut [f64])) {
    let (nx, ny) = (bx.n, by.n);
    for row in a.chunks_exact_mut(nx) {
        f(bx, row);
    }
    if ny > 1 {
        let mut t = transpose(a, ny, nx);
        for col in t.chunks_exact_mut(ny) {
            f(by, col);
        }
        *a = transpose(&t, nx, ny);
    }
}

/// `u = s(λ)^{-1} b` on a `ny × nx` block, `λ` the `-Δ` eigenvalue of each
/// mode; modes where the symbol vanishes are dropped.
fn solve_block(b: &[f64], bx: &Basis, by: &Basis, symbol: impl Fn(f64) -> f64) -> Vec<f64> {
    let nx = bx.n;
    let mut t = b.to_vec();
    separable(&mut t, bx, by, Basis::forward);
    for (k, c) in t.iter_mut().enumerate() {
        let sym = symbol(bx.eig[k % nx] + by.eig[k / nx]);
        *c = if sym != 0.0 { *c / sym } else { 0.0 };
    }
    separable(&mut t, bx, by, Basis::inverse);
    t
}

/// Face Helmholtz solver `(k - η Δ) u = b` for one velocity component with
/// no-slip walls, matching the MAC face Laplacian of the Brinkman solve.
#[derive(Debug, Clone)]
pub(crate) struct FaceHelmholtz {
    grid: GridSpec,
    x_face: (Basis, Basis),
    y_face: Option<(Basis, Basis)>,
}

impl FaceHelmholtz {
    pub(crate) fn new(g: &GridSpec) -> Self {
        let (nx, ny, hx, hy) = (g.nx(), g.ny(), g.hx(), g.hy());
        let mut pl = DctPlanner::new();
        if g.dim() == 1 {
            return Self {
                grid: *g,
                x_face: (Basis::dirichlet_faces(&mut pl, nx, hx), Basis::trivial()),
                y_face: None,
            };
        }
        Self {
            grid: *g,
            x_face: (Basis::dirichlet_faces(&mut pl, nx, hx), Basis::noslip_cells(&mut pl, ny, hy)),
            y_face: Some((Basis::noslip_cells(&mut pl, nx, hx), Basis::dirichlet_faces(&mut pl, ny, hy))),
        }
    }

    /// Solves for the x component (`x_comp`) or the y component; `b` and the
    /// result use the face layout, boundary faces are zero.
    pub(crate) fn solve(&self, x_comp: bool, k: f64, eta: f64, b: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let symbol = |lam: f64| k + eta * lam;
        let mut out = vec![0.0; b.len()];
        if x_comp {
            let (bx, by) = &self.x_face;
            let w = nx + 1;
            let inner: Vec<f64> = (0..ny).flat_map(|j| b[j * w + 1..j * w + nx].iter().copied()).collect();
            let u = solve_block(&inner, bx, by, symbol);
            for j in 0..ny {
                out[j * w + 1..j * w + nx].copy_from_slice(&u[j * (nx - 1)..(j + 1) * (nx - 1)]);
            }
        } else {
            let (bx, by) = self.y_face.as_ref().expect("y faces exist in 2D");
            let u = solve_block(&b[nx..ny * nx], bx, by, symbol);
            out[nx..ny * nx].copy_from_slice(&u);
        }
        out
    }
}

/// Functions of the constant-coefficient Neumann `-Δ` on cell centers.
#[derive(Debug, Clone)]
pub(crate) struct NeumannPoissonDirect {
    bx: Basis,
    by: Basis,
}

impl NeumannPoissonDirect {
    pub(crate) fn new(g: &GridSpec) -> Self {
        let mut pl = DctPlanner::new();
        let by = if g.dim() == 2 { Basis::neumann_cells(&mut pl, g.ny(), g.hy()) } else { Basis::trivial() };
        Self {
            bx: Basis::neumann_cells(&mut pl, g.nx(), g.hx()),
            by,
        }
    }

    /// Mean-zero solution of `-Δu = b`; the constant mode of `b` is dropped.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_symbol(b, |lam| lam)
    }

    /// `u = s(-Δ)^{-1} b` for a symbol `s` of the eigenvalue; modes where
    /// `s` vanishes are dropped.
    pub(crate) fn solve_symbol(&self, b: &[f64], s: impl Fn(f64) -> f64) -> Vec<f64> {
        solve_block(b, &self.bx, &self.by, s)
    }
}
