//! Uniform cell-centered grids in one and two dimensions with no-flux boundaries.
//!
//! Scalars live at cell centers, vector quantities (velocities, fluxes) live on
//! faces as normal components. The discrete gradient maps cells to faces and
//! sets every boundary face to zero, which encodes the homogeneous Neumann and
//! `v·ν = 0` conditions. The discrete divergence is its negative adjoint with
//! respect to the volume-weighted inner products, so summation by parts holds
//! exactly and every flux-form update conserves the cell sum.

use crate::error::{Error, Result};

/// Geometry of a uniform rectangle (or interval) split into `nx × ny` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl GridSpec {
    pub fn new_1d(nx: usize, lx: f64) -> Result<Self> {
        Self::new(1, nx, 1, lx, 1.0)
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(2, nx, ny, lx, ly)
    }

    pub fn new(dim: usize, nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        match dim {
            1 => {
                if nx < 4 {
                    return Err(Error::config(format!("grid.nx must be >= 4 (got {nx})")));
                }
                if !(lx > 0.0 && lx.is_finite()) {
                    return Err(Error::config(format!("grid.lx must be positive (got {lx})")));
                }
                Ok(Self {
                    dim,
                    nx,
                    ny: 1,
                    lx,
                    ly: 1.0,
                })
            }
            2 => {
                if nx < 4 || ny < 4 {
                    return Err(Error::config(format!(
                        "grid.nx and grid.ny must be >= 4 in 2D (got {nx} x {ny})"
                    )));
                }
                if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
                    return Err(Error::config(format!(
                        "grid lengths must be positive (got {lx} x {ly})"
                    )));
                }
                Ok(Self { dim, nx, ny, lx, ly })
            }
            _ => Err(Error::config(format!("grid.dim must be 1 or 2 (got {dim})"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    /// Cell height; 1 in 1D so that cell volume reduces to `hx`.
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn cell_volume(&self) -> f64 {
        self.hx() * self.hy()
    }
    pub fn domain_measure(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn num_x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn num_y_faces(&self) -> usize {
        if self.dim == 2 {
            self.nx * (self.ny + 1)
        } else {
            0
        }
    }
    pub fn min_spacing(&self) -> f64 {
        if self.dim == 2 {
            self.hx().min(self.hy())
        } else {
            self.hx()
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell-center coordinates of cell `(i, j)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) * self.hx(),
            (j as f64 + 0.5) * self.hy(),
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let inside_x = (0.0..=self.lx).contains(&x);
        if self.dim == 1 {
            inside_x
        } else {
            inside_x && (0.0..=self.ly).contains(&y)
        }
    }
}

/// Cell-centered grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.num_cells()],
        }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.num_cells() {
            return Err(Error::config(format!(
                "field length {} does not match grid ({} cells)",
                data.len(),
                grid.num_cells()
            )));
        }
        Ok(Self { grid, data })
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.num_cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                data.push(f(x, y));
            }
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Volume-weighted inner product `∫ a b`.
    pub fn dot(&self, other: &Self) -> f64 {
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn integral(&self) -> f64 {
        self.sum() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Subtracts the mean in place and returns the removed value.
    pub fn project_mean_zero(&mut self) -> f64 {
        let m = mean(self);
        for v in &mut self.data {
            *v -= m;
        }
        m
    }
}

/// Normal components on cell faces. `x_faces[j*(nx+1)+i]` sits at `x = i·hx`,
/// `y_faces[j*nx+i]` at `y = j·hy`; `y_faces` is empty in 1D.
///
/// Also used as a set of per-face scalar weights (mobilities on faces).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVectorField {
    grid: GridSpec,
    pub x_faces: Vec<f64>,
    pub y_faces: Vec<f64>,
}

impl FaceVectorField {
    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, &v) in self.x_faces.iter_mut().zip(&x.x_faces) {
            *s += a * v;
        }
        for (s, &v) in self.y_faces.iter_mut().zip(&x.y_faces) {
            *s += a * v;
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            x_faces: vec![value; grid.num_x_faces()],
            y_faces: vec![value; grid.num_y_faces()],
        }
    }

    pub fn from_parts(grid: GridSpec, x_faces: Vec<f64>, y_faces: Vec<f64>) -> Result<Self> {
        if x_faces.len() != grid.num_x_faces() || y_faces.len() != grid.num_y_faces() {
            return Err(Error::config("face array lengths do not match grid"));
        }
        Ok(Self {
            grid,
            x_faces,
            y_faces,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn xf_idx(&self, i: usize, j: usize) -> usize {
        j * (self.grid.nx() + 1) + i
    }

    #[inline]
    pub fn yf_idx(&self, i: usize, j: usize) -> usize {
        j * self.grid.nx() + i
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.x_faces.iter().chain(self.y_faces.iter())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Face inner product; each face carries the volume `hx·hy` of its dual cell.
    pub fn dot(&self, other: &Self) -> f64 {
        let s: f64 = self
            .x_faces
            .iter()
            .zip(&other.x_faces)
            .chain(self.y_faces.iter().zip(&other.y_faces))
            .map(|(a, b)| a * b)
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            x_faces: self
                .x_faces
                .iter()
                .zip(&other.x_faces)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            y_faces: self
                .y_faces
                .iter()
                .zip(&other.y_faces)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            x_faces: self.x_faces.iter().map(|&v| f(v)).collect(),
            y_faces: self.y_faces.iter().map(|&v| f(v)).collect(),
        }
    }

    /// True when every boundary-face normal component is exactly zero.
    pub fn boundary_is_zero(&self) -> bool {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let xb = (0..ny).all(|j| {
            self.x_faces[self.xf_idx(0, j)] == 0.0 && self.x_faces[self.xf_idx(nx, j)] == 0.0
        });
        let yb = self.grid.dim() == 1
            || (0..nx).all(|i| {
                self.y_faces[self.yf_idx(i, 0)] == 0.0 && self.y_faces[self.yf_idx(i, ny)] == 0.0
            });
        xb && yb
    }
}

/// Spatial mean `(1/|Ω|)∫f`.
pub fn mean(f: &ScalarField) -> f64 {
    f.sum() / f.grid().num_cells() as f64
}

/// Cell-to-face difference quotient with zero boundary faces.
pub fn grad_cc_to_face(c: &ScalarField) -> FaceVectorField {
    let g = *c.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let mut out = FaceVectorField::zeros(g);
    let ihx = 1.0 / g.hx();
    for j in 0..ny {
        let row = &c.data()[j * nx..(j + 1) * nx];
        let base = j * (nx + 1);
        for i in 1..nx {
            out.x_faces[base + i] = (row[i] - row[i - 1]) * ihx;
        }
    }
    if g.dim() == 2 {
        let ihy = 1.0 / g.hy();
        for j in 1..ny {
            for i in 0..nx {
                out.y_faces[j * nx + i] = (c.data()[j * nx + i] - c.data()[(j - 1) * nx + i]) * ihy;
            }
        }
    }
    out
}

/// Face-to-cell divergence; the negative adjoint of [`grad_cc_to_face`].
pub fn div_face_to_cc(f: &FaceVectorField) -> ScalarField {
    let g = *f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let ihx = 1.0 / g.hx();
    let mut out = ScalarField::zeros(g);
    {
        let d = out.data_mut();
        for j in 0..ny {
            let base = j * (nx + 1);
            for i in 0..nx {
                d[j * nx + i] = (f.x_faces[base + i + 1] - f.x_faces[base + i]) * ihx;
            }
        }
        if g.dim() == 2 {
            let ihy = 1.0 / g.hy();
            for j in 0..ny {
                for i in 0..nx {
                    d[j * nx + i] += (f.y_faces[(j + 1) * nx + i] - f.y_faces[j * nx + i]) * ihy;
                }
            }
        }
    }
    out
}

/// Interior-face arithmetic average; boundary faces copy the adjacent cell.
pub fn face_interp(c: &ScalarField) -> FaceVectorField {
    let g = *c.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let d = c.data();
    let mut out = FaceVectorField::zeros(g);
    for j in 0..ny {
        let base = j * (nx + 1);
        let row = &d[j * nx..(j + 1) * nx];
        out.x_faces[base] = row[0];
        out.x_faces[base + nx] = row[nx - 1];
        for i in 1..nx {
            out.x_faces[base + i] = 0.5 * (row[i - 1] + row[i]);
        }
    }
    if g.dim() == 2 {
        for i in 0..nx {
            out.y_faces[i] = d[i];
            out.y_faces[ny * nx + i] = d[(ny - 1) * nx + i];
        }
        for j in 1..ny {
            for i in 0..nx {
                out.y_faces[j * nx + i] = 0.5 * (d[(j - 1) * nx + i] + d[j * nx + i]);
            }
        }
    }
    out
}

/// `div(coef · grad c)` with no-flux closure. Only interior-face weights matter.
pub fn weighted_laplacian(coef: &FaceVectorField, c: &ScalarField) -> Result<ScalarField> {
    check_positive_weights(coef)?;
    let mut out = ScalarField::zeros(*c.grid());
    apply_weighted_laplacian(c.grid(), Some(coef), c.data(), out.data_mut());
    Ok(out)
}

pub(crate) fn check_positive_weights(coef: &FaceVectorField) -> Result<()> {
    let g = coef.grid();
    let (nx, ny) = (g.nx(), g.ny());
    for j in 0..ny {
        for i in 1..nx {
            let w = coef.x_faces[coef.xf_idx(i, j)];
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::config(format!(
                    "face coefficient must be positive on interior faces (x-face ({i},{j}) = {w})"
                )));
            }
        }
    }
    if g.dim() == 2 {
        for j in 1..ny {
            for i in 0..nx {
                let w = coef.y_faces[coef.yf_idx(i, j)];
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::config(format!(
                        "face coefficient must be positive on interior faces (y-face ({i},{j}) = {w})"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Raw kernel: `out = div(coef grad c)`; `coef = None` means unit weights.
pub(crate) fn apply_weighted_laplacian(
    g: &GridSpec,
    coef: Option<&FaceVectorField>,
    c: &[f64],
    out: &mut [f64],
) {
    let (nx, ny) = (g.nx(), g.ny());
    let ihx2 = 1.0 / (g.hx() * g.hx());
    for j in 0..ny {
        let row = &c[j * nx..(j + 1) * nx];
        let o = &mut out[j * nx..(j + 1) * nx];
        let base = j * (nx + 1);
        for i in 0..nx {
            let mut acc = 0.0;
            if i > 0 {
                let w = coef.map_or(1.0, |f| f.x_faces[base + i]);
                acc -= w * (row[i] - row[i - 1]);
            }
            if i + 1 < nx {
                let w = coef.map_or(1.0, |f| f.x_faces[base + i + 1]);
                acc += w * (row[i + 1] - row[i]);
            }
            o[i] = acc * ihx2;
        }
    }
    if g.dim() == 2 {
        let ihy2 = 1.0 / (g.hy() * g.hy());
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let mut acc = 0.0;
                if j > 0 {
                    let w = coef.map_or(1.0, |f| f.y_faces[j * nx + i]);
                    acc -= w * (c[k] - c[k - nx]);
                }
                if j + 1 < ny {
                    let w = coef.map_or(1.0, |f| f.y_faces[(j + 1) * nx + i]);
                    acc += w * (c[k + nx] - c[k]);
                }
                out[k] += acc * ihy2;
            }
        }
    }
}

/// Diagonal of `-div(coef grad ·)`, used for Jacobi preconditioning.
pub(crate) fn neg_laplacian_diagonal(g: &GridSpec, coef: Option<&FaceVectorField>) -> Vec<f64> {
    let (nx, ny) = (g.nx(), g.ny());
    let ihx2 = 1.0 / (g.hx() * g.hx());
    let mut diag = vec![0.0; g.num_cells()];
    for j in 0..ny {
        let base = j * (nx + 1);
        for i in 0..nx {
            let mut d = 0.0;
            if i > 0 {
                d += coef.map_or(1.0, |f| f.x_faces[base + i]);
            }
            if i + 1 < nx {
                d += coef.map_or(1.0, |f| f.x_faces[base + i + 1]);
            }
            diag[j * nx + i] = d * ihx2;
        }
    }
    if g.dim() == 2 {
        let ihy2 = 1.0 / (g.hy() * g.hy());
        for j in 0..ny {
            for i in 0..nx {
                let mut d = 0.0;
                if j > 0 {
                    d += coef.map_or(1.0, |f| f.y_faces[j * nx + i]);
                }
                if j + 1 < ny {
                    d += coef.map_or(1.0, |f| f.y_faces[(j + 1) * nx + i]);
                }
                diag[j * nx + i] += d * ihy2;
            }
        }
    }
    diag
}

/// Conservative advection `div(c v)` with first-order upwind face values.
pub fn upwind_advect(c: &ScalarField, v: &FaceVectorField) -> ScalarField {
    let g = *c.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let d = c.data();
    let mut flux = FaceVectorField::zeros(g);
    for j in 0..ny {
        let base = j * (nx + 1);
        let row = &d[j * nx..(j + 1) * nx];
        for i in 0..=nx {
            let vf = v.x_faces[base + i];
            let upstream = if i == 0 {
                row[0]
            } else if i == nx {
                row[nx - 1]
            } else if vf > 0.0 {
                row[i - 1]
            } else {
                row[i]
            };
            flux.x_faces[base + i] = vf * upstream;
        }
    }
    if g.dim() == 2 {
        for j in 0..=ny {
            for i in 0..nx {
                let vf = v.y_faces[j * nx + i];
                let upstream = if j == 0 {
                    d[i]
                } else if j == ny {
                    d[(ny - 1) * nx + i]
                } else if vf > 0.0 {
                    d[(j - 1) * nx + i]
                } else {
                    d[j * nx + i]
                };
                flux.y_faces[j * nx + i] = vf * upstream;
            }
        }
    }
    div_face_to_cc(&flux)
}

/// Conservative advection `div(c v)` with arithmetic-mean face values.
pub fn central_advect(c: &ScalarField, v: &FaceVectorField) -> ScalarField {
    div_face_to_cc(&face_interp(c).zip_map(v, |a, b| a * b))
}

/// Face reconstruction used for the advective fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvectionScheme {
    #[default]
    Upwind,
    Central,
}

impl AdvectionScheme {
    pub fn advect(self, c: &ScalarField, v: &FaceVectorField) -> ScalarField {
        match self {
            AdvectionScheme::Upwind => upwind_advect(c, v),
            AdvectionScheme::Central => central_advect(c, v),
        }
    }
}
