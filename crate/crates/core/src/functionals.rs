//! Builders for the concrete functionals: 1D total variation, the l1 and
//! max norms, the staggered-grid divergence, and arbitrary operators.

use crate::error::{Error, Result};
use crate::functional::{PolyhedralFunctional, StructureTag};
use crate::linalg::Mat;

/// A 2D cell grid for the divergence functional. The vector field has two
/// components per cell (fluxes on the cell's right and top faces); faces
/// on the domain boundary carry zero flux and never enter the divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 1 || ny < 1 {
            return Err(Error::InvalidInput("grid needs nx, ny >= 1".into()));
        }
        Ok(GridSpec { nx, ny })
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Component index of the x-flux stored at cell (i, j).
    pub fn ux(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Component index of the y-flux stored at cell (i, j).
    pub fn uy(&self, i: usize, j: usize) -> usize {
        self.cells() + j * self.nx + i
    }
}

/// J(u) = sum |u_{i+1} - u_i|: forward differences, m = n - 1.
/// The kernel is the constants; A A^T is the tridiagonal (-1, 2, -1).
pub fn tv1d(n: usize) -> Result<PolyhedralFunctional> {
    if n < 2 {
        return Err(Error::InvalidInput("tv1d needs n >= 2".into()));
    }
    let mut rows = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let mut r = vec![0.0; n];
        r[i] = -1.0;
        r[i + 1] = 1.0;
        rows.push(r);
    }
    PolyhedralFunctional::from_operator(StructureTag::Tv1d, Mat::from_rows(rows)?)
}

/// J(u) = ||u||_1: A is the identity, K is the unit box.
pub fn l1(n: usize) -> Result<PolyhedralFunctional> {
    if n < 1 {
        return Err(Error::InvalidInput("l1 needs n >= 1".into()));
    }
    PolyhedralFunctional::from_operator(StructureTag::L1, Mat::identity(n))
}

/// J(u) = max_i |u_i|, with the closed-form subdifferential oracle. The
/// dual ball is the l1 unit ball, which is not of the form A^T [-1,1]^m
/// with small m, so this functional carries no operator.
pub fn linf(n: usize) -> Result<PolyhedralFunctional> {
    PolyhedralFunctional::max_abs(n)
}

/// Discrete divergence of a staggered 2D vector field with zero normal
/// flux on the domain boundary. One divergence row per cell; A A^T is the
/// 5-point Neumann Laplacian on the cell grid.
pub fn grid_divergence(g: GridSpec) -> Result<PolyhedralFunctional> {
    let m = g.cells();
    let n = 2 * m;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let cell = j * g.nx + i;
            if i + 1 < g.nx {
                triplets.push((cell, g.ux(i, j), 1.0));
            }
            if i > 0 {
                triplets.push((cell, g.ux(i - 1, j), -1.0));
            }
            if j + 1 < g.ny {
                triplets.push((cell, g.uy(i, j), 1.0));
            }
            if j > 0 {
                triplets.push((cell, g.uy(i, j - 1), -1.0));
            }
        }
    }
    let a = Mat::from_triplets(m, n, &triplets)?;
    PolyhedralFunctional::from_operator(StructureTag::GridDiv, a)
}

/// Wraps an arbitrary finite operator verbatim. Rows that are identically
/// zero are rejected: their dual coordinate is degenerate.
pub fn custom(a: Mat) -> Result<PolyhedralFunctional> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("operator has non-finite entries".into()));
    }
    if let Some(&i) = a.zero_rows().first() {
        return Err(Error::DegenerateRow(i));
    }
    PolyhedralFunctional::from_operator(StructureTag::Custom, a)
}

/// Row-wise diagonal dominance of A A^T: true iff every row satisfies
/// |d_ii| >= sum_{j != i} |d_ij|. The slack is the worst-row margin.
pub fn diag_dominance_report(f: &PolyhedralFunctional) -> Result<(bool, f64)> {
    let a = f.operator().ok_or(Error::Unsupported { what: "diag_dominance_report", tag: "linf" })?;
    let g = a.aat();
    let mut worst = f64::INFINITY;
    for i in 0..g.rows() {
        let mut off = 0.0;
        for j in 0..g.cols() {
            if j != i {
                off += g[(i, j)].abs();
            }
        }
        let slack = g[(i, i)].abs() - off;
        if slack < worst {
            worst = slack;
        }
    }
    if !worst.is_finite() {
        worst = 0.0;
    }
    Ok((worst >= 0.0, worst))
}

/// Parses a functional descriptor:
/// `{"type":"tv1d","n":128}`, `{"type":"l1","n":8}`, `{"type":"linf","n":8}`,
/// `{"type":"grid_div","nx":8,"ny":8}`, or
/// `{"type":"custom","m":2,"n":2,"triplets":[[i,j,v],...]}`.
pub fn from_descriptor(text: &str) -> Result<PolyhedralFunctional> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad descriptor JSON: {e}")))?;
    let ty = v
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| Error::InvalidInput("descriptor needs a \"type\" string".into()))?;
    let get_usize = |key: &str| -> Result<usize> {
        v.get(key)
            .and_then(|x| x.as_u64())
            .map(|x| x as usize)
            .ok_or_else(|| Error::InvalidInput(format!("descriptor needs integer \"{key}\"")))
    };
    match ty {
        "tv1d" => tv1d(get_usize("n")?),
        "l1" => l1(get_usize("n")?),
        "linf" => linf(get_usize("n")?),
        "grid_div" => grid_divergence(GridSpec::new(get_usize("nx")?, get_usize("ny")?)?),
        "custom" => {
            let m = get_usize("m")?;
            let n = get_usize("n")?;
            let trips = v
                .get("triplets")
                .and_then(|t| t.as_array())
                .ok_or_else(|| Error::InvalidInput("custom descriptor needs \"triplets\"".into()))?;
            let mut parsed = Vec::with_capacity(trips.len());
            for (k, t) in trips.iter().enumerate() {
                let row = t.as_array().filter(|r| r.len() == 3).ok_or_else(|| {
                    Error::InvalidInput(format!("triplet {k} must be [row, col, value]"))
                })?;
                let i = row[0].as_u64().ok_or_else(|| Error::InvalidInput(format!("triplet {k}: bad row")))?;
                let j = row[1].as_u64().ok_or_else(|| Error::InvalidInput(format!("triplet {k}: bad col")))?;
                let val = row[2].as_f64().ok_or_else(|| Error::InvalidInput(format!("triplet {k}: bad value")))?;
                parsed.push((i as usize, j as usize, val));
            }
            custom(Mat::from_triplets(m, n, &parsed)?)
        }
        other => Err(Error::InvalidInput(format!("unknown functional type \"{other}\""))),
    }
}
