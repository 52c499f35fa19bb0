//! Band structure on a regular k-grid, gap detection, and Fermi projector fields.

use std::io::Write;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraElement;
use crate::arithmetic::WeylContext;
use crate::error::{Error, Result};
use crate::format::sig12;
use crate::representations::{CMatrix, FiberedRep, KPoint, RepKind};

pub const SELF_ADJOINT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-8;
/// Minimal distance between a Fermi level and the sampled spectrum.
pub const FERMI_TOLERANCE: f64 = 1e-8;

/// Regular `g1 × g2` lattice `k = (i/g1, j/g2)` on `[0,1)²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub g1: usize,
    pub g2: usize,
}

impl Grid {
    pub fn new(g1: usize, g2: usize) -> Result<Self> {
        if g1 == 0 || g2 == 0 {
            return Err(Error::InvalidGrid(format!("grid {g1}x{g2} has no points")));
        }
        Ok(Self { g1, g2 })
    }

    pub fn square(g: usize) -> Result<Self> {
        Self::new(g, g)
    }

    pub fn len(&self) -> usize {
        self.g1 * self.g2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (i % self.g1) * self.g2 + (j % self.g2)
    }

    #[inline]
    pub fn k(&self, i: usize, j: usize) -> KPoint {
        [i as f64 / self.g1 as f64, j as f64 / self.g2 as f64]
    }

    pub fn refined(&self) -> Self {
        Self { g1: 2 * self.g1, g2: 2 * self.g2 }
    }

    fn k_of(&self, idx: usize) -> KPoint {
        self.k(idx / self.g2, idx % self.g2)
    }
}

/// Ascending eigenvalues and matching orthonormal eigenvector columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Fiberwise spectrum of a self-adjoint element over a grid.
#[derive(Clone, Debug)]
pub struct BandData {
    pub rep: FiberedRep,
    pub element: AlgebraElement,
    pub grid: Grid,
    /// `energies[grid.index(i, j)]`, ascending.
    pub energies: Vec<Vec<f64>>,
    /// Eigenvector columns matching `energies`; empty when built without frames.
    pub frames: Vec<CMatrix>,
}

impl BandData {
    pub fn dim(&self) -> usize {
        self.rep.dim()
    }

    pub fn has_frames(&self) -> bool {
        !self.frames.is_empty()
    }

    /// `(min, max)` of each sorted band over the grid.
    pub fn band_edges(&self) -> Vec<(f64, f64)> {
        band_edges(&self.energies, self.dim())
    }

    pub fn spectrum_min(&self) -> f64 {
        self.energies.iter().filter_map(|e| e.first().copied()).fold(f64::INFINITY, f64::min)
    }

    pub fn spectrum_max(&self) -> f64 {
        self.energies.iter().filter_map(|e| e.last().copied()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rows `k1,k2,band_index,energy`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k1,k2,band_index,energy")?;
        for i in 0..self.grid.g1 {
            for j in 0..self.grid.g2 {
                let [k1, k2] = self.grid.k(i, j);
                for (b, e) in self.energies[self.grid.index(i, j)].iter().enumerate() {
                    writeln!(w, "{},{},{},{}", sig12(k1), sig12(k2), b, sig12(*e))?;
                }
            }
        }
        Ok(())
    }
}

fn band_edges(energies: &[Vec<f64>], n: usize) -> Vec<(f64, f64)> {
    let mut edges = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    for e in energies {
        for (b, x) in e.iter().enumerate() {
            edges[b].0 = edges[b].0.min(*x);
            edges[b].1 = edges[b].1.max(*x);
        }
    }
    edges
}

fn check_self_adjoint(a: &AlgebraElement) -> Result<()> {
    let defect = a.self_adjoint_defect();
    if defect > SELF_ADJOINT_TOLERANCE {
        return Err(Error::NotSelfAdjoint { defect });
    }
    Ok(())
}

/// Eigendecomposition of `π_k(a)` at every grid point.
pub fn bands_on_grid(rep: &FiberedRep, a: &AlgebraElement, grid: Grid) -> Result<BandData> {
    check_self_adjoint(a)?;
    let pairs: Vec<(Vec<f64>, CMatrix)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| rep.evaluate_at_k(a, grid.k_of(idx)).map(|m| hermitian_eigen(&m)))
        .collect::<Result<_>>()?;
    let (energies, frames) = pairs.into_iter().unzip();
    Ok(BandData { rep: *rep, element: a.clone(), grid, energies, frames })
}

/// Like [`bands_on_grid`] but keeps only eigenvalues.
pub fn energies_on_grid(rep: &FiberedRep, a: &AlgebraElement, grid: Grid) -> Result<BandData> {
    check_self_adjoint(a)?;
    let energies: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| rep.evaluate_at_k(a, grid.k_of(idx)).map(|m| hermitian_eigenvalues(&m)))
        .collect::<Result<_>>()?;
    Ok(BandData { rep: *rep, element: a.clone(), grid, energies, frames: Vec::new() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub g: i64,
    pub lower: f64,
    pub upper: f64,
    pub d: i64,
    pub fermi: f64,
}

/// Gaps of the union spectrum, inf-gap first and sup-gap last.
/// The unbounded end gaps are reported with unit width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub bands: usize,
    pub gaps: Vec<Gap>,
}

impl GapReport {
    pub fn internal(&self) -> &[Gap] {
        let n = self.gaps.len();
        if n <= 2 {
            &[]
        } else {
            &self.gaps[1..n - 1]
        }
    }
}

fn candidate_gaps(edges: &[(f64, f64)], tol: f64) -> Vec<(usize, f64, f64)> {
    edges
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].0 - w[0].1 > tol)
        .map(|(b, w)| (b + 1, w[0].1, w[1].0))
        .collect()
}

/// Internal gaps wider than `tol`, confirmed on the doubled grid: a gap is
/// dropped if it closes or loses more than half its width under refinement.
pub fn detect_gaps(bd: &BandData, tol: f64) -> Result<GapReport> {
    let coarse = candidate_gaps(&bd.band_edges(), tol);
    let mut confirmed = Vec::new();
    if !coarse.is_empty() {
        let fine = energies_on_grid(&bd.rep, &bd.element, bd.grid.refined())?;
        let fine_edges = fine.band_edges();
        for (d, lo, hi) in coarse {
            let (flo, fhi) = (fine_edges[d - 1].1.max(lo), fine_edges[d].0.min(hi));
            if fhi - flo > tol && fhi - flo >= 0.5 * (hi - lo) {
                confirmed.push((d, flo, fhi));
            }
        }
    }
    Ok(assemble_report(bd, &confirmed))
}

/// Gap detection on the given grid only.
pub fn detect_gaps_unrefined(bd: &BandData, tol: f64) -> GapReport {
    assemble_report(bd, &candidate_gaps(&bd.band_edges(), tol))
}

fn assemble_report(bd: &BandData, internal: &[(usize, f64, f64)]) -> GapReport {
    let (emin, emax) = (bd.spectrum_min(), bd.spectrum_max());
    let mut gaps = Vec::with_capacity(internal.len() + 2);
    let mut push = |d: usize, lower: f64, upper: f64| {
        let g = gaps.len() as i64;
        gaps.push(Gap { g, lower, upper, d: d as i64, fermi: 0.5 * (lower + upper) });
    };
    push(0, emin - 1.0, emin);
    for &(d, lo, hi) in internal {
        push(d, lo, hi);
    }
    push(bd.dim(), emax, emax + 1.0);
    GapReport { bands: internal.len() + 1, gaps }
}

/// How a field closes up across the `k₂ = 1` seam.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Twisted(WeylContext),
}

/// Rank-`rank` projector field `P(k) = F(k) F(k)†` stored by its occupied frames.
#[derive(Clone, Debug)]
pub struct ProjectorField {
    pub grid: Grid,
    pub dim: usize,
    pub rank: usize,
    /// `dim × rank` orthonormal columns per grid point.
    pub frames: Vec<CMatrix>,
    pub kind: RepKind,
    pub ctx: WeylContext,
    pub boundary: Boundary,
}

impl ProjectorField {
    pub fn projector(&self, i: usize, j: usize) -> CMatrix {
        let f = &self.frames[self.grid.index(i, j)];
        f * f.adjoint()
    }

    /// Worst `‖P² − P‖_F`, `‖P − P†‖_F` and `|tr P − rank|` over the grid.
    pub fn projector_defects(&self) -> (f64, f64, f64) {
        let mut out = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..self.grid.g1 {
            for j in 0..self.grid.g2 {
                let p = self.projector(i, j);
                out.0 = out.0.max((&p * &p - &p).norm());
                out.1 = out.1.max((&p - p.adjoint()).norm());
                out.2 = out.2.max((p.trace().re - self.rank as f64).abs());
            }
        }
        out
    }

    fn constant(rep: &FiberedRep, grid: Grid, frame: CMatrix) -> Self {
        let boundary = boundary_of(rep);
        Self {
            grid,
            dim: rep.dim(),
            rank: frame.ncols(),
            frames: vec![frame; grid.len()],
            kind: rep.kind,
            ctx: rep.ctx,
            boundary,
        }
    }

    pub fn identity(rep: &FiberedRep, grid: Grid) -> Self {
        Self::constant(rep, grid, CMatrix::identity(rep.dim(), rep.dim()))
    }

    pub fn zero(rep: &FiberedRep, grid: Grid) -> Self {
        Self::constant(rep, grid, CMatrix::zeros(rep.dim(), 0))
    }

    /// Constant projector onto the first `rank` basis vectors.
    pub fn coordinate(rep: &FiberedRep, grid: Grid, rank: usize) -> Self {
        Self::constant(rep, grid, CMatrix::identity(rep.dim(), rank.min(rep.dim())))
    }
}

fn boundary_of(rep: &FiberedRep) -> Boundary {
    match rep.kind {
        RepKind::Weyl => Boundary::Twisted(rep.ctx),
        _ => Boundary::Periodic,
    }
}

/// Sum of eigenprojections below `fermi` at every grid point.
pub fn fermi_projector_field(bd: &BandData, fermi: f64) -> Result<ProjectorField> {
    if !bd.has_frames() {
        return Err(Error::InvalidGrid("band data was built without eigenvectors".into()));
    }
    let distance = bd.energies.iter().flatten().map(|e| (e - fermi).abs()).fold(f64::INFINITY, f64::min);
    if distance <= FERMI_TOLERANCE {
        return Err(Error::GapViolation { fermi, distance });
    }
    let (lo_edges, hi_edges): (Vec<f64>, Vec<f64>) = bd.band_edges().into_iter().unzip();
    let rank = hi_edges.iter().filter(|&&h| h < fermi).count();
    if lo_edges.iter().filter(|&&l| l < fermi).count() != rank {
        // some band straddles the level somewhere on the grid
        return Err(Error::GapViolation { fermi, distance });
    }
    let frames = bd.frames.iter().map(|f| f.columns(0, rank).into_owned()).collect();
    Ok(ProjectorField {
        grid: bd.grid,
        dim: bd.dim(),
        rank,
        frames,
        kind: bd.rep.kind,
        ctx: bd.rep.ctx,
        boundary: boundary_of(&bd.rep),
    })
}

/// Hausdorff distance between the two sampled eigenvalue sets.
pub fn spectral_hausdorff(a: &BandData, b: &BandData) -> f64 {
    let sorted = |bd: &BandData| {
        let mut v: Vec<f64> = bd.energies.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (x, y) = (sorted(a), sorted(b));
    if x.is_empty() || y.is_empty() {
        return if x.len() == y.len() { 0.0 } else { f64::INFINITY };
    }
    directed(&x, &y).max(directed(&y, &x))
}

fn directed(from: &[f64], to: &[f64]) -> f64 {
    from.iter()
        .map(|&e| {
            let pos = to.partition_point(|&t| t < e);
            let mut best = f64::INFINITY;
            if pos < to.len() {
                best = best.min((to[pos] - e).abs());
            }
            if pos > 0 {
                best = best.min((e - to[pos - 1]).abs());
            }
            best
        })
        .fold(0.0, f64::max)
}
