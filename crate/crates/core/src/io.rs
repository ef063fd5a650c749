//! JSON file formats for coefficient stacks, grid functions and symbols.
//!
//! Half-integers are written doubled (`l_x2`, `band_limit_x2`). Matrices are
//! row-major nested arrays with row `0` at `m = -l`. Grid values are listed in
//! node order (φ-major, then θ, then ψ).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fourier::{CoefficientStack, GridFunction, QuadratureGrid};
use crate::symbol::{Layout, Symbol};
use crate::wigner::HalfInteger;
use crate::{CMat, Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockJson {
    pub l_x2: u32,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub band_limit_x2: u32,
    pub blocks: Vec<BlockJson>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCounts {
    pub n_phi: usize,
    pub n_theta: usize,
    pub n_psi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunctionFile {
    pub grid: GridCounts,
    pub values_re: Vec<f64>,
    pub values_im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolBlockJson {
    pub node: Option<usize>,
    pub l_x2: u32,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolFile {
    pub band_limit_x2: u32,
    pub layout: String,
    pub grid: Option<GridCounts>,
    pub blocks: Vec<SymbolBlockJson>,
}

fn split(m: &CMat) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
    let im = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
    (re, im)
}

fn join(l_x2: u32, re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMat> {
    let d = l_x2 as usize + 1;
    let square = |a: &[Vec<f64>]| a.len() == d && a.iter().all(|r| r.len() == d);
    if !square(re) || !square(im) {
        return Err(Error::Format(format!("block l_x2={l_x2} must be {d}x{d}")));
    }
    Ok(CMat::from_fn(d, d, |i, j| C64::new(re[i][j], im[i][j])))
}

pub fn counts_of(grid: &QuadratureGrid) -> GridCounts {
    let (n_phi, n_theta, n_psi) = grid.counts();
    GridCounts { n_phi, n_theta, n_psi }
}

pub fn grid_from_counts(c: GridCounts) -> Result<Arc<QuadratureGrid>> {
    QuadratureGrid::from_counts(c.n_phi, c.n_theta, c.n_psi)
}

pub fn coefficients_to_file(c: &CoefficientStack) -> CoefficientFile {
    let blocks = c
        .band()
        .levels()
        .map(|l| {
            let (re, im) = split(c.block(l));
            BlockJson { l_x2: l.twice, re, im }
        })
        .collect();
    CoefficientFile { band_limit_x2: c.band().twice, blocks }
}

/// Blocks must be sorted by `l_x2` and cover `0..=band_limit_x2`.
pub fn coefficients_from_file(f: &CoefficientFile) -> Result<CoefficientStack> {
    if f.blocks.len() != f.band_limit_x2 as usize + 1 {
        return Err(Error::Format(format!(
            "{} blocks for band_limit_x2={}",
            f.blocks.len(),
            f.band_limit_x2
        )));
    }
    let mut blocks = Vec::with_capacity(f.blocks.len());
    for (k, b) in f.blocks.iter().enumerate() {
        if b.l_x2 as usize != k {
            return Err(Error::Format(format!("block {k} has l_x2={} (expected sorted, complete)", b.l_x2)));
        }
        blocks.push(join(b.l_x2, &b.re, &b.im)?);
    }
    CoefficientStack::from_blocks(blocks)
}

pub fn grid_function_to_file(f: &GridFunction) -> GridFunctionFile {
    GridFunctionFile {
        grid: counts_of(&f.grid),
        values_re: f.values.iter().map(|z| z.re).collect(),
        values_im: f.values.iter().map(|z| z.im).collect(),
    }
}

pub fn grid_function_from_file(f: &GridFunctionFile) -> Result<GridFunction> {
    if f.values_re.len() != f.values_im.len() {
        return Err(Error::Format("values_re and values_im differ in length".into()));
    }
    let grid = grid_from_counts(f.grid)?;
    let values = f.values_re.iter().zip(&f.values_im).map(|(&r, &i)| C64::new(r, i)).collect();
    GridFunction::new(grid, values)
}

pub fn symbol_to_file(s: &Symbol) -> SymbolFile {
    let band = s.band();
    let (layout, grid) = match s.layout() {
        Layout::Invariant(_) => ("invariant", None),
        Layout::Varying(_) => ("varying", s.grid().map(|g| counts_of(g))),
    };
    let node_label = |k: usize| if s.is_invariant() { None } else { Some(k) };
    let mut blocks = Vec::with_capacity(s.node_count() * band.dim());
    for k in 0..s.node_count() {
        for l in band.levels() {
            let (re, im) = split(s.block(k, l));
            blocks.push(SymbolBlockJson { node: node_label(k), l_x2: l.twice, re, im });
        }
    }
    SymbolFile { band_limit_x2: band.twice, layout: layout.into(), grid, blocks }
}

/// Blocks are expected node-major, then by `l_x2`.
pub fn symbol_from_file(f: &SymbolFile) -> Result<Symbol> {
    let nl = f.band_limit_x2 as usize + 1;
    let read_node = |chunk: &[SymbolBlockJson], node: Option<usize>| -> Result<Vec<CMat>> {
        chunk
            .iter()
            .enumerate()
            .map(|(k, b)| {
                if b.l_x2 as usize != k || b.node != node {
                    return Err(Error::Format(format!(
                        "unexpected block (node {:?}, l_x2 {}), wanted (node {node:?}, l_x2 {k})",
                        b.node, b.l_x2
                    )));
                }
                join(b.l_x2, &b.re, &b.im)
            })
            .collect()
    };
    match f.layout.as_str() {
        "invariant" => {
            if f.blocks.len() != nl {
                return Err(Error::Format(format!("{} blocks for an invariant symbol of {nl} levels", f.blocks.len())));
            }
            Symbol::invariant(read_node(&f.blocks, None)?)
        }
        "varying" => {
            let counts = f.grid.ok_or_else(|| Error::Format("varying symbol without grid".into()))?;
            let grid = grid_from_counts(counts)?;
            if f.blocks.len() != grid.len() * nl {
                return Err(Error::Format(format!(
                    "{} blocks for {} nodes and {nl} levels",
                    f.blocks.len(),
                    grid.len()
                )));
            }
            let nodal = f
                .blocks
                .chunks(nl)
                .enumerate()
                .map(|(k, c)| read_node(c, Some(k)))
                .collect::<Result<Vec<_>>>()?;
            Symbol::varying(grid, nodal)
        }
        other => Err(Error::Format(format!("unknown layout '{other}'"))),
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

pub fn band_from_x2(x2: u32) -> HalfInteger {
    HalfInteger::from_twice(x2)
}
