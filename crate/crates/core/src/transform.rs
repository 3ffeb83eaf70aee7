//! Tensor-product quadrature grid in `(p, cos θ, φ)` with separable synthesis
//! (coefficients to grid values) and analysis (grid values to weighted inner
//! products against every basis function).

use crate::error::Result;
use crate::layout::SpectralLayout;
use crate::radial::RadialBasis;
use crate::special::{azimuthal, gauss_jacobi_rule, gauss_legendre_rule, LegendreTable, QuadratureRule};
use std::f64::consts::PI;

/// Grid resolution and the radial quadrature weight `(1−p)^α (1+p)^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub np: usize,
    pub nx: usize,
    pub nphi: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl GridSpec {
    /// Resolution comfortably above a degree-`l_max`, order-`n_max` expansion.
    pub fn for_resolution(l_max: usize, n_max: usize, extra: usize, alpha: f64, beta: f64) -> Self {
        Self {
            np: n_max + extra,
            nx: l_max + extra,
            nphi: 2 * (l_max + extra),
            alpha,
            beta,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SphericalGrid {
    pub spec: GridSpec,
    pub p: QuadratureRule,
    pub x: QuadratureRule,
    pub phi: Vec<f64>,
    layout: SpectralLayout,
    // [degree slot][k * dim + n]
    radial: Vec<Vec<f64>>,
    legendre: Vec<LegendreTable>,
    // [q][i], q = 0 for m = 0, 2m − 1 + v otherwise
    azim: Vec<Vec<f64>>,
    mode_q: Vec<usize>,
}

#[inline]
fn azimuthal_slot(m: usize, v: u8) -> usize {
    if m == 0 {
        0
    } else {
        2 * m - 1 + v as usize
    }
}

impl SphericalGrid {
    pub fn new(layout: &SpectralLayout, s: f64, spec: GridSpec) -> Result<Self> {
        let p = gauss_jacobi_rule(spec.alpha, spec.beta, spec.np)?;
        let x = gauss_legendre_rule(spec.nx)?;
        let phi: Vec<f64> = (0..spec.nphi)
            .map(|i| 2.0 * PI * i as f64 / spec.nphi as f64)
            .collect();
        let l_max = layout.degrees.iter().copied().max().unwrap_or(0);
        let mut radial = Vec::with_capacity(layout.degrees.len());
        for &l in &layout.degrees {
            let basis = RadialBasis::with_any_degree(layout.kind, s, l, layout.n_max)?;
            let mut vals = vec![0.0; p.len() * basis.dim];
            for (k, &pk) in p.nodes.iter().enumerate() {
                basis.eval_all(pk, &mut vals[k * basis.dim..(k + 1) * basis.dim]);
            }
            radial.push(vals);
        }
        let legendre = x.nodes.iter().map(|&xj| LegendreTable::new(l_max, xj)).collect();
        let nq = 2 * l_max + 1;
        let mut azim = vec![Vec::new(); nq];
        for m in 0..=l_max {
            for v in 0..=u8::from(m > 0) {
                azim[azimuthal_slot(m, v)] = phi.iter().map(|&f| azimuthal(m, v, f)).collect();
            }
        }
        let mode_q = layout.modes.iter().map(|m| azimuthal_slot(m.m, m.v)).collect();
        Ok(Self {
            spec,
            p,
            x,
            phi,
            layout: layout.clone(),
            radial,
            legendre,
            azim,
            mode_q,
        })
    }

    pub fn layout(&self) -> &SpectralLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.p.len() * self.x.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ip: usize, ix: usize, iphi: usize) -> usize {
        (ip * self.x.len() + ix) * self.phi.len() + iphi
    }

    /// Quadrature weight of a node, including the radial Jacobi weight.
    #[inline]
    pub fn weight(&self, ip: usize, ix: usize) -> f64 {
        self.p.weights[ip] * self.x.weights[ix] * 2.0 * PI / self.phi.len() as f64
    }

    /// Evaluates `f(p, θ, φ)` on every node.
    pub fn sample(&self, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &p in &self.p.nodes {
            for &x in &self.x.nodes {
                let theta = x.acos();
                for &phi in &self.phi {
                    out.push(f(p, theta, phi));
                }
            }
        }
        out
    }

    /// Weighted sum `Σ w f g` over the grid.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let (nx, nphi) = (self.x.len(), self.phi.len());
        let mut acc = 0.0;
        for ip in 0..self.p.len() {
            for ix in 0..nx {
                let w = self.weight(ip, ix);
                let base = (ip * nx + ix) * nphi;
                let s: f64 = (0..nphi).map(|i| f[base + i] * g[base + i]).sum();
                acc += w * s;
            }
        }
        acc
    }

    /// Grid values of the expansion with the given coefficients.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let lay = &self.layout;
        let (np, nx, nphi) = (self.p.len(), self.x.len(), self.phi.len());
        let nq = self.azim.len();
        // A[k][q][j]
        let mut a = vec![0.0; np * nq * nx];
        let mut psi = vec![0.0; np];
        for (mi, mode) in lay.modes.iter().enumerate() {
            let c = &coeffs[lay.block(mi)];
            let dim = c.len();
            let rad = &self.radial[lay.degree_slot(mi)];
            for (k, pk) in psi.iter_mut().enumerate() {
                let row = &rad[k * dim..(k + 1) * dim];
                *pk = row.iter().zip(c).map(|(u, v)| u * v).sum();
            }
            let q = self.mode_q[mi];
            for (k, &pk) in psi.iter().enumerate() {
                if pk == 0.0 {
                    continue;
                }
                let dst = &mut a[(k * nq + q) * nx..(k * nq + q + 1) * nx];
                for (j, d) in dst.iter_mut().enumerate() {
                    *d += pk * self.legendre[j].value(mode.l, mode.m);
                }
            }
        }
        let mut out = vec![0.0; self.len()];
        for k in 0..np {
            for q in 0..nq {
                let e = &self.azim[q];
                if e.is_empty() {
                    continue;
                }
                for j in 0..nx {
                    let aq = a[(k * nq + q) * nx + j];
                    if aq == 0.0 {
                        continue;
                    }
                    let dst = &mut out[(k * nx + j) * nphi..(k * nx + j + 1) * nphi];
                    for (d, &ei) in dst.iter_mut().zip(e) {
                        *d += aq * ei;
                    }
                }
            }
        }
        out
    }

    /// Weighted inner products of grid values with every basis function.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        let lay = &self.layout;
        let (np, nx, nphi) = (self.p.len(), self.x.len(), self.phi.len());
        let nq = self.azim.len();
        let wphi = 2.0 * PI / nphi as f64;
        // B[k][q][j]
        let mut b = vec![0.0; np * nq * nx];
        for k in 0..np {
            for j in 0..nx {
                let src = &values[(k * nx + j) * nphi..(k * nx + j + 1) * nphi];
                for q in 0..nq {
                    let e = &self.azim[q];
                    if e.is_empty() {
                        continue;
                    }
                    let s: f64 = src.iter().zip(e).map(|(u, v)| u * v).sum();
                    b[(k * nq + q) * nx + j] = wphi * s * self.x.weights[j];
                }
            }
        }
        let mut out = vec![0.0; lay.len()];
        let mut c = vec![0.0; np];
        for (mi, mode) in lay.modes.iter().enumerate() {
            let q = self.mode_q[mi];
            for (k, ck) in c.iter_mut().enumerate() {
                let src = &b[(k * nq + q) * nx..(k * nq + q + 1) * nx];
                *ck = src
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * self.legendre[j].value(mode.l, mode.m))
                    .sum::<f64>()
                    * self.p.weights[k];
            }
            let range = lay.block(mi);
            let dim = range.len();
            let rad = &self.radial[lay.degree_slot(mi)];
            let dst = &mut out[range];
            for (k, &ck) in c.iter().enumerate() {
                if ck == 0.0 {
                    continue;
                }
                let row = &rad[k * dim..(k + 1) * dim];
                for (d, &u) in dst.iter_mut().zip(row) {
                    *d += ck * u;
                }
            }
        }
        out
    }
}
