use super::field::BlockField;
use super::spectral::SpectralDeriv;
use crate::mesh::BlockSpec;

/// Diffusion coefficient.
pub const NU: f64 = 0.05;
/// Advection speed along `x`.
pub const ADVECTION: f64 = 1.0;

/// Source term for variable `p` (0-based) on plane `n` at `(x, y)`.
///
/// Plane 1 gets `0.5 sin(2x + p) cos(3y - p)`, plane 2 gets
/// `0.5 cos(2x - p) sin(3y + p)`, every other plane zero.
pub fn forcing(p: usize, n: usize, x: f64, y: f64) -> f64 {
    let p = p as f64;
    match n {
        1 => 0.5 * (2.0 * x + p).sin() * (3.0 * y - p).cos(),
        2 => 0.5 * (2.0 * x - p).cos() * (3.0 * y + p).sin(),
        _ => 0.0,
    }
}

/// Initial interior value.
pub fn initial_value(x: f64, y: f64, p: usize, n: usize) -> f64 {
    let (p, n) = (p as f64, n as f64);
    0.1 * (x + 0.7 * n + 0.3 * p).sin() * (y - 0.2 * n).cos()
}

/// Forcing of one block sampled at its cell centres, one row of `ni + 2`
/// values per `(j, p, n)` for the forced planes.
#[derive(Debug, Clone)]
pub struct BlockForcing {
    ni: usize,
    nj: usize,
    npde: usize,
    forced: usize,
    rows: Vec<f64>,
    zero: Vec<f64>,
}

impl BlockForcing {
    pub fn new(spec: &BlockSpec, npde: usize, nplanes: usize) -> Self {
        let (ni, nj) = (spec.ni, spec.nj);
        let forced = nplanes.saturating_sub(1).min(2);
        let w = ni + 2;
        let mut rows = vec![0.0; forced * npde * (nj + 2) * w];
        for f in 0..forced {
            for p in 0..npde {
                for j in 1..=nj {
                    let start = ((f * npde + p) * (nj + 2) + j) * w;
                    for i in 1..=ni {
                        let (x, y) = spec.cell_centre(i, j);
                        rows[start + i] = forcing(p, f + 1, x, y);
                    }
                }
            }
        }
        BlockForcing { ni, nj, npde, forced, rows, zero: vec![0.0; w] }
    }

    #[inline]
    pub fn row(&self, j: usize, p: usize, n: usize) -> &[f64] {
        let w = self.ni + 2;
        if n == 0 || n > self.forced {
            return &self.zero;
        }
        let start = (((n - 1) * self.npde + p) * (self.nj + 2) + j) * w;
        &self.rows[start..start + w]
    }
}

/// Geometry needed to address a block's storage.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape {
    pub ni: usize,
    pub nj: usize,
    pub npde: usize,
    pub nplanes: usize,
}

impl Shape {
    #[inline]
    pub fn row_start(&self, j: usize, p: usize, n: usize) -> usize {
        ((n * self.npde + p) * (self.nj + 2) + j) * (self.ni + 2)
    }

    pub fn len(&self) -> usize {
        (self.ni + 2) * (self.nj + 2) * self.npde * self.nplanes
    }
}

const CHUNK: usize = 16;

/// Residual of row `(j, p, n)` into `out[1..=ni]`. `acc` is scratch of
/// length `ni + 2`.
///
/// Per point the sum is `((diffusion + convection) + coupling) + forcing`,
/// with the coupling accumulated over ascending `m` from zero.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn residual_row(
    q: &[f64],
    shape: Shape,
    h: f64,
    d: &SpectralDeriv,
    forcing: &[f64],
    j: usize,
    p: usize,
    n: usize,
    out: &mut [f64],
    acc: &mut [f64],
) {
    let ni = shape.ni;
    let c = shape.row_start(j, p, n);
    let dn = shape.row_start(j - 1, p, n);
    let up = shape.row_start(j + 1, p, n);
    let h2 = h * h;
    let two_h = 2.0 * h;
    let qc = &q[c..c + ni + 2];
    let qd = &q[dn..dn + ni + 2];
    let qu = &q[up..up + ni + 2];
    for i in 1..=ni {
        let num = 4.0 * qc[i] - qc[i - 1] - qc[i + 1] - qd[i] - qu[i];
        out[i] = NU * num / h2 + ADVECTION * (qc[i + 1] - qc[i - 1]) / two_h;
    }
    // Chunks of the row stay in registers while m runs; each entry still
    // accumulates over ascending m.
    let drow = d.row(n);
    let mut i0 = 1;
    while i0 <= ni {
        let w = CHUNK.min(ni + 1 - i0);
        let mut a = [0.0; CHUNK];
        for (m, &dm) in drow.iter().enumerate() {
            if m == n {
                continue;
            }
            let cm = shape.row_start(j, p, m) + i0;
            if w == CHUNK {
                let v: &[f64; CHUNK] = q[cm..cm + CHUNK].try_into().unwrap();
                for k in 0..CHUNK {
                    a[k] += dm * v[k];
                }
            } else {
                for (a, v) in a[..w].iter_mut().zip(&q[cm..cm + w]) {
                    *a += dm * v;
                }
            }
        }
        acc[i0..i0 + w].copy_from_slice(&a[..w]);
        i0 += w;
    }
    for i in 1..=ni {
        out[i] = (out[i] + acc[i]) + forcing[i];
    }
}

/// Residual of a whole block, in the block's storage layout with zero halo
/// entries. Halo cells of `field` must hold current neighbour values.
pub fn residual(field: &BlockField, spec: &BlockSpec, d: &SpectralDeriv) -> Vec<f64> {
    debug_assert_eq!((field.ni, field.nj), (spec.ni, spec.nj));
    debug_assert_eq!(field.nplanes, d.nplanes());
    let shape = Shape { ni: field.ni, nj: field.nj, npde: field.npde, nplanes: field.nplanes };
    let forcing = BlockForcing::new(spec, field.npde, field.nplanes);
    let mut r = vec![0.0; shape.len()];
    let mut acc = vec![0.0; shape.ni + 2];
    for n in 0..shape.nplanes {
        for p in 0..shape.npde {
            for j in 1..=shape.nj {
                let s = shape.row_start(j, p, n);
                residual_row(
                    field.data(),
                    shape,
                    spec.h,
                    d,
                    forcing.row(j, p, n),
                    j,
                    p,
                    n,
                    &mut r[s..s + shape.ni + 2],
                    &mut acc,
                );
            }
        }
    }
    r
}
