use super::field::HarmonicField;
use crate::mesh::Topology;

/// Lift, drag and moment coefficients per harmonic plane and body.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceCoefficients {
    nplanes: usize,
    nbody: usize,
    /// Indexed `n * nbody + body`.
    pub cl: Vec<f64>,
    pub cd: Vec<f64>,
    pub cm: Vec<f64>,
}

impl ForceCoefficients {
    /// All entries `-0.0`, the exact additive identity, so a rank without
    /// body faces contributes nothing to a sum bit for bit.
    pub fn zeros(nplanes: usize, nbody: usize) -> Self {
        let len = nplanes * nbody;
        ForceCoefficients { nplanes, nbody, cl: vec![-0.0; len], cd: vec![-0.0; len], cm: vec![-0.0; len] }
    }

    pub fn nplanes(&self) -> usize {
        self.nplanes
    }

    pub fn nbody(&self) -> usize {
        self.nbody
    }

    #[inline]
    pub fn slot(&self, n: usize, body: usize) -> usize {
        debug_assert!(n < self.nplanes && body < self.nbody);
        n * self.nbody + body
    }

    pub fn to_bits(&self) -> Vec<u64> {
        self.cl.iter().chain(&self.cd).chain(&self.cm).map(|v| v.to_bits()).collect()
    }
}

/// Surface integrals over the body faces of the blocks in `field`:
/// `cl += h q[p=0]`, `cd += h q[p=1]`, `cm += h q[p=2]`, in ascending
/// (block, face position) order.
pub fn compute_forces(field: &HarmonicField, topo: &Topology) -> ForceCoefficients {
    let nplanes = field.blocks.first().map_or(1, |b| b.nplanes);
    let mut f = ForceCoefficients::zeros(nplanes, topo.nbody);
    for b in &field.blocks {
        let spec = topo.block(b.block);
        for &(face, body) in &spec.body_faces {
            for n in 0..nplanes {
                let k = f.slot(n, body);
                for pos in 1..=face.extent(b.ni, b.nj) {
                    let (i, j) = face.interior_cell(pos, b.ni, b.nj);
                    f.cl[k] += spec.h * b.get(i, j, 0, n);
                    f.cd[k] += spec.h * b.get(i, j, 1, n);
                    f.cm[k] += spec.h * b.get(i, j, 2, n);
                }
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BlockSpec, Face};

    fn one_block(body_faces: Vec<(Face, usize)>, nbody: usize) -> Topology {
        let b = BlockSpec { id: 0, ni: 4, nj: 3, origin: (0.0, 0.0), h: 0.25, body_faces };
        Topology::new(vec![b], vec![], nbody).unwrap()
    }

    #[test]
    fn no_body_faces_gives_zero() {
        let topo = one_block(vec![], 1);
        let mut field = HarmonicField::zeroed(&topo.blocks.iter().collect::<Vec<_>>(), 4, 3);
        field.blocks[0].data_mut().fill(1.0);
        let f = compute_forces(&field, &topo);
        assert!(f.cl.iter().chain(&f.cd).chain(&f.cm).all(|&v| v == 0.0));
        assert_eq!(f.cl.len(), 3);
    }

    #[test]
    fn constant_integrand_on_four_cell_face() {
        let topo = one_block(vec![(Face::South, 0)], 1);
        let mut field = HarmonicField::zeroed(&topo.blocks.iter().collect::<Vec<_>>(), 4, 3);
        let b = &mut field.blocks[0];
        for n in 0..3 {
            for j in 0..5 {
                for i in 0..6 {
                    b.set(i, j, 0, n, 1.0);
                    b.set(i, j, 1, n, 2.0);
                }
            }
        }
        let f = compute_forces(&field, &topo);
        for n in 0..3 {
            assert_eq!(f.cl[f.slot(n, 0)], 4.0 * 0.25);
            assert_eq!(f.cd[f.slot(n, 0)], 8.0 * 0.25);
            assert_eq!(f.cm[f.slot(n, 0)], 0.0);
        }
    }

    #[test]
    fn zeros_are_an_exact_identity() {
        let z = ForceCoefficients::zeros(1, 1);
        for v in [0.0f64, -0.0, 1.5e-300, -3.0] {
            assert_eq!((z.cl[0] + v).to_bits(), v.to_bits());
        }
    }
}
