use crate::hybrid::SharedSlice;
use crate::mesh::BlockSpec;

/// Solution values of one block: `q[i, j, p, n]` with a one-cell halo ring.
///
/// `i` runs over `0..ni + 2`, `j` over `0..nj + 2`, the pde variable `p` over
/// `0..npde` and the harmonic plane `n` over `0..nplanes`. Storage is
/// column-major in that index order, so a row of constant `(j, p, n)` is
/// contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockField {
    pub block: usize,
    pub ni: usize,
    pub nj: usize,
    pub npde: usize,
    pub nplanes: usize,
    data: Vec<f64>,
}

impl BlockField {
    /// Zero-filled storage. The allocation is lazily committed by the OS, so
    /// the first thread to write a page decides where it lives.
    pub fn zeroed(spec: &BlockSpec, npde: usize, nplanes: usize) -> Self {
        let len = (spec.ni + 2) * (spec.nj + 2) * npde * nplanes;
        BlockField { block: spec.id, ni: spec.ni, nj: spec.nj, npde, nplanes, data: vec![0.0; len] }
    }

    #[inline]
    pub fn row_len(&self) -> usize {
        self.ni + 2
    }

    /// Offset of `(0, j, p, n)`.
    #[inline]
    pub fn row_start(&self, j: usize, p: usize, n: usize) -> usize {
        ((n * self.npde + p) * (self.nj + 2) + j) * (self.ni + 2)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, p: usize, n: usize) -> usize {
        self.row_start(j, p, n) + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, p: usize, n: usize) -> f64 {
        self.data[self.idx(i, j, p, n)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, p: usize, n: usize, v: f64) {
        let k = self.idx(i, j, p, n);
        self.data[k] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Interior values only, in storage order. Used for bitwise comparisons
    /// where halo contents are irrelevant.
    pub fn interior_bits(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.ni * self.nj * self.npde * self.nplanes);
        for n in 0..self.nplanes {
            for p in 0..self.npde {
                for j in 1..=self.nj {
                    let s = self.row_start(j, p, n);
                    out.extend(self.data[s + 1..s + 1 + self.ni].iter().map(|v| v.to_bits()));
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// The blocks a rank owns, ascending by block id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarmonicField {
    pub blocks: Vec<BlockField>,
}

impl HarmonicField {
    pub fn zeroed(specs: &[&BlockSpec], npde: usize, nplanes: usize) -> Self {
        HarmonicField { blocks: specs.iter().map(|s| BlockField::zeroed(s, npde, nplanes)).collect() }
    }

    /// Local index of `block`, if owned.
    pub fn local_index(&self, block: usize) -> Option<usize> {
        self.blocks.binary_search_by_key(&block, |b| b.block).ok()
    }

    pub fn block(&self, block: usize) -> Option<&BlockField> {
        self.local_index(block).map(|k| &self.blocks[k])
    }
}

/// Raw view of one block for team threads writing disjoint points.
#[derive(Clone, Copy)]
pub(crate) struct BlockView<'a> {
    pub block: usize,
    pub ni: usize,
    pub nj: usize,
    pub data: SharedSlice<'a>,
}

impl BlockView<'_> {
    /// Offset of `(i, j)` in the combined `(p, n)` slab `k = n * npde + p`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.nj + 2) + j) * (self.ni + 2) + i
    }
}

/// Raw views of all blocks a rank owns, ascending by block id.
pub(crate) struct FieldView<'a> {
    pub blocks: Vec<BlockView<'a>>,
}

impl<'a> FieldView<'a> {
    pub fn new(field: &'a mut HarmonicField) -> Self {
        FieldView {
            blocks: field
                .blocks
                .iter_mut()
                .map(|b| BlockView { block: b.block, ni: b.ni, nj: b.nj, data: SharedSlice::new(&mut b.data) })
                .collect(),
        }
    }

    pub fn by_block(&self, block: usize) -> &BlockView<'a> {
        let k = self.blocks.binary_search_by_key(&block, |b| b.block).expect("block owned by this rank");
        &self.blocks[k]
    }
}
