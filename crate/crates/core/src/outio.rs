//! Restart and flowtec binary output.
//!
//! Every record is a 4-byte little-endian length marker holding the payload
//! size in bytes, the payload as little-endian `f64`, and the same marker
//! again. Record offsets are computed up front so that any rank or thread
//! can write any record independently.
//!
//! * `restart.bin`: one record per (block, plane) in ascending order. The
//!   payload is every interior `q`, `j` outer, `i` inner, variable innermost.
//! * `flowtec_<n>.bin`, one file per plane: one record per block with
//!   `(x, y, q_0, q_1)` per cell, `j` outer, `i` inner.

use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::hbcore::{BlockField, HarmonicField};
use crate::hybrid::{partition_work, Axis, Team};
use crate::mesh::{BlockSpec, Topology};

pub const MARKER_BYTES: u64 = 4;
pub const VALUE_BYTES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Restart,
    Flowtec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteStrategy {
    /// One positioned write per value and per marker.
    PerValue,
    /// Marker, whole payload, marker: three writes per record.
    Buffered,
}

impl FromStr for WriteStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-value" => Ok(WriteStrategy::PerValue),
            "buffered" => Ok(WriteStrategy::Buffered),
            _ => Err(format!("unknown write strategy '{s}'")),
        }
    }
}

/// Positioned writes needed for one record of `floats` values.
pub fn write_ops_per_record(strategy: WriteStrategy, floats: usize) -> u64 {
    match strategy {
        WriteStrategy::PerValue => 2 + floats as u64,
        WriteStrategy::Buffered => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordSpec {
    pub block: usize,
    pub plane: usize,
    /// Offset of the leading marker.
    pub offset: u64,
    pub floats: usize,
}

impl RecordSpec {
    pub fn payload_bytes(&self) -> u64 {
        self.floats as u64 * VALUE_BYTES
    }

    pub fn total_bytes(&self) -> u64 {
        self.payload_bytes() + 2 * MARKER_BYTES
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileSpec {
    pub name: String,
    pub records: Vec<RecordSpec>,
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileLayout {
    pub kind: OutputKind,
    pub files: Vec<FileSpec>,
}

impl FileLayout {
    pub fn paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.files.iter().map(|f| dir.join(&f.name)).collect()
    }

    /// Total records over all files.
    pub fn records(&self) -> usize {
        self.files.iter().map(|f| f.records.len()).sum()
    }
}

fn pack_file(name: String, records: impl Iterator<Item = (usize, usize, usize)>) -> FileSpec {
    let mut offset = 0;
    let records: Vec<RecordSpec> = records
        .map(|(block, plane, floats)| {
            let r = RecordSpec { block, plane, offset, floats };
            offset += r.total_bytes();
            r
        })
        .collect();
    FileSpec { name, records, len: offset }
}

pub fn compute_layout(topo: &Topology, nharms: usize, npde: usize, kind: OutputKind) -> FileLayout {
    let nplanes = 2 * nharms + 1;
    let files = match kind {
        OutputKind::Restart => vec![pack_file(
            "restart.bin".into(),
            topo.blocks.iter().flat_map(|b| (0..nplanes).map(move |n| (b.id, n, b.cells() * npde))),
        )],
        OutputKind::Flowtec => (0..nplanes)
            .map(|n| pack_file(format!("flowtec_{n}.bin"), topo.blocks.iter().map(|b| (b.id, n, 4 * b.cells()))))
            .collect(),
    };
    FileLayout { kind, files }
}

/// Calls `f` with every payload value of record `(block, n)` in file order.
fn for_each_value(kind: OutputKind, b: &BlockField, spec: &BlockSpec, n: usize, mut f: impl FnMut(f64)) {
    for j in 1..=b.nj {
        for i in 1..=b.ni {
            match kind {
                OutputKind::Restart => {
                    for p in 0..b.npde {
                        f(b.get(i, j, p, n));
                    }
                }
                OutputKind::Flowtec => {
                    let (x, y) = spec.cell_centre(i, j);
                    f(x);
                    f(y);
                    f(b.get(i, j, 0, n));
                    f(b.get(i, j, 1, n));
                }
            }
        }
    }
}

/// Which records each thread of a rank writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WritePlan {
    /// `(file, record)` pairs per thread.
    pub threads: Vec<Vec<(usize, usize)>>,
}

/// Records of the blocks in `owned` split among `threads` along `axis`:
/// by plane, by block, or as contiguous runs of the rank's record list.
pub fn plan_writes(layout: &FileLayout, owned: &[usize], axis: Axis, threads: usize) -> WritePlan {
    let mine: Vec<(usize, usize)> = layout
        .files
        .iter()
        .enumerate()
        .flat_map(|(f, file)| {
            file.records.iter().enumerate().filter(|(_, r)| owned.contains(&r.block)).map(move |(k, _)| (f, k))
        })
        .collect();
    let rec = |&(f, k): &(usize, usize)| layout.files[f].records[k];
    let mut plan = vec![Vec::new(); threads];
    match axis {
        Axis::Harmonics => {
            let nplanes = mine.iter().map(|r| rec(r).plane + 1).max().unwrap_or(1);
            for (t, planes) in partition_work(nplanes, threads).into_iter().enumerate() {
                plan[t] = mine.iter().copied().filter(|r| planes.contains(&rec(r).plane)).collect();
            }
        }
        Axis::Blocks => {
            for (t, locals) in partition_work(owned.len(), threads).into_iter().enumerate() {
                let blocks = &owned[locals];
                plan[t] = mine.iter().copied().filter(|r| blocks.contains(&rec(r).block)).collect();
            }
        }
        Axis::GridPoints => {
            for (t, run) in partition_work(mine.len(), threads).into_iter().enumerate() {
                plan[t] = mine[run].to_vec();
            }
        }
    }
    WritePlan { threads: plan }
}

/// Every record of an owned block appears exactly once and no other record
/// appears at all.
pub fn validate_plan(layout: &FileLayout, plan: &WritePlan, owned: &[usize]) -> Result<()> {
    let mut seen: Vec<Vec<Option<usize>>> = layout.files.iter().map(|f| vec![None; f.records.len()]).collect();
    for (t, records) in plan.threads.iter().enumerate() {
        for &(f, k) in records {
            let Some(r) = layout.files.get(f).and_then(|file| file.records.get(k)) else {
                return Err(Error::Plan(format!("thread {t} assigned unknown record ({f}, {k})")));
            };
            if !owned.contains(&r.block) {
                return Err(Error::Plan(format!("thread {t} assigned record of unowned block {}", r.block)));
            }
            if let Some(other) = seen[f][k].replace(t) {
                return Err(Error::Plan(format!(
                    "record (block {}, plane {}) of {} assigned to threads {other} and {t}",
                    r.block, r.plane, layout.files[f].name
                )));
            }
        }
    }
    for (f, file) in layout.files.iter().enumerate() {
        for (k, r) in file.records.iter().enumerate() {
            if owned.contains(&r.block) && seen[f][k].is_none() {
                return Err(Error::Plan(format!(
                    "record (block {}, plane {}) of {} has no writer",
                    r.block, r.plane, file.name
                )));
            }
        }
    }
    Ok(())
}

/// Creates (or truncates) every file of `layout` in `dir` at its final size.
pub fn create_files(dir: &Path, layout: &FileLayout) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, 0, e))?;
    for (path, spec) in layout.paths(dir).into_iter().zip(&layout.files) {
        let file = File::create(&path).map_err(|e| Error::io(&path, 0, e))?;
        file.set_len(spec.len).map_err(|e| Error::io(&path, spec.len, e))?;
    }
    Ok(())
}

/// An independently positioned write handle.
#[derive(Debug)]
pub struct Handle {
    path: PathBuf,
    file: File,
}

impl Handle {
    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_at(&self, bytes: &[u8], offset: u64) -> Result<()> {
        self.file.write_all_at(bytes, offset).map_err(|e| Error::io(&self.path, offset, e))
    }
}

/// Opens every path once per team thread, thread 0 first, then thread 1,
/// and so on. Returns the handles indexed `[thread][path]`.
pub fn open_handles(paths: &[PathBuf], team: &Team) -> Result<Vec<Vec<Handle>>> {
    team.activate(|tid, sync| {
        let mut result = Ok(Vec::with_capacity(paths.len()));
        for turn in 0..sync.threads() {
            if turn == tid {
                result = paths
                    .iter()
                    .map(|p| {
                        OpenOptions::new()
                            .write(true)
                            .open(p)
                            .map(|file| Handle { path: p.clone(), file })
                            .map_err(|source| Error::Open { thread: tid, path: p.clone(), source })
                    })
                    .collect();
            }
            sync.barrier();
        }
        result
    })
    .into_iter()
    .collect()
}

/// Writes the records of the blocks in `field` with `team`. The files must
/// already exist at their final size (see [`create_files`]).
#[allow(clippy::too_many_arguments)]
pub fn write_output(
    field: &HarmonicField,
    topo: &Topology,
    layout: &FileLayout,
    strategy: WriteStrategy,
    dir: &Path,
    team: &Team,
    axis: Axis,
    write_ops: &AtomicU64,
) -> Result<()> {
    let owned: Vec<usize> = field.blocks.iter().map(|b| b.block).collect();
    let plan = plan_writes(layout, &owned, axis, team.threads());
    validate_plan(layout, &plan, &owned)?;
    let handles = open_handles(&layout.paths(dir), team)?;
    team.activate(|tid, _| -> Result<()> {
        for &(f, k) in &plan.threads[tid] {
            let r = layout.files[f].records[k];
            let handle = &handles[tid][f];
            let b = field.block(r.block).expect("plan only holds owned blocks");
            let marker = u32::try_from(r.payload_bytes())
                .map_err(|_| Error::Plan(format!("record of block {} exceeds 4 GiB", r.block)))?
                .to_le_bytes();
            handle.write_at(&marker, r.offset)?;
            let start = r.offset + MARKER_BYTES;
            match strategy {
                WriteStrategy::PerValue => {
                    let mut offset = start;
                    let mut result = Ok(());
                    for_each_value(layout.kind, b, topo.block(r.block), r.plane, |v| {
                        if result.is_ok() {
                            result = handle.write_at(&v.to_le_bytes(), offset);
                            offset += VALUE_BYTES;
                        }
                    });
                    result?;
                }
                WriteStrategy::Buffered => {
                    let mut bytes = Vec::with_capacity(r.payload_bytes() as usize);
                    for_each_value(layout.kind, b, topo.block(r.block), r.plane, |v| {
                        bytes.extend_from_slice(&v.to_le_bytes())
                    });
                    handle.write_at(&bytes, start)?;
                }
            }
            handle.write_at(&marker, start + r.payload_bytes())?;
            write_ops.fetch_add(write_ops_per_record(strategy, r.floats), Ordering::SeqCst);
        }
        Ok(())
    })
    .into_iter()
    .collect()
}

/// Reads every record of one file, checking both markers.
pub fn read_records(path: &Path, spec: &FileSpec) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, 0, e))?;
    if bytes.len() as u64 != spec.len {
        return Err(Error::Plan(format!("{} has {} bytes, layout expects {}", path.display(), bytes.len(), spec.len)));
    }
    spec.records
        .iter()
        .map(|r| {
            let at = r.offset as usize;
            let marker = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as u64;
            let end = at + 4 + r.payload_bytes() as usize;
            if marker(at) != r.payload_bytes() || marker(end) != r.payload_bytes() {
                return Err(Error::Plan(format!("bad record markers at offset {} of {}", r.offset, path.display())));
            }
            Ok(bytes[at + 4..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        })
        .collect()
}

/// Rebuilds the interior of every block from `restart.bin` in `dir`. Halo
/// cells come back as zero.
pub fn read_restart(dir: &Path, topo: &Topology, nharms: usize, npde: usize) -> Result<HarmonicField> {
    let layout = compute_layout(topo, nharms, npde, OutputKind::Restart);
    let spec = &layout.files[0];
    let records = read_records(&dir.join(&spec.name), spec)?;
    let specs: Vec<&BlockSpec> = topo.blocks.iter().collect();
    let mut field = HarmonicField::zeroed(&specs, npde, 2 * nharms + 1);
    for (r, values) in spec.records.iter().zip(records) {
        let b = &mut field.blocks[r.block];
        let mut it = values.into_iter();
        for j in 1..=b.nj {
            for i in 1..=b.ni {
                for p in 0..npde {
                    b.set(i, j, p, r.plane, it.next().expect("record length checked"));
                }
            }
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BlockSpec, NamedCase};

    fn single_block(ni: usize, nj: usize) -> Topology {
        let b = BlockSpec { id: 0, ni, nj, origin: (0.0, 0.0), h: 0.5, body_faces: vec![] };
        Topology::new(vec![b], vec![], 0).unwrap()
    }

    fn filled(topo: &Topology, nplanes: usize) -> HarmonicField {
        let specs: Vec<&BlockSpec> = topo.blocks.iter().collect();
        let mut field = HarmonicField::zeroed(&specs, 4, nplanes);
        for b in &mut field.blocks {
            let id = b.block;
            for (k, v) in b.data_mut().iter_mut().enumerate() {
                *v = (id * 1000 + k) as f64 * 0.125 - 7.0;
            }
        }
        field
    }

    #[test]
    fn smallest_restart_layout() {
        let layout = compute_layout(&single_block(2, 2), 0, 4, OutputKind::Restart);
        assert_eq!(layout.files.len(), 1);
        let r = layout.files[0].records[0];
        assert_eq!((r.floats, r.payload_bytes(), r.offset), (16, 128, 0));
        assert_eq!(layout.files[0].len, 136);
    }

    #[test]
    fn restart_records_in_block_plane_order() {
        let topo = NamedCase::TcTiny.topology().unwrap();
        let layout = compute_layout(&topo, 1, 4, OutputKind::Restart);
        let order: Vec<(usize, usize)> = layout.files[0].records.iter().map(|r| (r.block, r.plane)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
        for w in layout.files[0].records.windows(2) {
            assert_eq!(w[0].offset + w[0].total_bytes(), w[1].offset);
        }
    }

    #[test]
    fn flowtec_one_file_per_plane() {
        let topo = NamedCase::Tc1Mini.topology().unwrap();
        let layout = compute_layout(&topo, 7, 4, OutputKind::Flowtec);
        assert_eq!(layout.files.len(), 15);
        assert_eq!(layout.files[14].name, "flowtec_14.bin");
        assert!(layout.files.iter().all(|f| f.records.len() == 32));
    }

    #[test]
    fn write_op_formula() {
        assert_eq!(write_ops_per_record(WriteStrategy::PerValue, 16), 18);
        assert_eq!(write_ops_per_record(WriteStrategy::Buffered, 16), 3);
    }

    fn write_all(
        field: &HarmonicField,
        topo: &Topology,
        kind: OutputKind,
        strategy: WriteStrategy,
        threads: usize,
        axis: Axis,
    ) -> (Vec<Vec<u8>>, u64) {
        let dir = tempfile::tempdir().unwrap();
        let nharms = (field.blocks[0].nplanes - 1) / 2;
        let layout = compute_layout(topo, nharms, 4, kind);
        create_files(dir.path(), &layout).unwrap();
        let ops = AtomicU64::new(0);
        write_output(field, topo, &layout, strategy, dir.path(), &Team::new(threads), axis, &ops).unwrap();
        let bytes = layout.paths(dir.path()).iter().map(|p| std::fs::read(p).unwrap()).collect();
        (bytes, ops.into_inner())
    }

    #[test]
    fn strategies_threads_and_axes_give_same_bytes() {
        let topo = NamedCase::TcTiny.topology().unwrap();
        let field = filled(&topo, 3);
        for kind in [OutputKind::Restart, OutputKind::Flowtec] {
            let (golden, _) = write_all(&field, &topo, kind, WriteStrategy::Buffered, 1, Axis::Harmonics);
            for strategy in [WriteStrategy::PerValue, WriteStrategy::Buffered] {
                for axis in [Axis::Harmonics, Axis::GridPoints, Axis::Blocks] {
                    for threads in [1, 2, 4] {
                        let (bytes, _) = write_all(&field, &topo, kind, strategy, threads, axis);
                        assert_eq!(bytes, golden, "{kind:?} {strategy:?} {axis:?} {threads}");
                    }
                }
            }
        }
    }

    #[test]
    fn per_value_ops_on_small_block() {
        let topo = single_block(2, 2);
        let field = filled(&topo, 1);
        assert_eq!(write_all(&field, &topo, OutputKind::Restart, WriteStrategy::PerValue, 1, Axis::Blocks).1, 18);
        assert_eq!(write_all(&field, &topo, OutputKind::Restart, WriteStrategy::Buffered, 1, Axis::Blocks).1, 3);
    }

    #[test]
    fn restart_round_trip() {
        let topo = NamedCase::TcTiny.topology().unwrap();
        let field = filled(&topo, 3);
        let dir = tempfile::tempdir().unwrap();
        let layout = compute_layout(&topo, 1, 4, OutputKind::Restart);
        create_files(dir.path(), &layout).unwrap();
        let ops = AtomicU64::new(0);
        write_output(&field, &topo, &layout, WriteStrategy::PerValue, dir.path(), &Team::new(2), Axis::Harmonics, &ops)
            .unwrap();
        let back = read_restart(dir.path(), &topo, 1, 4).unwrap();
        for (a, b) in field.blocks.iter().zip(&back.blocks) {
            assert_eq!(a.interior_bits(), b.interior_bits());
        }
    }

    #[test]
    fn flowtec_record_contents() {
        let topo = single_block(2, 2);
        let field = filled(&topo, 1);
        let (bytes, _) = write_all(&field, &topo, OutputKind::Flowtec, WriteStrategy::Buffered, 1, Axis::Blocks);
        let layout = compute_layout(&topo, 0, 4, OutputKind::Flowtec);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        std::fs::write(&path, &bytes[0]).unwrap();
        let rec = &read_records(&path, &layout.files[0]).unwrap()[0];
        let b = &field.blocks[0];
        // cell (2, 1): second cell of the first row
        assert_eq!(rec[4..8], [0.75, 0.25, b.get(2, 1, 0, 0), b.get(2, 1, 1, 0)]);
    }

    #[test]
    fn duplicate_and_foreign_records_rejected() {
        let topo = NamedCase::TcTiny.topology().unwrap();
        let layout = compute_layout(&topo, 1, 4, OutputKind::Restart);
        let mut plan = plan_writes(&layout, &[0], Axis::Harmonics, 2);
        validate_plan(&layout, &plan, &[0]).unwrap();
        let dup = plan.threads[0][0];
        plan.threads[1].push(dup);
        assert!(matches!(validate_plan(&layout, &plan, &[0]), Err(Error::Plan(_))));
        let foreign = WritePlan { threads: vec![vec![(0, 0), (0, 1), (0, 2), (0, 3)]] };
        assert!(matches!(validate_plan(&layout, &foreign, &[0]), Err(Error::Plan(_))));
        let missing = WritePlan { threads: vec![vec![(0, 0)]] };
        assert!(matches!(validate_plan(&layout, &missing, &[0]), Err(Error::Plan(_))));
    }

    #[test]
    fn open_failure_names_thread() {
        let dir = tempfile::tempdir().unwrap();
        let err = open_handles(&[dir.path().join("missing.bin")], &Team::new(2)).unwrap_err();
        assert!(matches!(err, Error::Open { thread: 0, .. }), "{err}");
    }

    #[test]
    fn one_handle_per_thread() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        std::fs::write(&p, b"").unwrap();
        assert_eq!(open_handles(std::slice::from_ref(&p), &Team::new(1)).unwrap().len(), 1);
        let h = open_handles(&[p], &Team::new(4)).unwrap();
        assert_eq!(h.len(), 4);
        assert!(h.iter().all(|t| t.len() == 1));
    }
}
