//! Chunked columnar chain store.
//!
//! A store is a directory holding `manifest.json` and one raw little-endian
//! binary64 file per column (`col_<index>.f64`, no header, `8 * n_rows`
//! bytes). Chunking is logical: chunk `i` covers rows
//! `[i * chunk_rows, min((i + 1) * chunk_rows, n_rows))` and is located by
//! offset arithmetic, so every operation can stream one chunk of one column
//! at a time.
//!
//! Every chunk handed out by a store is a [`ChunkBuf`], which registers
//! itself with the store's [`ReadTracker`] for as long as it is alive. The
//! tracker records how many chunk buffers of each column were resident at
//! once, which is what the bounded-memory tests assert on.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_CHUNK_ROWS: usize = 1_000_000;

pub const WEIGHT: &str = "weight";
pub const LOGLIKE: &str = "loglike";

/// Maximum number of text lines buffered before they are flushed to the
/// column files during conversion.
const CONVERT_BATCH_LINES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub file: String,
    pub derived: bool,
    pub source_expr: Option<String>,
}

impl ColumnMeta {
    fn new(index: usize, name: &str, derived: bool, source_expr: Option<String>) -> Self {
        ColumnMeta {
            name: name.to_owned(),
            file: column_file_name(index),
            derived,
            source_expr,
        }
    }
}

pub fn column_file_name(index: usize) -> String {
    format!("col_{index}.f64")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    n_rows: usize,
    chunk_rows: usize,
    columns: Vec<ColumnMeta>,
}

/// Per-column count of chunk buffers currently alive, plus the high-water
/// mark of that count.
#[derive(Debug, Default)]
pub struct ReadTracker {
    counts: Mutex<HashMap<String, (usize, usize)>>,
}

impl ReadTracker {
    fn acquire(&self, column: &str) {
        let mut counts = self.counts.lock().unwrap();
        let entry = counts.entry(column.to_owned()).or_default();
        entry.0 += 1;
        entry.1 = entry.1.max(entry.0);
    }

    fn release(&self, column: &str) {
        let mut counts = self.counts.lock().unwrap();
        if let Some(entry) = counts.get_mut(column) {
            entry.0 -= 1;
        }
    }

    /// Chunk buffers of `column` alive right now.
    pub fn resident(&self, column: &str) -> usize {
        self.counts.lock().unwrap().get(column).map_or(0, |c| c.0)
    }

    /// Largest number of simultaneously alive chunk buffers of `column`.
    pub fn peak_resident(&self, column: &str) -> usize {
        self.counts.lock().unwrap().get(column).map_or(0, |c| c.1)
    }

    /// Peak over all columns that were ever read.
    pub fn max_peak_resident(&self) -> usize {
        self.counts
            .lock()
            .unwrap()
            .values()
            .map(|c| c.1)
            .max()
            .unwrap_or(0)
    }

    /// Columns that were read at least once.
    pub fn columns_read(&self) -> Vec<String> {
        let mut names: Vec<_> = self.counts.lock().unwrap().keys().cloned().collect();
        names.sort();
        names
    }

    pub fn reset_peaks(&self) {
        for entry in self.counts.lock().unwrap().values_mut() {
            entry.1 = entry.0;
        }
    }
}

/// One chunk of one column, resident in memory.
#[derive(Debug)]
pub struct ChunkBuf {
    data: Vec<f64>,
    column: Arc<str>,
    tracker: Arc<ReadTracker>,
}

impl ChunkBuf {
    fn new(data: Vec<f64>, column: Arc<str>, tracker: Arc<ReadTracker>) -> Self {
        tracker.acquire(&column);
        ChunkBuf {
            data,
            column,
            tracker,
        }
    }

    pub fn column(&self) -> &str {
        &self.column
    }
}

impl Deref for ChunkBuf {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl Drop for ChunkBuf {
    fn drop(&mut self) {
        self.tracker.release(&self.column);
    }
}

/// Handle to an on-disk store. Holds metadata only; data is read on demand.
#[derive(Debug, Clone)]
pub struct ChainStore {
    root: PathBuf,
    n_rows: usize,
    chunk_rows: usize,
    columns: Vec<ColumnMeta>,
    format_version: u32,
    tracker: Arc<ReadTracker>,
}

impl PartialEq for ChainStore {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
            && self.n_rows == other.n_rows
            && self.chunk_rows == other.chunk_rows
            && self.columns == other.columns
            && self.format_version == other.format_version
    }
}

impl ChainStore {
    /// Opens the store at `path`, validating the manifest and the length of
    /// every column file. No column data is read.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let root = path.as_ref().to_path_buf();
        let manifest_path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
            Error::Manifest(format!(
                "{}: corrupt manifest: {e}",
                manifest_path.display()
            ))
        })?;
        validate_manifest(&manifest)?;

        let expected = 8 * manifest.n_rows as u64;
        for col in &manifest.columns {
            let path = root.join(&col.file);
            let actual = fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
            if actual != expected {
                return Err(Error::ColumnLength {
                    column: col.name.clone(),
                    expected,
                    actual,
                });
            }
        }

        Ok(ChainStore {
            root,
            n_rows: manifest.n_rows,
            chunk_rows: manifest.chunk_rows,
            columns: manifest.columns,
            format_version: manifest.format_version,
            tracker: Arc::new(ReadTracker::default()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn chunk_rows(&self) -> usize {
        self.chunk_rows
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    pub fn n_chunks(&self) -> usize {
        self.n_rows.div_ceil(self.chunk_rows)
    }

    /// Row range covered by chunk `index`.
    pub fn chunk_range(&self, index: usize) -> std::ops::Range<usize> {
        let start = index * self.chunk_rows;
        start..(start + self.chunk_rows).min(self.n_rows)
    }

    pub fn tracker(&self) -> &Arc<ReadTracker> {
        &self.tracker
    }

    /// Same store viewed with a different logical chunk size. The on-disk
    /// manifest is not touched.
    pub fn with_chunk_rows(&self, chunk_rows: usize) -> Result<Self> {
        if chunk_rows == 0 {
            return Err(Error::Invalid("chunk_rows must be at least 1".into()));
        }
        Ok(ChainStore {
            chunk_rows,
            ..self.clone()
        })
    }

    /// Opens a sequential reader over one column.
    pub fn column_reader(&self, name: &str) -> Result<ColumnReader> {
        let meta = self
            .column(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))?;
        let path = self.root.join(&meta.file);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(ColumnReader {
            file,
            path,
            column: Arc::from(name),
            n_rows: self.n_rows,
            chunk_rows: self.chunk_rows,
            position: 0,
            scratch: Vec::new(),
            tracker: Arc::clone(&self.tracker),
        })
    }

    /// Reads one chunk of one column.
    pub fn read_column_chunk(&self, column: &str, chunk_index: usize) -> Result<ChunkBuf> {
        self.column_reader(column)?.read_chunk(chunk_index)
    }

    /// Streams the store once, returning row counts, column flags, the total
    /// weight (summed left to right) and the largest log-likelihood.
    pub fn info(&self) -> Result<StoreInfo> {
        let mut weights = self.column_reader(WEIGHT)?;
        let mut loglikes = self.column_reader(LOGLIKE)?;
        let mut total_weight = 0.0;
        let mut max_loglike = f64::NEG_INFINITY;
        for index in 0..self.n_chunks() {
            let w = weights.read_chunk(index)?;
            total_weight = w.iter().fold(total_weight, |acc, &x| acc + x);
            drop(w);
            let l = loglikes.read_chunk(index)?;
            max_loglike = l.iter().copied().fold(max_loglike, f64::max);
        }
        Ok(StoreInfo {
            n_rows: self.n_rows,
            chunk_rows: self.chunk_rows,
            n_chunks: self.n_chunks(),
            columns: self.columns.clone(),
            total_weight,
            max_loglike,
        })
    }

    /// Appends a derived column streamed from `chunks`.
    ///
    /// The data goes to a temporary file which is renamed into place once
    /// complete; the manifest is rewritten (also via rename) last, so a crash
    /// at any point leaves the previous column set visible. On error nothing
    /// observable changes.
    pub fn append_derived_column<I>(
        &self,
        name: &str,
        source_expr: Option<&str>,
        chunks: I,
    ) -> Result<ChainStore>
    where
        I: IntoIterator<Item = Result<Vec<f64>>>,
    {
        let _lock = WriteLock::acquire(&self.root)?;

        // Re-read the manifest under the lock in case another writer
        // appended since this handle was opened.
        let current = ChainStore::open(&self.root)?;
        if current.has_column(name) {
            return Err(Error::DuplicateColumn(name.to_owned()));
        }

        let index = current.columns.len();
        let file_name = column_file_name(index);
        let final_path = current.root.join(&file_name);
        let tmp_path = current.root.join(format!("{file_name}.tmp"));

        let written = write_column_file(&tmp_path, name, current.n_rows, chunks);
        if let Err(e) = written {
            let _ = fs::remove_file(&tmp_path);
            return Err(e);
        }
        fs::rename(&tmp_path, &final_path).map_err(|e| Error::io(&final_path, e))?;

        let mut columns = current.columns.clone();
        columns.push(ColumnMeta::new(
            index,
            name,
            true,
            source_expr.map(str::to_owned),
        ));
        let manifest = Manifest {
            format_version: current.format_version,
            n_rows: current.n_rows,
            chunk_rows: current.chunk_rows,
            columns,
        };
        write_manifest(&current.root, &manifest)?;

        let mut reopened = ChainStore::open(&current.root)?;
        reopened.chunk_rows = self.chunk_rows;
        reopened.tracker = Arc::clone(&self.tracker);
        Ok(reopened)
    }
}

fn validate_manifest(m: &Manifest) -> Result<()> {
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported format_version {}",
            m.format_version
        )));
    }
    if m.n_rows == 0 {
        return Err(Error::Manifest("n_rows must be at least 1".into()));
    }
    if m.chunk_rows == 0 {
        return Err(Error::Manifest("chunk_rows must be at least 1".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for (i, col) in m.columns.iter().enumerate() {
        if !seen.insert(col.name.as_str()) {
            return Err(Error::Manifest(format!(
                "duplicate column name '{}'",
                col.name
            )));
        }
        if col.file != column_file_name(i) {
            return Err(Error::Manifest(format!(
                "column '{}' at index {i} has file '{}', expected '{}'",
                col.name,
                col.file,
                column_file_name(i)
            )));
        }
    }
    for required in [WEIGHT, LOGLIKE] {
        if !seen.contains(required) {
            return Err(Error::Manifest(format!(
                "required column '{required}' missing"
            )));
        }
    }
    Ok(())
}

fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    let path = root.join(MANIFEST_FILE);
    let tmp = root.join(format!("{MANIFEST_FILE}.tmp"));
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Manifest(format!("cannot serialize manifest: {e}")))?;
    text.push('\n');
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(text.as_bytes())
            .map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
}

fn write_column_file<I>(path: &Path, column: &str, n_rows: usize, chunks: I) -> Result<()>
where
    I: IntoIterator<Item = Result<Vec<f64>>>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut written = 0usize;
    for chunk in chunks {
        let chunk = chunk?;
        if written + chunk.len() > n_rows {
            return Err(Error::Invalid(format!(
                "column '{column}': supplied more than {n_rows} values"
            )));
        }
        if let Some(offset) = chunk.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "column '{column}': non-finite value at row {}",
                written + offset
            )));
        }
        for v in &chunk {
            out.write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
        written += chunk.len();
    }
    if written != n_rows {
        return Err(Error::Invalid(format!(
            "column '{column}': supplied {written} values, store has {n_rows} rows"
        )));
    }
    let file = out
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    file.sync_all().map_err(|e| Error::io(path, e))
}

/// Sequential reader over one column file; keeps the file handle open across
/// chunk reads.
#[derive(Debug)]
pub struct ColumnReader {
    file: File,
    path: PathBuf,
    column: Arc<str>,
    n_rows: usize,
    chunk_rows: usize,
    position: u64,
    scratch: Vec<u8>,
    tracker: Arc<ReadTracker>,
}

impl ColumnReader {
    pub fn column(&self) -> &str {
        &self.column
    }

    pub fn n_chunks(&self) -> usize {
        self.n_rows.div_ceil(self.chunk_rows)
    }

    pub fn read_chunk(&mut self, index: usize) -> Result<ChunkBuf> {
        let count = self.n_chunks();
        if index >= count {
            return Err(Error::ChunkOutOfRange { index, count });
        }
        let start = index * self.chunk_rows;
        let len = self.chunk_rows.min(self.n_rows - start);
        let offset = 8 * start as u64;
        if offset != self.position {
            self.file
                .seek(SeekFrom::Start(offset))
                .map_err(|e| Error::io(&self.path, e))?;
        }
        self.scratch.resize(8 * len, 0);
        self.file
            .read_exact(&mut self.scratch)
            .map_err(|e| Error::io(&self.path, e))?;
        self.position = offset + 8 * len as u64;

        let data = self
            .scratch
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(ChunkBuf::new(
            data,
            Arc::clone(&self.column),
            Arc::clone(&self.tracker),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreInfo {
    pub n_rows: usize,
    pub chunk_rows: usize,
    pub n_chunks: usize,
    pub columns: Vec<ColumnMeta>,
    pub total_weight: f64,
    pub max_loglike: f64,
}

struct WriteLock {
    path: PathBuf,
}

impl WriteLock {
    fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(WriteLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Builds a fresh store row by row (or column-chunk by column-chunk).
///
/// Data is written into a hidden sibling directory which is renamed onto the
/// target path by [`StoreWriter::finish`].
pub struct StoreWriter {
    target: PathBuf,
    staging: PathBuf,
    names: Vec<String>,
    files: Vec<BufWriter<File>>,
    n_rows: usize,
    chunk_rows: usize,
    overwrite: bool,
}

impl StoreWriter {
    /// `param_names` are the columns after `weight` and `loglike`.
    pub fn create(
        path: impl AsRef<Path>,
        param_names: &[impl AsRef<str>],
        chunk_rows: usize,
        overwrite: bool,
    ) -> Result<Self> {
        let target = path.as_ref().to_path_buf();
        if chunk_rows == 0 {
            return Err(Error::Invalid("chunk_rows must be at least 1".into()));
        }
        if target.join(MANIFEST_FILE).exists() && !overwrite {
            return Err(Error::StoreExists(target));
        }
        if target.exists() && !target.join(MANIFEST_FILE).exists() {
            let empty = fs::read_dir(&target)
                .map_err(|e| Error::io(&target, e))?
                .next()
                .is_none();
            if !empty {
                return Err(Error::Invalid(format!(
                    "{} exists and is not a store",
                    target.display()
                )));
            }
        }

        let mut names = vec![WEIGHT.to_owned(), LOGLIKE.to_owned()];
        for name in param_names {
            let name = name.as_ref();
            if names.iter().any(|n| n == name) {
                return Err(Error::DuplicateColumn(name.to_owned()));
            }
            names.push(name.to_owned());
        }

        let file_name = target
            .file_name()
            .ok_or_else(|| Error::Invalid(format!("invalid store path {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let staging = parent.join(format!(".{file_name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

        let mut files = Vec::with_capacity(names.len());
        for i in 0..names.len() {
            let p = staging.join(column_file_name(i));
            let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
            files.push(BufWriter::with_capacity(1 << 16, f));
        }

        Ok(StoreWriter {
            target,
            staging,
            names,
            files,
            n_rows: 0,
            chunk_rows,
            overwrite,
        })
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Appends one row: `weight, loglike, params...`.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::Invalid(format!(
                "row has {} values, store has {} columns",
                row.len(),
                self.names.len()
            )));
        }
        for (i, (value, out)) in row.iter().zip(&mut self.files).enumerate() {
            out.write_all(&value.to_le_bytes())
                .map_err(|e| Error::io(self.staging.join(column_file_name(i)), e))?;
        }
        self.n_rows += 1;
        Ok(())
    }

    /// Appends a block of rows given column-wise; all slices must share one
    /// length.
    pub fn push_columns(&mut self, columns: &[&[f64]]) -> Result<()> {
        if columns.len() != self.names.len() {
            return Err(Error::Invalid(format!(
                "got {} columns, store has {}",
                columns.len(),
                self.names.len()
            )));
        }
        let len = columns[0].len();
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::Invalid("column blocks differ in length".into()));
        }
        for (i, (values, out)) in columns.iter().zip(&mut self.files).enumerate() {
            if let Some(offset) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "column '{}': non-finite value at row {}",
                    self.names[i],
                    self.n_rows + offset
                )));
            }
            for v in values.iter() {
                out.write_all(&v.to_le_bytes())
                    .map_err(|e| Error::io(self.staging.join(column_file_name(i)), e))?;
            }
        }
        self.n_rows += len;
        Ok(())
    }

    pub fn finish(self) -> Result<ChainStore> {
        if self.n_rows == 0 {
            let _ = fs::remove_dir_all(&self.staging);
            return Err(Error::Invalid("store would contain no rows".into()));
        }
        for (i, out) in self.files.into_iter().enumerate() {
            let p = self.staging.join(column_file_name(i));
            let f = out
                .into_inner()
                .map_err(|e| Error::io(&p, e.into_error()))?;
            f.sync_all().map_err(|e| Error::io(&p, e))?;
        }
        let columns = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| ColumnMeta::new(i, n, false, None))
            .collect();
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            n_rows: self.n_rows,
            chunk_rows: self.chunk_rows,
            columns,
        };
        write_manifest(&self.staging, &manifest)?;

        if self.target.exists() {
            if self.target.join(MANIFEST_FILE).exists() && !self.overwrite {
                return Err(Error::StoreExists(self.target));
            }
            fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
        ChainStore::open(&self.target)
    }

    /// Drops the partially written data.
    pub fn abort(self) {
        let _ = fs::remove_dir_all(&self.staging);
    }
}

#[derive(Debug, Clone)]
pub struct ConvertOptions {
    pub chunk_rows: usize,
    pub overwrite: bool,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions {
            chunk_rows: DEFAULT_CHUNK_ROWS,
            overwrite: false,
        }
    }
}

/// Converts a plain-text chain (`weight  -2lnL  params...` per line) into a
/// store at `out_path`. The text is read line by line and flushed in bounded
/// batches.
pub fn convert_chain(
    text_path: impl AsRef<Path>,
    param_names: &[impl AsRef<str>],
    out_path: impl AsRef<Path>,
    options: &ConvertOptions,
) -> Result<ChainStore> {
    let text_path = text_path.as_ref();
    let input = File::open(text_path).map_err(|e| Error::io(text_path, e))?;
    let mut writer =
        StoreWriter::create(out_path, param_names, options.chunk_rows, options.overwrite)?;
    match convert_lines(text_path, BufReader::new(input), &mut writer) {
        Ok(()) => writer.finish(),
        Err(e) => {
            writer.abort();
            Err(e)
        }
    }
}

fn convert_lines(path: &Path, input: impl BufRead, writer: &mut StoreWriter) -> Result<()> {
    let n_fields = writer.n_columns();
    let mut batch: Vec<Vec<f64>> = (0..n_fields)
        .map(|_| Vec::with_capacity(CONVERT_BATCH_LINES))
        .collect();
    let mut rows_seen = 0usize;

    for (line_no, line) in input.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for token in line.split_whitespace() {
            count += 1;
            if count > n_fields {
                continue;
            }
            let value = parse_field(token).map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message,
            })?;
            let value = if count == 2 { -0.5 * value } else { value };
            batch[count - 1].push(value);
        }
        if count != n_fields {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected {n_fields} fields, found {count}"),
            });
        }
        rows_seen += 1;
        if batch[0].len() == CONVERT_BATCH_LINES {
            flush_batch(writer, &mut batch)?;
        }
    }
    if rows_seen == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no samples found (empty file)".into(),
        });
    }
    flush_batch(writer, &mut batch)
}

fn flush_batch(writer: &mut StoreWriter, batch: &mut [Vec<f64>]) -> Result<()> {
    if batch[0].is_empty() {
        return Ok(());
    }
    let slices: Vec<&[f64]> = batch.iter().map(Vec::as_slice).collect();
    writer.push_columns(&slices)?;
    for column in batch.iter_mut() {
        column.clear();
    }
    Ok(())
}

fn parse_field(token: &str) -> std::result::Result<f64, String> {
    let value: f64 = token
        .parse()
        .map_err(|_| format!("'{token}' is not a number"))?;
    if !value.is_finite() {
        return Err(format!("'{token}' is not finite"));
    }
    Ok(value)
}

/// Reads a names sidecar file: one column name per nonempty line.
pub fn read_names_file(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}
