//! Versioned tab-separated embedding and assignment files.
//!
//! An embedding file opens with a header line and a column line; fields are
//! separated by tabs (shown as spaces here):
//!
//! ```text
//! #hypergcd embeddings version=1 dim=3 count=1 levels=2 geometry=euclidean
//! id  label  levels  is_labeled  is_old  x0  x1  x2
//! 0  4  1,4  1  1  0.5  -0.25  1e-7
//! ```
//!
//! `label` and `levels` hold `-` when absent. Hyperbolic files add
//! `curvature=` (the positive `kappa`) to the header and carry ambient
//! hyperboloid or ball coordinates. Floats use Rust's shortest round-trip
//! formatting, so writing then reading gives back the same bits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use hypergcd::clustering::{LabeledDataset, SpaceModel};
use hypergcd::datagen::SyntheticGcd;

use crate::error::{CliError, Result};

pub const VERSION: u32 = 1;

const EMBEDDINGS_MAGIC: &str = "#hypergcd embeddings";
const ASSIGNMENTS_MAGIC: &str = "#hypergcd assignments";
const FIXED_COLUMNS: [&str; 5] = ["id", "label", "levels", "is_labeled", "is_old"];

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub version: u32,
    pub dim: usize,
    pub count: usize,
    /// Number of hierarchy labels on every row.
    pub levels: usize,
    pub geometry: SpaceModel,
    pub curvature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub id: u64,
    pub label: Option<usize>,
    /// Coarse to fine; the last entry is normally the label itself.
    pub levels: Vec<usize>,
    pub is_labeled: bool,
    pub is_old: bool,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub header: Header,
    pub rows: Vec<Row>,
}

/// Failure while reading, before a file path is attached.
#[derive(Debug)]
pub enum ReadError {
    Io(io::Error),
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl ReadError {
    fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        ReadError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn at(self, path: &Path) -> CliError {
        match self {
            ReadError::Io(e) => CliError::io(path, e),
            ReadError::Parse {
                line,
                column,
                message,
            } => CliError::Parse {
                path: path.to_path_buf(),
                line,
                column,
                message,
            },
        }
    }
}

/// Tab-separated fields with their 1-based character columns.
fn fields(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut col = 1;
    for f in line.split('\t') {
        out.push((col, f));
        col += f.chars().count() + 1;
    }
    out
}

/// `key=value` pairs after the magic prefix, with their columns.
fn header_pairs<'a>(
    line: &'a str,
    magic: &str,
    line_no: usize,
) -> std::result::Result<BTreeMap<&'a str, (usize, &'a str)>, ReadError> {
    let rest = line.strip_prefix(magic).ok_or_else(|| {
        ReadError::parse(line_no, 1, format!("expected header starting with '{magic}'"))
    })?;
    let mut map = BTreeMap::new();
    let mut col = magic.chars().count() + 1;
    for tok in rest.split(' ') {
        if !tok.is_empty() {
            let (k, v) = tok.split_once('=').ok_or_else(|| {
                ReadError::parse(line_no, col, format!("expected key=value, found '{tok}'"))
            })?;
            if map.insert(k, (col + k.chars().count() + 1, v)).is_some() {
                return Err(ReadError::parse(line_no, col, format!("duplicate key '{k}'")));
            }
        }
        col += tok.chars().count() + 1;
    }
    Ok(map)
}

fn take<'a>(
    map: &mut BTreeMap<&str, (usize, &'a str)>,
    key: &str,
    line: usize,
) -> std::result::Result<(usize, &'a str), ReadError> {
    map.remove(key)
        .ok_or_else(|| ReadError::parse(line, 1, format!("header is missing '{key}'")))
}

fn parse_num<T: std::str::FromStr>(
    s: &str,
    line: usize,
    col: usize,
    what: &str,
) -> std::result::Result<T, ReadError> {
    s.parse()
        .map_err(|_| ReadError::parse(line, col, format!("invalid {what} '{s}'")))
}

fn check_version(
    map: &mut BTreeMap<&str, (usize, &str)>,
    line: usize,
) -> std::result::Result<u32, ReadError> {
    let (col, v) = take(map, "version", line)?;
    let version: u32 = parse_num(v, line, col, "version")?;
    if version != VERSION {
        return Err(ReadError::parse(
            line,
            col,
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    Ok(version)
}

fn reject_unknown(
    map: &BTreeMap<&str, (usize, &str)>,
    line: usize,
) -> std::result::Result<(), ReadError> {
    match map.iter().next() {
        Some((k, (col, _))) => Err(ReadError::parse(line, *col, format!("unknown header key '{k}'"))),
        None => Ok(()),
    }
}

fn parse_header(line: &str) -> std::result::Result<Header, ReadError> {
    let mut map = header_pairs(line, EMBEDDINGS_MAGIC, 1)?;
    let version = check_version(&mut map, 1)?;
    let (c, v) = take(&mut map, "dim", 1)?;
    let dim: usize = parse_num(v, 1, c, "dim")?;
    if dim == 0 {
        return Err(ReadError::parse(1, c, "dim must be positive"));
    }
    let (c, v) = take(&mut map, "count", 1)?;
    let count = parse_num(v, 1, c, "count")?;
    let (c, v) = take(&mut map, "levels", 1)?;
    let levels = parse_num(v, 1, c, "levels")?;
    let (gc, v) = take(&mut map, "geometry", 1)?;
    let geometry: SpaceModel = v.parse().map_err(|e: String| ReadError::parse(1, gc, e))?;
    let curvature = match map.remove("curvature") {
        Some((c, v)) => {
            let k: f64 = parse_num(v, 1, c, "curvature")?;
            if !(k > 0.0 && k.is_finite()) {
                return Err(ReadError::parse(1, c, format!("curvature must be positive, got {k}")));
            }
            Some(k)
        }
        None => None,
    };
    if geometry.is_hyperbolic() != curvature.is_some() {
        return Err(ReadError::parse(
            1,
            gc,
            format!("geometry={geometry} requires curvature only for hyperbolic models"),
        ));
    }
    reject_unknown(&map, 1)?;
    Ok(Header {
        version,
        dim,
        count,
        levels,
        geometry,
        curvature,
    })
}

fn column_names(dim: usize) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|i| format!("x{i}")))
        .collect()
}

fn parse_flag(s: &str, line: usize, col: usize, what: &str) -> std::result::Result<bool, ReadError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(ReadError::parse(line, col, format!("{what} must be 0 or 1, found '{s}'"))),
    }
}

fn parse_row(line: &str, line_no: usize, h: &Header) -> std::result::Result<Row, ReadError> {
    let f = fields(line);
    let want = FIXED_COLUMNS.len() + h.dim;
    if f.len() != want {
        let col = f.last().map_or(1, |(c, s)| c + s.chars().count());
        return Err(ReadError::parse(
            line_no,
            col,
            format!("expected {want} fields, found {}", f.len()),
        ));
    }
    let (c, s) = f[0];
    let id = parse_num(s, line_no, c, "id")?;
    let (c, s) = f[1];
    let label = match s {
        "-" => None,
        _ => Some(parse_num(s, line_no, c, "label")?),
    };
    let (c, s) = f[2];
    let levels: Vec<usize> = match s {
        "-" => Vec::new(),
        _ => s
            .split(',')
            .map(|t| parse_num(t, line_no, c, "level label"))
            .collect::<std::result::Result<_, _>>()?,
    };
    if levels.len() != h.levels {
        return Err(ReadError::parse(
            line_no,
            c,
            format!("expected {} level labels, found {}", h.levels, levels.len()),
        ));
    }
    let (c, s) = f[3];
    let is_labeled = parse_flag(s, line_no, c, "is_labeled")?;
    if is_labeled && label.is_none() {
        return Err(ReadError::parse(line_no, c, "labeled row has no label"));
    }
    let (c, s) = f[4];
    let is_old = parse_flag(s, line_no, c, "is_old")?;
    let x = f[5..]
        .iter()
        .map(|&(c, s)| {
            let v: f64 = parse_num(s, line_no, c, "component")?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ReadError::parse(line_no, c, format!("non-finite component '{s}'")))
            }
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok(Row {
        id,
        label,
        levels,
        is_labeled,
        is_old,
        x,
    })
}

/// Streams rows one at a time; memory stays proportional to one row.
pub struct EmbeddingReader<R> {
    lines: io::Lines<R>,
    header: Header,
    line_no: usize,
    seen: usize,
    done: bool,
}

impl<R: BufRead> EmbeddingReader<R> {
    pub fn new(reader: R) -> std::result::Result<Self, ReadError> {
        let mut lines = reader.lines();
        let first = lines
            .next()
            .ok_or_else(|| ReadError::parse(1, 1, "empty file"))?
            .map_err(ReadError::Io)?;
        let header = parse_header(&first)?;
        let cols = lines
            .next()
            .ok_or_else(|| ReadError::parse(2, 1, "missing column line"))?
            .map_err(ReadError::Io)?;
        for ((col, got), want) in fields(&cols).into_iter().zip(column_names(header.dim)) {
            if got != want {
                return Err(ReadError::parse(2, col, format!("expected column '{want}', found '{got}'")));
            }
        }
        if fields(&cols).len() != FIXED_COLUMNS.len() + header.dim {
            return Err(ReadError::parse(
                2,
                1,
                format!("expected {} columns", FIXED_COLUMNS.len() + header.dim),
            ));
        }
        Ok(Self {
            lines,
            header,
            line_no: 2,
            seen: 0,
            done: false,
        })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }
}

impl<R: BufRead> Iterator for EmbeddingReader<R> {
    type Item = std::result::Result<Row, ReadError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        self.line_no += 1;
        match self.lines.next() {
            None => {
                self.done = true;
                (self.seen != self.header.count).then(|| {
                    Err(ReadError::parse(
                        self.line_no,
                        1,
                        format!("header declares {} rows, found {}", self.header.count, self.seen),
                    ))
                })
            }
            Some(Err(e)) => {
                self.done = true;
                Some(Err(ReadError::Io(e)))
            }
            Some(Ok(line)) => {
                if self.seen == self.header.count {
                    self.done = true;
                    return Some(Err(ReadError::parse(
                        self.line_no,
                        1,
                        format!("more rows than the declared {}", self.header.count),
                    )));
                }
                self.seen += 1;
                let row = parse_row(&line, self.line_no, &self.header);
                if row.is_err() {
                    self.done = true;
                }
                Some(row)
            }
        }
    }
}

pub fn read_embeddings<R: BufRead>(reader: R) -> std::result::Result<EmbeddingFile, ReadError> {
    let rows = EmbeddingReader::new(reader)?;
    let header = rows.header().clone();
    let rows = rows.collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(EmbeddingFile { header, rows })
}

pub fn write_embeddings<W: Write>(mut w: W, file: &EmbeddingFile) -> io::Result<()> {
    let h = &file.header;
    write!(
        w,
        "{EMBEDDINGS_MAGIC} version={} dim={} count={} levels={} geometry={}",
        h.version, h.dim, h.count, h.levels, h.geometry
    )?;
    if let Some(k) = h.curvature {
        write!(w, " curvature={k}")?;
    }
    writeln!(w)?;
    writeln!(w, "{}", column_names(h.dim).join("\t"))?;
    for r in &file.rows {
        write!(w, "{}\t", r.id)?;
        match r.label {
            Some(l) => write!(w, "{l}\t")?,
            None => write!(w, "-\t")?,
        }
        if r.levels.is_empty() {
            write!(w, "-")?;
        } else {
            let joined: Vec<String> = r.levels.iter().map(|l| l.to_string()).collect();
            write!(w, "{}", joined.join(","))?;
        }
        write!(w, "\t{}\t{}", u8::from(r.is_labeled), u8::from(r.is_old))?;
        for v in &r.x {
            write!(w, "\t{v:?}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn read_embeddings_path(path: &Path) -> Result<EmbeddingFile> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_embeddings(BufReader::new(f)).map_err(|e| e.at(path))
}

pub fn write_embeddings_path(path: &Path, file: &EmbeddingFile) -> Result<()> {
    file.validate()?;
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_embeddings(BufWriter::new(f), file).map_err(|e| CliError::io(path, e))
}

impl EmbeddingFile {
    /// Euclidean file holding the generated points and their full split.
    pub fn from_synthetic(d: &SyntheticGcd) -> Self {
        let leaf = d.leaf_labels();
        let rows = (0..d.len())
            .map(|i| Row {
                id: i as u64,
                label: Some(leaf[i]),
                levels: d.levels.iter().map(|l| l[i]).collect(),
                is_labeled: d.split.is_labeled[i],
                is_old: d.split.is_old_class[leaf[i]],
                x: d.points[i].as_slice().to_vec(),
            })
            .collect();
        Self {
            header: Header {
                version: VERSION,
                dim: d.points[0].dim(),
                count: d.len(),
                levels: d.levels.len(),
                geometry: SpaceModel::Euclidean,
                curvature: None,
            },
            rows,
        }
    }

    /// Same rows with new coordinates.
    pub fn with_vectors(&self, x: Vec<Vec<f64>>, geometry: SpaceModel, curvature: Option<f64>) -> Self {
        let dim = x.first().map_or(self.header.dim, |v| v.len());
        Self {
            header: Header {
                dim,
                geometry,
                curvature,
                ..self.header.clone()
            },
            rows: self
                .rows
                .iter()
                .zip(x)
                .map(|(r, x)| Row { x, ..r.clone() })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.count != self.rows.len() {
            return Err(CliError::Config(format!(
                "header count {} but {} rows",
                h.count,
                self.rows.len()
            )));
        }
        for r in &self.rows {
            if r.x.len() != h.dim || r.levels.len() != h.levels {
                return Err(CliError::Config(format!("row {} does not match the header", r.id)));
            }
            if r.is_labeled && r.label.is_none() {
                return Err(CliError::Config(format!("row {} is labeled without a label", r.id)));
            }
        }
        Ok(())
    }

    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.x.clone()).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.rows
            .iter()
            .filter_map(|r| r.label)
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Seen/unseen flag per class; every row of a class must agree.
    pub fn class_flags(&self) -> Result<Vec<bool>> {
        let mut flags: Vec<Option<bool>> = vec![None; self.num_classes()];
        for r in &self.rows {
            if let Some(l) = r.label {
                match flags[l] {
                    Some(f) if f != r.is_old => {
                        return Err(CliError::Config(format!(
                            "class {l} is marked both old and new (row {})",
                            r.id
                        )))
                    }
                    _ => flags[l] = Some(r.is_old),
                }
            }
        }
        Ok(flags.into_iter().map(|f| f.unwrap_or(false)).collect())
    }

    /// Labels visible to training: only labeled rows.
    pub fn training_labels(&self) -> Vec<Option<usize>> {
        self.rows
            .iter()
            .map(|r| if r.is_labeled { r.label } else { None })
            .collect()
    }

    pub fn labeled_dataset<P>(&self, points: Vec<P>) -> Result<LabeledDataset<P>> {
        Ok(LabeledDataset::new(
            points,
            self.rows.iter().map(|r| r.label).collect(),
            self.rows.iter().map(|r| r.is_labeled).collect(),
            self.class_flags()?,
        )?)
    }

    pub fn old_mask(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.is_old).collect()
    }

    /// Evaluation covers the unlabeled rows.
    pub fn eval_mask(&self) -> Vec<bool> {
        self.rows.iter().map(|r| !r.is_labeled).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignments {
    pub k: usize,
    pub space: SpaceModel,
    pub ids: Vec<u64>,
    pub clusters: Vec<usize>,
}

pub fn write_assignments<W: Write>(mut w: W, a: &Assignments) -> io::Result<()> {
    writeln!(
        w,
        "{ASSIGNMENTS_MAGIC} version={VERSION} count={} k={} space={}",
        a.ids.len(),
        a.k,
        a.space
    )?;
    writeln!(w, "id\tcluster")?;
    for (id, c) in a.ids.iter().zip(&a.clusters) {
        writeln!(w, "{id}\t{c}")?;
    }
    w.flush()
}

pub fn read_assignments<R: BufRead>(reader: R) -> std::result::Result<Assignments, ReadError> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| ReadError::parse(1, 1, "empty file"))?
        .map_err(ReadError::Io)?;
    let mut map = header_pairs(&first, ASSIGNMENTS_MAGIC, 1)?;
    check_version(&mut map, 1)?;
    let (c, v) = take(&mut map, "count", 1)?;
    let count: usize = parse_num(v, 1, c, "count")?;
    let (c, v) = take(&mut map, "k", 1)?;
    let k: usize = parse_num(v, 1, c, "k")?;
    let (c, v) = take(&mut map, "space", 1)?;
    let space: SpaceModel = v.parse().map_err(|e: String| ReadError::parse(1, c, e))?;
    reject_unknown(&map, 1)?;
    let cols = lines
        .next()
        .ok_or_else(|| ReadError::parse(2, 1, "missing column line"))?
        .map_err(ReadError::Io)?;
    if cols != "id\tcluster" {
        return Err(ReadError::parse(2, 1, "expected columns 'id\tcluster'"));
    }
    let mut ids = Vec::with_capacity(count);
    let mut clusters = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let line_no = i + 3;
        let line = line.map_err(ReadError::Io)?;
        let f = fields(&line);
        if f.len() != 2 {
            return Err(ReadError::parse(line_no, 1, format!("expected 2 fields, found {}", f.len())));
        }
        ids.push(parse_num(f[0].1, line_no, f[0].0, "id")?);
        let c: usize = parse_num(f[1].1, line_no, f[1].0, "cluster")?;
        if c >= k {
            return Err(ReadError::parse(line_no, f[1].0, format!("cluster {c} out of range for k = {k}")));
        }
        clusters.push(c);
    }
    if ids.len() != count {
        return Err(ReadError::parse(
            ids.len() + 3,
            1,
            format!("header declares {count} rows, found {}", ids.len()),
        ));
    }
    Ok(Assignments {
        k,
        space,
        ids,
        clusters,
    })
}

pub fn read_assignments_path(path: &Path) -> Result<Assignments> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_assignments(BufReader::new(f)).map_err(|e| e.at(path))
}

pub fn write_assignments_path(path: &Path, a: &Assignments) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_assignments(BufWriter::new(f), a).map_err(|e| CliError::io(path, e))
}
