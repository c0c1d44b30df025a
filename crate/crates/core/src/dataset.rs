//! Dataset directories: one CSV per experiment, plus PPM images for the
//! camera configuration.
//!
//! ```text
//! <dataset>/<experiment>.csv
//! <dataset>/images_<experiment>/<row>.ppm
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! gives bit-identical values.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{Engine, Row};
use crate::models::Raster;
use crate::variables::{ColumnType, Config};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("empty experiment")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: not found")]
    NotFound { path: PathBuf },
    #[error("{path}: line {line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("row {row}: expected {expected} values, got {got}")]
    Schema { row: u64, expected: usize, got: usize },
    #[error("row {row}: image column needs an image")]
    MissingImage { row: u64 },
    #[error("invalid experiment name '{0}'")]
    BadName(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> DatasetError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DatasetError::Io { path: path.to_path_buf(), source },
        kind => DatasetError::Malformed { path: path.to_path_buf(), line, message: format!("{kind:?}") },
    }
}

/// Column layout of an experiment file (after `timestamp,intervention`).
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub columns: Vec<(String, ColumnType)>,
    /// Controller bookkeeping columns, appended after the variables.
    pub extra: Vec<String>,
}

impl Schema {
    pub fn for_config(config: Config) -> Schema {
        let columns = config.variables().map(|v| (v.id.to_string(), v.column_type)).collect();
        let extra = match config {
            Config::WtPressureControl => crate::engine::PID_COLUMNS.iter().map(|s| s.to_string()).collect(),
            _ => Vec::new(),
        };
        Schema { columns, extra }
    }

    pub fn for_engine(engine: &Engine) -> Schema {
        Schema {
            columns: engine.columns().map(|v| (v.id.to_string(), v.column_type)).collect(),
            extra: engine.extra_columns().iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn header(&self) -> Vec<&str> {
        let mut h = vec!["timestamp", "intervention"];
        h.extend(self.columns.iter().map(|(c, _)| c.as_str()));
        h.extend(self.extra.iter().map(String::as_str));
        h
    }

    fn image_column(&self) -> Option<usize> {
        self.columns.iter().position(|(_, t)| *t == ColumnType::Image)
    }
}

/// What was written.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub csv: PathBuf,
    pub images: Option<PathBuf>,
    pub rows: u64,
}

fn check_name(name: &str) -> Result<(), DatasetError> {
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(DatasetError::BadName(name.to_string()));
    }
    Ok(())
}

/// Streaming writer for one experiment.
pub struct ExperimentWriter {
    schema: Schema,
    image_column: Option<usize>,
    csv_path: PathBuf,
    image_dir: PathBuf,
    image_prefix: String,
    out: csv::Writer<BufWriter<File>>,
    record: csv::ByteRecord,
    buf: String,
    rows: u64,
}

impl ExperimentWriter {
    pub fn create(dir: &Path, name: &str, schema: Schema) -> Result<ExperimentWriter, DatasetError> {
        check_name(name)?;
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let csv_path = dir.join(format!("{name}.csv"));
        let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
        let mut out = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Never)
            .from_writer(BufWriter::with_capacity(1 << 16, file));
        out.write_record(schema.header()).map_err(|e| csv_err(&csv_path, e))?;
        let image_column = schema.image_column();
        let image_prefix = format!("images_{name}");
        let image_dir = dir.join(&image_prefix);
        if image_column.is_some() {
            fs::create_dir_all(&image_dir).map_err(io_err(&image_dir))?;
        }
        Ok(ExperimentWriter {
            schema,
            image_column,
            csv_path,
            image_dir,
            image_prefix,
            out,
            record: csv::ByteRecord::new(),
            buf: String::new(),
            rows: 0,
        })
    }

    pub fn write_row(&mut self, row: &Row) -> Result<(), DatasetError> {
        use std::fmt::Write as _;
        let idx = self.rows;
        let (n, m) = (self.schema.columns.len(), self.schema.extra.len());
        if row.values.len() != n || row.extra.len() != m {
            return Err(DatasetError::Schema { row: idx, expected: n + m, got: row.values.len() + row.extra.len() });
        }
        self.record.clear();
        let buf = &mut self.buf;
        let mut push = |record: &mut csv::ByteRecord, f: &dyn Fn(&mut String)| {
            buf.clear();
            f(buf);
            record.push_field(buf.as_bytes());
        };
        push(&mut self.record, &|b| {
            let _ = write!(b, "{}", row.timestamp);
        });
        self.record.push_field(if row.intervention { b"1" } else { b"0" });
        for (i, v) in row.values.iter().enumerate() {
            if Some(i) == self.image_column {
                let image = row.image.as_ref().ok_or(DatasetError::MissingImage { row: idx })?;
                let rel = format!("{}/{idx}.ppm", self.image_prefix);
                let path = self.image_dir.join(format!("{idx}.ppm"));
                write_image(&path, image)?;
                self.record.push_field(rel.as_bytes());
            } else {
                push(&mut self.record, &|b| {
                    let _ = write!(b, "{v}");
                });
            }
        }
        for v in &row.extra {
            push(&mut self.record, &|b| {
                let _ = write!(b, "{v}");
            });
        }
        self.out.write_byte_record(&self.record).map_err(|e| csv_err(&self.csv_path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    /// Flush and close. An experiment without rows is removed and reported
    /// as an error.
    pub fn finish(mut self) -> Result<Manifest, DatasetError> {
        self.out.flush().map_err(io_err(&self.csv_path))?;
        drop(self.out);
        if self.rows == 0 {
            let _ = fs::remove_file(&self.csv_path);
            if self.image_column.is_some() {
                let _ = fs::remove_dir(&self.image_dir);
            }
            return Err(DatasetError::Empty);
        }
        Ok(Manifest {
            csv: self.csv_path,
            images: self.image_column.map(|_| self.image_dir),
            rows: self.rows,
        })
    }
}

fn write_image(path: &Path, image: &Raster) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    image.write_ppm(&mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Write a whole row stream. Nothing is created for an empty stream.
pub fn write_experiment<I>(rows: I, schema: &Schema, dir: &Path, name: &str) -> Result<Manifest, DatasetError>
where
    I: IntoIterator<Item = Row>,
{
    let mut rows = rows.into_iter().peekable();
    if rows.peek().is_none() {
        check_name(name)?;
        return Err(DatasetError::Empty);
    }
    let mut w = ExperimentWriter::create(dir, name, schema.clone())?;
    for row in rows {
        w.write_row(&row)?;
    }
    w.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Float(Vec<f64>),
    Integer(Vec<i64>),
    /// Values from a finite numeric set.
    Categorical(Vec<f64>),
    /// Image paths relative to the dataset directory.
    Path(Vec<String>),
    /// Columns the reader does not know; kept verbatim.
    Opaque(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Float(v) | ColumnData::Categorical(v) => v.len(),
            ColumnData::Integer(v) => v.len(),
            ColumnData::Path(v) | ColumnData::Opaque(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Numeric view of the column; `None` for paths and opaque text.
    pub fn as_f64(&self) -> Option<Vec<f64>> {
        match self {
            ColumnData::Float(v) | ColumnData::Categorical(v) => Some(v.clone()),
            ColumnData::Integer(v) => Some(v.iter().map(|&x| x as f64).collect()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

/// An experiment loaded into memory, column-major, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub dir: PathBuf,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.columns.iter().find(|c| c.name == name).map(|c| &c.data)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Numeric column by name.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name)?.as_f64()
    }

    /// Absolute paths of an image column.
    pub fn image_paths(&self, name: &str) -> Option<Vec<PathBuf>> {
        match self.column(name)? {
            ColumnData::Path(p) => Some(p.iter().map(|rel| self.dir.join(rel)).collect()),
            _ => None,
        }
    }
}

fn column_type_for(name: &str) -> Option<ColumnType> {
    match name {
        "timestamp" => return Some(ColumnType::Float),
        "intervention" => return Some(ColumnType::Integer),
        n if crate::engine::PID_COLUMNS.contains(&n) => return Some(ColumnType::Float),
        _ => {}
    }
    Config::ALL.iter().find_map(|c| c.variables().find(|v| v.id == name).map(|v| v.column_type))
}

/// Load `<dir>/<name>.csv`. Columns are matched by name, so their order in
/// the file does not matter.
pub fn read_experiment(dir: &Path, name: &str) -> Result<Table, DatasetError> {
    check_name(name)?;
    let path = dir.join(format!("{name}.csv"));
    if !path.is_file() {
        return Err(DatasetError::NotFound { path });
    }
    let mut reader = csv::ReaderBuilder::new().from_path(&path).map_err(|e| csv_err(&path, e))?;
    let header = reader.headers().map_err(|e| csv_err(&path, e))?.clone();
    let mut seen = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if seen.insert(h.to_string(), i).is_some() {
            return Err(DatasetError::Malformed { path, line: 1, message: format!("duplicate column '{h}'") });
        }
    }
    let kinds: Vec<Option<ColumnType>> = header.iter().map(column_type_for).collect();
    let mut columns: Vec<Column> = header
        .iter()
        .zip(&kinds)
        .map(|(h, k)| Column {
            name: h.to_string(),
            data: match k {
                Some(ColumnType::Float) => ColumnData::Float(Vec::new()),
                Some(ColumnType::Integer) => ColumnData::Integer(Vec::new()),
                Some(ColumnType::Categorical) => ColumnData::Categorical(Vec::new()),
                Some(ColumnType::Image) => ColumnData::Path(Vec::new()),
                None => ColumnData::Opaque(Vec::new()),
            },
        })
        .collect();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_err(&path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let bad = |what: &str| DatasetError::Malformed {
                path: path.clone(),
                line,
                message: format!("column {}: malformed {what} '{field}'", col.name),
            };
            match &mut col.data {
                ColumnData::Float(v) | ColumnData::Categorical(v) => {
                    v.push(field.parse().map_err(|_| bad("number"))?)
                }
                ColumnData::Integer(v) => v.push(field.parse().map_err(|_| bad("integer"))?),
                ColumnData::Path(v) | ColumnData::Opaque(v) => v.push(field.to_string()),
            }
        }
    }
    Ok(Table { dir: dir.to_path_buf(), columns })
}

/// Experiment names in a dataset directory, sorted.
pub fn list_experiments(dir: &Path) -> Result<Vec<String>, DatasetError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "csv") && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Load one image of an experiment.
pub fn read_image(path: &Path) -> Result<Raster, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Raster::from_ppm(&bytes).ok_or_else(|| DatasetError::Malformed {
        path: path.to_path_buf(),
        line: 1,
        message: "not a binary PPM (P6, maxval 255)".into(),
    })
}
