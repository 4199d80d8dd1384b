//! Dataset acquisition and persistence: the gridded field-series container,
//! train/test splitting, and the CSV / binary on-disk formats.

pub mod power;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use thiserror::Error;

use crate::geo::{GeoError, GeoGrid};
use crate::tensor::{io as tensor_io, DenseTensor, TensorError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("values tensor {actual:?} does not match grid {m}×{n} × {t} dates")]
    ShapeMismatch {
        actual: Vec<usize>,
        m: usize,
        n: usize,
        t: usize,
    },
    #[error("dates are not strictly consecutive daily steps at index {0}")]
    NonContiguousDates(usize),
    #[error("dataset contains a non-finite value at {0:?}")]
    NonFinite(Vec<usize>),
    #[error("empty date range")]
    NoDates,
    #[error(transparent)]
    Grid(#[from] GeoError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("grid is ragged: expected {expected} rows ({m} lats × {n} lons × {t} dates), found {found}")]
    Ragged {
        expected: usize,
        found: usize,
        m: usize,
        n: usize,
        t: usize,
    },
    #[error("duplicate entry for ({lat}, {lon}, {date}) at csv row {row}")]
    Duplicate {
        lat: f64,
        lon: f64,
        date: NaiveDate,
        row: usize,
    },
    #[error("missing date {0} inside the dataset range")]
    DateGap(NaiveDate),
    #[error("split range invalid: {0}")]
    BadSplit(String),
    #[error("binary dataset file corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    TensorFile(#[from] tensor_io::TensorIoError),
}

/// Dense series of measurements over (latitude, longitude, day).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub grid: GeoGrid,
    /// Strictly consecutive daily stamps, length T.
    pub dates: Vec<NaiveDate>,
    /// `(n_lat, n_lon, T)` measurement tensor.
    pub values: DenseTensor,
    /// Variable tag, e.g. the daily-maximum temperature parameter name.
    pub variable: String,
}

impl FieldSeries {
    pub fn new(
        grid: GeoGrid,
        dates: Vec<NaiveDate>,
        values: DenseTensor,
        variable: String,
    ) -> Result<Self, IngestError> {
        if dates.is_empty() {
            return Err(IngestError::NoDates);
        }
        let (m, n, t) = (grid.n_lat(), grid.n_lon(), dates.len());
        if values.shape() != [m, n, t] {
            return Err(IngestError::ShapeMismatch {
                actual: values.shape().to_vec(),
                m,
                n,
                t,
            });
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[0] + Days::new(1) != pair[1] {
                return Err(IngestError::NonContiguousDates(i + 1));
            }
        }
        if !values.is_finite() {
            let bad = values
                .data()
                .iter()
                .position(|v| !v.is_finite())
                .expect("non-finite value exists");
            let (nn, tt) = (n, t);
            let index = vec![bad / (nn * tt), (bad / tt) % nn, bad % tt];
            return Err(IngestError::NonFinite(index));
        }
        Ok(Self {
            grid,
            dates,
            values,
            variable,
        })
    }

    pub fn n_lat(&self) -> usize {
        self.grid.n_lat()
    }

    pub fn n_lon(&self) -> usize {
        self.grid.n_lon()
    }

    pub fn len_time(&self) -> usize {
        self.dates.len()
    }

    /// Time series at one grid point, oldest first.
    pub fn point_series(&self, lat_index: usize, lon_index: usize) -> Vec<f64> {
        (0..self.len_time())
            .map(|t| self.values.get(&[lat_index, lon_index, t]))
            .collect()
    }

    /// The field (M × N slice) at one time step.
    pub fn field_at(&self, t: usize) -> DenseTensor {
        self.values.last_mode_slice(t)
    }

    /// Daily stamps continuing this series for `horizon` further days.
    pub fn continuation_dates(series: &FieldSeries, horizon: usize) -> Vec<NaiveDate> {
        let last = *series.dates.last().expect("dates are non-empty");
        (1..=horizon as u64).map(|d| last + Days::new(d)).collect()
    }
}

/// Train/test date ranges; both ends inclusive, train strictly before test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.train_start > self.train_end {
            return Err(IngestError::BadSplit(format!(
                "train range reversed: {} > {}",
                self.train_start, self.train_end
            )));
        }
        if self.test_start > self.test_end {
            return Err(IngestError::BadSplit(format!(
                "test range reversed: {} > {}",
                self.test_start, self.test_end
            )));
        }
        if self.train_end >= self.test_start {
            return Err(IngestError::BadSplit(format!(
                "train end {} overlaps test start {}",
                self.train_end, self.test_start
            )));
        }
        Ok(())
    }
}

/// Cuts a series into disjoint, contiguous train and test halves.
pub fn split(fs: &FieldSeries, spec: &SplitSpec) -> Result<(FieldSeries, FieldSeries), IngestError> {
    spec.validate()?;
    let index_of = |date: NaiveDate| -> Result<usize, IngestError> {
        fs.dates
            .binary_search(&date)
            .map_err(|_| IngestError::BadSplit(format!("date {date} outside the dataset")))
    };
    let (ts, te) = (index_of(spec.train_start)?, index_of(spec.train_end)?);
    let (vs, ve) = (index_of(spec.test_start)?, index_of(spec.test_end)?);
    Ok((extract_range(fs, ts, te), extract_range(fs, vs, ve)))
}

fn extract_range(fs: &FieldSeries, start: usize, end: usize) -> FieldSeries {
    let slices: Vec<DenseTensor> = (start..=end).map(|t| fs.values.last_mode_slice(t)).collect();
    let values = DenseTensor::stack_last_mode(&slices).expect("slices share shape");
    FieldSeries {
        grid: fs.grid.clone(),
        dates: fs.dates[start..=end].to_vec(),
        values,
        variable: fs.variable.clone(),
    }
}

/// Writes the `lat,lon,date,value` CSV schema, one row per (point, day),
/// lat-major then lon then date. Floats print in shortest round-trip form,
/// so load-after-save is lossless.
pub fn save_grid_csv(fs: &FieldSeries, path: &Path) -> Result<(), IngestError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "lat,lon,date,value")?;
    for (i, &lat) in fs.grid.lats().iter().enumerate() {
        for (j, &lon) in fs.grid.lons().iter().enumerate() {
            for (t, date) in fs.dates.iter().enumerate() {
                writeln!(w, "{},{},{},{}", lat, lon, date, fs.values.get(&[i, j, t]))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_grid_csv(path: &Path) -> Result<FieldSeries, IngestError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lats: BTreeMap<u64, usize> = BTreeMap::new();
    let mut lons: BTreeMap<u64, usize> = BTreeMap::new();
    let mut rows: Vec<(f64, f64, NaiveDate, f64, usize)> = Vec::new();
    let mut dates_seen: BTreeMap<NaiveDate, ()> = BTreeMap::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line_no == 0 {
            if line.trim() != "lat,lon,date,value" {
                return Err(IngestError::Csv {
                    row: 1,
                    message: format!("expected header `lat,lon,date,value`, got `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = line_no + 1;
        let mut parts = line.split(',');
        let mut field = |name: &str| {
            parts.next().ok_or(IngestError::Csv {
                row,
                message: format!("missing {name} column"),
            })
        };
        let lat: f64 = field("lat")?.trim().parse().map_err(|e| IngestError::Csv {
            row,
            message: format!("lat: {e}"),
        })?;
        let lon: f64 = field("lon")?.trim().parse().map_err(|e| IngestError::Csv {
            row,
            message: format!("lon: {e}"),
        })?;
        let date: NaiveDate = field("date")?.trim().parse().map_err(|e| IngestError::Csv {
            row,
            message: format!("date: {e}"),
        })?;
        let value: f64 = field("value")?.trim().parse().map_err(|e| IngestError::Csv {
            row,
            message: format!("value: {e}"),
        })?;
        if !value.is_finite() {
            return Err(IngestError::Csv {
                row,
                message: format!("non-finite value {value}"),
            });
        }
        let next_lat = lats.len();
        lats.entry(lat.to_bits()).or_insert(next_lat);
        let next_lon = lons.len();
        lons.entry(lon.to_bits()).or_insert(next_lon);
        dates_seen.entry(date).or_insert(());
        rows.push((lat, lon, date, value, row));
    }

    if rows.is_empty() {
        return Err(IngestError::NoDates);
    }
    let mut lat_values: Vec<f64> = lats.keys().map(|&b| f64::from_bits(b)).collect();
    let mut lon_values: Vec<f64> = lons.keys().map(|&b| f64::from_bits(b)).collect();
    lat_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lon_values.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let dates: Vec<NaiveDate> = dates_seen.keys().copied().collect();
    let (first, last) = (dates[0], *dates.last().unwrap());
    let mut cursor = first;
    while cursor <= last {
        if !dates_seen.contains_key(&cursor) {
            return Err(IngestError::DateGap(cursor));
        }
        cursor = cursor + Days::new(1);
    }

    let (m, n, t) = (lat_values.len(), lon_values.len(), dates.len());
    let expected = m * n * t;
    if rows.len() != expected {
        // Could be duplicates or holes; duplicates are reported precisely below.
        let mut seen = std::collections::HashSet::with_capacity(rows.len());
        for &(lat, lon, date, _, row) in &rows {
            if !seen.insert((lat.to_bits(), lon.to_bits(), date)) {
                return Err(IngestError::Duplicate {
                    lat,
                    lon,
                    date,
                    row,
                });
            }
        }
        return Err(IngestError::Ragged {
            expected,
            found: rows.len(),
            m,
            n,
            t,
        });
    }

    let lat_index: BTreeMap<u64, usize> = lat_values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v.to_bits(), i))
        .collect();
    let lon_index: BTreeMap<u64, usize> = lon_values
        .iter()
        .enumerate()
        .map(|(j, &v)| (v.to_bits(), j))
        .collect();
    let date_index: BTreeMap<NaiveDate, usize> =
        dates.iter().enumerate().map(|(t, &d)| (d, t)).collect();

    let mut values = DenseTensor::zeros(vec![m, n, t])?;
    let mut filled = vec![false; expected];
    for &(lat, lon, date, value, row) in &rows {
        let i = lat_index[&lat.to_bits()];
        let j = lon_index[&lon.to_bits()];
        let k = date_index[&date];
        let flat = (i * n + j) * t + k;
        if filled[flat] {
            return Err(IngestError::Duplicate {
                lat,
                lon,
                date,
                row,
            });
        }
        filled[flat] = true;
        values.set(&[i, j, k], value);
    }

    let grid = GeoGrid::new(lat_values, lon_values)?;
    FieldSeries::new(grid, dates, values, "value".into())
}

/// Binary dataset format: grid/calendar preamble followed by the tensor
/// payload from [`crate::tensor::io`].
///
/// ```text
/// magic b"GCFS", version u8 = 1
/// variable: u32 length + UTF-8 bytes
/// n_lat u64, lats f64 × n_lat, n_lon u64, lons f64 × n_lon
/// first_date as days from CE (i64), n_dates u64
/// tensor payload (GCTN block)
/// ```
pub mod binary {
    use super::*;
    use chrono::Datelike;

    pub const MAGIC: [u8; 4] = *b"GCFS";
    pub const VERSION: u8 = 1;

    pub fn save(fs: &FieldSeries, path: &Path) -> Result<(), IngestError> {
        let mut w = BufWriter::new(File::create(path)?);
        write(&mut w, fs)?;
        w.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(mut w: W, fs: &FieldSeries) -> Result<(), IngestError> {
        w.write_all(&MAGIC)?;
        w.write_all(&[VERSION])?;
        let name = fs.variable.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(fs.grid.n_lat() as u64).to_le_bytes())?;
        for &v in fs.grid.lats() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(fs.grid.n_lon() as u64).to_le_bytes())?;
        for &v in fs.grid.lons() {
            w.write_all(&v.to_le_bytes())?;
        }
        let first = fs.dates[0].num_days_from_ce() as i64;
        w.write_all(&first.to_le_bytes())?;
        w.write_all(&(fs.dates.len() as u64).to_le_bytes())?;
        tensor_io::write_tensor(&mut w, &fs.values)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FieldSeries, IngestError> {
        read(BufReader::new(File::open(path)?))
    }

    pub fn read<R: Read>(mut r: R) -> Result<FieldSeries, IngestError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(IngestError::Corrupt("bad magic".into()));
        }
        let mut version = [0u8; 1];
        r.read_exact(&mut version)?;
        if version[0] != VERSION {
            return Err(IngestError::Corrupt(format!(
                "unsupported version {}",
                version[0]
            )));
        }
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 4096 {
            return Err(IngestError::Corrupt("implausible variable name".into()));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let variable = String::from_utf8(name)
            .map_err(|e| IngestError::Corrupt(format!("variable name: {e}")))?;
        let n_lat = read_u64(&mut r)? as usize;
        let lats = read_f64s(&mut r, n_lat)?;
        let n_lon = read_u64(&mut r)? as usize;
        let lons = read_f64s(&mut r, n_lon)?;
        let first_days = read_i64(&mut r)?;
        let n_dates = read_u64(&mut r)? as usize;
        let first = NaiveDate::from_num_days_from_ce_opt(first_days as i32)
            .ok_or_else(|| IngestError::Corrupt("date out of range".into()))?;
        let dates: Vec<NaiveDate> = (0..n_dates as u64).map(|d| first + Days::new(d)).collect();
        let values = tensor_io::read_tensor(&mut r)?;
        let grid = GeoGrid::new(lats, lons)?;
        FieldSeries::new(grid, dates, values, variable)
    }

    fn read_u32<R: Read>(r: &mut R) -> Result<u32, IngestError> {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)?;
        Ok(u32::from_le_bytes(buf))
    }

    fn read_u64<R: Read>(r: &mut R) -> Result<u64, IngestError> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }

    fn read_i64<R: Read>(r: &mut R) -> Result<i64, IngestError> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        Ok(i64::from_le_bytes(buf))
    }

    fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>, IngestError> {
        if count > (1 << 24) {
            return Err(IngestError::Corrupt("implausible axis length".into()));
        }
        let mut out = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    }
}
