//! NASA POWER daily-regional API client.
//!
//! Large regions are tiled into bounding boxes the service accepts, fetched
//! with bounded concurrency and retry/backoff, stitched back together and
//! validated into a [`FieldSeries`]. Every raw response is cached on disk
//! keyed by a hash of the request URL, so a repeated fetch is served
//! entirely from cache with zero network calls and bit-identical results.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use chrono::{Days, NaiveDate};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{FieldSeries, IngestError};
use crate::geo::GeoGrid;
use crate::tensor::DenseTensor;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "GRIDCAST_CACHE_DIR";
/// Service fill value marking a missing observation.
pub const FILL_VALUE: f64 = -999.0;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("http request failed after retries: {0}")]
    Http(String),
    #[error("service returned status {0}")]
    Status(u16),
    #[error("unexpected response schema: {0}")]
    Schema(String),
    #[error("no data returned for the requested region")]
    EmptyRegion,
    #[error("missing value at ({lat}, {lon}) on {date} (gap larger than the forward-fill window)")]
    MissingData { lat: f64, lon: f64, date: NaiveDate },
    #[error("unknown variable {0}; add it to the parameter map")]
    UnknownVariable(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("cache io: {0}")]
    Cache(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Service endpoint and transport knobs; nothing here is hardcoded into the
/// fetch path so service-side renames stay a configuration change.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PowerConfig {
    pub base_url: String,
    pub community: String,
    /// Logical variable name → service parameter name.
    pub parameter_map: BTreeMap<String, String>,
    /// Maximum latitude/longitude span of one regional request, degrees.
    pub tile_deg: f64,
    pub max_in_flight: usize,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        let mut parameter_map = BTreeMap::new();
        parameter_map.insert("TMAX".to_string(), "T2M_MAX".to_string());
        Self {
            base_url: "https://power.larc.nasa.gov/api/temporal/daily/regional".to_string(),
            community: "AG".to_string(),
            parameter_map,
            tile_deg: 9.5,
            max_in_flight: 4,
            retries: 3,
            backoff_ms: 500,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FetchRequest {
    pub bbox: BoundingBox,
    /// Grid step in degrees (the service's native resolution is 0.5°).
    pub resolution: f64,
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Logical variable name, resolved through the parameter map.
    pub variable: String,
    /// Fill gaps of at most this many days by carrying the last value
    /// forward; 0 rejects any gap.
    pub forward_fill_days: u32,
}

/// On-disk response cache; writes are atomic (temp file + rename).
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn at(dir: PathBuf) -> Self {
        Self { dir }
    }

    /// `$GRIDCAST_CACHE_DIR`, else `$HOME/.cache/gridcast`, else
    /// `./.gridcast_cache`.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .or_else(|| {
                std::env::var_os("HOME")
                    .map(|home| PathBuf::from(home).join(".cache").join("gridcast"))
            })
            .unwrap_or_else(|| PathBuf::from(".gridcast_cache"));
        Self { dir }
    }

    pub fn dir(&self) -> &PathBuf {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn lookup(&self, key: &str) -> Option<Vec<u8>> {
        std::fs::read(self.path_for(key)).ok()
    }

    fn store(&self, key: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!("{key}.tmp"));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(tmp, self.path_for(key))
    }
}

/// Result of a fetch plus how many requests actually hit the network.
#[derive(Debug)]
pub struct FetchOutcome {
    pub series: FieldSeries,
    pub network_requests: usize,
    pub tile_count: usize,
}

pub fn fetch_power(
    cfg: &PowerConfig,
    req: &FetchRequest,
    cache: &Cache,
) -> Result<FetchOutcome, PowerError> {
    let parameter = cfg
        .parameter_map
        .get(&req.variable)
        .ok_or_else(|| PowerError::UnknownVariable(req.variable.clone()))?
        .clone();
    if req.resolution <= 0.0 {
        return Err(PowerError::BadRequest(format!(
            "non-positive resolution {}",
            req.resolution
        )));
    }
    if req.start > req.end {
        return Err(PowerError::BadRequest(format!(
            "start {} after end {}",
            req.start, req.end
        )));
    }
    let tiles = plan_tiles(&req.bbox, req.resolution, cfg.tile_deg)?;
    let urls: Vec<String> = tiles
        .iter()
        .map(|t| {
            format!(
                "{}?parameters={}&community={}&latitude-min={}&latitude-max={}&longitude-min={}&longitude-max={}&start={}&end={}&format=JSON",
                cfg.base_url,
                parameter,
                cfg.community,
                t.lat_min,
                t.lat_max,
                t.lon_min,
                t.lon_max,
                req.start.format("%Y%m%d"),
                req.end.format("%Y%m%d"),
            )
        })
        .collect();

    let network_requests = AtomicUsize::new(0);
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| PowerError::Http(e.to_string()))?;

    let mut bodies: Vec<Option<Vec<u8>>> = vec![None; urls.len()];
    for batch in (0..urls.len()).collect::<Vec<_>>().chunks(cfg.max_in_flight.max(1)) {
        let results: Vec<(usize, Result<Vec<u8>, PowerError>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|&i| {
                    let url = &urls[i];
                    let client = &client;
                    let counter = &network_requests;
                    scope.spawn(move || (i, fetch_one(client, cfg, cache, url, counter)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fetch worker")).collect()
        });
        for (i, result) in results {
            bodies[i] = Some(result?);
        }
    }

    let mut samples: BTreeMap<(u64, u64), BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for body in bodies.into_iter().flatten() {
        parse_regional_response(&body, &parameter, &mut samples)?;
    }
    let series = assemble(req, samples)?;
    Ok(FetchOutcome {
        series,
        network_requests: network_requests.into_inner(),
        tile_count: urls.len(),
    })
}

fn fetch_one(
    client: &reqwest::blocking::Client,
    cfg: &PowerConfig,
    cache: &Cache,
    url: &str,
    network_requests: &AtomicUsize,
) -> Result<Vec<u8>, PowerError> {
    let key = hex_digest(url);
    if let Some(bytes) = cache.lookup(&key) {
        return Ok(bytes);
    }
    let mut last_error = String::new();
    for attempt in 0..=cfg.retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(cfg.backoff_ms << (attempt - 1)));
        }
        network_requests.fetch_add(1, Ordering::SeqCst);
        match client.get(url).send() {
            Ok(response) => {
                let status = response.status();
                if !status.is_success() {
                    last_error = format!("status {status}");
                    continue;
                }
                let bytes = match response.bytes() {
                    Ok(b) => b.to_vec(),
                    Err(e) => {
                        last_error = e.to_string();
                        continue;
                    }
                };
                cache.store(&key, &bytes)?;
                return Ok(bytes);
            }
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(PowerError::Http(last_error))
}

fn hex_digest(input: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(input.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Splits the box into disjoint tiles of at most `tile_deg` span per axis,
/// aligned to the point lattice so no point is requested twice.
fn plan_tiles(bbox: &BoundingBox, resolution: f64, tile_deg: f64) -> Result<Vec<BoundingBox>, PowerError> {
    if bbox.lat_min > bbox.lat_max || bbox.lon_min > bbox.lon_max {
        return Err(PowerError::BadRequest(format!("degenerate bbox {bbox:?}")));
    }
    let points = |lo: f64, hi: f64| -> Vec<f64> {
        let count = ((hi - lo) / resolution + 0.5).floor() as usize + 1;
        (0..count).map(|i| lo + resolution * i as f64).collect()
    };
    let per_tile = ((tile_deg / resolution).floor() as usize + 1).max(1);
    let spans = |axis: Vec<f64>| -> Vec<(f64, f64)> {
        axis.chunks(per_tile)
            .map(|chunk| (chunk[0], *chunk.last().unwrap()))
            .collect()
    };
    let lat_spans = spans(points(bbox.lat_min, bbox.lat_max));
    let lon_spans = spans(points(bbox.lon_min, bbox.lon_max));
    let mut tiles = Vec::with_capacity(lat_spans.len() * lon_spans.len());
    for &(lat_min, lat_max) in &lat_spans {
        for &(lon_min, lon_max) in &lon_spans {
            tiles.push(BoundingBox {
                lat_min,
                lat_max,
                lon_min,
                lon_max,
            });
        }
    }
    Ok(tiles)
}

/// Pulls `(lat, lon) → date → value` samples out of one regional GeoJSON
/// response body.
fn parse_regional_response(
    body: &[u8],
    parameter: &str,
    samples: &mut BTreeMap<(u64, u64), BTreeMap<NaiveDate, f64>>,
) -> Result<(), PowerError> {
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| PowerError::Schema(format!("not JSON: {e}")))?;
    let features = value
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or_else(|| PowerError::Schema("missing `features` array".into()))?;
    for feature in features {
        let coords = feature
            .pointer("/geometry/coordinates")
            .and_then(|c| c.as_array())
            .ok_or_else(|| PowerError::Schema("feature missing coordinates".into()))?;
        if coords.len() < 2 {
            return Err(PowerError::Schema("short coordinate tuple".into()));
        }
        let lon = coords[0]
            .as_f64()
            .ok_or_else(|| PowerError::Schema("non-numeric longitude".into()))?;
        let lat = coords[1]
            .as_f64()
            .ok_or_else(|| PowerError::Schema("non-numeric latitude".into()))?;
        let readings = feature
            .pointer(&format!("/properties/parameter/{parameter}"))
            .and_then(|p| p.as_object())
            .ok_or_else(|| {
                PowerError::Schema(format!("feature missing parameter `{parameter}`"))
            })?;
        let slot = samples.entry((lat.to_bits(), lon.to_bits())).or_default();
        for (stamp, reading) in readings {
            let date = NaiveDate::parse_from_str(stamp, "%Y%m%d")
                .map_err(|e| PowerError::Schema(format!("bad date key `{stamp}`: {e}")))?;
            let v = reading
                .as_f64()
                .ok_or_else(|| PowerError::Schema(format!("non-numeric reading on {stamp}")))?;
            slot.insert(date, v);
        }
    }
    Ok(())
}

fn assemble(
    req: &FetchRequest,
    samples: BTreeMap<(u64, u64), BTreeMap<NaiveDate, f64>>,
) -> Result<FieldSeries, PowerError> {
    if samples.is_empty() {
        return Err(PowerError::EmptyRegion);
    }
    let mut lats: Vec<f64> = Vec::new();
    let mut lons: Vec<f64> = Vec::new();
    for &(lat_bits, lon_bits) in samples.keys() {
        let (lat, lon) = (f64::from_bits(lat_bits), f64::from_bits(lon_bits));
        if !lats.contains(&lat) {
            lats.push(lat);
        }
        if !lons.contains(&lon) {
            lons.push(lon);
        }
    }
    lats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lons.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (m, n) = (lats.len(), lons.len());
    if samples.len() != m * n {
        return Err(PowerError::Schema(format!(
            "ragged grid: {} points for a {m}×{n} lattice",
            samples.len()
        )));
    }

    let t_len = (req.end - req.start).num_days() as usize + 1;
    let dates: Vec<NaiveDate> = (0..t_len as u64).map(|d| req.start + Days::new(d)).collect();
    let mut values = DenseTensor::zeros(vec![m, n, t_len]).map_err(IngestError::from)?;
    for (&(lat_bits, lon_bits), readings) in &samples {
        let (lat, lon) = (f64::from_bits(lat_bits), f64::from_bits(lon_bits));
        let i = lats.iter().position(|&v| v == lat).expect("collected above");
        let j = lons.iter().position(|&v| v == lon).expect("collected above");
        let mut last_good: Option<(usize, f64)> = None;
        for (t, date) in dates.iter().enumerate() {
            let reading = readings.get(date).copied().filter(|&v| v != FILL_VALUE);
            match reading {
                Some(v) => {
                    values.set(&[i, j, t], v);
                    last_good = Some((t, v));
                }
                None => {
                    let filled = last_good
                        .filter(|&(t_good, _)| t - t_good <= req.forward_fill_days as usize)
                        .map(|(_, v)| v);
                    match filled {
                        Some(v) => values.set(&[i, j, t], v),
                        None => {
                            return Err(PowerError::MissingData {
                                lat,
                                lon,
                                date: *date,
                            })
                        }
                    }
                }
            }
        }
    }

    let grid = GeoGrid::new(lats, lons).map_err(IngestError::from)?;
    Ok(FieldSeries::new(grid, dates, values, req.variable.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write as IoWrite};
    use std::net::TcpListener;
    use std::sync::atomic::AtomicBool;
    use std::sync::Arc;

    /// Minimal HTTP server replaying the regional response schema; values
    /// are a deterministic function of (lat, lon, day) so stitching and
    /// cache identity are checkable.
    struct MockPower {
        port: u16,
        hits: Arc<AtomicUsize>,
        stop: Arc<AtomicBool>,
        drop_date: Option<NaiveDate>,
    }

    impl MockPower {
        fn start(drop_date: Option<NaiveDate>) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let port = listener.local_addr().unwrap().port();
            let hits = Arc::new(AtomicUsize::new(0));
            let stop = Arc::new(AtomicBool::new(false));
            let (hits2, stop2) = (hits.clone(), stop.clone());
            listener.set_nonblocking(true).unwrap();
            std::thread::spawn(move || loop {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                match listener.accept() {
                    Ok((stream, _)) => {
                        hits2.fetch_add(1, Ordering::SeqCst);
                        let drop_date = drop_date;
                        std::thread::spawn(move || handle(stream, drop_date));
                    }
                    Err(_) => std::thread::sleep(Duration::from_millis(5)),
                }
            });
            Self {
                port,
                hits,
                stop,
                drop_date,
            }
        }

        fn url(&self) -> String {
            format!("http://127.0.0.1:{}/api", self.port)
        }

        fn hits(&self) -> usize {
            self.hits.load(Ordering::SeqCst)
        }
    }

    impl Drop for MockPower {
        fn drop(&mut self) {
            self.stop.store(true, Ordering::SeqCst);
            let _ = self.drop_date;
        }
    }

    fn expected_value(lat: f64, lon: f64, day: i64) -> f64 {
        10.0 + 2.0 * lat - 0.5 * lon + 0.1 * day as f64
    }

    fn handle(mut stream: std::net::TcpStream, drop_date: Option<NaiveDate>) {
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).is_err() {
            return;
        }
        // Drain headers.
        let mut header = String::new();
        while reader.read_line(&mut header).is_ok() {
            if header == "\r\n" || header.is_empty() {
                break;
            }
            header.clear();
        }
        let query = request_line
            .split_whitespace()
            .nth(1)
            .and_then(|p| p.split_once('?'))
            .map(|(_, q)| q.to_string())
            .unwrap_or_default();
        let mut params = std::collections::HashMap::new();
        for pair in query.split('&') {
            if let Some((k, v)) = pair.split_once('=') {
                params.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| params.get(k).unwrap().parse::<f64>().unwrap();
        let lat_min = get("latitude-min");
        let lat_max = get("latitude-max");
        let lon_min = get("longitude-min");
        let lon_max = get("longitude-max");
        let parameter = params.get("parameters").unwrap().clone();
        let start = NaiveDate::parse_from_str(params.get("start").unwrap(), "%Y%m%d").unwrap();
        let end = NaiveDate::parse_from_str(params.get("end").unwrap(), "%Y%m%d").unwrap();

        let step = 0.5;
        let mut features = Vec::new();
        let mut lat = lat_min;
        while lat <= lat_max + 1e-9 {
            let mut lon = lon_min;
            while lon <= lon_max + 1e-9 {
                let mut readings = serde_json::Map::new();
                let mut date = start;
                while date <= end {
                    if Some(date) != drop_date {
                        let day = (date - start).num_days();
                        readings.insert(
                            date.format("%Y%m%d").to_string(),
                            serde_json::json!(expected_value(lat, lon, day)),
                        );
                    }
                    date = date + Days::new(1);
                }
                features.push(serde_json::json!({
                    "geometry": {"coordinates": [lon, lat, 0.0]},
                    "properties": {"parameter": {parameter.clone(): readings}},
                }));
                lon += step;
            }
            lat += step;
        }
        let body = serde_json::json!({"features": features}).to_string();
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            body.len(),
            body
        );
        let _ = stream.write_all(response.as_bytes());
        let _ = stream.flush();
        let mut sink = Vec::new();
        let _ = reader.read_to_end(&mut sink);
    }

    fn test_config(server: &MockPower, tile_deg: f64) -> PowerConfig {
        PowerConfig {
            base_url: server.url(),
            tile_deg,
            retries: 1,
            backoff_ms: 10,
            timeout_secs: 5,
            ..PowerConfig::default()
        }
    }

    fn test_request(bbox: BoundingBox, days: u64) -> FetchRequest {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        FetchRequest {
            bbox,
            resolution: 0.5,
            start,
            end: start + Days::new(days - 1),
            variable: "TMAX".to_string(),
            forward_fill_days: 0,
        }
    }

    #[test]
    fn single_point_box_yields_1x1_grid() {
        let server = MockPower::start(None);
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path().to_path_buf());
        let req = test_request(
            BoundingBox {
                lat_min: 40.0,
                lat_max: 40.0,
                lon_min: 10.0,
                lon_max: 10.0,
            },
            4,
        );
        let outcome = fetch_power(&test_config(&server, 9.5), &req, &cache).unwrap();
        assert_eq!(outcome.series.grid.n_lat(), 1);
        assert_eq!(outcome.series.grid.n_lon(), 1);
        assert_eq!(outcome.series.len_time(), 4);
        for t in 0..4 {
            let expected = expected_value(40.0, 10.0, t as i64);
            assert_eq!(outcome.series.values.get(&[0, 0, t]), expected);
        }
    }

    #[test]
    fn tiled_fetch_stitches_and_caches() {
        let server = MockPower::start(None);
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path().to_path_buf());
        // 1.0° tiles over a 0–2° box → 2 tiles along each axis.
        let cfg = test_config(&server, 1.0);
        let req = test_request(
            BoundingBox {
                lat_min: 0.0,
                lat_max: 2.0,
                lon_min: 5.0,
                lon_max: 7.0,
            },
            3,
        );
        let first = fetch_power(&cfg, &req, &cache).unwrap();
        assert_eq!(first.series.grid.n_lat(), 5);
        assert_eq!(first.series.grid.n_lon(), 5);
        assert_eq!(first.tile_count, 4);
        assert_eq!(first.network_requests, 4);
        assert_eq!(server.hits(), 4);
        for (i, &lat) in first.series.grid.lats().iter().enumerate() {
            for (j, &lon) in first.series.grid.lons().iter().enumerate() {
                for t in 0..3 {
                    assert_eq!(
                        first.series.values.get(&[i, j, t]),
                        expected_value(lat, lon, t as i64),
                        "({lat}, {lon}, {t})"
                    );
                }
            }
        }

        // Second fetch: all tiles served from cache, zero network calls.
        let second = fetch_power(&cfg, &req, &cache).unwrap();
        assert_eq!(second.network_requests, 0);
        assert_eq!(server.hits(), 4);
        assert_eq!(second.series, first.series);
    }

    #[test]
    fn gap_rejected_strictly_but_forward_fillable() {
        let missing = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        let server = MockPower::start(Some(missing));
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path().to_path_buf());
        let cfg = test_config(&server, 9.5);
        let bbox = BoundingBox {
            lat_min: 40.0,
            lat_max: 40.0,
            lon_min: 10.0,
            lon_max: 10.0,
        };

        let strict = test_request(bbox, 3);
        match fetch_power(&cfg, &strict, &cache) {
            Err(PowerError::MissingData { date, .. }) => assert_eq!(date, missing),
            other => panic!("expected MissingData, got {other:?}"),
        }

        let lenient = FetchRequest {
            forward_fill_days: 2,
            ..strict
        };
        let outcome = fetch_power(&cfg, &lenient, &cache).unwrap();
        // Day 1 carries day 0's value forward.
        assert_eq!(
            outcome.series.values.get(&[0, 0, 1]),
            expected_value(40.0, 10.0, 0)
        );
        assert_eq!(
            outcome.series.values.get(&[0, 0, 2]),
            expected_value(40.0, 10.0, 2)
        );
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path().to_path_buf());
        let cfg = PowerConfig::default();
        let req = FetchRequest {
            variable: "RAINFALL".to_string(),
            ..test_request(
                BoundingBox {
                    lat_min: 0.0,
                    lat_max: 0.0,
                    lon_min: 0.0,
                    lon_max: 0.0,
                },
                2,
            )
        };
        assert!(matches!(
            fetch_power(&cfg, &req, &cache),
            Err(PowerError::UnknownVariable(_))
        ));
    }

    #[test]
    fn tile_planning_covers_box_without_overlap() {
        // A 50×94-point region at the service's native resolution.
        let bbox = BoundingBox {
            lat_min: 30.0,
            lat_max: 54.5,
            lon_min: 4.0,
            lon_max: 50.5,
        };
        let tiles = plan_tiles(&bbox, 0.5, 9.5).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for tile in &tiles {
            let mut lat = tile.lat_min;
            while lat <= tile.lat_max + 1e-9 {
                let mut lon = tile.lon_min;
                while lon <= tile.lon_max + 1e-9 {
                    assert!(
                        seen.insert((lat.to_bits(), lon.to_bits())),
                        "point ({lat}, {lon}) requested twice"
                    );
                    lon += 0.5;
                }
                lat += 0.5;
            }
        }
        assert_eq!(seen.len(), 50 * 94);
    }
}
