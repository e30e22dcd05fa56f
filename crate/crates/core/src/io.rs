//! Raster and polygon files.
//!
//! Rasters are stored as a flat little-endian binary file (`name.bin`,
//! row-major, band-sequential) next to a JSON header (`name.json`):
//!
//! ```json
//! {"format": "fieldgrid-raster", "version": 1, "width": 256, "height": 256,
//!  "bands": 3, "dtype": "float32",
//!  "geotransform": {"origin_x": 0.0, "origin_y": 2560.0, "pixel_size": 10.0},
//!  "nodata": null}
//! ```
//!
//! Polygons are GeoJSON FeatureCollections with an integer `field_id`
//! property on each feature.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{FieldPolygon, FieldPolygonSet, Polygon, Ring};
use crate::raster::{FieldLabelMap, GeoTransform, Raster};

pub const RASTER_FORMAT: &str = "fieldgrid-raster";
pub const RASTER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Float32,
    Uint8,
    Uint32,
}

impl DType {
    fn size(self) -> usize {
        match self {
            DType::Float32 | DType::Uint32 => 4,
            DType::Uint8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterHeader {
    pub format: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: DType,
    pub geotransform: GeoTransform,
    pub nodata: Option<f64>,
}

/// `(header path, data path)` for a raster path ending in `.bin` or `.json`.
pub fn raster_paths(path: &Path) -> Result<(PathBuf, PathBuf)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") | Some("json") => {
            Ok((path.with_extension("json"), path.with_extension("bin")))
        }
        _ => Err(Error::UnknownFormat(path.to_path_buf())),
    }
}

fn read_header(path: &Path) -> Result<RasterHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: RasterHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if header.format != RASTER_FORMAT {
        return Err(Error::format(path, format!("format must be {RASTER_FORMAT:?}")));
    }
    if header.version != RASTER_VERSION {
        return Err(Error::format(path, format!("unsupported version {}", header.version)));
    }
    if !(header.geotransform.pixel_size > 0.0) {
        return Err(Error::format(path, "geotransform.pixel_size must be > 0"));
    }
    Ok(header)
}

fn read_payload(path: &Path) -> Result<(RasterHeader, Vec<u8>)> {
    let (hdr_path, bin_path) = raster_paths(path)?;
    let header = read_header(&hdr_path)?;
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let expected = header.width * header.height * header.bands * header.dtype.size();
    if bytes.len() != expected {
        return Err(Error::format(
            &bin_path,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    Ok((header, bytes))
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let (header, bytes) = read_payload(path.as_ref())?;
    let data: Vec<f32> = match header.dtype {
        DType::Float32 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        DType::Uint8 => bytes.iter().map(|&b| b as f32).collect(),
        DType::Uint32 => bytes
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32)
            .collect(),
    };
    Ok(Raster::new(header.width, header.height, header.bands, data, header.geotransform)?
        .with_nodata(header.nodata.map(|v| v as f32)))
}

/// Read a single-band integer raster as a field label map.
pub fn read_label_map(path: impl AsRef<Path>) -> Result<(FieldLabelMap, GeoTransform)> {
    let path = path.as_ref();
    let (header, bytes) = read_payload(path)?;
    if header.bands != 1 {
        return Err(Error::format(path, format!("label map must have 1 band, has {}", header.bands)));
    }
    let labels: Vec<u32> = match header.dtype {
        DType::Uint32 => bytes
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        DType::Uint8 => bytes.iter().map(|&b| b as u32).collect(),
        DType::Float32 => {
            let mut out = Vec::with_capacity(bytes.len() / 4);
            for b in bytes.chunks_exact(4) {
                let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                if !(v >= 0.0 && v.fract() == 0.0) {
                    return Err(Error::format(path, format!("non-integer label value {v}")));
                }
                out.push(v as u32);
            }
            out
        }
    };
    Ok((FieldLabelMap::new(header.width, header.height, labels)?, header.geotransform))
}

fn check_write_over(hdr_path: &Path, header: &RasterHeader) -> Result<()> {
    if !hdr_path.exists() {
        return Ok(());
    }
    if let Ok(old) = read_header(hdr_path) {
        if (old.width, old.height, old.bands) != (header.width, header.height, header.bands) {
            return Err(Error::ShapeMismatch(format!(
                "{} holds a {}x{}x{} raster; refusing to overwrite with {}x{}x{}",
                hdr_path.display(),
                old.width,
                old.height,
                old.bands,
                header.width,
                header.height,
                header.bands
            )));
        }
    }
    Ok(())
}

fn write_payload(path: &Path, header: &RasterHeader, bytes: &[u8]) -> Result<()> {
    let (hdr_path, bin_path) = raster_paths(path)?;
    check_write_over(&hdr_path, header)?;
    if let Some(dir) = bin_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))?;
    let text = serde_json::to_string_pretty(header).expect("header serializes");
    fs::write(&hdr_path, text + "\n").map_err(|e| Error::io(&hdr_path, e))?;
    Ok(())
}

/// Write `raster` with the given storage type. Integer types require
/// integral values in range.
pub fn write_raster(raster: &Raster, path: impl AsRef<Path>, dtype: DType) -> Result<()> {
    let path = path.as_ref();
    let header = RasterHeader {
        format: RASTER_FORMAT.into(),
        version: RASTER_VERSION,
        width: raster.width(),
        height: raster.height(),
        bands: raster.bands(),
        dtype,
        geotransform: raster.geotransform,
        nodata: raster.nodata.map(|v| v as f64),
    };
    let data = raster.data();
    let mut bytes = Vec::with_capacity(data.len() * dtype.size());
    for &v in data {
        match dtype {
            DType::Float32 => bytes.extend_from_slice(&v.to_le_bytes()),
            DType::Uint8 => {
                if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!("value {v} does not fit uint8")));
                }
                bytes.push(v as u8);
            }
            DType::Uint32 => {
                if !(v >= 0.0) || v.fract() != 0.0 || v as f64 > u32::MAX as f64 {
                    return Err(Error::InvalidArgument(format!("value {v} does not fit uint32")));
                }
                bytes.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
    }
    write_payload(path, &header, &bytes)
}

pub fn write_label_map(
    labels: &FieldLabelMap,
    geotransform: GeoTransform,
    path: impl AsRef<Path>,
) -> Result<()> {
    let header = RasterHeader {
        format: RASTER_FORMAT.into(),
        version: RASTER_VERSION,
        width: labels.width(),
        height: labels.height(),
        bands: 1,
        dtype: DType::Uint32,
        geotransform,
        nodata: None,
    };
    let bytes: Vec<u8> = labels.labels().iter().flat_map(|l| l.to_le_bytes()).collect();
    write_payload(path.as_ref(), &header, &bytes)
}

fn ring_json(ring: &Ring) -> Value {
    let mut coords: Vec<Value> = ring.vertices().iter().map(|&(x, y)| json!([x, y])).collect();
    if let Some(first) = coords.first().cloned() {
        coords.push(first);
    }
    Value::Array(coords)
}

fn polygon_json(p: &Polygon) -> Value {
    Value::Array(p.rings().map(ring_json).collect())
}

/// GeoJSON text for a polygon set; rings are oriented exterior
/// counter-clockwise, holes clockwise.
pub fn polygons_to_geojson(set: &FieldPolygonSet) -> String {
    let features: Vec<Value> = set
        .normalized()
        .fields()
        .iter()
        .map(|f| {
            let geometry = if f.parts.len() == 1 {
                json!({"type": "Polygon", "coordinates": polygon_json(&f.parts[0])})
            } else {
                json!({
                    "type": "MultiPolygon",
                    "coordinates": f.parts.iter().map(polygon_json).collect::<Vec<_>>()
                })
            };
            json!({"type": "Feature", "properties": {"field_id": f.id}, "geometry": geometry})
        })
        .collect();
    let fc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_string_pretty(&fc).expect("geojson serializes") + "\n"
}

pub fn write_polygons(set: &FieldPolygonSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, polygons_to_geojson(set)).map_err(|e| Error::io(path, e))
}

pub fn read_polygons(path: impl AsRef<Path>) -> Result<FieldPolygonSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    polygons_from_geojson(&text).map_err(|msg| Error::format(path, msg))
}

pub fn polygons_from_geojson(text: &str) -> std::result::Result<FieldPolygonSet, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if v.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err("expected a GeoJSON FeatureCollection".into());
    }
    let features = v
        .get("features")
        .and_then(Value::as_array)
        .ok_or("missing field `features`")?;
    let mut fields = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let id = f
            .pointer("/properties/field_id")
            .and_then(Value::as_u64)
            .filter(|&id| id > 0 && id <= u32::MAX as u64)
            .ok_or_else(|| format!("feature {i}: missing or invalid `field_id`"))?;
        let geom = f.get("geometry").ok_or_else(|| format!("feature {i}: missing `geometry`"))?;
        let coords = geom
            .get("coordinates")
            .ok_or_else(|| format!("feature {i}: missing `coordinates`"))?;
        let parts = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![parse_polygon(coords).map_err(|e| format!("feature {i}: {e}"))?],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| format!("feature {i}: coordinates must be an array"))?
                .iter()
                .map(parse_polygon)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("feature {i}: {e}"))?,
            other => return Err(format!("feature {i}: unsupported geometry type {other:?}")),
        };
        fields.push(FieldPolygon {
            id: id as u32,
            parts,
        });
    }
    Ok(FieldPolygonSet::new(fields)
        .map_err(|e| e.to_string())?
        .normalized())
}

fn parse_polygon(v: &Value) -> std::result::Result<Polygon, String> {
    let rings = v.as_array().ok_or("polygon must be an array of rings")?;
    let mut parsed = rings.iter().map(parse_ring);
    let exterior = parsed.next().ok_or("polygon has no rings")??;
    let holes = parsed.collect::<std::result::Result<_, _>>()?;
    Ok(Polygon::new(exterior, holes))
}

fn parse_ring(v: &Value) -> std::result::Result<Ring, String> {
    let pts = v.as_array().ok_or("ring must be an array of positions")?;
    let mut verts = Vec::with_capacity(pts.len());
    for p in pts {
        let xy = p.as_array().filter(|a| a.len() >= 2).ok_or("position needs two numbers")?;
        let x = xy[0].as_f64().ok_or("non-numeric coordinate")?;
        let y = xy[1].as_f64().ok_or("non-numeric coordinate")?;
        verts.push((x, y));
    }
    if verts.len() < 4 || verts.first() != verts.last() {
        return Err("ring must be closed with at least 4 positions".into());
    }
    Ok(Ring::new(verts))
}
