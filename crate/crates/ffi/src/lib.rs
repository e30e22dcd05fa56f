//! C ABI over `fieldgrid`.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`FgStatus`]; on failure a message is kept per thread and can be read
//! with [`fg_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fieldgrid::extract::{extract, MaskTriple, Method, ThresholdSet};
use fieldgrid::raster::{FieldLabelMap, GeoTransform, Raster};
use fieldgrid::{io, loss, metrics, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Degenerate = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgMethod {
    Cutoff = 0,
    Watershed = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgThresholds {
    pub t_extent: f64,
    pub t_boundary: f64,
    pub t_distance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FgObjectSummary {
    pub n_reference: usize,
    pub n_extracted: usize,
    pub n_detected: usize,
    pub hit_rate: f64,
    pub s_over: f64,
    pub s_under: f64,
    pub eccentricity_factor: f64,
    pub location_shift: f64,
}

/// Opaque raster handle.
pub struct FgRaster(Raster);

/// Opaque field label map handle.
pub struct FgLabelMap(FieldLabelMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FgStatus {
    match e {
        Error::Io { .. } => FgStatus::Io,
        Error::Format { .. } | Error::UnknownFormat(_) => FgStatus::Format,
        Error::Degenerate(_)
        | Error::UndefinedRatio
        | Error::MccUndefined
        | Error::NoViableCandidate
        | Error::NoBackgroundReference => FgStatus::Degenerate,
        _ => FgStatus::InvalidArgument,
    }
}

struct Fail(FgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FgStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FgStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FgStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(FgStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copy `len = width * height * bands` band-sequential values into a new
/// raster with a unit geotransform.
///
/// # Safety
/// `data` must point to `len` readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_raster_new(
    width: usize,
    height: usize,
    bands: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut FgRaster,
) -> FgStatus {
    guard(|| {
        let data = slice_arg(data, len, "data")?.to_vec();
        let r = Raster::new(width, height, bands, data, GeoTransform::default())?;
        put(out, FgRaster(r))
    })
}

/// # Safety
/// `raster` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fg_raster_free(raster: *mut FgRaster) {
    if !raster.is_null() {
        drop(Box::from_raw(raster));
    }
}

/// Read a raster from its `.bin` or `.json` path.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_raster_read(path: *const c_char, out: *mut *mut FgRaster) -> FgStatus {
    guard(|| {
        let r = io::read_raster(path_arg(path)?)?;
        put(out, FgRaster(r))
    })
}

/// # Safety
/// Pointers must be valid; output pointers may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn fg_raster_dims(
    raster: *const FgRaster,
    width: *mut usize,
    height: *mut usize,
    bands: *mut usize,
) -> FgStatus {
    guard(|| {
        let r = &deref(raster, "raster")?.0;
        for (p, v) in [(width, r.width()), (height, r.height()), (bands, r.bands())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

unsafe fn extract_impl(
    masks: *const FgRaster,
    t: FgThresholds,
    method: Method,
    out: *mut *mut FgLabelMap,
) -> FgStatus {
    guard(|| {
        let m = MaskTriple::from_stacked(&deref(masks, "masks")?.0)?;
        let t = ThresholdSet::new(t.t_extent, t.t_boundary, t.t_distance)?;
        put(out, FgLabelMap(extract(&m, &t, method)))
    })
}

/// Extract fields from a 3-band mask raster (extent, boundary, distance).
///
/// # Safety
/// `masks` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_extract(
    masks: *const FgRaster,
    thresholds: FgThresholds,
    method: FgMethod,
    out: *mut *mut FgLabelMap,
) -> FgStatus {
    let method = match method {
        FgMethod::Cutoff => Method::Cutoff,
        FgMethod::Watershed => Method::Watershed,
    };
    extract_impl(masks, thresholds, method, out)
}

/// # Safety
/// See [`fg_extract`].
#[no_mangle]
pub unsafe extern "C" fn fg_extract_cutoff(
    masks: *const FgRaster,
    thresholds: FgThresholds,
    out: *mut *mut FgLabelMap,
) -> FgStatus {
    extract_impl(masks, thresholds, Method::Cutoff, out)
}

/// # Safety
/// See [`fg_extract`].
#[no_mangle]
pub unsafe extern "C" fn fg_extract_watershed(
    masks: *const FgRaster,
    thresholds: FgThresholds,
    out: *mut *mut FgLabelMap,
) -> FgStatus {
    extract_impl(masks, thresholds, Method::Watershed, out)
}

/// Copy `width * height` labels into a new label map.
///
/// # Safety
/// `labels` must point to `width * height` readable values.
#[no_mangle]
pub unsafe extern "C" fn fg_label_map_new(
    width: usize,
    height: usize,
    labels: *const u32,
    out: *mut *mut FgLabelMap,
) -> FgStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Fail(FgStatus::InvalidArgument, "grid too large".into()))?;
        let data = slice_arg(labels, n, "labels")?.to_vec();
        put(out, FgLabelMap(FieldLabelMap::new(width, height, data)?))
    })
}

/// Read a single-band label map raster.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_label_map_read(
    path: *const c_char,
    out: *mut *mut FgLabelMap,
) -> FgStatus {
    guard(|| {
        let (labels, _) = io::read_label_map(path_arg(path)?)?;
        put(out, FgLabelMap(labels))
    })
}

/// # Safety
/// `map` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fg_label_map_free(map: *mut FgLabelMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Grid shape and largest label. Output pointers may be null.
///
/// # Safety
/// `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fg_label_map_dims(
    map: *const FgLabelMap,
    width: *mut usize,
    height: *mut usize,
    n_fields: *mut u32,
) -> FgStatus {
    guard(|| {
        let m = &deref(map, "label map")?.0;
        if !width.is_null() {
            *width = m.width();
        }
        if !height.is_null() {
            *height = m.height();
        }
        if !n_fields.is_null() {
            *n_fields = m.max_label();
        }
        Ok(())
    })
}

/// Copy the row-major labels into `buf`, which must hold exactly
/// `width * height` values.
///
/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn fg_label_map_copy(map: *const FgLabelMap, buf: *mut u32, len: usize) -> FgStatus {
    guard(|| {
        let m = &deref(map, "label map")?.0;
        if len != m.len() {
            return Err(Fail(
                FgStatus::InvalidArgument,
                format!("buffer holds {len} values, map has {}", m.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buffer"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(m.labels());
        Ok(())
    })
}

/// Object-level accuracy summary of `extracted` against `reference`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_object_summary(
    extracted: *const FgLabelMap,
    reference: *const FgLabelMap,
    out: *mut FgObjectSummary,
) -> FgStatus {
    guard(|| {
        let e = &deref(extracted, "extracted")?.0;
        let r = &deref(reference, "reference")?.0;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let s = metrics::object_metrics(e, r)?.summary;
        *out = FgObjectSummary {
            n_reference: s.n_reference,
            n_extracted: s.n_extracted,
            n_detected: s.n_detected,
            hit_rate: s.hit_rate,
            s_over: s.s_over,
            s_under: s.s_under,
            eccentricity_factor: s.eccentricity_factor,
            location_shift: s.location_shift,
        };
        Ok(())
    })
}

/// Dual Tanimoto similarity of predictions `p` and labels `l`.
///
/// # Safety
/// `p` and `l` must each point to `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn fg_tanimoto_dual(p: *const f64, l: *const f64, n: usize, out: *mut f64) -> FgStatus {
    guard(|| {
        let p = slice_arg(p, n, "p")?;
        let l = slice_arg(l, n, "l")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = loss::tanimoto_dual(p, l)?;
        Ok(())
    })
}
