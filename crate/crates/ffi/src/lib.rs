//! C ABI for nira.
//!
//! Networks and meshes are opaque handles created by `nira_*_load`/`nira_extract`
//! and released with the matching `_free`. Every fallible call returns a
//! [`NiraStatus`]; the message of the last failure on the calling thread is
//! available through [`nira_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nira::affine::{ra_output_range, RaVariant};
use nira::extract::{export_obj, kdtree_extract, marching_cubes, region_bound, BoundMethod, ExtractConfig, TriangleMesh};
use nira::inr::{load_network, parse_network};
use nira::paf::{ra_ua_estimate, up_output_estimate};
use nira::{Error, MlpNetwork, Region};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Io = 5,
    Numeric = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiraMethod {
    Up = 0,
    RaFull = 1,
    RaFixed = 2,
    RaTruncate = 3,
    RaAppend = 4,
    RaUa = 5,
    Dense = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiraGaussian {
    pub mu: f64,
    pub sigma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiraExtractParams {
    pub iso_value: f64,
    /// Multiple of 3.
    pub max_depth: u32,
    /// Soft-bound width for `UP` and `RA_UA`.
    pub t: f64,
    pub method: NiraMethod,
    /// Truncate k or append budget; 0 selects input_dim + 16.
    pub variant_param: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NiraExtractCounters {
    pub active_cells: u64,
    pub nodes_visited: u64,
    pub bound_queries: u64,
    pub nodes_pruned: u64,
    pub inr_point_evals: u64,
    pub pruned_volume: f64,
}

/// Opaque network handle.
pub struct NiraNetwork(MlpNetwork);

/// Opaque triangle mesh handle.
pub struct NiraMesh {
    mesh: TriangleMesh,
    counters: NiraExtractCounters,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NiraStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::InvalidArgument(_) => NiraStatus::InvalidArgument,
        Error::Parse { .. } => NiraStatus::Parse,
        Error::Validation(_) => NiraStatus::Validation,
        Error::Io { .. } => NiraStatus::Io,
        Error::TrainingDiverged { .. }
        | Error::InternalConsistency(_)
        | Error::UndefinedPsnr
        | Error::UndefinedDivergence => NiraStatus::Numeric,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NiraStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NiraStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            NiraStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            NiraStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

unsafe fn as_slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

fn method_of(m: NiraMethod, param: usize, input_dim: usize) -> BoundMethod {
    let budget = if param == 0 { RaVariant::default_budget(input_dim) } else { param };
    match m {
        NiraMethod::Up => BoundMethod::Up,
        NiraMethod::RaFull => BoundMethod::Ra(RaVariant::Full),
        NiraMethod::RaFixed => BoundMethod::Ra(RaVariant::Fixed),
        NiraMethod::RaTruncate => BoundMethod::Ra(RaVariant::Truncate(budget)),
        NiraMethod::RaAppend => BoundMethod::Ra(RaVariant::Append(budget)),
        NiraMethod::RaUa => BoundMethod::RaUa(RaVariant::Full),
        NiraMethod::Dense => BoundMethod::Dense,
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one, or 0 when
/// there is no error.
///
/// # Safety
/// `buf` must be writable for `len` bytes, or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn nira_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Loads an `inr-weights-v1` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nira_network_load(path: *const c_char, out: *mut *mut NiraNetwork) -> NiraStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let net = load_network(as_str(path, "path")?)?;
        *out = Box::into_raw(Box::new(NiraNetwork(net)));
        Ok(())
    })
}

/// Parses `inr-weights-v1` text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nira_network_parse(text: *const c_char, out: *mut *mut NiraNetwork) -> NiraStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let net = parse_network(as_str(text, "text")?)?;
        *out = Box::into_raw(Box::new(NiraNetwork(net)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from `nira_network_load`/`nira_network_parse` and not be
/// freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nira_network_free(net: *mut NiraNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input dimension of the network, 0 for null.
///
/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nira_network_input_dim(net: *const NiraNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.input_dim())
}

/// Evaluates the network at `n` points stored contiguously (`input_dim`
/// values each) into `out[0..n]`.
///
/// # Safety
/// `points` must hold `n * input_dim` doubles and `out` `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn nira_network_forward(
    net: *const NiraNetwork,
    points: *const f64,
    n: usize,
    out: *mut f64,
) -> NiraStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let pts = as_slice(points, n * net.input_dim(), "points")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        net.forward_batch(pts, slice::from_raw_parts_mut(out, n))?;
        Ok(())
    })
}

unsafe fn region_from(
    net: &MlpNetwork,
    lower: *const f64,
    upper: *const f64,
    dim: usize,
) -> Result<Region, Failure> {
    if dim != net.input_dim() {
        return Err(Error::DimensionMismatch { context: "region", expected: net.input_dim(), actual: dim }.into());
    }
    Ok(Region::from_box(as_slice(lower, dim, "lower")?, as_slice(upper, dim, "upper")?)?)
}

/// Guaranteed output range of the network over the box with range analysis
/// (`method` must be one of the `RA_*` variants other than `RA_UA`).
///
/// # Safety
/// `lower`/`upper` must hold `dim` doubles; `out_lo`/`out_hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nira_ra_output_range(
    net: *const NiraNetwork,
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    method: NiraMethod,
    variant_param: usize,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> NiraStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let region = region_from(net, lower, upper, dim)?;
        let BoundMethod::Ra(v) = method_of(method, variant_param, net.input_dim()) else {
            return Err(Error::InvalidArgument("method must be a range-analysis variant".into()).into());
        };
        if out_lo.is_null() || out_hi.is_null() {
            return Err(Failure::Null("out"));
        }
        let (lo, hi) = ra_output_range(net, &region, v)?;
        *out_lo = lo;
        *out_hi = hi;
        Ok(())
    })
}

/// Value range over the box by any method; `t` is used by `UP` and `RA_UA`.
///
/// # Safety
/// As [`nira_ra_output_range`].
#[no_mangle]
pub unsafe extern "C" fn nira_region_bound(
    net: *const NiraNetwork,
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    method: NiraMethod,
    variant_param: usize,
    t: f64,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> NiraStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let region = region_from(net, lower, upper, dim)?;
        if out_lo.is_null() || out_hi.is_null() {
            return Err(Failure::Null("out"));
        }
        let (lo, hi) = region_bound(net, &region, method_of(method, variant_param, net.input_dim()), t)?;
        *out_lo = lo;
        *out_hi = hi;
        Ok(())
    })
}

/// Gaussian estimate of the output over the box by uncertainty propagation.
///
/// # Safety
/// `lower`/`upper` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nira_up_estimate(
    net: *const NiraNetwork,
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    out: *mut NiraGaussian,
) -> NiraStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let region = region_from(net, lower, upper, dim)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let e = up_output_estimate(net, &region)?;
        *out = NiraGaussian { mu: e.mu, sigma: e.sigma };
        Ok(())
    })
}

/// Gaussian read-off of the full range-analysis form under the uniform
/// assumption.
///
/// # Safety
/// As [`nira_up_estimate`].
#[no_mangle]
pub unsafe extern "C" fn nira_ra_ua_estimate(
    net: *const NiraNetwork,
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    out: *mut NiraGaussian,
) -> NiraStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let region = region_from(net, lower, upper, dim)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let e = ra_ua_estimate(net, &region, RaVariant::Full)?;
        *out = NiraGaussian { mu: e.mu, sigma: e.sigma };
        Ok(())
    })
}

/// Hierarchical active-cell prediction followed by marching cubes.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nira_extract(
    net: *const NiraNetwork,
    params: *const NiraExtractParams,
    out: *mut *mut NiraMesh,
) -> NiraStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let p = *as_ref(params, "params")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let cfg = ExtractConfig {
            iso_value: p.iso_value,
            max_depth: p.max_depth,
            t: p.t,
            method: method_of(p.method, p.variant_param, net.input_dim()),
        };
        let cells = kdtree_extract(net, &cfg)?;
        let mc = marching_cubes(net, &cells, p.iso_value)?;
        let counters = NiraExtractCounters {
            active_cells: cells.len() as u64,
            nodes_visited: cells.counters.nodes_visited,
            bound_queries: cells.counters.bound_queries,
            nodes_pruned: cells.counters.nodes_pruned,
            inr_point_evals: cells.counters.inr_point_evals,
            pruned_volume: cells.pruned_volume,
        };
        *out = Box::into_raw(Box::new(NiraMesh { mesh: mc.mesh, counters }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nira_mesh_vertex_count(mesh: *const NiraMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.vertices().len())
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nira_mesh_triangle_count(mesh: *const NiraMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.triangles().len())
}

/// Copies `3 * vertex_count` coordinates (x, y, z per vertex).
///
/// # Safety
/// `out` must be writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn nira_mesh_copy_vertices(mesh: *const NiraMesh, out: *mut f64, capacity: usize) -> NiraStatus {
    guard(|| {
        let m = as_ref(mesh, "mesh")?;
        let need = 3 * m.mesh.vertices().len();
        if capacity < need {
            return Err(Error::InvalidArgument(format!("vertex buffer holds {capacity} doubles, need {need}")).into());
        }
        if out.is_null() && need > 0 {
            return Err(Failure::Null("out"));
        }
        for (i, v) in m.mesh.vertices().iter().enumerate() {
            ptr::copy_nonoverlapping(v.as_ptr(), out.add(3 * i), 3);
        }
        Ok(())
    })
}

/// Copies `3 * triangle_count` zero-based vertex indices.
///
/// # Safety
/// `out` must be writable for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nira_mesh_copy_triangles(mesh: *const NiraMesh, out: *mut u32, capacity: usize) -> NiraStatus {
    guard(|| {
        let m = as_ref(mesh, "mesh")?;
        let need = 3 * m.mesh.triangles().len();
        if capacity < need {
            return Err(Error::InvalidArgument(format!("index buffer holds {capacity} values, need {need}")).into());
        }
        if out.is_null() && need > 0 {
            return Err(Failure::Null("out"));
        }
        for (i, t) in m.mesh.triangles().iter().enumerate() {
            ptr::copy_nonoverlapping(t.as_ptr(), out.add(3 * i), 3);
        }
        Ok(())
    })
}

/// Counters of the extraction that produced `mesh`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nira_mesh_counters(mesh: *const NiraMesh, out: *mut NiraExtractCounters) -> NiraStatus {
    guard(|| {
        let m = as_ref(mesh, "mesh")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = m.counters;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nira_mesh_write_obj(mesh: *const NiraMesh, path: *const c_char) -> NiraStatus {
    guard(|| {
        let m = as_ref(mesh, "mesh")?;
        export_obj(&m.mesh, as_str(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from `nira_extract` and not be freed twice. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn nira_mesh_free(mesh: *mut NiraMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}
