//! C ABI over the llicti codec.
//!
//! Every function returns an [`LlictiStatus`]; on failure a description is
//! available from [`llicti_last_error`] on the same thread. Objects handed
//! out (weights, byte buffers, images) are opaque and must be released with
//! their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use llicti::interpolator::load_weights;
use llicti::{Error, IcnnWeights, Model, Plane};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlictiStatus {
    Ok = 0,
    Argument = 1,
    Range = 2,
    Shape = 3,
    Numeric = 4,
    Capacity = 5,
    State = 6,
    Format = 7,
    Corruption = 8,
    Unsupported = 9,
    Io = 10,
    NullPointer = 11,
    Panic = 12,
}

impl From<&Error> for LlictiStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Argument(_) => Self::Argument,
            Error::Range(_) => Self::Range,
            Error::Shape(_) => Self::Shape,
            Error::Numeric(_) => Self::Numeric,
            Error::Capacity(_) => Self::Capacity,
            Error::State(_) => Self::State,
            Error::Format(_) => Self::Format,
            Error::Corruption(_) => Self::Corruption,
            Error::Unsupported(_) => Self::Unsupported,
            Error::Io { .. } => Self::Io,
        }
    }
}

/// Loaded interpolator weights.
pub struct LlictiWeights(IcnnWeights<f32>);

/// A byte buffer owned by the library.
pub struct LlictiBytes(Vec<u8>);

/// An 8-bit RGB image, interleaved, owned by the library.
pub struct LlictiImage {
    height: usize,
    width: usize,
    rgb: Vec<u8>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), (LlictiStatus, String)>) -> LlictiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LlictiStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LlictiStatus::Panic
        }
    }
}

fn lift(e: Error) -> (LlictiStatus, String) {
    (LlictiStatus::from(&e), format!("{}: {e}", e.kind()))
}

fn null(what: &str) -> (LlictiStatus, String) {
    (LlictiStatus::NullPointer, format!("{what} is null"))
}

fn model<'a>(weights: *const LlictiWeights, flat_scales: u32) -> Model<'a> {
    // SAFETY: callers pass either null or a pointer from llicti_weights_load.
    match unsafe { weights.as_ref() } {
        Some(w) => Model::Learned(&w.0),
        None => Model::Flat {
            scales: flat_scales as usize,
        },
    }
}

/// Message describing the last failure on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn llicti_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn llicti_weights_load(path: *const c_char, out: *mut *mut LlictiWeights) -> LlictiStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (LlictiStatus::Argument, "path is not UTF-8".to_string()))?;
        let w = load_weights(path).map_err(lift)?;
        *out = Box::into_raw(Box::new(LlictiWeights(w)));
        Ok(())
    })
}

/// 64-bit identifier of the weights as written into bitstreams; 0 for null.
///
/// # Safety
/// `weights` must be null or come from [`llicti_weights_load`].
#[no_mangle]
pub unsafe extern "C" fn llicti_weights_checksum(weights: *const LlictiWeights) -> u64 {
    weights.as_ref().map_or(0, |w| w.0.checksum())
}

/// # Safety
/// `weights` must be null or come from [`llicti_weights_load`], and not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn llicti_weights_free(weights: *mut LlictiWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

unsafe fn input_image(rgb: *const u8, height: usize, width: usize) -> Result<Plane, (LlictiStatus, String)> {
    if rgb.is_null() && height * width > 0 {
        return Err(null("rgb"));
    }
    let n = height
        .checked_mul(width)
        .and_then(|p| p.checked_mul(3))
        .ok_or((LlictiStatus::Capacity, "image too large".to_string()))?;
    let data = if n == 0 { &[][..] } else { std::slice::from_raw_parts(rgb, n) };
    Plane::from_rgb8(height, width, data).map_err(lift)
}

/// Compresses an interleaved 8-bit RGB image. With null `weights` the flat
/// model with `flat_scales` scales is used.
///
/// # Safety
/// `rgb` must point to `height * width * 3` bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn llicti_encode(
    weights: *const LlictiWeights,
    flat_scales: u32,
    rgb: *const u8,
    height: usize,
    width: usize,
    out: *mut *mut LlictiBytes,
) -> LlictiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let img = input_image(rgb, height, width)?;
        let bytes = llicti::encode(&img, &model(weights, flat_scales)).map_err(lift)?;
        *out = Box::into_raw(Box::new(LlictiBytes(bytes)));
        Ok(())
    })
}

/// Decompresses a bitstream. `weights` must be the weights used to encode,
/// or null for flat-model streams.
///
/// # Safety
/// `data` must point to `len` bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn llicti_decode(
    weights: *const LlictiWeights,
    data: *const u8,
    len: usize,
    out: *mut *mut LlictiImage,
) -> LlictiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if data.is_null() && len > 0 {
            return Err(null("data"));
        }
        let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
        let img = llicti::decode(bytes, &model(weights, 1)).map_err(lift)?;
        let rgb = img.to_rgb8().map_err(lift)?;
        *out = Box::into_raw(Box::new(LlictiImage {
            height: img.height(),
            width: img.width(),
            rgb,
        }));
        Ok(())
    })
}

/// Modelled size in bits (header, fixed segment and coded subbands).
///
/// # Safety
/// As for [`llicti_encode`]; `bits` must be valid.
#[no_mangle]
pub unsafe extern "C" fn llicti_estimate_bits(
    weights: *const LlictiWeights,
    flat_scales: u32,
    rgb: *const u8,
    height: usize,
    width: usize,
    bits: *mut f64,
) -> LlictiStatus {
    guard(|| {
        if bits.is_null() {
            return Err(null("bits"));
        }
        let img = input_image(rgb, height, width)?;
        let est = llicti::estimate_bits(&img, &model(weights, flat_scales)).map_err(lift)?;
        *bits = est.total_bits();
        Ok(())
    })
}

/// # Safety
/// `bytes` must come from [`llicti_encode`].
#[no_mangle]
pub unsafe extern "C" fn llicti_bytes_data(bytes: *const LlictiBytes) -> *const u8 {
    bytes.as_ref().map_or(ptr::null(), |b| b.0.as_ptr())
}

/// # Safety
/// `bytes` must come from [`llicti_encode`].
#[no_mangle]
pub unsafe extern "C" fn llicti_bytes_len(bytes: *const LlictiBytes) -> usize {
    bytes.as_ref().map_or(0, |b| b.0.len())
}

/// # Safety
/// `bytes` must be null or come from [`llicti_encode`], and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn llicti_bytes_free(bytes: *mut LlictiBytes) {
    if !bytes.is_null() {
        drop(Box::from_raw(bytes));
    }
}

/// # Safety
/// `image` must come from [`llicti_decode`].
#[no_mangle]
pub unsafe extern "C" fn llicti_image_height(image: *const LlictiImage) -> usize {
    image.as_ref().map_or(0, |i| i.height)
}

/// # Safety
/// `image` must come from [`llicti_decode`].
#[no_mangle]
pub unsafe extern "C" fn llicti_image_width(image: *const LlictiImage) -> usize {
    image.as_ref().map_or(0, |i| i.width)
}

/// Interleaved RGB bytes, `height * width * 3` of them.
///
/// # Safety
/// `image` must come from [`llicti_decode`].
#[no_mangle]
pub unsafe extern "C" fn llicti_image_rgb(image: *const LlictiImage) -> *const u8 {
    image.as_ref().map_or(ptr::null(), |i| i.rgb.as_ptr())
}

/// # Safety
/// `image` must be null or come from [`llicti_decode`], and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn llicti_image_free(image: *mut LlictiImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}
