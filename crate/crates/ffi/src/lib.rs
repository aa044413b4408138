//! C ABI over the idvault engine.
//!
//! Every function returns an [`IdvaultStatus`]; on anything but `IDVAULT_STATUS_OK` the
//! thread-local message from [`idvault_last_error_message`] says what went wrong.
//! Strings handed out by the library are NUL-terminated UTF-8 and must be released with
//! [`idvault_string_free`]. A service handle may be shared between threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use idvault::api::{ErrorCode, ExecutionResult, GraphQLError};
use idvault::clock::SystemClock;
use idvault::schema::ContentTypeDefinition;
use idvault::service::{Service, ServiceOptions};
use idvault::Values;
use serde_json::Value;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdvaultStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    OpenFailed = 4,
    SchemaRejected = 5,
    ParseFailed = 6,
    Panic = 99,
}

/// Opaque service handle.
pub struct IdvaultService {
    inner: Service,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(IdvaultStatus, String);

impl Failure {
    fn new(status: IdvaultStatus, message: impl Into<String>) -> Self {
        Failure(status, message.into())
    }
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IdvaultStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IdvaultStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(panic) => {
            let what = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {what}"));
            IdvaultStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` is null or a NUL-terminated string valid for the duration of the call.
unsafe fn opt_str<'a>(ptr: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if ptr.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(ptr).to_str().map(Some).map_err(|_| {
        Failure::new(
            IdvaultStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn req_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    opt_str(ptr, name)?
        .ok_or_else(|| Failure::new(IdvaultStatus::NullArgument, format!("{name} is null")))
}

unsafe fn service<'a>(handle: *const IdvaultService) -> Result<&'a Service, Failure> {
    handle
        .as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| Failure::new(IdvaultStatus::NullArgument, "service handle is null"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            IdvaultStatus::NullArgument,
            "output pointer is null",
        ));
    }
    out.write(value);
    Ok(())
}

fn into_c(text: String) -> *mut c_char {
    CString::new(text.replace('\0', "\\u0000"))
        .unwrap_or_default()
        .into_raw()
}

unsafe fn open_with(options: ServiceOptions, out: *mut *mut IdvaultService) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            IdvaultStatus::NullArgument,
            "output pointer is null",
        ));
    }
    out.write(ptr::null_mut());
    let inner = Service::open(options, Arc::new(SystemClock))
        .map_err(|e| Failure::new(IdvaultStatus::OpenFailed, e.to_string()))?;
    out.write(Box::into_raw(Box::new(IdvaultService { inner })));
    Ok(())
}

/// Opens (or creates) a persistent service rooted at `data_dir`, with the idcard type registered.
///
/// # Safety
/// String arguments are NUL-terminated; `out` points to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn idvault_service_open(
    data_dir: *const c_char,
    jwt_secret: *const c_char,
    out: *mut *mut IdvaultService,
) -> IdvaultStatus {
    guard(|| {
        let dir = req_str(data_dir, "data_dir")?;
        let mut options = ServiceOptions::new(req_str(jwt_secret, "jwt_secret")?);
        options.data_dir = Some(PathBuf::from(dir));
        open_with(options, out)
    })
}

/// Opens a service that keeps everything in memory.
///
/// # Safety
/// As [`idvault_service_open`].
#[no_mangle]
pub unsafe extern "C" fn idvault_service_open_in_memory(
    jwt_secret: *const c_char,
    out: *mut *mut IdvaultService,
) -> IdvaultStatus {
    guard(|| open_with(ServiceOptions::new(req_str(jwt_secret, "jwt_secret")?), out))
}

/// Closes a handle. Null is ignored.
///
/// # Safety
/// `handle` came from one of the open functions and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn idvault_service_free(handle: *mut IdvaultService) {
    if !handle.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(handle))));
    }
}

/// Runs one GraphQL request and writes the response document (`{"data", "errors"}`) to `out_json`.
/// GraphQL-level failures, including a rejected `bearer_token`, are reported inside the response
/// with status OK, as the HTTP endpoint does. `variables_json`, `operation_name` and
/// `bearer_token` may be null.
///
/// # Safety
/// String arguments are null or NUL-terminated; `out_json` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn idvault_execute(
    handle: *const IdvaultService,
    query: *const c_char,
    variables_json: *const c_char,
    operation_name: *const c_char,
    bearer_token: *const c_char,
    out_json: *mut *mut c_char,
) -> IdvaultStatus {
    guard(|| {
        let svc = service(handle)?;
        let query = req_str(query, "query")?;
        let variables = match opt_str(variables_json, "variables_json")? {
            None => Values::new(),
            Some(text) => match serde_json::from_str::<Value>(text) {
                Ok(Value::Object(map)) => map,
                Ok(Value::Null) => Values::new(),
                Ok(_) => {
                    return Err(Failure::new(
                        IdvaultStatus::InvalidJson,
                        "variables must be a JSON object",
                    ))
                }
                Err(e) => {
                    return Err(Failure::new(
                        IdvaultStatus::InvalidJson,
                        format!("variables: {e}"),
                    ))
                }
            },
        };
        let operation_name = opt_str(operation_name, "operation_name")?;
        let result = match opt_str(bearer_token, "bearer_token")? {
            None => svc.execute(query, &variables, operation_name, None),
            Some(token) => match svc.authenticate(token) {
                Ok(principal) => svc.execute(query, &variables, operation_name, Some(principal)),
                Err(e) => ExecutionResult::error(GraphQLError::new(
                    ErrorCode::Unauthenticated,
                    e.to_string(),
                )),
            },
        };
        write_out(out_json, into_c(result.to_json().to_string()))
    })
}

/// Registers a content type from its JSON definition; the API is regenerated immediately.
///
/// # Safety
/// `definition_json` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn idvault_register_content_type(
    handle: *const IdvaultService,
    definition_json: *const c_char,
) -> IdvaultStatus {
    guard(|| {
        let svc = service(handle)?;
        let def: ContentTypeDefinition =
            serde_json::from_str(req_str(definition_json, "definition_json")?)
                .map_err(|e| Failure::new(IdvaultStatus::InvalidJson, e.to_string()))?;
        svc.register_content_type(def)
            .map_err(|e| Failure::new(IdvaultStatus::SchemaRejected, e.to_string()))?;
        Ok(())
    })
}

/// Writes the current GraphQL SDL to `out_sdl`.
///
/// # Safety
/// `out_sdl` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn idvault_schema_sdl(
    handle: *const IdvaultService,
    out_sdl: *mut *mut c_char,
) -> IdvaultStatus {
    guard(|| {
        let sdl = service(handle)?.sdl();
        write_out(out_sdl, into_c(sdl))
    })
}

/// Parses a GraphQL document and writes its canonical printed form. On a syntax error the
/// status is `IDVAULT_STATUS_PARSE_FAILED` and `line`/`column` (when non-null) receive the position.
///
/// # Safety
/// `query` is NUL-terminated; the out pointers are writable or null (`out_text` must not be null).
#[no_mangle]
pub unsafe extern "C" fn idvault_query_print(
    query: *const c_char,
    out_text: *mut *mut c_char,
    line: *mut u32,
    column: *mut u32,
) -> IdvaultStatus {
    guard(|| {
        let text = req_str(query, "query")?;
        if out_text.is_null() {
            return Err(Failure::new(
                IdvaultStatus::NullArgument,
                "output pointer is null",
            ));
        }
        out_text.write(ptr::null_mut());
        match idvault::query::parse(text) {
            Ok(doc) => write_out(out_text, into_c(idvault::query::print(&doc))),
            Err(e) => {
                let pos = e.pos();
                if !line.is_null() {
                    line.write(pos.line as u32);
                }
                if !column.is_null() {
                    column.write(pos.column as u32);
                }
                Err(Failure::new(IdvaultStatus::ParseFailed, e.to_string()))
            }
        }
    })
}

/// Message for the last failed call on this thread, or null. Valid until the next call on
/// this thread; do not free.
#[no_mangle]
pub extern "C" fn idvault_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` came from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn idvault_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version; static, do not free.
#[no_mangle]
pub extern "C" fn idvault_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
