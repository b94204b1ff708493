//! C ABI over `cmm-core`.
//!
//! Every function returns a [`CmmStatus`] (or a plain value where nothing
//! can fail). On failure, [`cmm_last_error`] copies a message describing the
//! most recent error on the calling thread. Handles are opaque pointers that
//! must be released with their matching `*_free` function; passing NULL to a
//! `*_free` function is a no-op.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cmm_core::geometry::{oriented_iou, OrientedBox, Pose2D};
use cmm_core::lidar::intensity;
use cmm_core::mirror::MirrorRegistry;
use cmm_core::perception::f1_score;
use cmm_core::protocol::{
    self, ChannelConfig, DeterministicChannel, FrameDecoder, PerceptionFrame, SendOutcome,
    WireObject,
};
use cmm_core::scenario::{
    idm_acceleration, IdmParams, ObjectClass, Scenario, ScenarioConfig, WorldState,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmmStatus {
    Ok = 0,
    /// Nothing available (no complete frame, no due message).
    Empty = 1,
    NullPointer = 2,
    InvalidArgument = 3,
    /// A message failed to decode; the decoder skipped it.
    Protocol = 4,
    /// The output buffer is too small; the required size was reported.
    BufferTooSmall = 5,
    Config = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: CmmStatus, msg: impl Into<String>) -> CmmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> CmmStatus) -> CmmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(CmmStatus::Panic, "internal panic"),
    }
}

/// Copy the last error message (NUL-terminated, truncated to `cap`) and
/// return its full length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be NULL or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cmm_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Object class codes used across the ABI.
pub const CMM_CLASS_CAR: i32 = 0;
pub const CMM_CLASS_TRUCK: i32 = 1;
pub const CMM_CLASS_PEDESTRIAN: i32 = 2;

fn class_code(c: ObjectClass) -> i32 {
    match c {
        ObjectClass::Car => CMM_CLASS_CAR,
        ObjectClass::Truck => CMM_CLASS_TRUCK,
        ObjectClass::Pedestrian => CMM_CLASS_PEDESTRIAN,
    }
}

fn class_from_code(c: i32) -> Option<ObjectClass> {
    match c {
        CMM_CLASS_CAR => Some(ObjectClass::Car),
        CMM_CLASS_TRUCK => Some(ObjectClass::Truck),
        CMM_CLASS_PEDESTRIAN => Some(ObjectClass::Pedestrian),
        _ => None,
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CmmBox {
    pub cx: f64,
    pub cy: f64,
    pub length: f64,
    pub width: f64,
    pub yaw: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CmmObject {
    pub cls: i32,
    pub x: f64,
    pub y: f64,
    pub l: f64,
    pub w: f64,
    pub yaw: f64,
    pub conf: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CmmFrameHeader {
    pub frame_id: u64,
    pub sim_time_ms: u64,
    pub n_objects: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmmIdmParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub jam_distance: f64,
    pub exponent: f64,
    pub emergency_decel: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmmChannelConfig {
    pub innate_delay_ms: f64,
    pub acd_mean_ms: f64,
    pub acd_std_ms: f64,
    pub drop_threshold: f64,
    pub seed: u64,
    pub tick_ms: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CmmAgent {
    pub id: u32,
    pub cls: i32,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub accel: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

/// Returned intensity of a point at range `d` under attenuation `a`.
///
/// # Safety
/// `out` must be NULL or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cmm_intensity(d: f64, a: f64, out: *mut f64) -> CmmStatus {
    guard(|| {
        if out.is_null() {
            return fail(CmmStatus::NullPointer, "out is NULL");
        }
        match intensity(d, a) {
            Ok(v) => {
                *out = v;
                CmmStatus::Ok
            }
            Err(e) => fail(CmmStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Default IDM parameters.
#[no_mangle]
pub extern "C" fn cmm_idm_default_params() -> CmmIdmParams {
    let p = IdmParams::default();
    CmmIdmParams {
        desired_speed: p.desired_speed,
        time_headway: p.time_headway,
        max_accel: p.max_accel,
        comfort_decel: p.comfort_decel,
        jam_distance: p.jam_distance,
        exponent: p.exponent,
        emergency_decel: p.emergency_decel,
    }
}

/// IDM acceleration. `params` may be NULL for the defaults; pass an
/// infinite `gap` for free road.
///
/// # Safety
/// `params` must be NULL or valid for a read; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cmm_idm_acceleration(
    v: f64,
    v_lead: f64,
    gap: f64,
    params: *const CmmIdmParams,
    out: *mut f64,
) -> CmmStatus {
    guard(|| {
        if out.is_null() {
            return fail(CmmStatus::NullPointer, "out is NULL");
        }
        let p = if params.is_null() {
            IdmParams::default()
        } else {
            let c = &*params;
            IdmParams {
                desired_speed: c.desired_speed,
                time_headway: c.time_headway,
                max_accel: c.max_accel,
                comfort_decel: c.comfort_decel,
                jam_distance: c.jam_distance,
                exponent: c.exponent,
                emergency_decel: c.emergency_decel,
            }
        };
        if let Err(e) = p.validate() {
            return fail(CmmStatus::InvalidArgument, e.to_string());
        }
        if v.is_nan() || v_lead.is_nan() || gap.is_nan() {
            return fail(CmmStatus::InvalidArgument, "NaN input");
        }
        *out = idm_acceleration(v, v_lead, gap, &p).accel;
        CmmStatus::Ok
    })
}

/// Intersection-over-union of two oriented boxes.
///
/// # Safety
/// `a` and `b` must be valid for reads; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cmm_oriented_iou(
    a: *const CmmBox,
    b: *const CmmBox,
    out: *mut f64,
) -> CmmStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(CmmStatus::NullPointer, "NULL argument");
        }
        let conv = |c: &CmmBox| OrientedBox::new(c.cx, c.cy, c.length, c.width, c.yaw);
        match oriented_iou(&conv(&*a), &conv(&*b)) {
            Ok(v) => {
                *out = v;
                CmmStatus::Ok
            }
            Err(e) => fail(CmmStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Harmonic mean of precision and recall; 0 when both are 0.
#[no_mangle]
pub extern "C" fn cmm_f1_score(precision: f64, recall: f64) -> f64 {
    f1_score(precision, recall)
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Option<&'a [u8]> {
    if len == 0 {
        Some(&[])
    } else if data.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(data, len))
    }
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, CmmStatus> {
    if s.is_null() {
        return Err(fail(CmmStatus::NullPointer, "string is NULL"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(CmmStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn write_objects(objects: &[CmmObject], out: *mut CmmObject, cap: usize) -> CmmStatus {
    if objects.len() > cap {
        return fail(
            CmmStatus::BufferTooSmall,
            format!("{} objects do not fit in {cap}", objects.len()),
        );
    }
    if !objects.is_empty() {
        if out.is_null() {
            return fail(CmmStatus::NullPointer, "objects buffer is NULL");
        }
        ptr::copy_nonoverlapping(objects.as_ptr(), out, objects.len());
    }
    CmmStatus::Ok
}

fn wire_to_c(o: &WireObject) -> CmmObject {
    CmmObject {
        cls: class_code(o.cls),
        x: o.x as f64,
        y: o.y as f64,
        l: o.l as f64,
        w: o.w as f64,
        yaw: o.yaw as f64,
        conf: o.conf as f64,
    }
}

/// Encode a frame as a length-prefixed message into `out`. `written`
/// receives the message size, also when the buffer is too small.
///
/// # Safety
/// `sensor_id` must be a NUL-terminated string; `objects` must point to
/// `n_objects` items (or be NULL when 0); `out` to `cap` writable bytes;
/// `written` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cmm_encode_frame(
    frame_id: u64,
    sim_time_ms: u64,
    sensor_id: *const c_char,
    objects: *const CmmObject,
    n_objects: usize,
    out: *mut u8,
    cap: usize,
    written: *mut usize,
) -> CmmStatus {
    guard(|| {
        if written.is_null() || (n_objects > 0 && objects.is_null()) {
            return fail(CmmStatus::NullPointer, "NULL argument");
        }
        let sensor = match c_str(sensor_id) {
            Ok(s) => s,
            Err(st) => return st,
        };
        let src = if n_objects == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(objects, n_objects)
        };
        let mut wire = Vec::with_capacity(src.len());
        for (k, o) in src.iter().enumerate() {
            let Some(cls) = class_from_code(o.cls) else {
                return fail(
                    CmmStatus::InvalidArgument,
                    format!("object {k}: unknown class {}", o.cls),
                );
            };
            wire.push(WireObject {
                cls,
                x: o.x as f32,
                y: o.y as f32,
                l: o.l as f32,
                w: o.w as f32,
                yaw: o.yaw as f32,
                conf: o.conf as f32,
            });
        }
        let frame = PerceptionFrame {
            frame_id,
            sim_time_ms,
            sensor_id: sensor.to_owned(),
            objects: wire,
        };
        if let Err(e) = frame.validate() {
            return fail(CmmStatus::InvalidArgument, e.to_string());
        }
        let msg = protocol::encode(&frame);
        *written = msg.len();
        if msg.len() > cap {
            return fail(
                CmmStatus::BufferTooSmall,
                format!("message needs {} bytes", msg.len()),
            );
        }
        if out.is_null() {
            return fail(CmmStatus::NullPointer, "out is NULL");
        }
        ptr::copy_nonoverlapping(msg.as_ptr(), out, msg.len());
        CmmStatus::Ok
    })
}

/// Incremental stream decoder.
pub struct CmmDecoder {
    inner: FrameDecoder,
    pending: Option<PerceptionFrame>,
}

#[no_mangle]
pub extern "C" fn cmm_decoder_new() -> *mut CmmDecoder {
    Box::into_raw(Box::new(CmmDecoder {
        inner: FrameDecoder::new(),
        pending: None,
    }))
}

/// # Safety
/// `dec` must be NULL or a pointer from [`cmm_decoder_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmm_decoder_free(dec: *mut CmmDecoder) {
    if !dec.is_null() {
        drop(Box::from_raw(dec));
    }
}

/// Append received bytes.
///
/// # Safety
/// `dec` must be a live decoder; `data` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn cmm_decoder_push(
    dec: *mut CmmDecoder,
    data: *const u8,
    len: usize,
) -> CmmStatus {
    guard(|| {
        let (Some(dec), Some(data)) = (dec.as_mut(), bytes(data, len)) else {
            return fail(CmmStatus::NullPointer, "NULL argument");
        };
        dec.inner.push(data);
        CmmStatus::Ok
    })
}

/// Take the next complete frame. Returns `Empty` when none is buffered,
/// `Protocol` for a skipped malformed message, and `BufferTooSmall` (with
/// `header->n_objects` set) when `cap` is too small, in which case the frame
/// stays queued for the next call.
///
/// # Safety
/// `dec` must be a live decoder; `header` valid for a write; `objects` must
/// point to `cap` writable items (or be NULL when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn cmm_decoder_next(
    dec: *mut CmmDecoder,
    header: *mut CmmFrameHeader,
    objects: *mut CmmObject,
    cap: usize,
) -> CmmStatus {
    guard(|| {
        let Some(dec) = dec.as_mut() else {
            return fail(CmmStatus::NullPointer, "decoder is NULL");
        };
        if header.is_null() {
            return fail(CmmStatus::NullPointer, "header is NULL");
        }
        let frame = match dec.pending.take() {
            Some(f) => f,
            None => match dec.inner.next_frame() {
                None => return CmmStatus::Empty,
                Some(Err(e)) => return fail(CmmStatus::Protocol, e.to_string()),
                Some(Ok(f)) => f,
            },
        };
        *header = CmmFrameHeader {
            frame_id: frame.frame_id,
            sim_time_ms: frame.sim_time_ms,
            n_objects: frame.objects.len(),
        };
        let objs: Vec<CmmObject> = frame.objects.iter().map(wire_to_c).collect();
        let st = write_objects(&objs, objects, cap);
        if st == CmmStatus::BufferTooSmall {
            dec.pending = Some(frame);
        }
        st
    })
}

/// Messages skipped as malformed so far.
///
/// # Safety
/// `dec` must be NULL or a live decoder.
#[no_mangle]
pub unsafe extern "C" fn cmm_decoder_errors(dec: *const CmmDecoder) -> u64 {
    dec.as_ref().map_or(0, |d| d.inner.errors())
}

/// Seeded delay/drop channel carrying byte messages on a simulation clock.
pub struct CmmChannel {
    inner: DeterministicChannel<Vec<u8>>,
    due: VecDeque<Vec<u8>>,
}

/// # Safety
/// `cfg` must be NULL (defaults) or valid for a read.
#[no_mangle]
pub unsafe extern "C" fn cmm_channel_new(cfg: *const CmmChannelConfig) -> *mut CmmChannel {
    let cfg = match cfg.as_ref() {
        None => ChannelConfig::default(),
        Some(c) => ChannelConfig {
            innate_delay_ms: c.innate_delay_ms,
            acd_mean_ms: c.acd_mean_ms,
            acd_std_ms: c.acd_std_ms,
            drop_threshold: c.drop_threshold,
            seed: c.seed,
            tick_ms: c.tick_ms,
        },
    };
    if let Err(e) = cfg.validate() {
        fail(CmmStatus::Config, e.to_string());
        return ptr::null_mut();
    }
    Box::into_raw(Box::new(CmmChannel {
        inner: DeterministicChannel::new(cfg),
        due: VecDeque::new(),
    }))
}

/// # Safety
/// `ch` must be NULL or a pointer from [`cmm_channel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmm_channel_free(ch: *mut CmmChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Submit a message at `now_ms`; `dropped` (may be NULL) is set to 1 when
/// the channel drops it.
///
/// # Safety
/// `ch` must be a live channel; `data` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn cmm_channel_send(
    ch: *mut CmmChannel,
    data: *const u8,
    len: usize,
    frame_id: u64,
    now_ms: u64,
    dropped: *mut i32,
) -> CmmStatus {
    guard(|| {
        let (Some(ch), Some(data)) = (ch.as_mut(), bytes(data, len)) else {
            return fail(CmmStatus::NullPointer, "NULL argument");
        };
        let outcome = ch.inner.send(data.to_vec(), frame_id, now_ms);
        if !dropped.is_null() {
            *dropped = i32::from(outcome == SendOutcome::Dropped);
        }
        CmmStatus::Ok
    })
}

/// Copy out the next message due by `now_ms`. Returns `Empty` when none is
/// due and `BufferTooSmall` (with `len` set) when `cap` is too small.
///
/// # Safety
/// `ch` must be a live channel; `out` must point to `cap` writable bytes;
/// `len` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cmm_channel_poll(
    ch: *mut CmmChannel,
    now_ms: u64,
    out: *mut u8,
    cap: usize,
    len: *mut usize,
) -> CmmStatus {
    guard(|| {
        let Some(ch) = ch.as_mut() else {
            return fail(CmmStatus::NullPointer, "channel is NULL");
        };
        if len.is_null() {
            return fail(CmmStatus::NullPointer, "len is NULL");
        }
        let due = ch.inner.poll(now_ms);
        ch.due.extend(due);
        let Some(msg) = ch.due.front() else {
            return CmmStatus::Empty;
        };
        *len = msg.len();
        if msg.len() > cap {
            return fail(
                CmmStatus::BufferTooSmall,
                format!("message needs {} bytes", msg.len()),
            );
        }
        if out.is_null() && !msg.is_empty() {
            return fail(CmmStatus::NullPointer, "out is NULL");
        }
        let msg = ch.due.pop_front().expect("front exists");
        ptr::copy_nonoverlapping(msg.as_ptr(), out, msg.len());
        CmmStatus::Ok
    })
}

/// Counters since creation: sent, dropped and delivered messages.
///
/// # Safety
/// `ch` must be a live channel; the out pointers may each be NULL.
#[no_mangle]
pub unsafe extern "C" fn cmm_channel_stats(
    ch: *const CmmChannel,
    sent: *mut u64,
    dropped: *mut u64,
    delivered: *mut u64,
) -> CmmStatus {
    let Some(ch) = ch.as_ref() else {
        return fail(CmmStatus::NullPointer, "channel is NULL");
    };
    let s = ch.inner.stats();
    for (p, v) in [
        (sent, s.sent),
        (dropped, s.dropped),
        (delivered, s.delivered),
    ] {
        if !p.is_null() {
            *p = v;
        }
    }
    CmmStatus::Ok
}

/// Latest-frame-wins registry of world-frame objects.
pub struct CmmMirror {
    inner: MirrorRegistry,
}

/// `x`, `y`, `yaw` place the sensor frame in the world.
///
/// # Safety
/// `sensor_id` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cmm_mirror_new(
    sensor_id: *const c_char,
    x: f64,
    y: f64,
    yaw: f64,
) -> *mut CmmMirror {
    let Ok(id) = c_str(sensor_id) else {
        return ptr::null_mut();
    };
    Box::into_raw(Box::new(CmmMirror {
        inner: MirrorRegistry::new(id, Pose2D::new(x, y, yaw)),
    }))
}

/// # Safety
/// `m` must be NULL or a pointer from [`cmm_mirror_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmm_mirror_free(m: *mut CmmMirror) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Apply one length-prefixed message. `accepted` (may be NULL) is set to 0
/// when the frame is older than the current contents.
///
/// # Safety
/// `m` must be a live mirror; `data` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn cmm_mirror_apply(
    m: *mut CmmMirror,
    data: *const u8,
    len: usize,
    now_ms: u64,
    accepted: *mut i32,
) -> CmmStatus {
    guard(|| {
        let (Some(m), Some(data)) = (m.as_mut(), bytes(data, len)) else {
            return fail(CmmStatus::NullPointer, "NULL argument");
        };
        match protocol::decode(data) {
            Ok((frame, _)) => {
                let ok = m.inner.apply_frame(&frame, now_ms);
                if !accepted.is_null() {
                    *accepted = i32::from(ok);
                }
                CmmStatus::Ok
            }
            Err(protocol::DecodeError::Incomplete { needed }) => fail(
                CmmStatus::Protocol,
                format!("message truncated, {needed} more bytes needed"),
            ),
            Err(protocol::DecodeError::Protocol(e)) => fail(CmmStatus::Protocol, e.to_string()),
        }
    })
}

/// Copy the current objects. `staleness_ms` receives -1 if no frame was
/// ever accepted. `n` receives the object count, also when `cap` is too
/// small.
///
/// # Safety
/// `m` must be a live mirror; `objects` must point to `cap` writable items;
/// `n` and `staleness_ms` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmm_mirror_query(
    m: *const CmmMirror,
    now_ms: u64,
    objects: *mut CmmObject,
    cap: usize,
    n: *mut usize,
    staleness_ms: *mut i64,
) -> CmmStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(CmmStatus::NullPointer, "mirror is NULL");
        };
        if n.is_null() || staleness_ms.is_null() {
            return fail(CmmStatus::NullPointer, "NULL argument");
        }
        let snap = m.inner.query_objects(now_ms, None);
        *n = snap.objects.len();
        *staleness_ms = snap.staleness_ms.map_or(-1, |s| s as i64);
        let objs: Vec<CmmObject> = snap
            .objects
            .iter()
            .map(|o| CmmObject {
                cls: class_code(o.class),
                x: o.x,
                y: o.y,
                l: o.l,
                w: o.w,
                yaw: o.yaw,
                conf: o.conf,
            })
            .collect();
        write_objects(&objs, objects, cap)
    })
}

/// A scenario and its current world state.
pub struct CmmScenario {
    scenario: Scenario,
    state: WorldState,
}

/// Build a scenario from TOML text. Returns NULL on error (see
/// [`cmm_last_error`]).
///
/// # Safety
/// `toml_text` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cmm_scenario_from_toml(toml_text: *const c_char) -> *mut CmmScenario {
    let mut result = ptr::null_mut();
    guard(|| {
        let text = match c_str(toml_text) {
            Ok(t) => t,
            Err(st) => return st,
        };
        let built = ScenarioConfig::from_toml_str(text, std::path::Path::new("<ffi>"))
            .and_then(cmm_core::scenario::init_scenario);
        match built {
            Ok((scenario, state)) => {
                result = Box::into_raw(Box::new(CmmScenario { scenario, state }));
                CmmStatus::Ok
            }
            Err(e) => fail(CmmStatus::Config, e.to_string()),
        }
    });
    result
}

/// # Safety
/// `s` must be NULL or a pointer from [`cmm_scenario_from_toml`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn cmm_scenario_free(s: *mut CmmScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Advance one 100 ms tick with no external commands.
///
/// # Safety
/// `s` must be a live scenario.
#[no_mangle]
pub unsafe extern "C" fn cmm_scenario_step(s: *mut CmmScenario) -> CmmStatus {
    guard(|| {
        let Some(s) = s.as_mut() else {
            return fail(CmmStatus::NullPointer, "scenario is NULL");
        };
        s.state = s.scenario.step_world(&s.state);
        CmmStatus::Ok
    })
}

/// Current tick, or 0 for NULL.
///
/// # Safety
/// `s` must be NULL or a live scenario.
#[no_mangle]
pub unsafe extern "C" fn cmm_scenario_tick(s: *const CmmScenario) -> u64 {
    s.as_ref().map_or(0, |s| s.state.tick)
}

/// Copy the agents, sorted by id. `n` receives the count, also when `cap`
/// is too small.
///
/// # Safety
/// `s` must be a live scenario; `out` must point to `cap` writable items;
/// `n` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cmm_scenario_agents(
    s: *const CmmScenario,
    out: *mut CmmAgent,
    cap: usize,
    n: *mut usize,
) -> CmmStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(CmmStatus::NullPointer, "scenario is NULL");
        };
        if n.is_null() {
            return fail(CmmStatus::NullPointer, "n is NULL");
        }
        let agents = &s.state.agents;
        *n = agents.len();
        if agents.len() > cap {
            return fail(
                CmmStatus::BufferTooSmall,
                format!("{} agents do not fit in {cap}", agents.len()),
            );
        }
        for (k, a) in agents.iter().enumerate() {
            *out.add(k) = CmmAgent {
                id: a.id,
                cls: class_code(a.class),
                x: a.pose.x,
                y: a.pose.y,
                yaw: a.pose.yaw,
                speed: a.speed,
                accel: a.accel,
                length: a.dims.length,
                width: a.dims.width,
                height: a.dims.height,
            };
        }
        CmmStatus::Ok
    })
}
