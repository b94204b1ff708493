use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cmm_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { cmm_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn intensity_and_errors() {
    let mut out = 0.0;
    assert_eq!(
        unsafe { cmm_intensity(100.0, 0.004, &mut out) },
        CmmStatus::Ok
    );
    assert!((out - (-0.4f64).exp()).abs() < 1e-15);
    assert_eq!(
        unsafe { cmm_intensity(-1.0, 0.004, &mut out) },
        CmmStatus::InvalidArgument
    );
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { cmm_intensity(1.0, 0.0, ptr::null_mut()) },
        CmmStatus::NullPointer
    );
}

#[test]
fn idm_free_road_and_equilibrium() {
    let p = cmm_idm_default_params();
    let mut a = 0.0;
    assert_eq!(
        unsafe { cmm_idm_acceleration(0.0, 0.0, f64::INFINITY, &p, &mut a) },
        CmmStatus::Ok
    );
    assert_eq!(a, p.max_accel);
    assert_eq!(
        unsafe { cmm_idm_acceleration(0.0, 0.0, p.jam_distance, ptr::null(), &mut a) },
        CmmStatus::Ok
    );
    assert!(a.abs() < 1e-12);
    let bad = CmmIdmParams {
        time_headway: -1.0,
        ..p
    };
    assert_eq!(
        unsafe { cmm_idm_acceleration(1.0, 1.0, 10.0, &bad, &mut a) },
        CmmStatus::InvalidArgument
    );
}

#[test]
fn iou_and_f1() {
    let a = CmmBox {
        cx: 0.0,
        cy: 0.0,
        length: 2.0,
        width: 2.0,
        yaw: 0.0,
    };
    let b = CmmBox { cx: 1.0, ..a };
    let mut v = 0.0;
    assert_eq!(unsafe { cmm_oriented_iou(&a, &b, &mut v) }, CmmStatus::Ok);
    assert!((v - 1.0 / 3.0).abs() < 1e-12);
    let degenerate = CmmBox { length: 0.0, ..a };
    assert_eq!(
        unsafe { cmm_oriented_iou(&a, &degenerate, &mut v) },
        CmmStatus::InvalidArgument
    );
    assert!((cmm_f1_score(0.8485, 0.9593) - 0.9005).abs() < 1e-4);
    assert_eq!(cmm_f1_score(0.0, 0.0), 0.0);
}

fn sample_objects() -> Vec<CmmObject> {
    vec![
        CmmObject {
            cls: CMM_CLASS_CAR,
            x: 12.5,
            y: -3.25,
            l: 4.5,
            w: 1.8,
            yaw: 0.0,
            conf: 0.5,
        },
        CmmObject {
            cls: CMM_CLASS_PEDESTRIAN,
            x: 3.0,
            y: 4.0,
            l: 0.5,
            w: 0.5,
            yaw: 1.5,
            conf: 1.0,
        },
    ]
}

fn encode(frame_id: u64, objs: &[CmmObject]) -> Vec<u8> {
    let id = CString::new("rsu-0").unwrap();
    let mut written = 0;
    let st = unsafe {
        cmm_encode_frame(
            frame_id,
            frame_id * 100,
            id.as_ptr(),
            objs.as_ptr(),
            objs.len(),
            ptr::null_mut(),
            0,
            &mut written,
        )
    };
    assert_eq!(st, CmmStatus::BufferTooSmall);
    let mut buf = vec![0u8; written];
    let st = unsafe {
        cmm_encode_frame(
            frame_id,
            frame_id * 100,
            id.as_ptr(),
            objs.as_ptr(),
            objs.len(),
            buf.as_mut_ptr(),
            buf.len(),
            &mut written,
        )
    };
    assert_eq!(st, CmmStatus::Ok);
    buf
}

#[test]
fn encode_decode_through_handles() {
    let objs = sample_objects();
    let mut bytes = encode(9, &objs);
    bytes.extend_from_slice(&[0, 0, 0, 5]);
    bytes.extend_from_slice(b"nope!");
    let dec = cmm_decoder_new();
    unsafe {
        assert_eq!(
            cmm_decoder_push(dec, bytes.as_ptr(), bytes.len()),
            CmmStatus::Ok
        );
        let mut header = CmmFrameHeader::default();
        let mut out = [CmmObject::default(); 1];
        assert_eq!(
            cmm_decoder_next(dec, &mut header, out.as_mut_ptr(), 1),
            CmmStatus::BufferTooSmall
        );
        assert_eq!(header.n_objects, 2);
        let mut out = [CmmObject::default(); 4];
        assert_eq!(
            cmm_decoder_next(dec, &mut header, out.as_mut_ptr(), 4),
            CmmStatus::Ok
        );
        assert_eq!((header.frame_id, header.sim_time_ms), (9, 900));
        for (got, want) in out[..2].iter().zip(&objs) {
            assert_eq!(got.cls, want.cls);
            for (g, w) in [
                (got.x, want.x),
                (got.y, want.y),
                (got.l, want.l),
                (got.w, want.w),
                (got.yaw, want.yaw),
            ] {
                assert_eq!(g, w as f32 as f64);
            }
        }
        assert_eq!(
            cmm_decoder_next(dec, &mut header, out.as_mut_ptr(), 4),
            CmmStatus::Protocol
        );
        assert_eq!(
            cmm_decoder_next(dec, &mut header, out.as_mut_ptr(), 4),
            CmmStatus::Empty
        );
        assert_eq!(cmm_decoder_errors(dec), 1);
        cmm_decoder_free(dec);
        cmm_decoder_free(ptr::null_mut());
    }
}

#[test]
fn unknown_class_is_rejected() {
    let id = CString::new("s").unwrap();
    let objs = [CmmObject {
        cls: 9,
        ..sample_objects()[0]
    }];
    let mut buf = vec![0u8; 512];
    let mut written = 0;
    let st = unsafe {
        cmm_encode_frame(
            1,
            0,
            id.as_ptr(),
            objs.as_ptr(),
            1,
            buf.as_mut_ptr(),
            buf.len(),
            &mut written,
        )
    };
    assert_eq!(st, CmmStatus::InvalidArgument);
}

#[test]
fn channel_delays_and_mirror_transforms() {
    let cfg = CmmChannelConfig {
        innate_delay_ms: 200.0,
        acd_mean_ms: 0.0,
        acd_std_ms: 0.0,
        drop_threshold: 0.0,
        seed: 1,
        tick_ms: 100,
    };
    let ch = unsafe { cmm_channel_new(&cfg) };
    assert!(!ch.is_null());
    let msg = encode(1, &sample_objects());
    let mirror = unsafe { cmm_mirror_new(CString::new("rsu-0").unwrap().as_ptr(), 10.0, 5.0, 0.0) };
    unsafe {
        let mut dropped = -1;
        assert_eq!(
            cmm_channel_send(ch, msg.as_ptr(), msg.len(), 1, 0, &mut dropped),
            CmmStatus::Ok
        );
        assert_eq!(dropped, 0);
        let mut buf = vec![0u8; 1024];
        let mut len = 0;
        assert_eq!(
            cmm_channel_poll(ch, 100, buf.as_mut_ptr(), buf.len(), &mut len),
            CmmStatus::Empty
        );
        assert_eq!(
            cmm_channel_poll(ch, 200, buf.as_mut_ptr(), buf.len(), &mut len),
            CmmStatus::Ok
        );
        assert_eq!(&buf[..len], &msg[..]);

        let mut objs = [CmmObject::default(); 4];
        let (mut n, mut stale) = (0usize, 0i64);
        assert_eq!(
            cmm_mirror_query(mirror, 0, objs.as_mut_ptr(), 4, &mut n, &mut stale),
            CmmStatus::Ok
        );
        assert_eq!((n, stale), (0, -1));
        let mut accepted = 0;
        assert_eq!(
            cmm_mirror_apply(mirror, buf.as_ptr(), len, 200, &mut accepted),
            CmmStatus::Ok
        );
        assert_eq!(accepted, 1);
        assert_eq!(
            cmm_mirror_apply(mirror, buf.as_ptr(), len, 300, &mut accepted),
            CmmStatus::Ok
        );
        assert_eq!(accepted, 0);
        assert_eq!(
            cmm_mirror_query(mirror, 300, objs.as_mut_ptr(), 4, &mut n, &mut stale),
            CmmStatus::Ok
        );
        assert_eq!((n, stale), (2, 100));
        assert_eq!((objs[0].x, objs[0].y), (22.5, 1.75));
        assert_eq!(
            cmm_mirror_apply(mirror, buf.as_ptr(), 3, 300, &mut accepted),
            CmmStatus::Protocol
        );

        let (mut sent, mut drop, mut delivered) = (0, 0, 0);
        assert_eq!(
            cmm_channel_stats(ch, &mut sent, &mut drop, &mut delivered),
            CmmStatus::Ok
        );
        assert_eq!((sent, drop, delivered), (1, 0, 1));
        cmm_channel_free(ch);
        cmm_mirror_free(mirror);
    }
    let bad = CmmChannelConfig {
        drop_threshold: 2.0,
        ..cfg
    };
    assert!(unsafe { cmm_channel_new(&bad) }.is_null());
    assert!(last_error().contains("drop_threshold"));
}

#[test]
fn scenario_handle_steps() {
    let text = CString::new(
        "[demand]\nvehicles = 0\npedestrians = 0\n[[agents]]\nid = 4\nclass = \"Car\"\nlane = \"eastbound\"\ns = 10.0\nspeed = 5.0\n",
    )
    .unwrap();
    let s = unsafe { cmm_scenario_from_toml(text.as_ptr()) };
    assert!(!s.is_null());
    unsafe {
        let mut agents = [CmmAgent::default(); 2];
        let mut n = 0;
        assert_eq!(
            cmm_scenario_agents(s, agents.as_mut_ptr(), 2, &mut n),
            CmmStatus::Ok
        );
        assert_eq!((n, agents[0].id, agents[0].cls), (1, 4, CMM_CLASS_CAR));
        let x0 = agents[0].x;
        assert_eq!(cmm_scenario_step(s), CmmStatus::Ok);
        assert_eq!(cmm_scenario_tick(s), 1);
        cmm_scenario_agents(s, agents.as_mut_ptr(), 2, &mut n);
        assert!((agents[0].x - x0 - 0.5).abs() < 1e-12);
        cmm_scenario_free(s);
    }
    let bad = CString::new("seed = \"x\"").unwrap();
    assert!(unsafe { cmm_scenario_from_toml(bad.as_ptr()) }.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/cmm.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let mut count = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(
                header.contains(&format!("{name}(")),
                "{name} missing from cmm.h"
            );
            count += 1;
        }
    }
    assert!(count >= 20, "{count}");
}

// Compile and run a small C program against the header and static library.
#[test]
fn c_program_links_against_the_header() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libcmm_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            lib.display()
        );
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include "cmm.h"
int main(void) {
    double v = 0.0;
    if (cmm_intensity(100.0, 0.004, &v) != CMM_STATUS_OK) return 1;
    if (fabs(v - exp(-0.4)) > 1e-12) return 2;
    CmmDecoder *d = cmm_decoder_new();
    unsigned char junk[8] = {0, 0, 0, 4, 'j', 'u', 'n', 'k'};
    cmm_decoder_push(d, junk, sizeof junk);
    CmmFrameHeader h;
    if (cmm_decoder_next(d, &h, NULL, 0) != CMM_STATUS_PROTOCOL) return 3;
    char msg[128];
    if (cmm_last_error(msg, sizeof msg) == 0) return 4;
    cmm_decoder_free(d);
    puts("ok");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{:?}", out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
