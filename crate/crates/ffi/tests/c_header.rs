//! Compiles a small C program against the generated header and the static
//! library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "clr_sim.h"

int main(void) {
    ClrTiming t;
    if (clr_timing_for(CLR_ROW_MODE_HIGH_PERFORMANCE, true, 64.0, &t) != CLR_STATUS_OK) return 1;
    if (t.t_rcd != 5.5) return 2;
    ClrConfig *cfg = clr_config_default();
    ClrAddressMap *map = NULL;
    if (clr_address_map_from_config(cfg, &map) != CLR_STATUS_OK) return 3;
    ClrCoord c;
    uint64_t back = 0;
    if (clr_address_map_decode(map, 123456 * 64, &c) != CLR_STATUS_OK) return 4;
    if (clr_address_map_encode(map, &c, &back) != CLR_STATUS_OK || back != 123456 * 64) return 5;
    if (clr_config_set(cfg, "clr", "hp_fraction", "200") != CLR_STATUS_CONFIG) return 6;
    char *msg = clr_last_error();
    if (!msg) return 7;
    clr_string_free(msg);
    clr_address_map_free(map);
    clr_config_free(cfg);
    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libclr_sim_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let st = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
