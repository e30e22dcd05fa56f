//! The full CLI chain on one synthetic scene.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

fn ok(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_fieldgrid"))
        .current_dir(dir)
        .env("FIELDGRID_LOG", "error")
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Every subcommand, chained on one synthetic scene.
pub fn run_pipeline(dir: &Path, seed: &str) {
    let s = &["--seed", seed];
    let run = |args: &[&str]| {
        let all: Vec<&str> = s.iter().chain(args).copied().collect();
        ok(dir, &all);
    };
    run(&["synth", "--out", "scene", "--size", "96", "--fields", "16", "--dates", "3"]);
    run(&[
        "labels", "--polygons", "scene/reference.geojson", "--like", "scene/image.bin", "--out",
        "labels_poly.bin", "--fields-out", "fields_poly.bin",
    ]);
    run(&["labels", "--fields", "scene/reference.bin", "--out", "labels_raster.bin"]);
    run(&["scharr", "--image", "scene/image.bin", "--out", "edges.bin"]);
    run(&["scharr", "--image", "scene/image.bin", "--out", "edges_per_band.bin", "--per-band"]);
    fs::write(
        dir.join("manifest.json"),
        r#"{"width": 96, "height": 96, "windows": [
            {"row": 0, "col": 0, "path": "scene/date_0.bin"},
            {"row": 0, "col": 0, "path": "scene/date_1.bin"}]}"#,
    )
    .unwrap();
    run(&["mosaic", "--manifest", "manifest.json", "--out", "mosaic.bin"]);
    run(&["consensus", "scene/date_0.bin", "scene/date_1.bin", "scene/date_2.bin", "--out", "consensus.bin"]);
    run(&[
        "optimize", "--masks", "consensus.bin", "--reference", "scene/reference.bin", "--method", "watershed",
        "--budget", "12", "--out", "opt.json", "--candidates-csv", "cands.csv",
    ]);
    run(&[
        "extract", "--masks", "consensus.bin", "--thresholds", "0.5,0.4,0.3", "--method", "cutoff", "--out",
        "cutoff.bin", "--polygons-out", "cutoff.geojson",
    ]);
    run(&[
        "extract", "--masks", "consensus.bin", "--thresholds", "optimize", "--reference", "scene/reference.bin",
        "--method", "watershed", "--budget", "12", "--out", "ws.bin",
    ]);
    run(&["evaluate", "--labels", "cutoff.bin", "--reference", "scene/reference.bin", "--out", "ev_cut.json", "--csv", "ev_cut.csv"]);
    run(&["evaluate", "--labels", "ws.bin", "--reference", "scene/reference.bin", "--out", "ev_ws.json"]);
    run(&[
        "report", "ev_cut.json", "ev_ws.json", "--csv", "table.csv", "--wilcoxon-out", "wilcoxon.json",
        "--metric", "best_overlap",
    ]);
}

pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

