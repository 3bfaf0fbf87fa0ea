#![allow(dead_code)]

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use detkit::io::{write_mask, write_rgb};
use detkit_testkit::{synthetic_backgrounds, synthetic_sources, table_manifest};

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_detkit")).args(args).output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Manifest with the full class/source table, written as CSV.
pub fn write_manifest(dir: &Path) -> PathBuf {
    let path = dir.join("manifest.csv");
    let f = std::fs::File::create(&path).unwrap();
    table_manifest().write_csv(std::io::BufWriter::new(f)).unwrap();
    path
}

pub struct CompositeFixture {
    pub sources: PathBuf,
    pub masks: PathBuf,
    pub backgrounds: PathBuf,
}

/// 64x64 solid-color poses (11 bear, 11 deer, 10 coyote, 10 moose) with
/// full-frame masks, and 26 backgrounds.
pub fn write_composite_fixture(dir: &Path) -> CompositeFixture {
    let fx = CompositeFixture {
        sources: dir.join("sources"),
        masks: dir.join("masks"),
        backgrounds: dir.join("backgrounds"),
    };
    for (class, poses) in synthetic_sources() {
        for c in poses {
            write_rgb(&fx.sources.join(&class).join(format!("{}.png", c.pose_id)), &c.image, None).unwrap();
            let r = c.bbox.pixel_rect();
            let full = c.mask.unwrap().place(c.image.width(), c.image.height(), r.x as i64, r.y as i64);
            write_mask(&fx.masks.join(&class).join(format!("{}.png", c.pose_id)), &full, None).unwrap();
        }
    }
    for bg in synthetic_backgrounds() {
        write_rgb(&fx.backgrounds.join(format!("{}.png", bg.id)), &bg.image, None).unwrap();
    }
    fx
}

pub const GT_CSV: &str = "image_id,class,x_min,y_min,x_max,y_max
img0,bear,10,10,40,40
img0,deer,50,10,80,40
img1,deer,5,5,25,30
img2,moose,0,0,60,50
img2,bear,70,70,90,95
";

/// Ground truth and a detection file that reproduces it exactly.
pub fn write_perfect_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let gt = dir.join("gt.csv");
    let det = dir.join("det.csv");
    std::fs::write(&gt, GT_CSV).unwrap();
    let mut d = String::from("image_id,class,x_min,y_min,x_max,y_max,confidence\n");
    for (i, line) in GT_CSV.lines().skip(1).enumerate() {
        d.push_str(&format!("{line},0.{}\n", 9 - i));
    }
    std::fs::write(&det, d).unwrap();
    (gt, det)
}

/// Video detections with a three-frame gap.
pub fn write_video_detections(dir: &Path) -> PathBuf {
    let path = dir.join("video_det.csv");
    let mut s = String::from("image_id,class,x_min,y_min,x_max,y_max,confidence,sequence_id,frame_index\n");
    for f in 0..10u32 {
        if (3..6).contains(&f) {
            continue;
        }
        let x = 10 + 2 * f;
        s.push_str(&format!("s0_f{f},deer,{x},40,{},60,0.8,s0,{f}\n", x + 20));
    }
    std::fs::write(&path, s).unwrap();
    path
}

/// Relative path -> SHA-256 of every file below `dir`.
pub fn digest_tree(dir: &Path) -> BTreeMap<String, String> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.insert(rel, sha256_hex(&std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn sha256_hex(data: &[u8]) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(data))
}
