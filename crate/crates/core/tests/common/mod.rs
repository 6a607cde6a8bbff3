#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dqa_core::imageio::{decode_image, YCbCrImage};
use image::RgbImage;

pub const HAZE_AIRLIGHT: f64 = 200.0;
pub const HAZE_STRENGTHS: [f64; 5] = [0.15, 0.3, 0.45, 0.6, 0.75];

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn color_scenes() -> Vec<PathBuf> {
    (0..5).map(|k| data_dir().join(format!("scene{k}.png"))).collect()
}

pub fn gray_scene() -> PathBuf {
    data_dir().join("scene_gray.png")
}

pub fn load(path: &Path) -> YCbCrImage<f64> {
    decode_image(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn load_rgb(path: &Path) -> RgbImage {
    image::open(path).unwrap().to_rgb8()
}

/// Affine blend toward a flat gray airlight: `J (1 - s) + A s`.
pub fn hazed(clean: &RgbImage, strength: f64) -> RgbImage {
    let mut out = clean.clone();
    for p in out.pixels_mut() {
        for v in p.0.iter_mut() {
            *v = (*v as f64 * (1.0 - strength) + HAZE_AIRLIGHT * strength).round() as u8;
        }
    }
    out
}

pub fn to_image(rgb: &RgbImage) -> YCbCrImage<f64> {
    YCbCrImage::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw()).unwrap()
}

/// Clean scenes plus every hazed version, written as PNGs into `dir`.
pub fn write_corpus(dir: &Path) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    for (k, scene) in color_scenes().iter().enumerate() {
        let clean = load_rgb(scene);
        let p = dir.join(format!("s{k}_clean.png"));
        clean.save(&p).unwrap();
        paths.push(p);
        for (h, &s) in HAZE_STRENGTHS.iter().enumerate() {
            let p = dir.join(format!("s{k}_haze{h}.png"));
            hazed(&clean, s).save(&p).unwrap();
            paths.push(p);
        }
    }
    paths
}

/// Ten contents of eight brightness variants each, with MOS equal to mean
/// luminance; returns the manifest path.
pub fn write_luminance_manifest(dir: &Path) -> PathBuf {
    let mut csv = String::from("image_path,content_id,mos\n");
    let mut sources = color_scenes();
    sources.push(gray_scene());
    for content in 0..10 {
        let src = load_rgb(&sources[content % sources.len()]);
        // distinct 128x128 crop per content: 16 full local patches
        let (ox, oy) = ((content * 37) % 128, (content * 59) % 128);
        let crop = image::imageops::crop_imm(&src, ox as u32, oy as u32, 128, 128).to_image();
        for v in 0..8 {
            let gain = 0.45 + 0.1 * v as f64;
            let mut img = crop.clone();
            for p in img.pixels_mut() {
                for c in p.0.iter_mut() {
                    *c = (*c as f64 * gain).round().min(255.0) as u8;
                }
            }
            let name = format!("c{content}_v{v}.png");
            img.save(dir.join(&name)).unwrap();
            let mos = to_image(&img).y.mean();
            csv.push_str(&format!("{name},c{content},{mos}\n"));
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

/// `y = x0 + x1` over uniform points in the unit square: 200 train rows then
/// 100 held-out rows.
pub fn sum_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let y: Vec<f64> = x.iter().map(|r| r[0] + r[1]).collect();
    let (xtr, xte) = x.split_at(200);
    let (ytr, yte) = y.split_at(200);
    (xtr.to_vec(), ytr.to_vec(), xte.to_vec(), yte.to_vec())
}
