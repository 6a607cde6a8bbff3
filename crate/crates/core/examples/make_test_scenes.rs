//! Regenerates the procedural scenes under `tests/data`.
//!
//! ```text
//! cargo run -p dqa-core --example make_test_scenes [OUT_DIR]
//! ```

use std::path::PathBuf;

use image::{GrayImage, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: u32 = 256;

/// Bilinear value noise summed over octaves, roughly in [0, 1].
struct Fractal {
    lattices: Vec<(usize, Vec<f64>)>,
}

impl Fractal {
    fn new(rng: &mut ChaCha8Rng, base: usize, octaves: usize) -> Self {
        let lattices = (0..octaves)
            .map(|o| {
                let n = base << o;
                (n, (0..(n + 1) * (n + 1)).map(|_| rng.gen::<f64>()).collect())
            })
            .collect();
        Self { lattices }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (mut acc, mut amp, mut norm) = (0.0, 1.0, 0.0);
        for (n, lat) in &self.lattices {
            let (fx, fy) = (x * *n as f64, y * *n as f64);
            let (ix, iy) = ((fx as usize).min(n - 1), (fy as usize).min(n - 1));
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let g = |a: usize, b: usize| lat[b * (n + 1) + a];
            let top = g(ix, iy) * (1.0 - tx) + g(ix + 1, iy) * tx;
            let bot = g(ix, iy + 1) * (1.0 - tx) + g(ix + 1, iy + 1) * tx;
            acc += amp * (top * (1.0 - ty) + bot * ty);
            norm += amp;
            amp *= 0.55;
        }
        acc / norm
    }
}

/// Sky gradient over textured terrain with a few hard-edged objects.
fn scene(seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terrain = Fractal::new(&mut rng, 4, 6);
    let texture = Fractal::new(&mut rng, 16, 3);
    let horizon = rng.gen_range(0.25..0.5);
    let ground: [f64; 3] = [rng.gen_range(60.0..160.0), rng.gen_range(60.0..160.0), rng.gen_range(40.0..120.0)];
    let sky: [f64; 3] = [rng.gen_range(120.0..200.0), rng.gen_range(150.0..220.0), rng.gen_range(200.0..255.0)];
    let boxes: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..rng.gen_range(3..7))
        .map(|_| {
            let (x, y) = (rng.gen_range(0.0..0.8), rng.gen_range(horizon..0.9));
            let color = [rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0)];
            (x, y, rng.gen_range(0.05..0.2), rng.gen_range(0.05..0.15), color)
        })
        .collect();
    let freq = rng.gen_range(20.0..60.0);
    let mut noise = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

    RgbImage::from_fn(SIDE, SIDE, |c, r| {
        let (x, y) = (c as f64 / SIDE as f64, r as f64 / SIDE as f64);
        let ridge = horizon + 0.15 * (terrain.at(x, 0.3) - 0.5);
        let mut px = if y < ridge {
            let t = y / ridge;
            sky.map(|v| v * (0.75 + 0.25 * t))
        } else {
            let shade = 0.4 + 1.2 * terrain.at(x, y);
            let stripes = 12.0 * (freq * (x + 0.3 * y)).sin() * texture.at(x, y);
            ground.map(|v| v * shade + stripes)
        };
        for &(bx, by, bw, bh, color) in &boxes {
            if x >= bx && x < bx + bw && y >= by && y < by + bh {
                let edge = 0.8 + 0.4 * texture.at(x * 2.0, y * 2.0);
                px = color.map(|v| v * edge);
            }
        }
        // independent per channel, like sensor noise, so chroma is never noiseless
        image::Rgb(px.map(|v| (v + noise.gen_range(-6.0..6.0)).round().clamp(0.0, 255.0) as u8))
    })
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data"));
    std::fs::create_dir_all(&out).expect("create output dir");
    for k in 0..5u64 {
        let path = out.join(format!("scene{k}.png"));
        scene(1000 + k).save(&path).expect("write scene");
        println!("{}", path.display());
    }
    let rgb = scene(2000);
    let gray = GrayImage::from_fn(SIDE, SIDE, |c, r| {
        let p = rgb.get_pixel(c, r).0;
        image::Luma([((299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32 + 500) / 1000) as u8])
    });
    let path = out.join("scene_gray.png");
    gray.save(&path).expect("write scene");
    println!("{}", path.display());
}
