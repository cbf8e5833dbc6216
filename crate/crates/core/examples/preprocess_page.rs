//! Runs the preprocessing chain on a synthetic page and reports each stage.
//!
//! `cargo run --example preprocess_page [input.png] [output.png]`

use drivethru::imaging::{self, PageImage, PreprocessConfig};

fn synthetic_page() -> PageImage {
    let (w, h) = (320u32, 120u32);
    let mut px = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h {
        for x in 0..w {
            let ink = y % 20 < 5 && x % 50 < 40;
            let paper = 200 + ((x + y) % 40) as u8;
            px.extend_from_slice(&if ink { [40, 35, 30] } else { [paper, paper - 10, paper - 30] });
        }
    }
    PageImage::new(w, h, 3, px).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let page = match args.next() {
        Some(path) => PageImage::open(path)?,
        None => synthetic_page(),
    };
    let cfg = PreprocessConfig::default();

    let scaled = imaging::scale_if_small(&page, &cfg);
    let gray = imaging::to_grayscale(&scaled)?;
    let blurred = imaging::gaussian_blur(&gray, cfg.blur_kernel)?;
    let t = imaging::otsu_threshold(&imaging::histogram(&blurred));
    let out = imaging::preprocess(&page, &cfg)?;

    println!("input      {}x{}x{}", page.width(), page.height(), page.channels());
    println!("scaled     {}x{}", scaled.width(), scaled.height());
    println!("sigma      {:.2} for kernel {}", imaging::auto_sigma(cfg.blur_kernel), cfg.blur_kernel);
    println!("otsu       T = {t}");
    let ink = out.pixels().iter().filter(|&&p| p == 0).count();
    println!(
        "output     {}x{}x1, {:.1}% dark",
        out.width(),
        out.height(),
        100.0 * ink as f64 / out.pixels().len() as f64
    );

    let target =
        args.next().unwrap_or_else(|| std::env::temp_dir().join("preprocessed.png").display().to_string());
    out.save_png(&target)?;
    println!("wrote {target}");
    Ok(())
}
