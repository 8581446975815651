// temp visual check
use rignovel_core::synthdata::*;
fn main() {
    let dir = std::path::Path::new("/tmp/render_check");
    std::fs::create_dir_all(dir).unwrap();
    let combos = [
        (FrameShape::Triangle, HandleShape::Flat, "tri_flat"),
        (FrameShape::Diamond, HandleShape::Curled, "dia_curl"),
        (FrameShape::Arc, HandleShape::Flat, "arc_flat"),
        (FrameShape::Step, HandleShape::Flat, "step_flat"),
        (FrameShape::Triangle, HandleShape::Loop, "tri_loop"),
    ];
    for (f, h, name) in combos {
        for seed in [1u64, 99] {
            let p = StyleParams::new(f, 9.5, 0.0, h, seed);
            let s: DesignSample<f32> = generate_design(&p, 64).unwrap();
            rignovel_core::io_util::save_gray_png(dir.join(format!("{name}_{seed}.png")), &s.image).unwrap();
            // upscale 4x for inspection
            let big = ndarray::Array2::from_shape_fn((256,256), |(r,c)| s.image[[r/4, c/4]]);
            rignovel_core::io_util::save_gray_png(dir.join(format!("{name}_{seed}_big.png")), &big).unwrap();
        }
    }
    println!("done");
}
