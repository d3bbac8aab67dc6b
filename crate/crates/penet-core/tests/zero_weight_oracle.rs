//! Independent brute-force reimplementation of the whole pipeline.
//!
//! Everything here is written directly from the operator definitions with
//! its own plane-based representation: padding is materialized, softmax
//! skips the max shift, bilinear interpolation uses the four-weight form.
//! No code is shared with the library kernels, so agreement between the
//! two is meaningful. The zero-weight doubling oracle and a random-weight
//! comparison both run on 8x8 inputs.

use penet_core::model::{penet_forward_preclamp, PENetParams};
use penet_core::ops::ConvParams;
use penet_core::rng::SplitMix64;
use penet_core::tensor::{Scalar, Tensor};
use penet_core::weights::{init_params, InitScheme};

/// One channel plane.
#[derive(Clone)]
struct Plane {
    h: usize,
    w: usize,
    v: Vec<f64>,
}

impl Plane {
    fn new(h: usize, w: usize) -> Self {
        Plane {
            h,
            w,
            v: vec![0.0; h * w],
        }
    }
    fn get(&self, y: usize, x: usize) -> f64 {
        self.v[y * self.w + x]
    }
    fn set(&mut self, y: usize, x: usize, val: f64) {
        self.v[y * self.w + x] = val;
    }
}

type Image = Vec<Plane>;

fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Image {
    (0..t.channels())
        .map(|c| {
            let mut p = Plane::new(t.height(), t.width());
            for y in 0..t.height() {
                for x in 0..t.width() {
                    p.set(y, x, t.get(c, y, x).as_f64());
                }
            }
            p
        })
        .collect()
}

fn conv_params_of<T: Scalar>(p: &ConvParams<T>) -> (usize, usize, usize, Vec<f64>, Vec<f64>) {
    (
        p.out_channels(),
        p.in_channels(),
        p.kernel(),
        p.weights().iter().map(|v| v.as_f64()).collect(),
        p.bias().iter().map(|v| v.as_f64()).collect(),
    )
}

/// Zero-padded cross-correlation, written against a materialized pad.
fn naive_conv<T: Scalar>(x: &Image, p: &ConvParams<T>) -> Image {
    let (out_c, in_c, k, w, b) = conv_params_of(p);
    assert_eq!(x.len(), in_c);
    let (h, wid) = (x[0].h, x[0].w);
    let pad = (k - 1) / 2;

    let padded: Vec<Plane> = x
        .iter()
        .map(|plane| {
            let mut pp = Plane::new(h + 2 * pad, wid + 2 * pad);
            for y in 0..h {
                for xx in 0..wid {
                    pp.set(y + pad, xx + pad, plane.get(y, xx));
                }
            }
            pp
        })
        .collect();

    let mut out = Vec::new();
    for o in 0..out_c {
        let mut plane = Plane::new(h, wid);
        for i in 0..h {
            for j in 0..wid {
                let mut acc = b[o];
                for c in 0..in_c {
                    for u in 0..k {
                        for v in 0..k {
                            acc += w[((o * in_c + c) * k + u) * k + v]
                                * padded[c].get(i + u, j + v);
                        }
                    }
                }
                plane.set(i, j, acc);
            }
        }
        out.push(plane);
    }
    out
}

fn naive_leaky_relu(x: &Image) -> Image {
    x.iter()
        .map(|p| Plane {
            h: p.h,
            w: p.w,
            v: p.v.iter().map(|&v| if v >= 0.0 { v } else { 0.01 * v }).collect(),
        })
        .collect()
}

/// Softmax without the stability shift: a deliberately different route.
fn naive_softmax_spatial(x: &Image) -> Image {
    x.iter()
        .map(|p| {
            let sum: f64 = p.v.iter().map(|&v| v.exp()).sum();
            Plane {
                h: p.h,
                w: p.w,
                v: p.v.iter().map(|&v| v.exp() / sum).collect(),
            }
        })
        .collect()
}

fn naive_pool(x: &Image, s: usize) -> Image {
    x.iter()
        .map(|p| {
            let mut out = Plane::new(s, s);
            for i in 0..s {
                let y0 = i * p.h / s;
                let y1 = ((i + 1) * p.h).div_ceil(s);
                for j in 0..s {
                    let x0 = j * p.w / s;
                    let x1 = ((j + 1) * p.w).div_ceil(s);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        for xx in x0..x1 {
                            acc += p.get(y, xx);
                        }
                    }
                    out.set(i, j, acc / ((y1 - y0) * (x1 - x0)) as f64);
                }
            }
            out
        })
        .collect()
}

/// Four-corner weighted form of half-pixel bilinear resampling.
fn naive_resize(x: &Image, oh: usize, ow: usize) -> Image {
    x.iter()
        .map(|p| {
            let mut out = Plane::new(oh, ow);
            for oy in 0..oh {
                let sy = (((oy as f64 + 0.5) * p.h as f64 / oh as f64) - 0.5)
                    .clamp(0.0, (p.h - 1) as f64);
                let y0 = sy.floor() as usize;
                let y1 = (y0 + 1).min(p.h - 1);
                let fy = sy - y0 as f64;
                for ox in 0..ow {
                    let sx = (((ox as f64 + 0.5) * p.w as f64 / ow as f64) - 0.5)
                        .clamp(0.0, (p.w - 1) as f64);
                    let x0 = sx.floor() as usize;
                    let x1 = (x0 + 1).min(p.w - 1);
                    let fx = sx - x0 as f64;
                    let val = p.get(y0, x0) * (1.0 - fx) * (1.0 - fy)
                        + p.get(y0, x1) * fx * (1.0 - fy)
                        + p.get(y1, x0) * (1.0 - fx) * fy
                        + p.get(y1, x1) * fx * fy;
                    out.set(oy, ox, val);
                }
            }
            out
        })
        .collect()
}

fn reflect(i: isize, n: usize) -> usize {
    let mut i = i;
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

fn naive_gaussian_down(x: &Image) -> Image {
    let k1 = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    x.iter()
        .map(|p| {
            // Materialized reflect pad, dense filter, even subsample.
            let (h, w) = (p.h, p.w);
            let mut padded = Plane::new(h + 4, w + 4);
            for y in 0..h + 4 {
                for xx in 0..w + 4 {
                    padded.set(
                        y,
                        xx,
                        p.get(reflect(y as isize - 2, h), reflect(xx as isize - 2, w)),
                    );
                }
            }
            let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
            let mut out = Plane::new(oh, ow);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for u in 0..5 {
                        for v in 0..5 {
                            acc += k1[u] * k1[v] * padded.get(2 * oy + u, 2 * ox + v);
                        }
                    }
                    out.set(oy, ox, acc);
                }
            }
            out
        })
        .collect()
}

fn naive_sobel(x: &Image, kernel: [[f64; 3]; 3]) -> Image {
    x.iter()
        .map(|p| {
            let (h, w) = (p.h, p.w);
            let mut padded = Plane::new(h + 2, w + 2);
            for y in 0..h + 2 {
                for xx in 0..w + 2 {
                    let sy = (y as isize - 1).clamp(0, h as isize - 1) as usize;
                    let sx = (xx as isize - 1).clamp(0, w as isize - 1) as usize;
                    padded.set(y, xx, p.get(sy, sx));
                }
            }
            let mut out = Plane::new(h, w);
            for i in 0..h {
                for j in 0..w {
                    let mut acc = 0.0;
                    for (u, row) in kernel.iter().enumerate() {
                        for (v, &kv) in row.iter().enumerate() {
                            acc += kv * padded.get(i + u, j + v);
                        }
                    }
                    out.set(i, j, acc);
                }
            }
            out
        })
        .collect()
}

fn zip_planes(a: &Image, b: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
    a.iter()
        .zip(b)
        .map(|(pa, pb)| Plane {
            h: pa.h,
            w: pa.w,
            v: pa.v.iter().zip(&pb.v).map(|(&x, &y)| f(x, y)).collect(),
        })
        .collect()
}

fn naive_residual_block<T: Scalar>(
    x: &Image,
    conv_a: &ConvParams<T>,
    conv_b: &ConvParams<T>,
    proj: Option<&ConvParams<T>>,
) -> Image {
    let main = naive_conv(&naive_leaky_relu(&naive_conv(x, conv_a)), conv_b);
    let shortcut = match proj {
        Some(p) => naive_conv(x, p),
        None => x.clone(),
    };
    naive_leaky_relu(&zip_planes(&main, &shortcut, |a, b| a + b))
}

fn naive_enhance<T: Scalar>(
    x: &Image,
    level: &penet_core::model::LevelParams<T>,
) -> Image {
    // Context branch.
    let t = naive_residual_block(
        x,
        &level.cb.rb1.conv_a,
        &level.cb.rb1.conv_b,
        level.cb.rb1.proj.as_ref(),
    );
    let attn = naive_softmax_spatial(&naive_conv(&t, &level.cb.f2));
    let modulated = zip_planes(&attn, &t, |a, b| a * b);
    let corr = naive_leaky_relu(&naive_conv(&modulated, &level.cb.f1));
    let u = zip_planes(&t, &corr, |a, b| a + b);
    let cb = naive_residual_block(
        &u,
        &level.cb.rb2.conv_a,
        &level.cb.rb2.conv_b,
        level.cb.rb2.proj.as_ref(),
    );

    // Edge branch.
    let sh = naive_sobel(x, [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]]);
    let sw = naive_sobel(x, [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]);
    let eb = zip_planes(
        &naive_conv(&zip_planes(&sh, &sw, |a, b| a + b), &level.eb.f3),
        x,
        |a, b| a + b,
    );

    // Low-frequency filter.
    let features = naive_conv(x, &level.lef.conv_in);
    let mut filtered = Vec::new();
    for (g, s) in [(0usize, 1usize), (1, 2), (2, 3), (3, 6)] {
        let group: Image = features[g * 8..(g + 1) * 8].to_vec();
        filtered.extend(naive_resize(&naive_pool(&group, s), x[0].h, x[0].w));
    }
    let lef = naive_conv(&filtered, &level.lef.conv_out);

    // Fusion: the component plus all three corrections.
    let mut out = zip_planes(x, &cb, |a, b| a + b);
    out = zip_planes(&out, &eb, |a, b| a + b);
    zip_planes(&out, &lef, |a, b| a + b)
}

fn naive_penet<T: Scalar>(image: &Image, params: &PENetParams<T>) -> Image {
    let g1 = image.clone();
    let g2 = naive_gaussian_down(&g1);
    let g3 = naive_gaussian_down(&g2);
    let g4 = naive_gaussian_down(&g3);

    let l1 = zip_planes(&g1, &naive_resize(&g2, g1[0].h, g1[0].w), |a, b| a - b);
    let l2 = zip_planes(&g2, &naive_resize(&g3, g2[0].h, g2[0].w), |a, b| a - b);
    let l3 = zip_planes(&g3, &naive_resize(&g4, g3[0].h, g3[0].w), |a, b| a - b);

    let e1 = naive_enhance(&l1, &params.levels[0]);
    let e2 = naive_enhance(&l2, &params.levels[1]);
    let e3 = naive_enhance(&l3, &params.levels[2]);
    let e4 = naive_enhance(&g4, &params.levels[3]);

    let r3 = zip_planes(&e3, &naive_resize(&e4, e3[0].h, e3[0].w), |a, b| a + b);
    let r2 = zip_planes(&e2, &naive_resize(&r3, e2[0].h, e2[0].w), |a, b| a + b);
    zip_planes(&e1, &naive_resize(&r2, e1[0].h, e1[0].w), |a, b| a + b)
}

fn max_abs_vs_tensor<T: Scalar>(image: &Image, t: &Tensor<T>) -> f64 {
    let mut worst = 0.0f64;
    for (c, plane) in image.iter().enumerate() {
        for y in 0..plane.h {
            for x in 0..plane.w {
                worst = worst.max((plane.get(y, x) - t.get(c, y, x).as_f64()).abs());
            }
        }
    }
    worst
}

#[test]
fn zero_weights_double_any_image_and_match_the_bruteforce_pipeline() {
    let params = PENetParams::<f32>::zeros().unwrap();
    let mut rng = SplitMix64::new(0xBEEF);
    for trial in 0..20 {
        let image = Tensor::<f32>::from_fn(3, 8, 8, |_, _, _| rng.next_f64() as f32);
        let out = penet_forward_preclamp(&image, &params).unwrap();

        // Doubling, pre-clamp.
        let mut worst = 0.0f32;
        for (o, i) in out.data().iter().zip(image.data()) {
            worst = worst.max((o - 2.0 * i).abs());
        }
        assert!(worst <= 1e-4, "trial {trial}: doubling error {worst}");

        // Agreement with the naive pipeline.
        let naive = naive_penet(&from_tensor(&image), &params);
        let diff = max_abs_vs_tensor(&naive, &out);
        assert!(diff <= 1e-5, "trial {trial}: bruteforce mismatch {diff}");
    }
}

#[test]
fn random_weights_match_the_bruteforce_pipeline_at_64_bit() {
    for seed in 0..3u64 {
        let params = init_params::<f64>(seed + 600, InitScheme::Random);
        let mut rng = SplitMix64::new(seed);
        let image = Tensor::<f64>::from_fn(3, 8, 8, |_, _, _| rng.next_f64());
        let out = penet_forward_preclamp(&image, &params).unwrap();
        let naive = naive_penet(&from_tensor(&image), &params);
        let diff = max_abs_vs_tensor(&naive, &out);
        assert!(diff <= 1e-9, "seed {seed}: bruteforce mismatch {diff}");
    }
}

#[test]
fn constant_images_double_exactly() {
    let params = PENetParams::<f32>::zeros().unwrap();
    let image = Tensor::filled(3, 8, 8, 0.3f32);
    let out = penet_forward_preclamp(&image, &params).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.6f32));

    let naive = naive_penet(&from_tensor(&image), &params);
    assert!(naive
        .iter()
        .all(|p| p.v.iter().all(|&v| (v - 0.6).abs() < 1e-7)));
}
