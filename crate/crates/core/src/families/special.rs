//! Normal-distribution special functions and Owen's T.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `log Φ(x)`, stable far into the lower tail.
pub fn std_normal_log_cdf(x: f64) -> f64 {
    if x > -30.0 {
        std_normal_cdf(x).ln()
    } else {
        // Asymptotic series of the Mills ratio.
        let z2 = 1.0 / (x * x);
        let series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2 + 105.0 * z2.powi(4);
        -0.5 * x * x - LN_SQRT_2PI - (-x).ln() + series.ln()
    }
}

/// `φ(x) / Φ(x)`.
pub fn inverse_mills(x: f64) -> f64 {
    if x > -30.0 {
        std_normal_pdf(x) / std_normal_cdf(x)
    } else {
        (-0.5 * x * x - LN_SQRT_2PI - std_normal_log_cdf(x)).exp()
    }
}

/// Standard normal quantile (Wichura, AS 241), followed by one Newton step.
pub fn std_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    let x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
            + 67265.770_927_008_7)
            * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0)
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let mut r = (-tail.ln()).sqrt();
        let val = if r <= 5.0 {
            r -= 1.6;
            (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
                + 0.241_780_725_177_450_6)
                * r
                + 1.270_458_252_452_368_4)
                * r
                + 3.647_848_324_763_204_5)
                * r
                + 5.769_497_221_460_691)
                * r
                + 4.630_337_846_156_546)
                * r
                + 1.423_437_110_749_683_5)
                / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                    + 0.015_198_666_563_616_457)
                    * r
                    + 0.148_103_976_427_480_08)
                    * r
                    + 0.689_767_334_985_1)
                    * r
                    + 1.676_384_830_183_803_8)
                    * r
                    + 2.053_191_626_637_759)
                    * r
                    + 1.0)
        } else {
            r -= 5.0;
            (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
                + 0.001_242_660_947_388_078_4)
                * r
                + 0.026_532_189_526_576_124)
                * r
                + 0.296_560_571_828_504_9)
                * r
                + 1.784_826_539_917_291_3)
                * r
                + 5.463_784_911_164_114)
                * r
                + 6.657_904_643_501_103)
                / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7)
                    * r
                    + 1.846_318_317_510_054_8e-5)
                    * r
                    + 7.868_691_311_456_133e-4)
                    * r
                    + 0.014_875_361_290_850_615)
                    * r
                    + 0.136_929_880_922_735_8)
                    * r
                    + 0.599_832_206_555_888)
                    * r
                    + 1.0)
        };
        if q < 0.0 {
            -val
        } else {
            val
        }
    };
    // Newton refinement on whichever tail keeps the residual well conditioned.
    let pdf = std_normal_pdf(x);
    if pdf > 0.0 {
        let err = if x < 0.0 {
            std_normal_cdf(x) - p
        } else {
            (1.0 - p) - std_normal_cdf(-x)
        };
        x - err / pdf
    } else {
        x
    }
}

const GL_NODES: [f64; 10] = [
    0.076_526_521_133_497_33,
    0.227_785_851_141_645_08,
    0.373_706_088_715_419_56,
    0.510_867_001_950_827_1,
    0.636_053_680_726_515_,
    0.746_331_906_460_150_8,
    0.839_116_971_822_218_8,
    0.912_234_428_251_326,
    0.963_971_927_277_913_8,
    0.993_128_599_185_094_9,
];
const GL_WEIGHTS: [f64; 10] = [
    0.152_753_387_130_725_85,
    0.149_172_986_472_603_75,
    0.142_096_109_318_382_05,
    0.131_688_638_449_176_63,
    0.118_194_531_961_518_42,
    0.101_930_119_817_240_44,
    0.083_276_741_576_704_75,
    0.062_672_048_334_109_06,
    0.040_601_429_800_386_94,
    0.017_614_007_139_152_12,
];

/// 20-point Gauss–Legendre rule on `[a, b]`, split into `panels` pieces.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            s += w * (f(mid + half * x) + f(mid - half * x));
        }
        total += s * half;
    }
    total
}

/// Owen's T function `T(h, a) = (1/2π) ∫_0^a exp(−h²(1+x²)/2) / (1+x²) dx`.
pub fn owens_t(h: f64, a: f64) -> f64 {
    if a == 0.0 || !h.is_finite() {
        return 0.0;
    }
    let sign = a.signum();
    let h = h.abs();
    let a = a.abs();
    let value = if a <= 1.0 {
        owens_t_direct(h, a)
    } else {
        // Reflection T(h,a) + T(ah,1/a) = ½Φ(h) + ½Φ(ah) − Φ(h)Φ(ah) for h ≥ 0.
        let ah = a * h;
        // Written with upper tails to keep precision when both are near 1.
        let qh = std_normal_cdf(-h);
        let qah = std_normal_cdf(-ah);
        0.5 * (qh + qah) - qh * qah - owens_t_direct(ah, 1.0 / a)
    };
    sign * value
}

fn owens_t_direct(h: f64, a: f64) -> f64 {
    let h2 = h * h;
    let panels = (1.0 + 1.5 * h * a).ceil().min(40.0) as usize;
    gauss_legendre(
        |x| {
            let one = 1.0 + x * x;
            (-0.5 * h2 * one).exp() / one
        },
        0.0,
        a,
        panels,
    ) / (2.0 * PI)
}
