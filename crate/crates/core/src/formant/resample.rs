use std::f64::consts::PI;

/// Zero crossings of the sinc kernel on each side.
const KERNEL_ZEROS: f64 = 16.0;

/// Band-limited resampling by Hann-windowed sinc interpolation.
///
/// Output sample `k` sits at time `k / to_rate`, with samples outside the input
/// treated as zero. When decimating, the kernel low-passes at the new Nyquist.
pub fn resample(samples: &[f64], from_rate: f64, to_rate: f64) -> Vec<f64> {
    if samples.is_empty() || from_rate == to_rate {
        return samples.to_vec();
    }
    let out_len = ((samples.len() as f64) * to_rate / from_rate).round() as usize;
    // cutoff relative to input sampling rate, in cycles/sample
    let cutoff = 0.5 * (to_rate / from_rate).min(1.0);
    let half_width = KERNEL_ZEROS / (2.0 * cutoff);
    (0..out_len)
        .map(|k| {
            let t = k as f64 * from_rate / to_rate;
            let lo = (t - half_width).ceil().max(0.0) as usize;
            let hi = ((t + half_width).floor() as usize).min(samples.len() - 1);
            let mut acc = 0.0;
            for (n, &x) in samples.iter().enumerate().take(hi + 1).skip(lo) {
                let u = t - n as f64;
                let arg = 2.0 * cutoff * u;
                let sinc = if arg.abs() < 1e-12 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
                let window = 0.5 + 0.5 * (PI * u / half_width).cos();
                acc += x * 2.0 * cutoff * sinc * window;
            }
            acc
        })
        .collect()
}
