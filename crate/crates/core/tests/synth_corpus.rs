use sarwind::synth::{
    coarse_len, draw_truth, gaussian_kernel, gen_rain, gen_wind_field, SynthParams,
    WindFieldParams, COARSE_FACTOR,
};

#[test]
fn heavy_rain_fraction_over_200_scenes() {
    let p = SynthParams::default();
    assert_eq!(p.scenes, 200);
    let weight = p.mean_wind_weight();
    let (mut heavy, mut total) = (0u64, 0u64);
    for i in 0..p.scenes {
        let truth = draw_truth(&p, i, 7, weight).unwrap();
        let (rate, class) = gen_rain(&truth.cells, p.rows, p.cols).unwrap();
        // count straight from the rate field, then check the classes agree
        let n = rate.values().iter().filter(|&&v| v >= 3.0).count() as u64;
        let by_class = class.values().iter().filter(|&&v| v >= 2.0).count() as u64;
        assert_eq!(n, by_class, "scene {i}");
        heavy += n;
        total += rate.values().len() as u64;
    }
    let frac = heavy as f64 / total as f64;
    assert!((0.002..=0.01).contains(&frac), "heavy-rain fraction {frac}");
}

#[test]
fn rain_field_is_the_sum_of_cells() {
    let p = SynthParams {
        rows: 200,
        cols: 240,
        ..SynthParams::default()
    };
    let mut truth = draw_truth(&p, 3, 11, p.mean_wind_weight()).unwrap();
    truth.cells = (0..4)
        .map(|k| sarwind::synth::RainCell {
            row: 40.0 + 35.0 * k as f64,
            col: 60.0 + 30.0 * k as f64,
            sigma: 15.0 + 3.0 * k as f64,
            peak: 6.0 + 4.0 * k as f64,
        })
        .collect();
    let (rate, _) = gen_rain(&truth.cells, p.rows, p.cols).unwrap();
    for r in 0..p.rows {
        for c in 0..p.cols {
            let expected: f64 = truth
                .cells
                .iter()
                .map(|cell| cell.rate_at(r as f64, c as f64))
                .sum();
            assert!(
                (rate.get(r, c) - expected).abs() < 1e-12,
                "({r}, {c}): {} vs {expected}",
                rate.get(r, c)
            );
        }
    }
}

/// Row-averaged weights of the corner-aligned bilinear upsampling from
/// `nodes` coarse nodes to `n` pixels.
fn mean_upsample_weights(nodes: usize, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; nodes];
    for i in 0..n {
        let x = i as f64 * (nodes - 1) as f64 / (n - 1) as f64;
        let j = (x.floor() as usize).min(nodes - 2);
        let t = x - j as f64;
        w[j] += (1.0 - t) / n as f64;
        w[j + 1] += t / n as f64;
    }
    w
}

/// Standard deviation of the spatial mean of a unit field over `n` pixels
/// per axis: the mean is a fixed linear combination of the white-noise
/// nodes, separable across the two axes.
fn unit_field_mean_std(n: usize, correlation_km: f64) -> f64 {
    let k = gaussian_kernel(correlation_km / (COARSE_FACTOR as f64 * 0.1));
    let nodes = coarse_len(n);
    let u = mean_upsample_weights(nodes, n);
    let mut coef = vec![0.0; nodes + k.len() - 1];
    for (i, ui) in u.iter().enumerate() {
        for (t, kt) in k.iter().enumerate() {
            coef[i + t] += ui * kt;
        }
    }
    coef.iter().map(|a| a * a).sum::<f64>()
}

#[test]
fn field_mean_within_three_sigma() {
    let n = 256;
    let p = WindFieldParams {
        mean: 8.0,
        std: 1.5,
        correlation_km: 15.0,
        direction: 0.0,
        direction_std: 0.0,
    };
    let sd = p.std * unit_field_mean_std(n, p.correlation_km).sqrt();
    let z: Vec<f64> = (0..60)
        .map(|seed| {
            let (speed, _) = gen_wind_field(&p, n, n, seed).unwrap();
            (speed.valid_mean().unwrap() - p.mean) / sd
        })
        .collect();
    for (seed, zi) in z.iter().enumerate() {
        assert!(zi.abs() <= 3.0, "seed {seed}: z = {zi}");
    }
    // the derived spread is the actual one
    let var = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
    assert!((0.5..=1.6).contains(&var), "z variance {var}");
}

/// Kolmogorov-Smirnov distance of the drawn scene winds against the clipped Weibull law.
#[test]
fn scene_winds_follow_the_clipped_weibull() {
    let p = SynthParams::default();
    let weight = p.mean_wind_weight();
    let mut v: Vec<f64> = (0..2000)
        .map(|i| draw_truth(&p, i, 5, weight).unwrap().wind.mean)
        .collect();
    v.sort_by(f64::total_cmp);
    let cdf = |x: f64| {
        if x < p.wind_range.0 {
            0.0
        } else if x >= p.wind_range.1 {
            1.0
        } else {
            1.0 - (-(x / p.wind_scale).powf(p.wind_shape)).exp()
        }
    };
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate().filter(|(_, &x)| x > p.wind_range.0) {
        let f = cdf(x);
        d = d
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    // 1% critical value
    assert!(d <= 1.63 / n.sqrt(), "KS distance {d}");
}
