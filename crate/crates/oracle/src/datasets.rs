//! Fixed, seeded datasets shaped like aligned power/latency tables.

/// SplitMix64; small, well known, and independent of the `rand` crate family.
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal by Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }
}

/// Columns of a synthetic per-second table plus the response.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<&'static str>,
    /// Predictor columns, intercept excluded.
    pub columns: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Design rows with a leading intercept.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| std::iter::once(1.0).chain(self.columns.iter().map(|c| c[i])).collect())
            .collect()
    }
}

/// A power-vs-latency style regression dataset.
///
/// For n ≥ 20 the predictors are rt (ms), req_rate, cpu_util and memory_bytes
/// (~1e8–1e9, the conditioning hazard of the real data); smaller n uses rt only.
/// Noise standard deviation grows with rt so the data are heteroskedastic.
pub fn power_dataset(seed: u64, n: usize) -> Dataset {
    let mut rng = SplitMix::new(seed);
    let mut rt = Vec::with_capacity(n);
    let mut rate = Vec::with_capacity(n);
    let mut util = Vec::with_capacity(n);
    let mut mem = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let r = 20.0 + 400.0 * rng.uniform() + 0.05 * i as f64;
        let q = 5.0 + 30.0 * rng.uniform();
        let u = (0.1 + 0.8 * rng.uniform()).min(1.0);
        let m = 2.0e8 + 6.0e8 * rng.uniform() + 1.0e4 * i as f64;
        let noise = rng.normal() * (0.2 + r / 400.0);
        let power = if n >= 20 {
            4.0 + 0.002 * r - 0.03 * q + 12.0 * u + 1.5e-9 * m + noise
        } else {
            4.0 + 0.002 * r + noise
        };
        rt.push(r);
        rate.push(q);
        util.push(u);
        mem.push(m);
        y.push(power);
    }
    if n >= 20 {
        Dataset {
            names: vec!["rt_ms", "req_rate", "cpu_util", "memory_bytes"],
            columns: vec![rt, rate, util, mem],
            y,
        }
    } else {
        Dataset { names: vec!["rt_ms"], columns: vec![rt], y }
    }
}

/// Integer-valued series with many ties, for rank-correlation checks.
pub fn tied_pair(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix::new(seed);
    let x: Vec<f64> = (0..n).map(|_| (rng.uniform() * 7.0).floor()).collect();
    let y: Vec<f64> = x.iter().map(|v| (v * 0.5 + rng.uniform() * 4.0).floor()).collect();
    (x, y)
}
