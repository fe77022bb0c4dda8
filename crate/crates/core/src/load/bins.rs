use super::RequestRecord;

/// Completions within one wall-clock bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequestBin {
    /// Bin start, epoch seconds.
    pub t_s: i64,
    pub completions: u64,
    pub failures: u64,
    /// Mean response time of successful completions; `None` if there were none.
    pub mean_rt_ms: Option<f64>,
}

/// Bins records by completion time, covering every bin from the first to the last.
pub fn bin_requests(records: &[RequestRecord], bin_s: u32) -> Vec<RequestBin> {
    let bin_s = bin_s.max(1) as i64;
    if records.is_empty() {
        return Vec::new();
    }
    let key = |r: &RequestRecord| (r.completion_ms() / 1000.0).floor() as i64 / bin_s * bin_s;
    let first = records.iter().map(key).min().unwrap_or(0);
    let last = records.iter().map(key).max().unwrap_or(0);
    let n = ((last - first) / bin_s + 1) as usize;
    let mut sums = vec![(0u64, 0u64, 0.0f64, 0u64); n];
    for r in records {
        let slot = &mut sums[((key(r) - first) / bin_s) as usize];
        slot.0 += 1;
        if r.success {
            slot.2 += r.response_time_ms;
            slot.3 += 1;
        } else {
            slot.1 += 1;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, (completions, failures, rt_sum, ok))| RequestBin {
            t_s: first + i as i64 * bin_s,
            completions,
            failures,
            mean_rt_ms: (ok > 0).then(|| rt_sum / ok as f64),
        })
        .collect()
}

/// Completed requests per bin, failures included.
pub fn bin_throughput(records: &[RequestRecord], bin_s: u32) -> Vec<(i64, u64)> {
    bin_requests(records, bin_s).into_iter().map(|b| (b.t_s, b.completions)).collect()
}

/// Mean response time of the requests completing in each bin.
pub fn bin_response_time(records: &[RequestRecord], bin_s: u32) -> Vec<(i64, Option<f64>)> {
    bin_requests(records, bin_s).into_iter().map(|b| (b.t_s, b.mean_rt_ms)).collect()
}
