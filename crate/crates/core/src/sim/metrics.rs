//! Time series collected during a run.

use serde::{Deserialize, Serialize};

/// One sample: `metric` is a stable series name, time is in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub time: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub points: Vec<MetricPoint>,
}

impl MetricSeries {
    pub fn new() -> Self {
        MetricSeries::default()
    }

    pub fn push(&mut self, time: f64, metric: &str, value: f64) {
        self.points.push(MetricPoint {
            time,
            metric: metric.to_string(),
            value,
        });
    }

    /// All (time, value) pairs of one series, in recording order.
    pub fn series(&self, metric: &str) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.metric == metric)
            .map(|p| (p.time, p.value))
            .collect()
    }

    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.metric == metric)
            .map(|p| p.value)
            .collect()
    }

    /// Values of a series restricted to a closed time interval.
    pub fn values_between(&self, metric: &str, from: f64, to: f64) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.metric == metric && p.time >= from && p.time <= to)
            .map(|p| p.value)
            .collect()
    }

    /// Renders `time,metric,value` rows with a header line. Values use
    /// Rust's shortest round-trip float formatting, so equal runs yield
    /// byte-identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,metric,value\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.time, p.metric, p.value));
        }
        out
    }
}
