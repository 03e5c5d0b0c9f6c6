//! Station temperature records as a networked linear regression: features are
//! the three preceding daily means, the label is the current daily mean, and
//! stations are linked to their nearest neighbours.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::knn_graph;
use crate::error::{Error, Result};
use crate::family::GaussianLinearModel;
use crate::graph::EmpiricalGraph;

/// Number of preceding days used as features.
const LAG: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherStation {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub temperatures: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherTable {
    pub stations: Vec<WeatherStation>,
}

impl WeatherTable {
    pub fn days(&self) -> usize {
        self.stations.first().map_or(0, |s| s.temperatures.len())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("station_id,lat,lon");
        for d in 1..=self.days() {
            out.push_str(&format!(",t{d}"));
        }
        out.push('\n');
        for s in &self.stations {
            out.push_str(&format!("{},{},{}", s.id, s.lat, s.lon));
            for t in &s.temperatures {
                out.push_str(&format!(",{t}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Parses `station_id,lat,lon,t_1,...,t_T` with a header row.
pub fn parse_weather_csv(text: &str, src: &str) -> Result<WeatherTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(src, 1, "empty weather file"))?;
    let columns = header.split(',').count();
    if columns < 3 + LAG + 1 {
        return Err(Error::parse(
            src,
            1,
            format!("need station_id, lat, lon and at least {} day columns", LAG + 1),
        ));
    }
    let mut stations = Vec::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns {
            return Err(Error::parse(
                src,
                lineno,
                format!("expected {columns} fields, found {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(src, lineno, format!("column {}: `{}` is not a number", i + 1, fields[i])))
        };
        stations.push(WeatherStation {
            id: fields[0].to_string(),
            lat: num(1)?,
            lon: num(2)?,
            temperatures: (3..columns).map(num).collect::<Result<_>>()?,
        });
    }
    if stations.len() < 2 {
        return Err(Error::parse(src, 1, "need at least two stations"));
    }
    Ok(WeatherTable { stations })
}

#[derive(Debug, Clone)]
pub struct WeatherInstance {
    pub graph: EmpiricalGraph,
    pub model: GaussianLinearModel,
}

/// Regression instance for `day` (0-based, at least 3) on the `k`-NN graph of
/// station coordinates.
pub fn weather_instance(table: &WeatherTable, k: usize, day: usize) -> Result<WeatherInstance> {
    let days = table.days();
    if day < LAG || day >= days {
        return Err(Error::invalid(format!("day must lie in {LAG}..{days}, got {day}")));
    }
    let coords: Vec<Vec<f64>> = table.stations.iter().map(|s| vec![s.lat, s.lon]).collect();
    let graph = knn_graph(&coords, k)?;
    let mut features = Vec::with_capacity(table.stations.len() * LAG);
    let mut labels = Vec::with_capacity(table.stations.len());
    for s in &table.stations {
        features.extend_from_slice(&s.temperatures[day - LAG..day]);
        labels.push(s.temperatures[day]);
    }
    let model = GaussianLinearModel::new(LAG, features, labels, None)?;
    Ok(WeatherInstance { graph, model })
}

/// Weather-like table: stations scattered over a 10° x 10° box, temperatures
/// from a smooth north-south gradient plus a shared seasonal cycle, an AR(1)
/// regional anomaly and independent station noise.
pub fn synthetic_weather(stations: usize, days: usize, seed: u64) -> Result<WeatherTable> {
    if stations < 2 || days < LAG + 1 {
        return Err(Error::invalid(format!(
            "need at least 2 stations and {} days",
            LAG + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<(f64, f64)> = (0..stations)
        .map(|_| (60.0 + 10.0 * rng.gen::<f64>(), 20.0 + 10.0 * rng.gen::<f64>()))
        .collect();
    let mut anomaly = [0.0f64; 2];
    let mut temps = vec![Vec::with_capacity(days); stations];
    for d in 0..days {
        for a in anomaly.iter_mut() {
            *a = 0.8 * *a + rng.sample::<f64, _>(StandardNormal);
        }
        let season = -5.0 * (2.0 * std::f64::consts::PI * d as f64 / 365.0).cos();
        for (s, &(lat, lon)) in positions.iter().enumerate() {
            let regional = if lon < 25.0 { anomaly[0] } else { anomaly[1] };
            let noise: f64 = rng.sample(StandardNormal);
            let t = 8.0 - 0.9 * (lat - 60.0) + season + regional + 0.3 * noise;
            temps[s].push((t * 100.0).round() / 100.0);
        }
    }
    Ok(WeatherTable {
        stations: positions
            .into_iter()
            .zip(temps)
            .enumerate()
            .map(|(k, ((lat, lon), temperatures))| WeatherStation {
                id: format!("S{:03}", k + 1),
                lat: (lat * 1e4).round() / 1e4,
                lon: (lon * 1e4).round() / 1e4,
                temperatures,
            })
            .collect(),
    })
}
