//! Synthetic instance generators and data ingestion.

mod chain;
mod image;
mod knn;
mod two_cluster;
mod weather;

pub use chain::{gen_chain_signal, ChainInstance, ChainSpec, ChainTopology};
pub use image::{
    encode_ppm, image_to_instance, mask_image, parse_ppm, read_ppm, red_square_image, write_mask_ppm, write_ppm, ImageInstance, RgbImage,
    SyntheticImage,
};
pub use knn::knn_graph;
pub use two_cluster::{gen_two_cluster, TwoClusterInstance, TwoClusterSpec};
pub use weather::{parse_weather_csv, synthetic_weather, weather_instance, WeatherInstance, WeatherStation, WeatherTable};

use rand::Rng;
use rand_distr::StandardNormal;

/// Uniform sample from the unit sphere in `dim` dimensions.
pub(crate) fn unit_sphere<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::signal::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
