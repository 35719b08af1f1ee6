//! Radar processing: GLRT delay-Doppler maps, CA-CFAR, angle estimation and
//! a conventional 2-D FFT benchmark.

pub mod angle;
pub mod cfar;
pub mod detector;
pub mod fft_benchmark;
pub mod grid;
pub mod glrt;

pub use glrt::{glrt_map, glrt_statistic, DdMap, GlrtProcessor, SpatialSnapshot};
pub use grid::{DdGrid, GridSpec};
pub use cfar::{cfar_detect, cfar_detect_1d, cfar_scale, CfarConfig, CfarDetection, CfarOutcome};
pub use angle::{angle_axis, angle_spectrum, default_angle_axis, subtract_and_refine, AngleConfig, AngleEstimate};
pub use detector::{detect_targets, Detection, DetectionReport, DetectorConfig};
pub use fft_benchmark::{fft_benchmark, fft_grid, fft_images, FftBenchmarkConfig, FftFilter, FftImages};
