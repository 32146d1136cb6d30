//! Single-channel image planes and the image operations the pipeline relies
//! on: bicubic resampling, BT.601 YCbCr conversion, PSNR/SSIM and file I/O.

mod color;
mod io;
mod metrics;
mod plane;
mod resize;

pub use color::{rgb_to_ycbcr, ycbcr_to_rgb, YCbCr};
pub use io::{read_image, read_luminance, write_gray, write_pnm_ascii, write_rgb, DecodedImage};
pub use metrics::{psnr, quality, quantize_u8, ssim, QualityScore, SSIM_WINDOW};
pub use plane::{crop_border, ImagePlane, RgbImage};
pub use resize::{bicubic_resize, cubic_kernel, BICUBIC_A};
