//! Silhouette cleanup, region-of-interest cropping and structural similarity.

pub mod morph;
pub mod roi;
pub mod ssim;

pub use morph::{
    close, complement, dilate, erode, largest_component, open, silhouette, SilhouetteConfig, StructuringElement,
};
pub use roi::{bounding_box, resize_bilinear, roi_resize, DEFAULT_ROI_SIDE};
pub use ssim::{ssim, SsimParams, SsimResult};
