"""PSNR/SSIM metrics and dataset reports."""
