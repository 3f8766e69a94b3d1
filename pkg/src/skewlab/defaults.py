"""Calibrated defaults for the shipped system.

Every non-obvious constant here was frozen by a dedicated calibration run;
the run parameters are recorded next to each value so it can be reproduced.
"""
import numpy as np

# base observable f = sin(2 pi x1) under the cat map: sigma^2(f) is exactly 1/2
# (the frequency (1,0) never returns to +-(1,0) under transpose iteration, so
# every cross term in the Green-Kubo sum vanishes by Fourier orthogonality)
SIGMA2_BASE = 0.5
SIGMA_BASE = np.sqrt(SIGMA2_BASE)

# fiber bump window (natural scale: support well inside one fundamental domain,
# wide angular window; amplitude sized for signal-to-noise of the scans)
BUMP_PLANE_WIDTH = 1.6
BUMP_ANGLE_WIDTH = 2.9
BUMP_AMPLITUDE = 2.6

# mean_offset: Monte Carlo calibration pass, 10^6 Haar samples
# (oracle: analytic_mean() quadrature = 0.418018885, z = 0.19)
BUMP_MEAN_OFFSET = 0.418141702
BUMP_MEAN_STDERR = 6.46e-4
BUMP_CALIBRATION_SEED = 20260818
BUMP_CALIBRATION_SAMPLES = 1_000_000

# flow-integrated autocovariance of the calibrated bump:
# rho quadrature at 4x10^6 samples, b_max = 14, step = 0.25, seed 13
SIGMA2_FIBER = 0.6492
SIGMA2_FIBER_ERR = 0.0020

# variance-growth / limit-law constant (8/3) Sigma^2 / (sqrt(2 pi) sigma)
def ks_variance_target(sigma2_fiber=SIGMA2_FIBER, sigma2_base=SIGMA2_BASE):
    return (8.0 / 3.0) * sigma2_fiber / (np.sqrt(2.0 * np.pi) * np.sqrt(sigma2_base))


KS_VARIANCE_TARGET = ks_variance_target()

# Kesten-Spitzer limit sampler resolution: bias at this (dt, dx) measured at
# -1.2% +- 0.5% of the target variance; refining dt alone does not move it,
# dx = 0.01 gives -1.5%, dx = 0.04 gives -4.5%
KS_DT = 2.0 ** -12
KS_DX = 0.02

# quadrature defaults for Sigma^2
SIGMA2_B_MAX = 30.0
SIGMA2_STEP = 0.25

# homoclinic non-degeneracy sum for f = sin(2 pi x1), K >= 30
HOMOCLINIC_SUM = 0.140937291305749
