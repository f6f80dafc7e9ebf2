"""
MRI Acquisition Package

- fourier: unitary DFT, measurement operator F = P*DFT, k-space files
- masks: k-space sampling masks and mask files
"""
