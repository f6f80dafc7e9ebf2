"""Training loop, loss and telemetry."""
