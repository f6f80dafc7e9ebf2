"""Image I/O and synthetic phantoms."""
