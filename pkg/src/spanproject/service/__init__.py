"""HTTP service wrapping the projection core."""
