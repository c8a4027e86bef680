"""Image quality and transmission evaluation metrics."""
