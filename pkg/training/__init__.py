"""Semi-supervised training framework."""
